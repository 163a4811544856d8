//! Points of the ℓ₁ simplex Δ(S) and partitions of unity into it.
//!
//! Vertex sets are never materialized; a point stores only its support, and
//! a partition of unity only the vertices it actually uses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::metric::{FiniteMetricSpace, MetricError, PointSubset};

/// Every stored simplex point sums to 1 within this tolerance.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Convex combinations renormalize only when the sum drifts further than this.
pub const RENORMALIZE_TRIGGER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimplexError {
    #[error("simplex point has empty support")]
    EmptySupport,
    #[error("vertex {vertex} has invalid weight {weight}")]
    BadWeight { vertex: VertexId, weight: f64 },
    #[error("vertex {0} appears twice in one simplex point")]
    DuplicateVertex(VertexId),
    #[error("weights sum to {0}, not 1")]
    BadSum(f64),
    #[error("malformed vertex id {0:?}; expected \"namespace:index\"")]
    BadVertexId(String),
    #[error("map is not a retraction: it sends {vertex}, a point of its image, to {image}")]
    NotARetraction { vertex: VertexId, image: VertexId },
    #[error("support of point {point} uses vertex {vertex}, which the retraction does not cover")]
    SupportEscapes { point: usize, vertex: VertexId },
    #[error("point {0} is not covered")]
    NotACover(usize),
    #[error("cover member {0} is empty")]
    EmptyMember(usize),
    #[error("point {point} lies outside the host space of {n} points")]
    UnknownPoint { point: usize, n: usize },
    #[error("partition of unity is not defined at point {0}")]
    Undefined(usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A vertex of Δ(S). Namespace 0 holds user-supplied vertices; every
/// extension step mints its vertices in a namespace of its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId {
    pub namespace: u64,
    pub index: u64,
}

impl VertexId {
    pub const fn new(namespace: u64, index: u64) -> Self {
        VertexId { namespace, index }
    }

    /// A user-supplied vertex.
    pub const fn user(index: u64) -> Self {
        VertexId { namespace: 0, index }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.namespace, self.index)
    }
}

impl FromStr for VertexId {
    type Err = SimplexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SimplexError::BadVertexId(s.to_string());
        let (ns, idx) = s.split_once(':').ok_or_else(bad)?;
        Ok(VertexId { namespace: ns.parse().map_err(|_| bad())?, index: idx.parse().map_err(|_| bad())? })
    }
}

impl Serialize for VertexId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Source of fresh vertex namespaces. Safe to share across threads.
#[derive(Debug)]
pub struct VertexMint {
    next: AtomicU64,
}

impl Default for VertexMint {
    fn default() -> Self {
        Self::new()
    }
}

impl VertexMint {
    pub fn new() -> Self {
        VertexMint { next: AtomicU64::new(1) }
    }

    /// A mint whose namespaces are all above those used in `f`.
    pub fn after(f: &PartitionOfUnity) -> Self {
        let top = f.carrier_vertices().iter().map(|v| v.namespace).max().unwrap_or(0);
        VertexMint { next: AtomicU64::new(top + 1) }
    }

    pub fn namespace(&self) -> u64 {
        self.next.fetch_add(1, Ordering::Relaxed)
    }

    /// Index 0 of a brand-new namespace.
    pub fn vertex(&self) -> VertexId {
        VertexId::new(self.namespace(), 0)
    }
}

/// Finite-support point of Δ(S): strictly positive weights summing to 1,
/// stored sorted by vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(Vec<(VertexId, f64)>);

impl SimplexPoint {
    pub fn new(mut weights: Vec<(VertexId, f64)>) -> Result<Self, SimplexError> {
        if weights.is_empty() {
            return Err(SimplexError::EmptySupport);
        }
        weights.sort_by_key(|a| a.0);
        for w in weights.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SimplexError::DuplicateVertex(w[0].0));
            }
        }
        for &(vertex, weight) in &weights {
            if !(weight > 0.0 && weight <= 1.0 + SUM_TOLERANCE) {
                return Err(SimplexError::BadWeight { vertex, weight });
            }
        }
        let sum: f64 = weights.iter().map(|w| w.1).sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SimplexError::BadSum(sum));
        }
        Ok(SimplexPoint(weights))
    }

    /// The vertex `v` itself.
    pub fn vertex(v: VertexId) -> Self {
        SimplexPoint(vec![(v, 1.0)])
    }

    /// Uniform weights over `vertices` (sorted, duplicates ignored).
    pub fn barycenter(vertices: impl IntoIterator<Item = VertexId>) -> Result<Self, SimplexError> {
        let set: BTreeSet<VertexId> = vertices.into_iter().collect();
        if set.is_empty() {
            return Err(SimplexError::EmptySupport);
        }
        let w = 1.0 / set.len() as f64;
        Ok(SimplexPoint(set.into_iter().map(|v| (v, w)).collect()))
    }

    pub fn weights(&self) -> &[(VertexId, f64)] {
        &self.0
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.0.iter().map(|w| w.0)
    }

    pub fn support_len(&self) -> usize {
        self.0.len()
    }

    pub fn weight(&self, v: VertexId) -> f64 {
        self.0.binary_search_by(|w| w.0.cmp(&v)).map(|i| self.0[i].1).unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().map(|w| w.1).sum()
    }

    /// Builds from raw weights: drops exact zeros and renormalizes if the sum
    /// drifted beyond [`RENORMALIZE_TRIGGER`].
    fn settle(mut weights: Vec<(VertexId, f64)>) -> Self {
        weights.retain(|w| w.1 != 0.0);
        let sum: f64 = weights.iter().map(|w| w.1).sum();
        if (sum - 1.0).abs() > RENORMALIZE_TRIGGER {
            for w in &mut weights {
                w.1 /= sum;
            }
        }
        debug_assert!(!weights.is_empty());
        debug_assert!((weights.iter().map(|w| w.1).sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
        SimplexPoint(weights)
    }

    /// Image under the simplicial map induced by `map`: weights landing on
    /// the same vertex are added.
    pub fn merge_through(&self, map: impl Fn(VertexId) -> VertexId) -> Self {
        let mut merged: BTreeMap<VertexId, f64> = BTreeMap::new();
        for &(v, w) in &self.0 {
            *merged.entry(map(v)).or_insert(0.0) += w;
        }
        SimplexPoint(merged.into_iter().collect())
    }

    /// Same point with every vertex renamed through `rename`.
    pub fn relabel(&self, rename: impl Fn(VertexId) -> VertexId) -> Self {
        let mut w: Vec<_> = self.0.iter().map(|&(v, x)| (rename(v), x)).collect();
        w.sort_by_key(|a| a.0);
        SimplexPoint(w)
    }
}

/// ℓ₁ distance between two simplex points; always in `[0, 2]`.
pub fn l1_distance(u: &SimplexPoint, v: &SimplexPoint) -> f64 {
    let (a, b) = (&u.0, &v.0);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                total += a[i].1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                total += b[j].1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                total += (a[i].1 - b[j].1).abs();
                i += 1;
                j += 1;
            }
        }
    }
    total += a[i..].iter().map(|w| w.1).sum::<f64>();
    total += b[j..].iter().map(|w| w.1).sum::<f64>();
    total
}

/// `t·u + (1 − t)·v`. Returns `v` (resp. `u`) bit-for-bit at `t = 0` (resp. 1).
pub fn convex_combine(t: f64, u: &SimplexPoint, v: &SimplexPoint) -> SimplexPoint {
    if t <= 0.0 {
        return v.clone();
    }
    if t >= 1.0 {
        return u.clone();
    }
    let s = 1.0 - t;
    let (a, b) = (&u.0, &v.0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i >= a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push((a[i].0, t * a[i].1));
            i += 1;
        } else if take_b {
            out.push((b[j].0, s * b[j].1));
            j += 1;
        } else {
            out.push((a[i].0, t * a[i].1 + s * b[j].1));
            i += 1;
            j += 1;
        }
    }
    SimplexPoint::settle(out)
}

/// A map from a subset of a host space into Δ(S).
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    entries: Vec<Option<SimplexPoint>>,
}

/// Per-vertex diameters of star preimages.
#[derive(Debug, Clone, PartialEq)]
pub struct StarDiameters {
    pub per_vertex: BTreeMap<VertexId, f64>,
    /// The tight coboundedness bound; 0 for an empty partition.
    pub max: f64,
    /// Smallest vertex attaining `max`.
    pub worst: Option<VertexId>,
}

impl PartitionOfUnity {
    /// The partition with empty domain on a host of `n` points.
    pub fn empty(n: usize) -> Self {
        PartitionOfUnity { entries: vec![None; n] }
    }

    pub fn constant(n: usize, domain: &PointSubset, v: VertexId) -> Self {
        let mut f = Self::empty(n);
        for x in domain.iter() {
            f.entries[x] = Some(SimplexPoint::vertex(v));
        }
        f
    }

    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, SimplexPoint)>) -> Result<Self, SimplexError> {
        let mut f = Self::empty(n);
        for (x, p) in entries {
            if x >= n {
                return Err(SimplexError::UnknownPoint { point: x, n });
            }
            f.entries[x] = Some(p);
        }
        Ok(f)
    }

    /// Size of the host space.
    pub fn host_len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, x: usize) -> Option<&SimplexPoint> {
        self.entries.get(x).and_then(Option::as_ref)
    }

    pub fn at(&self, x: usize) -> Result<&SimplexPoint, SimplexError> {
        self.get(x).ok_or(SimplexError::Undefined(x))
    }

    pub fn set(&mut self, x: usize, p: SimplexPoint) {
        self.entries[x] = Some(p);
    }

    pub fn is_defined(&self, x: usize) -> bool {
        self.get(x).is_some()
    }

    pub fn domain(&self) -> PointSubset {
        PointSubset::new(self.iter().map(|(x, _)| x).collect())
    }

    pub fn domain_len(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &SimplexPoint)> + '_ {
        self.entries.iter().enumerate().filter_map(|(x, e)| e.as_ref().map(|p| (x, p)))
    }

    pub fn restrict(&self, subset: &PointSubset) -> Self {
        let mut out = Self::empty(self.host_len());
        for x in subset.iter() {
            out.entries[x] = self.entries[x].clone();
        }
        out
    }

    /// Vertices carrying positive weight somewhere on the domain.
    pub fn carrier_vertices(&self) -> BTreeSet<VertexId> {
        self.iter().flat_map(|(_, p)| p.support()).collect()
    }

    /// Carrier of the restriction to `subset`.
    pub fn carrier_on(&self, subset: &PointSubset) -> BTreeSet<VertexId> {
        subset.iter().filter_map(|x| self.get(x)).flat_map(|p| p.support()).collect()
    }

    /// `f⁻¹(st(v))` for every carrier vertex, as ascending point lists.
    pub fn star_preimages(&self) -> BTreeMap<VertexId, Vec<usize>> {
        let mut stars: BTreeMap<VertexId, Vec<usize>> = BTreeMap::new();
        for (x, p) in self.iter() {
            for v in p.support() {
                stars.entry(v).or_default().push(x);
            }
        }
        stars
    }

    pub fn star_preimage_diameters(&self, space: &FiniteMetricSpace) -> StarDiameters {
        let stars: Vec<(VertexId, Vec<usize>)> = self.star_preimages().into_iter().collect();
        let diams: Vec<(VertexId, f64)> = stars
            .par_iter()
            .map(|(v, pts)| {
                let d = pts
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| pts[i + 1..].iter().map(|&y| space.distance(x, y)).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                (*v, d)
            })
            .collect();
        let mut max = 0.0;
        let mut worst = None;
        for &(v, d) in &diams {
            if worst.is_none() || d > max {
                max = d;
                worst = Some(v);
            }
        }
        StarDiameters { per_vertex: diams.into_iter().collect(), max, worst }
    }

    /// Re-addresses weights on `region` through `retraction` (a map S₂ → S₁
    /// fixing its image), summing weights that land on the same vertex.
    pub fn simplicial_retraction(
        &self,
        retraction: &BTreeMap<VertexId, VertexId>,
        region: &PointSubset,
    ) -> Result<Self, SimplexError> {
        for &image in retraction.values() {
            match retraction.get(&image) {
                Some(&back) if back == image => {}
                Some(&back) => return Err(SimplexError::NotARetraction { vertex: image, image: back }),
                None => return Err(SimplexError::NotARetraction { vertex: image, image }),
            }
        }
        let mut out = self.clone();
        for x in region.iter() {
            let Some(p) = self.get(x) else { continue };
            if let Some(&(vertex, _)) = p.weights().iter().find(|w| !retraction.contains_key(&w.0)) {
                return Err(SimplexError::SupportEscapes { point: x, vertex });
            }
            out.entries[x] = Some(p.merge_through(|v| retraction[&v]));
        }
        Ok(out)
    }

    /// Keeps the `n + 1` largest weights of every point (smaller vertex wins
    /// ties) and renormalizes, landing in the n-skeleton. Points already in
    /// the n-skeleton are untouched.
    pub fn skeleton_truncate(&self, n: usize) -> Self {
        let keep = n + 1;
        let mut out = self.clone();
        for e in out.entries.iter_mut().flatten() {
            if e.0.len() <= keep {
                continue;
            }
            let mut ranked = e.0.clone();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.truncate(keep);
            let total: f64 = ranked.iter().map(|w| w.1).sum();
            let mut kept: Vec<_> = ranked.into_iter().map(|(v, w)| (v, w / total)).collect();
            kept.sort_by_key(|a| a.0);
            *e = SimplexPoint(kept);
        }
        out
    }

    /// Moves every vertex into a fresh namespace (one per call), preserving
    /// the vertex order. Returns the renamed partition and the renaming.
    pub fn renamespace(&self, mint: &VertexMint) -> (Self, BTreeMap<VertexId, VertexId>) {
        let ns = mint.namespace();
        let rename: BTreeMap<VertexId, VertexId> = self
            .carrier_vertices()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, VertexId::new(ns, i as u64)))
            .collect();
        let mut out = self.clone();
        for e in out.entries.iter_mut().flatten() {
            *e = e.relabel(|v| rename[&v]);
        }
        (out, rename)
    }

    /// Checks every stored point against the simplex invariants.
    pub fn validate(&self) -> Result<(), SimplexError> {
        for (_, p) in self.iter() {
            SimplexPoint::new(p.0.clone())?;
        }
        Ok(())
    }
}

/// Barycentric partition of unity of a cover: member `i` becomes vertex
/// `0:i`, and each point is spread uniformly over the members containing it.
pub fn barycentric_pou(space: &FiniteMetricSpace, cover: &[PointSubset]) -> Result<PartitionOfUnity, SimplexError> {
    let n = space.len();
    let mut members_of: Vec<Vec<VertexId>> = vec![Vec::new(); n];
    for (i, member) in cover.iter().enumerate() {
        if member.is_empty() {
            return Err(SimplexError::EmptyMember(i));
        }
        space.check_subset(member)?;
        for x in member.iter() {
            members_of[x].push(VertexId::user(i as u64));
        }
    }
    let mut f = PartitionOfUnity::empty(n);
    for (x, vs) in members_of.into_iter().enumerate() {
        if vs.is_empty() {
            return Err(SimplexError::NotACover(x));
        }
        f.entries[x] = Some(SimplexPoint::barycenter(vs)?);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u64) -> VertexId {
        VertexId::user(i)
    }

    fn pt(w: &[(u64, f64)]) -> SimplexPoint {
        SimplexPoint::new(w.iter().map(|&(i, x)| (v(i), x)).collect()).unwrap()
    }

    fn path(n: usize) -> FiniteMetricSpace {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        FiniteMetricSpace::from_graph(n, &edges).unwrap()
    }

    #[test]
    fn simplex_point_invariants() {
        assert_eq!(SimplexPoint::new(vec![]), Err(SimplexError::EmptySupport));
        assert!(matches!(SimplexPoint::new(vec![(v(0), 0.5)]), Err(SimplexError::BadSum(_))));
        assert!(matches!(
            SimplexPoint::new(vec![(v(0), 1.5), (v(1), -0.5)]),
            Err(SimplexError::BadWeight { .. })
        ));
        assert!(matches!(
            SimplexPoint::new(vec![(v(0), 0.5), (v(0), 0.5)]),
            Err(SimplexError::DuplicateVertex(_))
        ));
        assert_eq!("3:14".parse::<VertexId>().unwrap(), VertexId::new(3, 14));
        assert!("3-14".parse::<VertexId>().is_err());
    }

    #[test]
    fn l1_examples() {
        let a = SimplexPoint::vertex(v(0));
        let b = SimplexPoint::vertex(v(1));
        assert_eq!(l1_distance(&a, &a), 0.0);
        assert_eq!(l1_distance(&a, &b), 2.0);
        assert_eq!(l1_distance(&pt(&[(0, 0.5), (1, 0.5)]), &a), 1.0);
    }

    #[test]
    fn convex_combine_examples() {
        let u = pt(&[(0, 0.3), (2, 0.7)]);
        let w = pt(&[(1, 0.6), (2, 0.4)]);
        assert_eq!(convex_combine(0.0, &u, &w), w);
        assert_eq!(convex_combine(1.0, &u, &w), u);
        let mid = convex_combine(0.5, &SimplexPoint::vertex(v(0)), &SimplexPoint::vertex(v(1)));
        assert_eq!(mid, pt(&[(0, 0.5), (1, 0.5)]));
    }

    #[test]
    fn carrier_examples() {
        let n = 4;
        let all = PointSubset::all(n);
        assert_eq!(PartitionOfUnity::constant(n, &all, v(7)).carrier_vertices(), [v(7)].into());
        assert!(PartitionOfUnity::empty(n).carrier_vertices().is_empty());
        let f = PartitionOfUnity::from_entries(n, [(0, SimplexPoint::vertex(v(0))), (1, pt(&[(0, 0.5), (1, 0.5)]))]).unwrap();
        assert_eq!(f.carrier_vertices(), [v(0), v(1)].into());
    }

    #[test]
    fn star_diameter_examples() {
        let p = path(10);
        let c = PartitionOfUnity::constant(10, &p.all_points(), v(0));
        let d = c.star_preimage_diameters(&p);
        assert_eq!(d.max, 9.0);
        assert_eq!(d.per_vertex[&v(0)], 9.0);

        // Oracle: star preimage of each member vertex is the member itself.
        let cover = [PointSubset::range(0, 5), PointSubset::range(5, 10)];
        let f = barycentric_pou(&p, &cover).unwrap();
        let d = f.star_preimage_diameters(&p);
        for (i, member) in cover.iter().enumerate() {
            let oracle = member.iter().flat_map(|x| member.iter().map(move |y| (x as f64 - y as f64).abs())).fold(0.0, f64::max);
            assert_eq!(d.per_vertex[&v(i as u64)], oracle);
        }
        assert_eq!(d.max, 4.0);

        let single = PartitionOfUnity::from_entries(10, [(3, pt(&[(0, 0.5), (1, 0.5)]))]).unwrap();
        assert!(single.star_preimage_diameters(&p).per_vertex.values().all(|&d| d == 0.0));
    }

    #[test]
    fn simplicial_retraction_examples() {
        let region = PointSubset::new(vec![0]);
        let f = PartitionOfUnity::from_entries(1, [(0, pt(&[(0, 0.5), (1, 0.5)]))]).unwrap();
        let id: BTreeMap<_, _> = [(v(0), v(0)), (v(1), v(1))].into();
        assert_eq!(f.simplicial_retraction(&id, &region).unwrap(), f);

        let merge: BTreeMap<_, _> = [(v(0), v(0)), (v(1), v(0))].into();
        assert_eq!(f.simplicial_retraction(&merge, &region).unwrap().get(0).unwrap(), &SimplexPoint::vertex(v(0)));

        let third = 1.0 / 3.0;
        let g = PartitionOfUnity::from_entries(1, [(0, pt(&[(0, third), (1, third), (2, 1.0 - 2.0 * third)]))]).unwrap();
        let r: BTreeMap<_, _> = [(v(0), v(0)), (v(1), v(0)), (v(2), v(2))].into();
        let out = g.simplicial_retraction(&r, &region).unwrap();
        let p = out.get(0).unwrap();
        assert!((p.weight(v(0)) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.weight(v(2)) - third).abs() < 1e-15);
        assert_eq!(p.support_len(), 2);

        let bad: BTreeMap<_, _> = [(v(0), v(1)), (v(1), v(0))].into();
        assert!(matches!(f.simplicial_retraction(&bad, &region), Err(SimplexError::NotARetraction { .. })));
        let partial: BTreeMap<_, _> = [(v(0), v(0))].into();
        assert_eq!(
            f.simplicial_retraction(&partial, &region),
            Err(SimplexError::SupportEscapes { point: 0, vertex: v(1) })
        );
    }

    #[test]
    fn skeleton_truncate_examples() {
        let f = PartitionOfUnity::from_entries(2, [(0, pt(&[(0, 0.5), (1, 0.3), (2, 0.2)])), (1, pt(&[(0, 0.5), (1, 0.5)]))]).unwrap();
        assert_eq!(f.skeleton_truncate(5), f);
        let t = f.skeleton_truncate(1);
        // Top two of {0.5, 0.3, 0.2}, renormalized by 0.8.
        let p = t.get(0).unwrap();
        assert!((p.weight(v(0)) - 0.625).abs() < 1e-15);
        assert!((p.weight(v(1)) - 0.375).abs() < 1e-15);
        assert_eq!(t.get(1), f.get(1));
        let z = f.skeleton_truncate(0);
        assert_eq!(z.get(0).unwrap(), &SimplexPoint::vertex(v(0)));
        assert_eq!(z.get(1).unwrap(), &SimplexPoint::vertex(v(0)));
    }

    #[test]
    fn barycentric_examples() {
        let p = path(10);
        let singletons: Vec<_> = (0..10).map(|x| PointSubset::new(vec![x])).collect();
        let f = barycentric_pou(&p, &singletons).unwrap();
        assert!((0..10).all(|x| f.get(x).unwrap() == &SimplexPoint::vertex(v(x as u64))));

        let cover = [PointSubset::range(0, 6), PointSubset::range(4, 10)];
        let f = barycentric_pou(&p, &cover).unwrap();
        assert_eq!(f.get(4).unwrap(), &pt(&[(0, 0.5), (1, 0.5)]));
        assert_eq!(f.get(0).unwrap(), &SimplexPoint::vertex(v(0)));
        let stars = f.star_preimages();
        assert_eq!(stars[&v(0)], cover[0].as_slice());
        assert_eq!(stars[&v(1)], cover[1].as_slice());

        let holes = [PointSubset::range(0, 7), PointSubset::range(8, 10)];
        assert_eq!(barycentric_pou(&p, &holes), Err(SimplexError::NotACover(7)));
    }

    #[test]
    fn renamespace_is_fresh() {
        let mint = VertexMint::new();
        let f = PartitionOfUnity::from_entries(2, [(0, pt(&[(0, 0.5), (4, 0.5)])), (1, SimplexPoint::vertex(v(4)))]).unwrap();
        let (g, rename) = f.renamespace(&mint);
        assert_eq!(rename.len(), 2);
        assert!(g.carrier_vertices().is_disjoint(&f.carrier_vertices()));
        assert_eq!(l1_distance(g.get(0).unwrap(), g.get(1).unwrap()), l1_distance(f.get(0).unwrap(), f.get(1).unwrap()));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn simplex_point() -> impl Strategy<Value = SimplexPoint> {
            prop::collection::btree_map(0u64..8, 0.01f64..1.0, 1..6).prop_map(|m| {
                let total: f64 = m.values().sum();
                SimplexPoint::settle(m.into_iter().map(|(i, w)| (VertexId::user(i), w / total)).collect())
            })
        }

        proptest! {
            #[test]
            fn l1_is_a_metric(a in simplex_point(), b in simplex_point(), c in simplex_point()) {
                let ab = l1_distance(&a, &b);
                prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
                prop_assert_eq!(ab, l1_distance(&b, &a));
                prop_assert!(ab <= l1_distance(&a, &c) + l1_distance(&c, &b) + 1e-12);
                prop_assert_eq!(l1_distance(&a, &a), 0.0);
            }

            #[test]
            fn convex_combination_stays_in_simplex(t in 0.0f64..=1.0, a in simplex_point(), b in simplex_point()) {
                let c = convex_combine(t, &a, &b);
                prop_assert!((c.sum() - 1.0).abs() <= SUM_TOLERANCE);
                prop_assert!(SimplexPoint::new(c.weights().to_vec()).is_ok());
                // Along the segment, distance to the endpoints is linear in t.
                prop_assert!((l1_distance(&c, &b) - t * l1_distance(&a, &b)).abs() < 1e-9);
            }

            #[test]
            fn retraction_contracts(a in simplex_point(), b in simplex_point(), targets in prop::collection::vec(0u64..3, 8)) {
                // Vertices 0..3 are fixed; 3..8 fold onto them.
                let r: BTreeMap<VertexId, VertexId> = (0u64..8)
                    .map(|i| (VertexId::user(i), VertexId::user(if i < 3 { i } else { targets[i as usize] })))
                    .collect();
                let f = PartitionOfUnity::from_entries(2, [(0, a), (1, b)]).unwrap();
                let g = f.simplicial_retraction(&r, &PointSubset::all(2)).unwrap();
                g.validate().unwrap();
                prop_assert!(l1_distance(g.get(0).unwrap(), g.get(1).unwrap())
                    <= l1_distance(f.get(0).unwrap(), f.get(1).unwrap()) + 1e-12);
            }

            #[test]
            fn skeleton_truncate_is_idempotent(a in simplex_point(), n in 0usize..4) {
                let f = PartitionOfUnity::from_entries(1, [(0, a.clone())]).unwrap();
                let once = f.skeleton_truncate(n);
                let p = once.get(0).unwrap();
                prop_assert!(p.support_len() <= n + 1);
                prop_assert!(p.support().all(|v| a.weight(v) > 0.0));
                prop_assert!((p.sum() - 1.0).abs() <= SUM_TOLERANCE);
                prop_assert_eq!(once.skeleton_truncate(n), once);
            }
        }
    }
}
