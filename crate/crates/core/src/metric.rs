//! Finite metric spaces and the set-level primitives every construction
//! consumes: distance to a set, open balls around sets, diameters and the
//! nearest-point retraction.
//!
//! A space is immutable once loaded. Spaces with at most [`TABLE_LIMIT`]
//! points keep a full distance table; larger graph-backed spaces answer
//! queries with (radius-limited) Dijkstra searches on demand.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when validating the triangle inequality.
pub const METRIC_TOLERANCE: f64 = 1e-9;
/// Largest space for which the full distance table is materialized.
pub const TABLE_LIMIT: usize = 4096;
/// Largest space for which the triangle inequality is checked on every triple.
pub const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 2000;
/// Seed of the triple sampler used above [`EXHAUSTIVE_TRIANGLE_LIMIT`].
pub const TRIANGLE_SAMPLE_SEED: u64 = 0x7472_6961_6e67_6c65;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("a metric space needs at least one point")]
    EmptySpace,
    #[error("distance matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("non-finite distance d({x},{y})")]
    NonFinite { x: usize, y: usize },
    #[error("nonzero self-distance d({x},{x}) = {d}")]
    NonZeroDiagonal { x: usize, d: f64 },
    #[error("asymmetric distances: d({x},{y}) = {dxy} but d({y},{x}) = {dyx}")]
    Asymmetry { x: usize, y: usize, dxy: f64, dyx: f64 },
    #[error("negative distance d({x},{y}) = {d}")]
    NegativeDistance { x: usize, y: usize, d: f64 },
    #[error("distinct points {x} and {y} are at distance 0")]
    ZeroOffDiagonal { x: usize, y: usize },
    #[error("triangle inequality fails: d({x},{z}) = {dxz} > d({x},{y}) + d({y},{z}) = {dxy} + {dyz}")]
    TriangleViolation { x: usize, y: usize, z: usize, dxz: f64, dxy: f64, dyz: f64 },
    #[error("graph is disconnected: point {representative} is not reachable from point 0")]
    Disconnected { representative: usize },
    #[error("edge ({u},{v}) references a point outside 0..{n}")]
    BadEdge { u: usize, v: usize, n: usize },
    #[error("edge ({u},{v}) has invalid weight {w}")]
    BadWeight { u: usize, v: usize, w: f64 },
    #[error("point {point} has {arity} coordinates, expected {expected}")]
    MixedArity { point: usize, arity: usize, expected: usize },
    #[error("norm parameter p = {0} is not in [1, inf]")]
    BadNorm(f64),
    #[error("operation requires a nonempty set")]
    EmptySet,
    #[error("point id {id} is outside 0..{n}")]
    InvalidPoint { id: usize, n: usize },
}

/// The ℓp norm parameter of a point-cloud space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    P(f64),
    Infinity,
}

impl Norm {
    pub fn new(p: f64) -> Result<Self, MetricError> {
        if p.is_nan() || p < 1.0 {
            Err(MetricError::BadNorm(p))
        } else if p.is_infinite() {
            Ok(Norm::Infinity)
        } else {
            Ok(Norm::P(p))
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match *self {
            Norm::Infinity => diffs.fold(0.0, f64::max),
            Norm::P(1.0) => diffs.sum(),
            Norm::P(2.0) => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::P(p) => diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::P(p) => write!(f, "{p}"),
            Norm::Infinity => f.write_str("inf"),
        }
    }
}

/// Where the distances of a space come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Matrix,
    Points(Norm),
    Graph,
}

#[derive(Debug, Clone)]
enum Backing {
    Matrix,
    Points { coords: Vec<Vec<f64>>, norm: Norm },
    Graph { adjacency: Vec<Vec<(usize, f64)>> },
}

/// Sorted, duplicate-free set of point ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct PointSubset(Vec<usize>);

impl From<Vec<usize>> for PointSubset {
    fn from(ids: Vec<usize>) -> Self {
        Self::new(ids)
    }
}

impl From<PointSubset> for Vec<usize> {
    fn from(s: PointSubset) -> Self {
        s.0
    }
}

impl FromIterator<usize> for PointSubset {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl PointSubset {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        PointSubset(ids)
    }

    /// Builds a subset and checks every id against a host of `n` points.
    pub fn checked(ids: Vec<usize>, n: usize) -> Result<Self, MetricError> {
        if let Some(&id) = ids.iter().find(|&&id| id >= n) {
            return Err(MetricError::InvalidPoint { id, n });
        }
        Ok(Self::new(ids))
    }

    pub fn empty() -> Self {
        PointSubset(Vec::new())
    }

    pub fn all(n: usize) -> Self {
        PointSubset((0..n).collect())
    }

    /// Half-open id range `lo..hi`.
    pub fn range(lo: usize, hi: usize) -> Self {
        PointSubset((lo..hi).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn union(&self, other: &PointSubset) -> PointSubset {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        PointSubset(out)
    }

    pub fn intersection(&self, other: &PointSubset) -> PointSubset {
        PointSubset(self.iter().filter(|&x| other.contains(x)).collect())
    }

    pub fn difference(&self, other: &PointSubset) -> PointSubset {
        PointSubset(self.iter().filter(|&x| !other.contains(x)).collect())
    }

    pub fn is_subset(&self, other: &PointSubset) -> bool {
        self.iter().all(|x| other.contains(x))
    }

    fn max_id(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

/// A retraction `p: X -> A` onto a nonempty subset.
#[derive(Debug, Clone)]
pub struct Retraction {
    target: PointSubset,
    image: Vec<usize>,
    dist: Vec<f64>,
}

impl Retraction {
    pub fn target(&self) -> &PointSubset {
        &self.target
    }

    pub fn apply(&self, x: usize) -> usize {
        self.image[x]
    }

    /// `d(x, p(x))`, which equals `dist(x, A)` for the nearest-point retraction.
    pub fn distance(&self, x: usize) -> f64 {
        self.dist[x]
    }
}

/// Whether a radius query keeps the boundary sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Closed,
}

impl Boundary {
    #[inline]
    fn admits(self, d: f64, r: f64) -> bool {
        match self {
            Boundary::Open => d < r,
            Boundary::Closed => d <= r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    n: usize,
    table: Option<Vec<f64>>,
    backing: Backing,
}

impl FiniteMetricSpace {
    /// Loads a user-supplied distance matrix and validates every metric axiom.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = rows.len();
        if n == 0 {
            return Err(MetricError::EmptySpace);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare { row, len: r.len(), expected: n });
            }
        }
        for (x, r) in rows.iter().enumerate() {
            if let Some(y) = r.iter().position(|d| !d.is_finite()) {
                return Err(MetricError::NonFinite { x, y });
            }
        }
        #[allow(clippy::needless_range_loop)]
        for x in 0..n {
            if rows[x][x] != 0.0 {
                return Err(MetricError::NonZeroDiagonal { x, d: rows[x][x] });
            }
            for y in (x + 1)..n {
                let (dxy, dyx) = (rows[x][y], rows[y][x]);
                if dxy != dyx {
                    return Err(MetricError::Asymmetry { x, y, dxy, dyx });
                }
                if dxy < 0.0 {
                    return Err(MetricError::NegativeDistance { x, y, d: dxy });
                }
                if dxy == 0.0 {
                    return Err(MetricError::ZeroOffDiagonal { x, y });
                }
            }
        }
        let table: Vec<f64> = rows.into_iter().flatten().collect();
        let space = FiniteMetricSpace { n, table: Some(table), backing: Backing::Matrix };
        space.check_triangle()?;
        Ok(space)
    }

    /// Weighted shortest-path metric of a connected graph.
    pub fn from_graph(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, MetricError> {
        if n == 0 {
            return Err(MetricError::EmptySpace);
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(MetricError::BadEdge { u, v, n });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(MetricError::BadWeight { u, v, w });
            }
            if u != v {
                adjacency[u].push((v, w));
                adjacency[v].push((u, w));
            }
        }
        for list in &mut adjacency {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        let backing = Backing::Graph { adjacency };
        let mut space = FiniteMetricSpace { n, table: None, backing };

        let from_zero = space.search(0, f64::INFINITY, Boundary::Closed);
        if from_zero.len() < n {
            let mut reached = vec![false; n];
            for &(y, _) in &from_zero {
                reached[y] = true;
            }
            let representative = reached.iter().position(|r| !r).unwrap_or(0);
            return Err(MetricError::Disconnected { representative });
        }

        if n <= TABLE_LIMIT {
            // Canonical value of d(x, y) is the search from min(x, y).
            let rows: Vec<Vec<(usize, f64)>> = (0..n)
                .into_par_iter()
                .map(|x| space.search(x, f64::INFINITY, Boundary::Closed))
                .collect();
            let mut table = vec![0.0; n * n];
            for (x, row) in rows.into_iter().enumerate() {
                for (y, d) in row {
                    if y > x {
                        table[x * n + y] = d;
                        table[y * n + x] = d;
                    }
                }
            }
            space.table = Some(table);
        }
        space.check_positive()?;
        Ok(space)
    }

    /// ℓp metric on a point cloud.
    pub fn from_points(coords: Vec<Vec<f64>>, norm: Norm) -> Result<Self, MetricError> {
        let n = coords.len();
        if n == 0 {
            return Err(MetricError::EmptySpace);
        }
        if let Norm::P(p) = norm {
            Norm::new(p)?;
        }
        let expected = coords[0].len();
        for (point, c) in coords.iter().enumerate() {
            if c.len() != expected {
                return Err(MetricError::MixedArity { point, arity: c.len(), expected });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(MetricError::NonFinite { x: point, y: point });
            }
        }
        let mut space = FiniteMetricSpace { n, table: None, backing: Backing::Points { coords, norm } };
        if n <= TABLE_LIMIT {
            let table: Vec<f64> = (0..n)
                .into_par_iter()
                .flat_map_iter(|x| {
                    let space = &space;
                    (0..n).map(move |y| space.raw_distance(x, y))
                })
                .collect();
            space.table = Some(table);
        }
        space.check_positive()?;
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn provenance(&self) -> Provenance {
        match &self.backing {
            Backing::Matrix => Provenance::Matrix,
            Backing::Points { norm, .. } => Provenance::Points(*norm),
            Backing::Graph { .. } => Provenance::Graph,
        }
    }

    pub fn has_table(&self) -> bool {
        self.table.is_some()
    }

    pub fn adjacency(&self) -> Option<&[Vec<(usize, f64)>]> {
        match &self.backing {
            Backing::Graph { adjacency } => Some(adjacency),
            _ => None,
        }
    }

    pub fn coordinates(&self) -> Option<(&[Vec<f64>], Norm)> {
        match &self.backing {
            Backing::Points { coords, norm } => Some((coords, *norm)),
            _ => None,
        }
    }

    /// Full distance matrix; only available for tabled spaces.
    pub fn table(&self) -> Option<&[f64]> {
        self.table.as_deref()
    }

    pub fn all_points(&self) -> PointSubset {
        PointSubset::all(self.n)
    }

    pub fn check_subset(&self, a: &PointSubset) -> Result<(), MetricError> {
        match a.max_id() {
            Some(id) if id >= self.n => Err(MetricError::InvalidPoint { id, n: self.n }),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        if let Some(t) = &self.table {
            return t[x * self.n + y];
        }
        self.raw_distance(x, y)
    }

    fn raw_distance(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return 0.0;
        }
        match &self.backing {
            Backing::Matrix => unreachable!("matrix spaces are always tabled"),
            Backing::Points { coords, norm } => norm.distance(&coords[x], &coords[y]),
            Backing::Graph { .. } => {
                let (s, t) = (x.min(y), x.max(y));
                self.search_until(s, t)
            }
        }
    }

    /// All distances from `x`, indexed by point id.
    pub fn row(&self, x: usize) -> Cow<'_, [f64]> {
        if let Some(t) = &self.table {
            return Cow::Borrowed(&t[x * self.n..(x + 1) * self.n]);
        }
        match &self.backing {
            Backing::Graph { .. } => {
                let mut row = vec![f64::INFINITY; self.n];
                // Rooted at x; may differ from `distance` in the last ulp for
                // y < x when weights are not exactly representable sums.
                for (y, d) in self.search(x, f64::INFINITY, Boundary::Closed) {
                    row[y] = d;
                }
                Cow::Owned(row)
            }
            _ => Cow::Owned((0..self.n).map(|y| self.raw_distance(x, y)).collect()),
        }
    }

    /// Points `y` with `d(x, y) < r` (or `<= r`), ascending by id.
    pub fn ball(&self, x: usize, r: f64, boundary: Boundary) -> Vec<(usize, f64)> {
        if let Some(t) = &self.table {
            let row = &t[x * self.n..(x + 1) * self.n];
            return row
                .iter()
                .enumerate()
                .filter(|(_, &d)| boundary.admits(d, r))
                .map(|(y, &d)| (y, d))
                .collect();
        }
        match &self.backing {
            Backing::Graph { .. } => {
                let mut hits = self.search(x, r, boundary);
                hits.sort_unstable_by_key(|h| h.0);
                hits
            }
            _ => (0..self.n)
                .map(|y| (y, self.raw_distance(x, y)))
                .filter(|&(_, d)| boundary.admits(d, r))
                .collect(),
        }
    }

    /// Radius-limited shortest-path search from `x` on the underlying graph,
    /// regardless of whether a table is present. Returns the points `y > x`
    /// admitted by the radius, with their canonical distances.
    ///
    /// `None` for spaces without a graph.
    pub fn graph_ball_forward(&self, x: usize, r: f64, boundary: Boundary) -> Option<Vec<(usize, f64)>> {
        self.adjacency()?;
        let mut hits: Vec<(usize, f64)> =
            self.search(x, r, boundary).into_iter().filter(|&(y, _)| y > x).collect();
        hits.sort_unstable_by_key(|h| h.0);
        Some(hits)
    }

    fn search(&self, source: usize, r: f64, boundary: Boundary) -> Vec<(usize, f64)> {
        let Backing::Graph { adjacency } = &self.backing else {
            return self.ball(source, r, boundary);
        };
        let mut dist = vec![f64::INFINITY; self.n];
        let mut done = vec![false; self.n];
        let mut heap = BinaryHeap::new();
        let mut out = Vec::new();
        dist[source] = 0.0;
        heap.push(HeapItem { d: 0.0, node: source, tag: source });
        while let Some(HeapItem { d, node, .. }) = heap.pop() {
            if done[node] {
                continue;
            }
            if !boundary.admits(d, r) {
                break;
            }
            done[node] = true;
            out.push((node, d));
            for &(next, w) in &adjacency[node] {
                let nd = d + w;
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(HeapItem { d: nd, node: next, tag: next });
                }
            }
        }
        out
    }

    fn search_until(&self, source: usize, target: usize) -> f64 {
        let Backing::Graph { adjacency } = &self.backing else {
            unreachable!()
        };
        let mut dist = vec![f64::INFINITY; self.n];
        let mut done = vec![false; self.n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapItem { d: 0.0, node: source, tag: source });
        while let Some(HeapItem { d, node, .. }) = heap.pop() {
            if done[node] {
                continue;
            }
            if node == target {
                return d;
            }
            done[node] = true;
            for &(next, w) in &adjacency[node] {
                let nd = d + w;
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(HeapItem { d: nd, node: next, tag: next });
                }
            }
        }
        f64::INFINITY
    }

    /// `dist(x, A)`; zero exactly when `x ∈ A`.
    pub fn dist_to_set(&self, x: usize, a: &PointSubset) -> Result<f64, MetricError> {
        if a.is_empty() {
            return Err(MetricError::EmptySet);
        }
        self.check_subset(a)?;
        Ok(a.iter().map(|y| self.distance(x, y)).fold(f64::INFINITY, f64::min))
    }

    /// Nearest point of `A` (smallest id on ties) and its distance, for every
    /// point of the space.
    pub fn nearest_all(&self, a: &PointSubset) -> Result<Vec<(usize, f64)>, MetricError> {
        if a.is_empty() {
            return Err(MetricError::EmptySet);
        }
        self.check_subset(a)?;
        if self.table.is_none() {
            if let Backing::Graph { adjacency } = &self.backing {
                return Ok(self.nearest_multi_source(adjacency, a));
            }
        }
        Ok((0..self.n)
            .into_par_iter()
            .map(|x| self.nearest_scan(x, a))
            .collect())
    }

    /// Like [`nearest_all`](Self::nearest_all) but only for `targets`.
    pub fn nearest_for(
        &self,
        a: &PointSubset,
        targets: &PointSubset,
    ) -> Result<Vec<(usize, f64)>, MetricError> {
        if a.is_empty() {
            return Err(MetricError::EmptySet);
        }
        self.check_subset(a)?;
        self.check_subset(targets)?;
        if self.table.is_none() && matches!(self.backing, Backing::Graph { .. }) {
            let all = self.nearest_all(a)?;
            return Ok(targets.iter().map(|x| all[x]).collect());
        }
        Ok(targets
            .as_slice()
            .par_iter()
            .map(|&x| self.nearest_scan(x, a))
            .collect())
    }

    fn nearest_scan(&self, x: usize, a: &PointSubset) -> (usize, f64) {
        if a.contains(x) {
            return (x, 0.0);
        }
        let mut best = (usize::MAX, f64::INFINITY);
        for y in a.iter() {
            let d = self.distance(x, y);
            if d < best.1 {
                best = (y, d);
            }
        }
        best
    }

    fn nearest_multi_source(&self, adjacency: &[Vec<(usize, f64)>], a: &PointSubset) -> Vec<(usize, f64)> {
        let mut label = vec![(f64::INFINITY, usize::MAX); self.n];
        let mut done = vec![false; self.n];
        let mut heap = BinaryHeap::new();
        for s in a.iter() {
            label[s] = (0.0, s);
            heap.push(HeapItem { d: 0.0, node: s, tag: s });
        }
        while let Some(HeapItem { d, node, tag }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            for &(next, w) in &adjacency[node] {
                let cand = (d + w, tag);
                if cand.0 < label[next].0 || (cand.0 == label[next].0 && cand.1 < label[next].1) {
                    label[next] = cand;
                    heap.push(HeapItem { d: cand.0, node: next, tag });
                }
            }
        }
        label.into_iter().map(|(d, s)| (s, d)).collect()
    }

    /// `dist(x, A)` for every point.
    pub fn dist_to_set_all(&self, a: &PointSubset) -> Result<Vec<f64>, MetricError> {
        Ok(self.nearest_all(a)?.into_iter().map(|(_, d)| d).collect())
    }

    /// The open ball `B(A, r) = {x : dist(x, A) < r}`.
    pub fn set_ball(&self, a: &PointSubset, r: f64) -> Result<PointSubset, MetricError> {
        self.set_enlargement(a, r, Boundary::Open)
    }

    /// `{x : dist(x, A) < r}` or `{x : dist(x, A) <= r}`.
    pub fn set_enlargement(
        &self,
        a: &PointSubset,
        r: f64,
        boundary: Boundary,
    ) -> Result<PointSubset, MetricError> {
        let dist = self.dist_to_set_all(a)?;
        Ok(PointSubset(
            dist.iter()
                .enumerate()
                .filter(|(_, &d)| boundary.admits(d, r))
                .map(|(x, _)| x)
                .collect(),
        ))
    }

    /// Maximum pairwise distance within `A`; zero for singletons.
    pub fn diameter(&self, a: &PointSubset) -> Result<f64, MetricError> {
        if a.is_empty() {
            return Err(MetricError::EmptySet);
        }
        self.check_subset(a)?;
        let ids = a.as_slice();
        Ok(ids
            .par_iter()
            .enumerate()
            .map(|(i, &x)| ids[i + 1..].iter().map(|&y| self.distance(x, y)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max))
    }

    /// Retraction sending each point to its nearest point of `A`, smallest id
    /// on ties. Satisfies `d(x, p(x)) = dist(x, A)` exactly.
    pub fn nearest_point_retraction(&self, a: &PointSubset) -> Result<Retraction, MetricError> {
        let nearest = self.nearest_all(a)?;
        let (image, dist) = nearest.into_iter().unzip();
        Ok(Retraction { target: a.clone(), image, dist })
    }

    /// Re-checks every metric axiom on the stored distances: exhaustively up to
    /// [`EXHAUSTIVE_TRIANGLE_LIMIT`] points, by seeded sampling above.
    pub fn check_axioms(&self) -> Result<(), MetricError> {
        for x in 0..self.n {
            let row = self.row(x);
            if row[x] != 0.0 {
                return Err(MetricError::NonZeroDiagonal { x, d: row[x] });
            }
            for y in (x + 1)..self.n {
                let (dxy, dyx) = (row[y], self.distance(y, x));
                if dxy != dyx {
                    return Err(MetricError::Asymmetry { x, y, dxy, dyx });
                }
                if dxy < 0.0 {
                    return Err(MetricError::NegativeDistance { x, y, d: dxy });
                }
                if dxy == 0.0 {
                    return Err(MetricError::ZeroOffDiagonal { x, y });
                }
            }
        }
        self.check_triangle()
    }

    fn check_positive(&self) -> Result<(), MetricError> {
        let found = (0..self.n).into_par_iter().find_map_first(|x| {
            let row = self.row(x);
            ((x + 1)..self.n).find(|&y| row[y] <= 0.0).map(|y| (x, y))
        });
        match found {
            Some((x, y)) => Err(MetricError::ZeroOffDiagonal { x, y }),
            None => Ok(()),
        }
    }

    fn check_triangle(&self) -> Result<(), MetricError> {
        let n = self.n;
        let violation = |x: usize, y: usize, z: usize| -> Option<MetricError> {
            let (dxz, dxy, dyz) = (self.distance(x, z), self.distance(x, y), self.distance(y, z));
            (dxz > dxy + dyz + METRIC_TOLERANCE)
                .then_some(MetricError::TriangleViolation { x, y, z, dxz, dxy, dyz })
        };
        let found = if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
            (0..n).into_par_iter().find_map_first(|x| {
                let rx = self.row(x);
                for y in 0..n {
                    let ry = self.row(y);
                    let dxy = rx[y];
                    if let Some(z) = (0..n).find(|&z| rx[z] > dxy + ry[z] + METRIC_TOLERANCE) {
                        return violation(x, y, z);
                    }
                }
                None
            })
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(TRIANGLE_SAMPLE_SEED);
            let samples = 10 * n * n;
            (0..samples).find_map(|_| {
                let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                violation(x, y, z)
            })
        };
        match found {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapItem {
    d: f64,
    node: usize,
    tag: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // Min-heap on (distance, tag, node).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .d
            .total_cmp(&self.d)
            .then_with(|| other.tag.cmp(&self.tag))
            .then_with(|| other.node.cmp(&self.node))
    }
}
