//! Direct re-computation of every claim a construction makes.
//!
//! Nothing here looks at how an object was built: the checks read a space, a
//! partition of unity or a family of subsets and recompute slack, diameters,
//! cross-distances and ball containments from scratch. Pair enumeration is
//! data-parallel; reductions pick the minimum with a lexicographic witness
//! tie-break, so reports do not depend on the number of worker threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::metric::{Boundary, FiniteMetricSpace, MetricError, PointSubset};
use crate::simplex::{l1_distance, PartitionOfUnity, VertexId};

/// A Lipschitz pair passes when its slack is at least `-SLACK_TOLERANCE`.
pub const SLACK_TOLERANCE: f64 = 1e-9;
/// Diameter comparisons (coboundedness, uniform bounds) use the same margin.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("restricted mode needs lambda = C > 0, got lambda = {lambda}, C = {c}")]
    BadMode { lambda: f64, c: f64 },
    #[error("family member {0} is empty")]
    EmptyMember(usize),
    #[error("point {0} is not covered by the family")]
    NotACover(usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    /// Every unordered pair of the domain.
    Full,
    /// Only pairs closer than `2/ε − 1`; equivalent to full mode for (ε, ε).
    Restricted,
}

/// How restricted mode collects its candidate pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRoute {
    /// Graph search when the space has a graph, table scan otherwise.
    Auto,
    TableScan,
    GraphSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub lambda: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mode: CheckMode,
    pub pass: bool,
    pub tolerance: f64,
    /// `min λ·d(x,y) + C − |f(x) − f(y)|₁` over checked pairs.
    pub worst_slack: Option<f64>,
    pub witness: Option<(usize, usize)>,
    pub pairs_checked: u64,
    pub restricted_radius: Option<f64>,
    /// Worst slack over the checked pairs with `d < 2/λ − 1`, when `λ = C > 0`.
    pub near_worst_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoboundedReport {
    pub bound: f64,
    pub pass: bool,
    pub tolerance: f64,
    /// Largest star-preimage diameter; the tight coboundedness bound.
    pub tight_bound: f64,
    pub witness: Option<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossPair {
    pub x: usize,
    pub y: usize,
    /// Member indices with `x ∈ U_s`, `y ∈ U_t`, `s ≠ t`.
    pub s: usize,
    pub t: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisjointReport {
    pub radius: f64,
    pub pass: bool,
    /// Closest cross pair; a violation whenever `pass` is false.
    pub witness: Option<CrossPair>,
    pub min_cross_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundedReport {
    pub max_diameter: f64,
    pub witness: Option<usize>,
    pub pass: bool,
    pub claimed_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LebesgueReport {
    pub radius: f64,
    pub pass: bool,
    /// Smallest point whose open ball lies in no member.
    pub witness: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub max: usize,
    pub witness: Option<usize>,
    /// Number of points by how many members contain them.
    pub histogram: BTreeMap<usize, usize>,
    #[serde(skip)]
    pub per_point: Vec<usize>,
}

/// One entry of a report file.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckRecord {
    Lipschitz(LipschitzReport),
    Cobounded(CoboundedReport),
    RDisjoint(DisjointReport),
    UniformlyBounded(BoundedReport),
    Lebesgue(LebesgueReport),
    Multiplicity(MultiplicityReport),
}

impl CheckRecord {
    pub fn pass(&self) -> bool {
        match self {
            CheckRecord::Lipschitz(r) => r.pass,
            CheckRecord::Cobounded(r) => r.pass,
            CheckRecord::RDisjoint(r) => r.pass,
            CheckRecord::UniformlyBounded(r) => r.pass,
            CheckRecord::Lebesgue(r) => r.pass,
            CheckRecord::Multiplicity(_) => true,
        }
    }
}

/// A family `{U_s}` of nonempty subsets with optional claimed constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverFamily {
    pub members: Vec<PointSubset>,
    pub claimed_r: Option<f64>,
    pub claimed_bound: Option<f64>,
}

impl CoverFamily {
    pub fn new(members: Vec<PointSubset>) -> Result<Self, VerifyError> {
        if let Some(i) = members.iter().position(|m| m.is_empty()) {
            return Err(VerifyError::EmptyMember(i));
        }
        Ok(CoverFamily { members, claimed_r: None, claimed_bound: None })
    }

    pub fn with_claims(mut self, r: Option<f64>, bound: Option<f64>) -> Self {
        self.claimed_r = r;
        self.claimed_bound = bound;
        self
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member indices containing each point of a host of `n` points.
    fn membership(&self, n: usize) -> Vec<Vec<usize>> {
        let mut of = vec![Vec::new(); n];
        for (i, m) in self.members.iter().enumerate() {
            for x in m.iter() {
                of[x].push(i);
            }
        }
        of
    }
}

#[derive(Clone, Copy)]
struct SlackAcc {
    worst: Option<(f64, usize, usize)>,
    near: Option<f64>,
    count: u64,
}

impl SlackAcc {
    const EMPTY: SlackAcc = SlackAcc { worst: None, near: None, count: 0 };

    #[inline]
    fn push(&mut self, slack: f64, x: usize, y: usize, near: bool) {
        self.count += 1;
        match self.worst {
            Some((w, wx, wy)) if (slack, x, y) >= (w, wx, wy) => {}
            _ => self.worst = Some((slack, x, y)),
        }
        if near {
            self.near = Some(self.near.map_or(slack, |n| n.min(slack)));
        }
    }

    fn merge(self, other: SlackAcc) -> SlackAcc {
        let worst = match (self.worst, other.worst) {
            (Some(a), Some(b)) => Some(if lex_less(b, a) { b } else { a }),
            (a, b) => a.or(b),
        };
        let near = match (self.near, other.near) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        SlackAcc { worst, near, count: self.count + other.count }
    }
}

fn lex_less(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).is_lt()
}

/// Checks `|f(x) − f(y)|₁ ≤ λ·d(x, y) + C` over the domain of `f`.
pub fn lipschitz_check(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    lambda: f64,
    c: f64,
    mode: CheckMode,
) -> Result<LipschitzReport, VerifyError> {
    lipschitz_check_via(space, f, lambda, c, mode, PairRoute::Auto)
}

/// [`lipschitz_check`] with an explicit pair-gathering route for restricted mode.
pub fn lipschitz_check_via(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    lambda: f64,
    c: f64,
    mode: CheckMode,
    route: PairRoute,
) -> Result<LipschitzReport, VerifyError> {
    let near_radius = (lambda == c && lambda > 0.0).then(|| 2.0 / lambda - 1.0);
    if mode == CheckMode::Restricted && near_radius.is_none() {
        return Err(VerifyError::BadMode { lambda, c });
    }
    let domain = f.domain();
    let ids = domain.as_slice();
    let point = |x: usize| f.get(x).expect("domain point");

    let acc = match mode {
        CheckMode::Full => {
            let rho = near_radius.unwrap_or(f64::NEG_INFINITY);
            ids.par_iter()
                .enumerate()
                .map(|(i, &x)| {
                    let row = space.row(x);
                    let fx = point(x);
                    let mut acc = SlackAcc::EMPTY;
                    for &y in &ids[i + 1..] {
                        let d = row[y];
                        let slack = lambda * d + c - l1_distance(fx, point(y));
                        acc.push(slack, x, y, d < rho);
                    }
                    acc
                })
                .reduce(|| SlackAcc::EMPTY, SlackAcc::merge)
        }
        CheckMode::Restricted => {
            let rho = near_radius.unwrap();
            let use_graph = match route {
                PairRoute::Auto => space.adjacency().is_some(),
                PairRoute::TableScan => false,
                PairRoute::GraphSearch => true,
            };
            if rho <= 0.0 {
                SlackAcc::EMPTY
            } else {
                ids.par_iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let fx = point(x);
                        let mut acc = SlackAcc::EMPTY;
                        let graph_hits = if use_graph { space.graph_ball_forward(x, rho, Boundary::Open) } else { None };
                        match graph_hits {
                            Some(hits) => {
                                for (y, d) in hits {
                                    if let Some(fy) = f.get(y) {
                                        acc.push(lambda * d + c - l1_distance(fx, fy), x, y, true);
                                    }
                                }
                            }
                            None => {
                                let row = space.row(x);
                                for &y in &ids[i + 1..] {
                                    let d = row[y];
                                    if d < rho {
                                        acc.push(lambda * d + c - l1_distance(fx, point(y)), x, y, true);
                                    }
                                }
                            }
                        }
                        acc
                    })
                    .reduce(|| SlackAcc::EMPTY, SlackAcc::merge)
            }
        }
    };

    let worst_slack = acc.worst.map(|w| w.0);
    Ok(LipschitzReport {
        lambda,
        c,
        mode,
        pass: worst_slack.is_none_or(|s| s >= -SLACK_TOLERANCE),
        tolerance: SLACK_TOLERANCE,
        worst_slack,
        witness: acc.worst.map(|w| (w.1, w.2)),
        pairs_checked: acc.count,
        restricted_radius: (mode == CheckMode::Restricted).then(|| near_radius.unwrap()),
        near_worst_slack: near_radius.and(acc.near),
    })
}

/// Checks `diam(f⁻¹(st(v))) ≤ M` for every vertex.
pub fn cobounded_check(space: &FiniteMetricSpace, f: &PartitionOfUnity, bound: f64) -> CoboundedReport {
    let stars = f.star_preimage_diameters(space);
    let pass = stars.max <= bound + BOUND_TOLERANCE;
    CoboundedReport { bound, pass, tolerance: BOUND_TOLERANCE, tight_bound: stars.max, witness: stars.worst }
}

/// Checks `d(x, y) > R` for `x ∈ U_s`, `y ∈ U_t`, `s ≠ t`.
pub fn r_disjoint_check(space: &FiniteMetricSpace, family: &CoverFamily, radius: f64) -> Result<DisjointReport, VerifyError> {
    for m in &family.members {
        space.check_subset(m)?;
    }
    let of = family.membership(space.len());
    let union: Vec<usize> = (0..space.len()).filter(|&x| !of[x].is_empty()).collect();

    let best = union
        .par_iter()
        .enumerate()
        .filter_map(|(i, &x)| {
            let lx = &of[x];
            if lx.len() >= 2 {
                return Some((0.0, x, x, lx[0], lx[1]));
            }
            let row = space.row(x);
            let mut best: Option<(f64, usize, usize, usize, usize)> = None;
            for &y in &union[i + 1..] {
                let ly = &of[y];
                let Some(&t) = ly.iter().find(|&&t| t != lx[0]) else { continue };
                let d = row[y];
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, x, y, lx[0], t));
                }
            }
            best
        })
        .reduce_with(|a, b| if (b.0, b.1, b.2) < (a.0, a.1, a.2) { b } else { a });

    let witness = best.map(|(distance, x, y, s, t)| CrossPair { x, y, s, t, distance });
    let pass = witness.as_ref().is_none_or(|w| w.distance > radius);
    Ok(DisjointReport { radius, pass, min_cross_distance: witness.as_ref().map(|w| w.distance), witness })
}

/// Largest member diameter, compared against the family's claimed bound.
pub fn uniformly_bounded_check(space: &FiniteMetricSpace, family: &CoverFamily) -> Result<BoundedReport, VerifyError> {
    let mut max = 0.0;
    let mut witness = None;
    for (i, m) in family.members.iter().enumerate() {
        if m.is_empty() {
            return Err(VerifyError::EmptyMember(i));
        }
        let d = space.diameter(m)?;
        if witness.is_none() || d > max {
            max = d;
            witness = Some(i);
        }
    }
    let pass = family.claimed_bound.is_none_or(|b| max <= b + BOUND_TOLERANCE);
    Ok(BoundedReport { max_diameter: max, witness, pass, claimed_bound: family.claimed_bound })
}

/// Checks that every open ball `B(x, M)` lies in some member of the cover.
pub fn lebesgue_check(space: &FiniteMetricSpace, cover: &CoverFamily, radius: f64) -> Result<LebesgueReport, VerifyError> {
    for m in &cover.members {
        space.check_subset(m)?;
    }
    let of = cover.membership(space.len());
    if let Some(x) = of.iter().position(|l| l.is_empty()) {
        return Err(VerifyError::NotACover(x));
    }
    let witness = (0..space.len()).into_par_iter().find_first(|&x| {
        let ball = space.ball(x, radius, Boundary::Open);
        !of[x].iter().any(|&i| ball.iter().all(|&(y, _)| cover.members[i].contains(y)))
    });
    Ok(LebesgueReport { radius, pass: witness.is_none(), witness })
}

/// Lebesgue number check for a partition of unity, via its star preimages.
pub fn pou_lebesgue_check(space: &FiniteMetricSpace, f: &PartitionOfUnity, radius: f64) -> Result<LebesgueReport, VerifyError> {
    let members = f.star_preimages().into_values().map(PointSubset::new).collect();
    lebesgue_check(space, &CoverFamily::new(members)?, radius)
}

/// How many members contain each point.
pub fn multiplicity(n: usize, cover: &CoverFamily) -> MultiplicityReport {
    let mut per_point = vec![0usize; n];
    for m in &cover.members {
        for x in m.iter() {
            if x < n {
                per_point[x] += 1;
            }
        }
    }
    let mut histogram = BTreeMap::new();
    for &k in &per_point {
        *histogram.entry(k).or_insert(0) += 1;
    }
    let max = per_point.iter().copied().max().unwrap_or(0);
    let witness = per_point.iter().position(|&k| k == max && max > 0);
    MultiplicityReport { max, witness, histogram, per_point }
}
