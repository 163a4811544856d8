use std::collections::BTreeSet;

use serde::Serialize;

use super::{ExtendError, Modulus};
use crate::metric::{FiniteMetricSpace, PointSubset};
use crate::simplex::{convex_combine, PartitionOfUnity, SimplexPoint, VertexId, VertexMint};
use crate::verify::{cobounded_check, lipschitz_check, r_disjoint_check, CheckMode, CoverFamily};

/// Relative slack allowed when comparing pasting parameters.
const PARAM_TOLERANCE: f64 = 1e-12;

/// Whether an operation checks its hypotheses and conclusions by direct
/// verification, or takes them on trust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditions {
    Verify,
    Assume,
}

/// Running counters of a construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtendStats {
    /// Bounded pieces far from the existing domain, sent to a fresh vertex.
    pub branch1: u64,
    /// Bounded pieces extended by pasting and then retracted.
    pub branch2: u64,
    pub glues: u64,
    /// Operations whose hypotheses were assumed rather than verified.
    pub assumed: u64,
    /// Glues or pieces run at a budget below `2/(R+1)`.
    pub budget_shortfalls: u64,
}

/// Cutoff radius `r`, target constant `ε` and input constant `δ` of a paste.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PasteParams {
    pub r: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl PasteParams {
    /// `r = 8/ε`, `δ = E(ε)`.
    pub fn for_extension(epsilon: f64, modulus: &Modulus) -> Result<Self, ExtendError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ExtendError::BadEpsilon(epsilon));
        }
        Ok(PasteParams { r: 8.0 / epsilon, epsilon, delta: modulus.eval(epsilon)? })
    }

    /// `r ≥ 4/ε`, `δ ≤ ε/3 − 2/(3r)`, `δ ≤ ε/(4r + 7)`.
    pub fn check(&self) -> Result<(), ExtendError> {
        let PasteParams { r, epsilon, delta } = *self;
        let le = |a: f64, b: f64| a <= b + PARAM_TOLERANCE * b.abs();
        if !(delta > 0.0) {
            return Err(ExtendError::PreconditionViolated(format!("δ = {delta} must be positive")));
        }
        if !le(4.0 / epsilon, r) {
            return Err(ExtendError::PreconditionViolated(format!("r = {r} < 4/ε = {}", 4.0 / epsilon)));
        }
        let first = epsilon / 3.0 - 2.0 / (3.0 * r);
        if !le(delta, first) {
            return Err(ExtendError::PreconditionViolated(format!("δ = {delta} > ε/3 − 2/(3r) = {first}")));
        }
        let second = epsilon / (4.0 * r + 7.0);
        if !le(delta, second) {
            return Err(ExtendError::PreconditionViolated(format!("δ = {delta} > ε/(4r+7) = {second}")));
        }
        Ok(())
    }
}

/// The map pasted in away from `A`.
enum Outer<'a> {
    Pou(&'a PartitionOfUnity),
    Vertex(VertexId),
}

/// `h(x) = α(x)·g(x) + (1 − α(x))·f(p(x))`, `α(x) = min(dist(x, A)/r, 1)`,
/// evaluated on `targets` (which must avoid `A = dom f`).
fn blend(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    a: &PointSubset,
    outer: Outer<'_>,
    r: f64,
    targets: &PointSubset,
) -> Result<PieceValues, ExtendError> {
    let nearest = space.nearest_for(a, targets)?;
    targets
        .iter()
        .zip(nearest)
        .map(|(x, (p, d))| {
            let g = match &outer {
                Outer::Pou(g) => g.at(x)?.clone(),
                Outer::Vertex(v) => SimplexPoint::vertex(*v),
            };
            let alpha = (d / r).min(1.0);
            Ok((x, convex_combine(alpha, &g, f.at(p)?)))
        })
        .collect()
}

fn require_lipschitz(space: &FiniteMetricSpace, f: &PartitionOfUnity, c: f64, what: &str) -> Result<(), ExtendError> {
    if f.domain_len() < 2 {
        return Ok(());
    }
    let report = lipschitz_check(space, f, c, c, CheckMode::Restricted)?;
    if report.pass {
        Ok(())
    } else {
        let (x, y) = report.witness.unwrap();
        Err(ExtendError::PreconditionViolated(format!(
            "{what} is not ({c}, {c})-Lipschitz: slack {} at ({x}, {y})",
            report.worst_slack.unwrap()
        )))
    }
}

fn require_cobounded(space: &FiniteMetricSpace, f: &PartitionOfUnity, bound: f64, what: &str) -> Result<(), ExtendError> {
    let report = cobounded_check(space, f, bound);
    if report.pass {
        Ok(())
    } else {
        Err(ExtendError::PreconditionViolated(format!(
            "{what} is not {bound}-cobounded: vertex {} has star diameter {}",
            report.witness.unwrap(),
            report.tight_bound
        )))
    }
}

fn ensure_output(space: &FiniteMetricSpace, h: &PartitionOfUnity, eps: f64, bound: Option<f64>) -> Result<(), ExtendError> {
    if h.domain_len() >= 2 {
        let report = lipschitz_check(space, h, eps, eps, CheckMode::Restricted)?;
        if !report.pass {
            let (x, y) = report.witness.unwrap();
            return Err(ExtendError::PostconditionFailed(format!(
                "output is not ({eps}, {eps})-Lipschitz: slack {} at ({x}, {y})",
                report.worst_slack.unwrap()
            )));
        }
    }
    if let Some(bound) = bound {
        let report = cobounded_check(space, h, bound);
        if !report.pass {
            return Err(ExtendError::PostconditionFailed(format!(
                "output is not {bound}-cobounded: vertex {} has star diameter {}",
                report.witness.unwrap(),
                report.tight_bound
            )));
        }
    }
    Ok(())
}

fn with_values(f: &PartitionOfUnity, values: PieceValues) -> PartitionOfUnity {
    let mut h = f.clone();
    for (x, p) in values {
        h.set(x, p);
    }
    h
}

/// New values produced by an extension step, keyed by point.
pub type PieceValues = Vec<(usize, SimplexPoint)>;

/// Pastes `f` (on `A`) into `g` (on all of `X`):
/// `h = α·g + (1 − α)·f∘p` with `α = min(dist(·, A)/r, 1)` and `p` the
/// nearest-point retraction onto `A`.
///
/// `h` equals `f` on `A` and `g` outside `B(A, r)`. With [`Preconditions::Verify`]
/// the parameter inequalities and the `(δ, δ)` bounds on `f` and `g` are
/// checked first, and the output is checked to be `(ε, ε)`-Lipschitz (and,
/// when `f` and `g` have disjoint carriers, `(M + 2r + 2)`-cobounded for `M`
/// the larger of their tight bounds).
pub fn paste(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    g: &PartitionOfUnity,
    params: PasteParams,
    pre: Preconditions,
) -> Result<PartitionOfUnity, ExtendError> {
    let a = f.domain();
    if a.is_empty() {
        return Err(ExtendError::EmptySubset);
    }
    if let Some(x) = (0..space.len()).find(|&x| !g.is_defined(x)) {
        return Err(ExtendError::PreconditionViolated(format!("g is not defined at {x}")));
    }
    if pre == Preconditions::Verify {
        params.check()?;
        require_lipschitz(space, f, params.delta, "f")?;
        require_lipschitz(space, g, params.delta, "g")?;
    }
    let rest = space.all_points().difference(&a);
    let h = with_values(f, blend(space, f, &a, Outer::Pou(g), params.r, &rest)?);
    if pre == Preconditions::Verify {
        let disjoint = f.carrier_vertices().is_disjoint(&g.carrier_vertices());
        let bound = disjoint.then(|| {
            let m = f.star_preimage_diameters(space).max.max(g.star_preimage_diameters(space).max);
            m + 2.0 * params.r + 2.0
        });
        ensure_output(space, &h, params.epsilon, bound)?;
    }
    Ok(h)
}

/// Result of [`extend_pou`].
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub pou: PartitionOfUnity,
    /// The fresh vertex `v` taking over away from `A`.
    pub vertex: VertexId,
    pub params: PasteParams,
}

/// Extends `f` from `A` to all of `X` by pasting it into the constant map at
/// a freshly minted vertex, with `r = 8/ε` and `δ = E(ε)`.
pub fn extend_pou(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    epsilon: f64,
    modulus: &Modulus,
    mint: &VertexMint,
    pre: Preconditions,
) -> Result<Extension, ExtendError> {
    let params = PasteParams::for_extension(epsilon, modulus)?;
    let a = f.domain();
    if a.is_empty() {
        return Err(ExtendError::EmptySubset);
    }
    if pre == Preconditions::Verify {
        params.check()?;
        require_lipschitz(space, f, params.delta, "f")?;
    }
    let vertex = mint.vertex();
    let rest = space.all_points().difference(&a);
    let pou = with_values(f, blend(space, f, &a, Outer::Vertex(vertex), params.r, &rest)?);
    if pre == Preconditions::Verify {
        ensure_output(space, &pou, epsilon, None)?;
    }
    Ok(Extension { pou, vertex, params })
}

/// Extends a `K`-cobounded `f` over `X` using a `Q`-cobounded map `u` on `X`
/// (moved to fresh vertices first, so carriers are disjoint). Returns the
/// extension and its coboundedness bound `max(K, Q) + 2r + 2`.
#[allow(clippy::too_many_arguments)]
pub fn extend_pou_cobounded(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    k: f64,
    u: &PartitionOfUnity,
    q: f64,
    epsilon: f64,
    modulus: &Modulus,
    mint: &VertexMint,
    pre: Preconditions,
) -> Result<(PartitionOfUnity, f64), ExtendError> {
    if f.domain_len() == space.len() {
        return Ok((f.clone(), k));
    }
    let a = f.domain();
    if a.is_empty() {
        return Err(ExtendError::EmptySubset);
    }
    if let Some(x) = (0..space.len()).find(|&x| !u.is_defined(x)) {
        return Err(ExtendError::PreconditionViolated(format!("u is not defined at {x}")));
    }
    let params = PasteParams::for_extension(epsilon, modulus)?;
    if pre == Preconditions::Verify {
        params.check()?;
        require_lipschitz(space, f, params.delta, "f")?;
        require_cobounded(space, f, k, "f")?;
        require_lipschitz(space, u, params.delta, "u")?;
        require_cobounded(space, u, q, "u")?;
    }
    let (fresh, _) = u.renamespace(mint);
    let rest = space.all_points().difference(&a);
    let g = with_values(f, blend(space, f, &a, Outer::Pou(&fresh), params.r, &rest)?);
    let bound = k.max(q) + 2.0 * params.r + 2.0;
    if pre == Preconditions::Verify {
        ensure_output(space, &g, epsilon, Some(bound))?;
    }
    Ok((g, bound))
}

/// Which construction a bounded piece went through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Far from the existing domain: the piece goes to one fresh vertex.
    Isolated,
    /// Near the existing domain: pasted, then retracted onto nearby vertices.
    Retracted,
}

/// Parameters of a bounded-piece step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PieceParams {
    /// Diameter bound `K` of the piece.
    pub leaf_bound: f64,
    /// Reach `R_m`: domain points closer than this to the piece count as near.
    pub reach: f64,
    /// Output Lipschitz budget `u`; the input must be `(E(u), E(u))`.
    pub budget: f64,
}

/// Result of [`extend_over_bounded_piece`].
#[derive(Debug, Clone, PartialEq)]
pub struct PieceExtension {
    pub pou: PartitionOfUnity,
    pub bound: f64,
    pub branch: Branch,
}

/// New values on `U ∖ dom f` and the output coboundedness bound.
#[allow(clippy::too_many_arguments)]
pub(crate) fn bounded_piece_values(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    f_bound: f64,
    piece: &PointSubset,
    params: PieceParams,
    modulus: &Modulus,
    mint: &VertexMint,
    pre: Preconditions,
    stats: &mut ExtendStats,
) -> Result<(PieceValues, f64, Branch), ExtendError> {
    let PieceParams { leaf_bound, reach, budget } = params;
    let required = 2.0 / (reach + 1.0);
    if budget < required {
        if pre == Preconditions::Verify {
            return Err(ExtendError::BudgetTooSmall { budget, required, radius: reach });
        }
        stats.budget_shortfalls += 1;
    }
    if pre == Preconditions::Verify {
        let diam = space.diameter(piece)?;
        if diam > leaf_bound + crate::verify::BOUND_TOLERANCE {
            return Err(ExtendError::PreconditionViolated(format!("piece diameter {diam} exceeds K = {leaf_bound}")));
        }
        require_lipschitz(space, f, modulus.eval(budget)?, "f")?;
        require_cobounded(space, f, f_bound, "f")?;
    } else {
        stats.assumed += 1;
    }

    let a = f.domain();
    let fresh_points = piece.difference(&a);
    let near: PointSubset = if a.is_empty() {
        PointSubset::empty()
    } else {
        let to_piece = space.nearest_for(piece, &a)?;
        a.iter().zip(to_piece).filter(|(_, (_, d))| *d < reach).map(|(x, _)| x).collect()
    };

    let (values, bound, branch) = if near.is_empty() {
        stats.branch1 += 1;
        let v = mint.vertex();
        let values = fresh_points.iter().map(|x| (x, SimplexPoint::vertex(v))).collect();
        (values, f_bound + leaf_bound, Branch::Isolated)
    } else {
        stats.branch2 += 1;
        let r = PasteParams::for_extension(budget, modulus)?.r;
        let v = mint.vertex();
        let pasted = blend(space, f, &a, Outer::Vertex(v), r, &fresh_points)?;
        let keep = f.carrier_on(&near);
        let target = *keep.first().expect("points near the piece carry vertices");
        let values = pasted
            .into_iter()
            .map(|(x, p)| (x, p.merge_through(|w| if keep.contains(&w) { w } else { target })))
            .collect();
        (values, f_bound + leaf_bound + reach, Branch::Retracted)
    };
    Ok((values, bound, branch))
}

/// Extends `f` (on `A`) over a bounded piece `U`. If no point of `A` lies
/// within `R_m` of `U`, all of `U` goes to one fresh vertex (bound `R + K`);
/// otherwise `f` is extended by [`extend_pou`] at budget `u` and the new
/// vertices are retracted onto the smallest vertex carried near `U`
/// (bound `R + K + R_m`). `R` is the coboundedness bound of `f`.
#[allow(clippy::too_many_arguments)]
pub fn extend_over_bounded_piece(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    f_bound: f64,
    piece: &PointSubset,
    params: PieceParams,
    modulus: &Modulus,
    mint: &VertexMint,
    pre: Preconditions,
) -> Result<PieceExtension, ExtendError> {
    space.check_subset(piece)?;
    if piece.is_empty() {
        return Err(ExtendError::EmptySubset);
    }
    let mut stats = ExtendStats::default();
    let (values, bound, branch) = bounded_piece_values(space, f, f_bound, piece, params, modulus, mint, pre, &mut stats)?;
    let pou = with_values(f, values);
    if pre == Preconditions::Verify {
        ensure_output(space, &pou, params.budget, Some(bound))?;
    }
    Ok(PieceExtension { pou, bound, branch })
}

/// Result of [`extend_over_disjoint_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyExtension {
    pub pou: PartitionOfUnity,
    pub bound: f64,
    pub piece_bounds: Vec<f64>,
}

pub(crate) fn glue_family<F>(
    space: &FiniteMetricSpace,
    base: &PartitionOfUnity,
    base_bound: f64,
    pieces: &[PointSubset],
    radius: f64,
    budget: f64,
    pre: Preconditions,
    stats: &mut ExtendStats,
    mut extend_piece: F,
) -> Result<(PieceValues, f64, Vec<f64>), ExtendError>
where
    F: FnMut(&PartitionOfUnity, f64, usize, &mut ExtendStats) -> Result<(PieceValues, f64), ExtendError>,
{
    let required = 2.0 / (radius + 1.0);
    if budget < required {
        if pre == Preconditions::Verify {
            return Err(ExtendError::BudgetTooSmall { budget, required, radius });
        }
        stats.budget_shortfalls += 1;
    }
    if pre == Preconditions::Assume {
        stats.assumed += 1;
    }
    if pre == Preconditions::Verify && pieces.len() > 1 {
        let report = r_disjoint_check(space, &CoverFamily::new(pieces.to_vec())?, radius)?;
        if !report.pass {
            return Err(ExtendError::NotRDisjoint(report.witness.unwrap()));
        }
    }

    let base_carrier = base.carrier_vertices();
    let mut introduced: std::collections::BTreeMap<VertexId, usize> = Default::default();
    let mut values = Vec::new();
    let mut piece_bounds = Vec::with_capacity(pieces.len());
    for t in 0..pieces.len() {
        let (vals, bound) = extend_piece(base, base_bound, t, stats)?;
        let fresh: BTreeSet<VertexId> =
            vals.iter().flat_map(|(_, p)| p.support()).filter(|v| !base_carrier.contains(v)).collect();
        for v in fresh {
            if let Some(&first) = introduced.get(&v) {
                return Err(ExtendError::CarrierCollision { first, second: t, vertex: v });
            }
            introduced.insert(v, t);
        }
        piece_bounds.push(bound);
        values.extend(vals);
    }
    stats.glues += 1;
    let bound = match piece_bounds.iter().copied().reduce(f64::max) {
        Some(m) => 2.0 * m + base_bound,
        None => base_bound,
    };
    Ok((values, bound, piece_bounds))
}

/// Extends `f` over every member of an `R`-disjoint family at budget `u`.
/// Each piece is extended independently from `f` by `extend_piece`, which
/// receives `f`, its bound and the piece index and returns the new values
/// and their bound. New vertices of different pieces must not collide; the
/// glued map is `(u, u)`-Lipschitz once `u ≥ 2/(R + 1)`, with bound
/// `2·max_t M_t + K`.
#[allow(clippy::too_many_arguments)]
pub fn extend_over_disjoint_family<F>(
    space: &FiniteMetricSpace,
    f: &PartitionOfUnity,
    f_bound: f64,
    pieces: &[PointSubset],
    radius: f64,
    budget: f64,
    pre: Preconditions,
    mut extend_piece: F,
) -> Result<FamilyExtension, ExtendError>
where
    F: FnMut(&PartitionOfUnity, f64, usize) -> Result<(PieceValues, f64), ExtendError>,
{
    let mut stats = ExtendStats::default();
    let (values, bound, piece_bounds) = glue_family(space, f, f_bound, pieces, radius, budget, pre, &mut stats, |f, k, t, _| {
        extend_piece(f, k, t)
    })?;
    let pou = with_values(f, values);
    if pre == Preconditions::Verify {
        ensure_output(space, &pou, budget, Some(bound))?;
    }
    Ok(FamilyExtension { pou, bound, piece_bounds })
}
