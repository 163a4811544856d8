use serde::Serialize;

use super::ops::{bounded_piece_values, glue_family, ExtendStats, PieceParams, PieceValues, Preconditions};
use super::{budget_schedule, BudgetSchedule, ExtendError, Modulus, ScheduleMode};
use crate::covers::{tree_validate, DecompositionTree, TreeNode, TreeReport};
use crate::metric::{FiniteMetricSpace, PointSubset};
use crate::simplex::{PartitionOfUnity, VertexMint};
use crate::verify::{cobounded_check, lipschitz_check, CheckMode, CoboundedReport, LipschitzReport};

/// Relative slack when comparing tree radii and budgets with the schedule.
const SCHEDULE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateConfig {
    pub epsilon: f64,
    pub modulus: Modulus,
    pub mode: ScheduleMode,
}

impl CertificateConfig {
    pub fn new(epsilon: f64, modulus: Modulus) -> Self {
        CertificateConfig { epsilon, modulus, mode: ScheduleMode::Conservative }
    }

    pub fn with_mode(mut self, mode: ScheduleMode) -> Self {
        self.mode = mode;
        self
    }
}

/// An `(ε, ε)`-Lipschitz partition of unity on the whole space together with
/// its claimed coboundedness bound and the reports that back it.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub pou: PartitionOfUnity,
    pub bound: f64,
    pub schedule: BudgetSchedule,
    pub tree: TreeReport,
    /// Level at which the tree was cut, when a shallower level was already bounded.
    pub truncated_at: Option<usize>,
    pub lipschitz: LipschitzReport,
    pub cobounded: CoboundedReport,
    pub stats: ExtendStats,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.lipschitz.pass && self.cobounded.pass
    }
}

struct Context<'a> {
    space: &'a FiniteMetricSpace,
    tree: &'a DecompositionTree,
    schedule: &'a BudgetSchedule,
    mint: VertexMint,
    leaf_bound: f64,
    leaf_reach: f64,
}

impl Context<'_> {
    fn check_budget(&self, budget: f64, radius: f64) -> Result<(), ExtendError> {
        let required = 2.0 / (radius + 1.0);
        if self.schedule.mode == ScheduleMode::Conservative && budget < required * (1.0 - SCHEDULE_TOLERANCE) {
            return Err(ExtendError::BudgetTooSmall { budget, required, radius });
        }
        Ok(())
    }

    fn child(&self, id: usize) -> &TreeNode {
        self.tree.node(id).expect("validated tree")
    }

    /// New values on the members of `node` outside `dom base`, with the
    /// coboundedness bound of the extended map. The output is
    /// `(budget, budget)`-Lipschitz given input at `E^{P(level)}(budget)`.
    fn extend_node(
        &self,
        node: &TreeNode,
        base: &PartitionOfUnity,
        base_bound: f64,
        budget: f64,
        stats: &mut ExtendStats,
    ) -> Result<(PieceValues, f64), ExtendError> {
        if node.level == self.tree.m {
            self.check_budget(budget, self.leaf_reach)?;
            let params = PieceParams { leaf_bound: self.leaf_bound, reach: self.leaf_reach, budget };
            let modulus = &self.schedule.modulus;
            let (values, bound, _) = bounded_piece_values(
                self.space,
                base,
                base_bound,
                &node.members,
                params,
                modulus,
                &self.mint,
                Preconditions::Assume,
                stats,
            )?;
            return Ok((values, bound));
        }

        let radius = self.tree.radii[node.level - 1];
        let step = self.schedule.p[node.level];
        let q = node.families.len() as u64;
        let mut current = base.clone();
        let mut bound = base_bound;
        let mut values = Vec::new();
        for (j, family) in node.families.iter().enumerate() {
            // The last family is extended at the node's own budget; each
            // earlier one must leave room for every extension after it.
            let w = self.schedule.modulus.iterate(budget, step * (q - 1 - j as u64)).map_err(|e| match e {
                ExtendError::Underflow { iterations, log10, message, .. } => {
                    ExtendError::Underflow { level: node.level, iterations, log10, message }
                }
                e => e,
            })?;
            self.check_budget(w, radius)?;
            let children: Vec<&TreeNode> = family.iter().map(|&c| self.child(c)).collect();
            let pieces: Vec<PointSubset> = children.iter().map(|c| c.members.clone()).collect();
            let (new, glued, _) = glue_family(
                self.space,
                &current,
                bound,
                &pieces,
                radius,
                w,
                Preconditions::Assume,
                stats,
                |f, k, t, stats| self.extend_node(children[t], f, k, w, stats),
            )?;
            for (x, p) in &new {
                current.set(*x, p.clone());
            }
            values.extend(new);
            bound = glued;
        }
        Ok((values, bound))
    }
}

/// Builds an `(ε, ε)`-Lipschitz cobounded partition of unity on `space` by
/// recursive extension over the decomposition tree, then verifies it.
///
/// The tree must validate and its radii must meet the schedule's. Families
/// inside a node are processed in index order, the first at the smallest
/// budget. The returned certificate has passed the restricted
/// `(ε, ε)` Lipschitz check and the coboundedness check at its bound;
/// otherwise [`ExtendError::VerificationFailed`] carries it.
pub fn build_certificate(
    space: &FiniteMetricSpace,
    tree: &DecompositionTree,
    config: &CertificateConfig,
) -> Result<Certificate, ExtendError> {
    let epsilon = config.epsilon;
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(ExtendError::BadEpsilon(epsilon));
    }
    let report = tree_validate(space, tree)?;
    if !report.pass {
        return Err(ExtendError::InvalidTree(Box::new(report)));
    }
    let truncated_at = match (tree.leaf_bound, report.bounded_level) {
        (Some(_), Some(level)) if level < tree.m => Some(level),
        _ => None,
    };
    let tree = truncated_at.map_or_else(|| tree.clone(), |level| tree.truncate(level));

    let schedule = budget_schedule(&tree.arity, epsilon, &config.modulus, config.mode)?;
    for (i, (&got, &required)) in tree.radii.iter().zip(&schedule.radii).enumerate() {
        if got < required * (1.0 - SCHEDULE_TOLERANCE) {
            return Err(ExtendError::ScheduleMismatch { level: i + 1, required, got });
        }
    }

    let leaf_bound = tree.leaf_bound.unwrap_or(report.level_diameters[tree.m - 1]);
    let ctx = Context {
        space,
        tree: &tree,
        schedule: &schedule,
        mint: VertexMint::new(),
        leaf_bound,
        leaf_reach: schedule.leaf_radius.unwrap_or(f64::INFINITY),
    };
    let root = tree.root().expect("validated tree");
    let mut stats = ExtendStats::default();
    let empty = PartitionOfUnity::empty(space.len());
    let (values, bound) = ctx.extend_node(root, &empty, 0.0, epsilon, &mut stats)?;
    let mut pou = empty;
    for (x, p) in values {
        pou.set(x, p);
    }
    if pou.domain_len() != space.len() {
        return Err(ExtendError::PostconditionFailed(format!(
            "certificate covers {} of {} points",
            pou.domain_len(),
            space.len()
        )));
    }

    let lipschitz = lipschitz_check(space, &pou, epsilon, epsilon, CheckMode::Restricted)?;
    let cobounded = cobounded_check(space, &pou, bound);
    let certificate = Certificate { pou, bound, schedule, tree: report, truncated_at, lipschitz, cobounded, stats };
    if certificate.pass() {
        Ok(certificate)
    } else {
        Err(ExtendError::VerificationFailed(Box::new(certificate)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covers::brick_tree;
    use crate::extend::default_modulus;

    fn path(n: usize) -> FiniteMetricSpace {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        FiniteMetricSpace::from_graph(n, &edges).unwrap()
    }

    #[test]
    fn bounded_space_gets_a_constant_certificate() {
        let p = path(30);
        let tree = DecompositionTree::trivial(30, Some(29.0));
        let cert = build_certificate(&p, &tree, &CertificateConfig::new(0.5, default_modulus())).unwrap();
        assert_eq!(cert.pou.carrier_vertices().len(), 1);
        assert_eq!(cert.bound, 29.0);
        assert_eq!(cert.lipschitz.worst_slack, Some(0.5 * 1.0 + 0.5));
        assert_eq!(cert.stats.branch1, 1);
    }

    #[test]
    fn interval_tree_certifies() {
        let p = path(800);
        let config = CertificateConfig::new(0.2, Modulus::Linear(4.0));
        let tree = brick_tree(&p, &[159.0], 160.0).unwrap();
        let cert = build_certificate(&p, &tree, &config).unwrap();
        assert!(cert.pass());
        assert!(cert.stats.branch1 > 0 && cert.stats.branch2 > 0);
        assert!(cert.bound >= cert.cobounded.tight_bound);
        assert_eq!(cert.stats.budget_shortfalls, 0);
    }

    #[test]
    fn radii_below_schedule_are_rejected() {
        let p = path(800);
        let config = CertificateConfig::new(0.2, Modulus::Linear(4.0));
        let tree = brick_tree(&p, &[100.0], 160.0).unwrap();
        assert!(matches!(
            build_certificate(&p, &tree, &config),
            Err(ExtendError::ScheduleMismatch { level: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_epsilon_and_invalid_trees() {
        let p = path(10);
        let tree = DecompositionTree::trivial(10, Some(3.0));
        let config = CertificateConfig::new(0.5, default_modulus());
        assert!(matches!(build_certificate(&p, &tree, &config), Err(ExtendError::InvalidTree(_))));
        let config = CertificateConfig::new(2.0, default_modulus());
        assert_eq!(build_certificate(&p, &tree, &config), Err(ExtendError::BadEpsilon(2.0)));
    }
}
