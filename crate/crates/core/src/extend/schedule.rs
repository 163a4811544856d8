use serde::Serialize;

use super::{ExtendError, Modulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// Every radius sized for the smallest budget reached anywhere in the
    /// recursion, `E^{P(1)}(ε)`.
    Conservative,
    /// `2/(R_i + 1) = E^{N(i)}(ε)`.
    Paper,
}

/// Composition counts, budgets and radii for a tree with `m` levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetSchedule {
    pub epsilon: f64,
    pub mode: ScheduleMode,
    pub modulus: Modulus,
    pub m: usize,
    pub arity: Vec<usize>,
    /// `N(1) = 0`, `N(i) = n_1 ⋯ n_{i−1}`.
    pub n: Vec<u64>,
    /// `P(m) = 1`, `P(i) = P(i+1)·n_i`.
    pub p: Vec<u64>,
    /// Disjointness radii `R_1 … R_{m−1}` required of the tree.
    pub radii: Vec<f64>,
    /// `R_m`, the reach of the bounded-piece step; absent for `m = 1`.
    pub leaf_radius: Option<f64>,
    /// Smallest budget at which work happens on level `i`: `E^{P(1)−P(i)}(ε)`.
    pub bottom: Vec<f64>,
    /// Smallest budget handed to a bounded piece.
    pub delta_leaf: f64,
}

/// Budgets and radii for a tree of the given arities (`m = arity.len() + 1`).
pub fn budget_schedule(arity: &[usize], epsilon: f64, modulus: &Modulus, mode: ScheduleMode) -> Result<BudgetSchedule, ExtendError> {
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(ExtendError::BadEpsilon(epsilon));
    }
    if arity.contains(&0) {
        return Err(ExtendError::BadParams("arities must be at least 1".into()));
    }
    let m = arity.len() + 1;
    let overflow = || ExtendError::BadParams("arity products overflow".into());

    let mut n = vec![0u64; m];
    let mut prod = 1u64;
    for i in 1..m {
        prod = prod.checked_mul(arity[i - 1] as u64).ok_or_else(overflow)?;
        n[i] = prod;
    }
    let mut p = vec![1u64; m];
    for i in (0..m - 1).rev() {
        p[i] = p[i + 1].checked_mul(arity[i] as u64).ok_or_else(overflow)?;
    }

    let at_level = |level: usize, k: u64| {
        modulus.iterate(epsilon, k).map_err(|e| match e {
            ExtendError::Underflow { iterations, log10, message, .. } => {
                ExtendError::Underflow { level, iterations, log10, message }
            }
            e => e,
        })
    };
    let radius = |budget: f64| 2.0 / budget - 1.0;

    let mut bottom = Vec::with_capacity(m);
    for i in 0..m {
        bottom.push(at_level(i + 1, p[0] - p[i])?);
    }
    let all_radii: Vec<f64> = match mode {
        ScheduleMode::Conservative => {
            let floor = at_level(1, p[0])?;
            vec![radius(floor); m]
        }
        ScheduleMode::Paper => (0..m).map(|i| at_level(i + 1, n[i]).map(radius)).collect::<Result<_, _>>()?,
    };

    Ok(BudgetSchedule {
        epsilon,
        mode,
        modulus: modulus.clone(),
        m,
        arity: arity.to_vec(),
        n,
        p,
        radii: all_radii[..m - 1].to_vec(),
        leaf_radius: (m > 1).then(|| all_radii[m - 1]),
        delta_leaf: bottom[m - 1],
        bottom,
    })
}

impl BudgetSchedule {
    /// Required radius for disjointness at level `i` (1-based, `i < m`) or
    /// the leaf reach at `i = m`.
    pub fn radius(&self, level: usize) -> Option<f64> {
        if level < self.m {
            self.radii.get(level - 1).copied()
        } else {
            self.leaf_radius
        }
    }
}
