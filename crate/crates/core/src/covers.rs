//! Decomposition data: R-disjoint families at one scale, the point-finite
//! cover transform, and nested decomposition trees.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{Boundary, FiniteMetricSpace, MetricError, PointSubset};
use crate::verify::{
    lebesgue_check, multiplicity, r_disjoint_check, uniformly_bounded_check, BoundedReport, CoverFamily, CrossPair,
    LebesgueReport, MultiplicityReport, VerifyError, BOUND_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoversError {
    #[error("level {level} is not 2s-disjoint: points {} and {} are {} apart", .witness.x, .witness.y, .witness.distance)]
    NotTwoSDisjoint { level: usize, witness: CrossPair },
    #[error("point {0} is not covered")]
    NotACover(usize),
    #[error("space is not a grid: {0}")]
    NotAGrid(String),
    #[error("block scale {block_scale} must exceed the disjointness radius {radius}")]
    ScaleTooSmall { block_scale: f64, radius: f64 },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Carves `X` into pieces of diameter at most `target_diam` and groups them
/// into `R`-disjoint families by greedy coloring.
pub fn greedy_decomposition(space: &FiniteMetricSpace, r: f64, target_diam: f64) -> Result<Vec<CoverFamily>, CoversError> {
    if !(target_diam > 0.0) {
        return Err(CoversError::BadParams(format!("target diameter must be positive, got {target_diam}")));
    }
    let n = space.len();
    let mut piece_of = vec![usize::MAX; n];
    let mut pieces: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if piece_of[seed] != usize::MAX {
            continue;
        }
        let id = pieces.len();
        let mut piece = Vec::new();
        for (y, _) in space.ball(seed, target_diam / 2.0, Boundary::Closed) {
            if piece_of[y] == usize::MAX {
                piece_of[y] = id;
                piece.push(y);
            }
        }
        piece.sort_unstable();
        pieces.push(piece);
    }

    // Conflict edges between pieces at cross-distance ≤ R, lower id first.
    let edges: BTreeSet<(usize, usize)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let px = piece_of[x];
            let mut local = BTreeSet::new();
            for (y, _) in space.ball(x, r, Boundary::Closed) {
                let py = piece_of[y];
                if py != px {
                    local.insert((px.min(py), px.max(py)));
                }
            }
            local
        })
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    let mut lower: Vec<Vec<usize>> = vec![Vec::new(); pieces.len()];
    for &(a, b) in &edges {
        lower[b].push(a);
    }

    let mut color = vec![0usize; pieces.len()];
    let mut colors = 0;
    for p in 0..pieces.len() {
        let used: BTreeSet<usize> = lower[p].iter().map(|&q| color[q]).collect();
        let c = (0..).find(|c| !used.contains(c)).unwrap();
        color[p] = c;
        colors = colors.max(c + 1);
    }

    let mut families = vec![Vec::new(); colors];
    for (p, piece) in pieces.into_iter().enumerate() {
        families[color[p]].push(PointSubset::new(piece));
    }
    families
        .into_iter()
        .map(|members| Ok(CoverFamily::new(members)?.with_claims(Some(r), Some(target_diam))))
        .collect()
}

/// Levels built from a greedy `r`-net: one single-ball family `{B(x, r)}` per
/// net point, so each level is disjoint at every scale.
pub fn net_levels(space: &FiniteMetricSpace, r: f64) -> Result<Vec<CoverFamily>, CoversError> {
    if !(r > 0.0) {
        return Err(CoversError::BadParams(format!("net radius must be positive, got {r}")));
    }
    let mut covered = vec![false; space.len()];
    let mut levels = Vec::new();
    for x in 0..space.len() {
        if covered[x] {
            continue;
        }
        let ball = space.ball(x, r, Boundary::Open);
        for &(y, _) in &ball {
            covered[y] = true;
        }
        let member = PointSubset::new(ball.into_iter().map(|(y, _)| y).collect());
        levels.push(CoverFamily::new(vec![member])?);
    }
    Ok(levels)
}

/// Output of [`prop33_transform`] together with its post-hoc checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformReport {
    pub s: f64,
    pub levels: usize,
    pub input_bound: f64,
    pub lebesgue: LebesgueReport,
    pub multiplicity: MultiplicityReport,
    pub bounded: BoundedReport,
}

impl TransformReport {
    pub fn pass(&self) -> bool {
        self.lebesgue.pass && self.multiplicity.max <= self.levels && self.bounded.pass
    }
}

/// Turns `2s`-disjoint levels covering `X` into a point-finite cover: each
/// member of level `k` loses the open `s`-balls around members of earlier
/// levels and is then thickened by `s` (closed enlargement).
pub fn prop33_transform(
    space: &FiniteMetricSpace,
    levels: &[CoverFamily],
    s: f64,
) -> Result<(CoverFamily, TransformReport), CoversError> {
    if !(s > 0.0) {
        return Err(CoversError::BadParams(format!("s must be positive, got {s}")));
    }
    let n = space.len();
    let mut covered = vec![false; n];
    let mut input_bound: f64 = 0.0;
    for (k, level) in levels.iter().enumerate() {
        let report = r_disjoint_check(space, level, 2.0 * s)?;
        if !report.pass {
            return Err(CoversError::NotTwoSDisjoint { level: k, witness: report.witness.unwrap() });
        }
        for m in &level.members {
            for x in m.iter() {
                covered[x] = true;
            }
        }
        input_bound = input_bound.max(uniformly_bounded_check(space, level)?.max_diameter);
    }
    if let Some(x) = covered.iter().position(|&c| !c) {
        return Err(CoversError::NotACover(x));
    }

    let mut earlier = PointSubset::empty();
    let mut members = Vec::new();
    for level in levels {
        let carved: Vec<PointSubset> = level.members.iter().map(|u| u.difference(&earlier)).collect();
        for u in level.members.iter() {
            earlier = earlier.union(&space.set_ball(u, s)?);
        }
        for u in carved {
            if !u.is_empty() {
                members.push(space.set_enlargement(&u, s, Boundary::Closed)?);
            }
        }
    }
    let family = CoverFamily::new(members)?.with_claims(None, Some(input_bound + 2.0 * s));
    let report = TransformReport {
        s,
        levels: levels.len(),
        input_bound,
        lebesgue: match lebesgue_check(space, &family, s) {
            Ok(r) => r,
            Err(VerifyError::NotACover(x)) => LebesgueReport { radius: s, pass: false, witness: Some(x) },
            Err(e) => return Err(e.into()),
        },
        multiplicity: multiplicity(n, &family),
        bounded: uniformly_bounded_check(space, &family)?,
    };
    Ok((family, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub level: usize,
    pub members: PointSubset,
    /// Child node ids, grouped into families.
    #[serde(default)]
    pub families: Vec<Vec<usize>>,
}

/// Nested families `𝒱_1 = {X}, 𝒱_2, …, 𝒱_m`: every node at level `i < m`
/// is the union of at most `n_i` families of level-`(i+1)` nodes, each
/// family `R_i`-disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTree {
    pub m: usize,
    pub arity: Vec<usize>,
    pub radii: Vec<f64>,
    /// Claimed diameter bound `K` for the bounded level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_bound: Option<f64>,
    pub nodes: Vec<TreeNode>,
}

/// Outcome of [`tree_validate`]. Clause 0 flags malformed structure; clauses
/// 1–3 are the three defining conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeReport {
    pub pass: bool,
    pub violated_clause: Option<u8>,
    pub node: Option<usize>,
    pub message: Option<String>,
    pub witness: Option<CrossPair>,
    /// Largest member diameter at each level.
    pub level_diameters: Vec<f64>,
    /// First level whose members all fit inside `leaf_bound`.
    pub bounded_level: Option<usize>,
}

impl DecompositionTree {
    /// The single-node tree `{X}`.
    pub fn trivial(n: usize, leaf_bound: Option<f64>) -> Self {
        DecompositionTree {
            m: 1,
            arity: vec![],
            radii: vec![],
            leaf_bound,
            nodes: vec![TreeNode { id: 0, level: 1, members: PointSubset::all(n), families: vec![] }],
        }
    }

    pub fn node(&self, id: usize) -> Option<&TreeNode> {
        self.nodes.iter().find(|v| v.id == id)
    }

    pub fn root(&self) -> Option<&TreeNode> {
        self.nodes.iter().find(|v| v.level == 1)
    }

    pub fn level(&self, level: usize) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(move |v| v.level == level)
    }

    /// Cuts the tree at `level`: deeper nodes are dropped and nodes at
    /// `level` become leaves.
    pub fn truncate(&self, level: usize) -> Self {
        let level = level.clamp(1, self.m);
        let nodes = self
            .nodes
            .iter()
            .filter(|v| v.level <= level)
            .map(|v| TreeNode { families: if v.level == level { vec![] } else { v.families.clone() }, ..v.clone() })
            .collect();
        DecompositionTree {
            m: level,
            arity: self.arity[..level - 1].to_vec(),
            radii: self.radii[..level - 1].to_vec(),
            leaf_bound: self.leaf_bound,
            nodes,
        }
    }
}

fn tree_failure(clause: u8, node: Option<usize>, message: String, witness: Option<CrossPair>, diams: Vec<f64>) -> TreeReport {
    TreeReport {
        pass: false,
        violated_clause: Some(clause),
        node,
        message: Some(message),
        witness,
        level_diameters: diams,
        bounded_level: None,
    }
}

/// Checks the three defining conditions of a decomposition tree.
pub fn tree_validate(space: &FiniteMetricSpace, tree: &DecompositionTree) -> Result<TreeReport, CoversError> {
    let n = space.len();
    let malformed = |node: Option<usize>, msg: String| Ok(tree_failure(0, node, msg, None, vec![]));

    if tree.m == 0 || tree.arity.len() + 1 != tree.m || tree.radii.len() + 1 != tree.m {
        return malformed(None, format!("m = {} needs {} arities and radii", tree.m, tree.m.saturating_sub(1)));
    }
    let mut seen = BTreeSet::new();
    for v in &tree.nodes {
        if !seen.insert(v.id) {
            return malformed(Some(v.id), format!("duplicate node id {}", v.id));
        }
        if v.level == 0 || v.level > tree.m {
            return malformed(Some(v.id), format!("level {} outside 1..={}", v.level, tree.m));
        }
        space.check_subset(&v.members)?;
        if v.members.is_empty() {
            return malformed(Some(v.id), "node has no members".into());
        }
        if v.level == tree.m && !v.families.is_empty() {
            return malformed(Some(v.id), "leaf node has families".into());
        }
    }

    let diams: Vec<f64> = (1..=tree.m)
        .map(|l| {
            tree.level(l)
                .map(|v| space.diameter(&v.members))
                .try_fold(0.0f64, |a, d| d.map(|d| a.max(d)))
        })
        .collect::<Result<_, _>>()?;

    let roots: Vec<_> = tree.level(1).collect();
    if roots.len() != 1 || roots[0].members.len() != n {
        return Ok(tree_failure(1, roots.first().map(|v| v.id), "level 1 must be the single node X".into(), None, diams));
    }

    for v in &tree.nodes {
        if v.level == tree.m {
            continue;
        }
        let (arity, radius) = (tree.arity[v.level - 1], tree.radii[v.level - 1]);
        if v.families.len() > arity {
            let msg = format!("{} families exceed arity {}", v.families.len(), arity);
            return Ok(tree_failure(2, Some(v.id), msg, None, diams));
        }
        let mut union = PointSubset::empty();
        for family in &v.families {
            let mut members = Vec::with_capacity(family.len());
            for &c in family {
                let Some(child) = tree.node(c).filter(|c| c.level == v.level + 1) else {
                    return malformed(Some(v.id), format!("child {c} is not a level-{} node", v.level + 1));
                };
                union = union.union(&child.members);
                members.push(child.members.clone());
            }
            let report = r_disjoint_check(space, &CoverFamily::new(members)?, radius)?;
            if !report.pass {
                let w = report.witness.unwrap();
                let msg = format!("family is not {radius}-disjoint: d({}, {}) = {}", w.x, w.y, w.distance);
                return Ok(tree_failure(2, Some(v.id), msg, Some(w), diams));
            }
        }
        if union != v.members {
            let msg = "families do not cover the node exactly".to_string();
            return Ok(tree_failure(2, Some(v.id), msg, None, diams));
        }
    }

    let bound = tree.leaf_bound.unwrap_or(diams[tree.m - 1]);
    let bounded_level = diams.iter().position(|&d| d <= bound + BOUND_TOLERANCE).map(|i| i + 1);
    if diams[tree.m - 1] > bound + BOUND_TOLERANCE {
        let msg = format!("leaf diameter {} exceeds the bound {bound}", diams[tree.m - 1]);
        return Ok(tree_failure(3, None, msg, None, diams));
    }
    Ok(TreeReport {
        pass: true,
        violated_clause: None,
        node: None,
        message: None,
        witness: None,
        level_diameters: diams,
        bounded_level,
    })
}

/// Shape of a grid space with ids `row·width + col` and ℓ¹ path metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
}

/// Recognizes paths (`height = 1`) and 2-dimensional grids from the metric.
pub fn detect_grid(space: &FiniteMetricSpace) -> Result<GridShape, CoversError> {
    let n = space.len();
    let width = (1..n).find(|&j| space.distance(0, j) < j as f64).unwrap_or(n);
    if !n.is_multiple_of(width) {
        return Err(CoversError::NotAGrid(format!("{n} points do not fill rows of width {width}")));
    }
    let shape = GridShape { width, height: n / width };
    let bad = (0..n).into_par_iter().find_first(|&x| {
        let row = space.row(x);
        (0..n).any(|y| row[y] != shape.l1(x, y))
    });
    match bad {
        Some(x) => {
            let row = space.row(x);
            let y = (0..n).find(|&y| row[y] != shape.l1(x, y)).unwrap();
            Err(CoversError::NotAGrid(format!("d({x}, {y}) = {} differs from the grid distance {}", row[y], shape.l1(x, y))))
        }
        None => Ok(shape),
    }
}

impl GridShape {
    fn l1(&self, x: usize, y: usize) -> f64 {
        let (rx, cx) = (x / self.width, x % self.width);
        let (ry, cy) = (y / self.width, y % self.width);
        (rx.abs_diff(ry) + cx.abs_diff(cy)) as f64
    }
}

/// Brick decomposition of a path or grid: intervals of `block_scale` points in
/// two alternating families on a path, and half-shifted `2B × B` bricks in
/// three families on a 2-dimensional grid. A space no wider than
/// `block_scale` gets the one-level tree.
pub fn brick_tree(space: &FiniteMetricSpace, radii: &[f64], block_scale: f64) -> Result<DecompositionTree, CoversError> {
    let shape = detect_grid(space)?;
    let n = space.len();
    let r1 = *radii.first().ok_or_else(|| CoversError::BadParams("need the level-1 radius".into()))?;
    if block_scale <= r1 {
        return Err(CoversError::ScaleTooSmall { block_scale, radius: r1 });
    }
    let b = block_scale.floor() as usize;
    let diam = (shape.width - 1 + shape.height - 1) as f64;
    if diam <= block_scale {
        return Ok(DecompositionTree::trivial(n, Some(diam)));
    }

    // (family, members) per brick, bricks ordered by first point.
    let mut bricks: Vec<(usize, Vec<usize>)> = Vec::new();
    if shape.height == 1 {
        for (k, lo) in (0..n).step_by(b).enumerate() {
            bricks.push((k % 2, (lo..(lo + b).min(n)).collect()));
        }
    } else {
        let len = 2 * b;
        let mut index: std::collections::BTreeMap<(i64, usize), usize> = Default::default();
        for x in 0..n {
            let (row, col) = (x / shape.width, x % shape.width);
            let band = row / b;
            let i = (col + band * b).div_euclid(len) as i64;
            let slot = *index.entry((i, band)).or_insert_with(|| {
                bricks.push(((i as usize + band) % 3, Vec::new()));
                bricks.len() - 1
            });
            bricks[slot].1.push(x);
        }
    }

    let families_used = bricks.iter().map(|b| b.0).max().unwrap() + 1;
    let mut nodes = vec![TreeNode { id: 0, level: 1, members: PointSubset::all(n), families: vec![vec![]; families_used] }];
    let mut leaf_bound: f64 = 0.0;
    for (family, members) in bricks {
        let id = nodes.len();
        let members = PointSubset::new(members);
        leaf_bound = leaf_bound.max(space.diameter(&members)?);
        nodes[0].families[family].push(id);
        nodes.push(TreeNode { id, level: 2, members, families: vec![] });
    }
    Ok(DecompositionTree {
        m: 2,
        arity: vec![if shape.height == 1 { 2 } else { 3 }],
        radii: vec![r1],
        leaf_bound: Some(leaf_bound),
        nodes,
    })
}
