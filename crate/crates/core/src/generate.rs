//! Deterministic generators for test spaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metric::{FiniteMetricSpace, MetricError, PointSubset};
use crate::simplex::{l1_distance, PartitionOfUnity, SimplexPoint, VertexId};

/// `P_n`: points `0..n` on a line with unit edges.
pub fn path(n: usize) -> Result<FiniteMetricSpace, MetricError> {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
    FiniteMetricSpace::from_graph(n, &edges)
}

/// `width × height` grid graph with unit edges (the ℓ¹ metric on ℤ²),
/// points numbered row-major.
pub fn grid(width: usize, height: usize) -> Result<FiniteMetricSpace, MetricError> {
    let id = |r: usize, c: usize| r * width + c;
    let mut edges = Vec::with_capacity(2 * width * height);
    for r in 0..height {
        for c in 0..width {
            if c + 1 < width {
                edges.push((id(r, c), id(r, c + 1), 1.0));
            }
            if r + 1 < height {
                edges.push((id(r, c), id(r + 1, c), 1.0));
            }
        }
    }
    FiniteMetricSpace::from_graph(width * height, &edges)
}

/// Random recursive tree: point `i > 0` hangs off a uniform earlier point.
pub fn tree_graph(n: usize, seed: u64) -> Result<FiniteMetricSpace, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<_> = (1..n).map(|i| (rng.gen_range(0..i), i, 1.0)).collect();
    FiniteMetricSpace::from_graph(n, &edges)
}

/// `n` uniform points in the unit square joined when within `radius`,
/// weighted by Euclidean length. Fails with `Disconnected` if the graph
/// falls apart.
pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<FiniteMetricSpace, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
            if d <= radius && d > 0.0 {
                edges.push((i, j, d));
            }
        }
    }
    FiniteMetricSpace::from_graph(n, &edges)
}

/// Random `(δ, δ)`-Lipschitz partition of unity on `domain`, using vertices
/// of `namespace`.
///
/// A few truncated bumps `max(0, 1 − d(x, c_j)/s)` around random centres
/// are normalized (with a constant vertex where no bump reaches) and mixed
/// with that constant vertex at the largest weight the `(δ, δ)` bound
/// allows, scaled by a random factor in `[0.5, 1)`.
pub fn lipschitz_pou(
    space: &FiniteMetricSpace,
    domain: &PointSubset,
    delta: f64,
    namespace: u64,
    seed: u64,
) -> Result<PartitionOfUnity, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = domain.as_slice();
    if points.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let k = rng.gen_range(1..=4u64);
    let base = VertexId::new(namespace, k);
    let diam = space.diameter(domain)?.max(1.0);
    let centres: Vec<usize> = (0..k).map(|_| points[rng.gen_range(0..points.len())]).collect();
    let scales: Vec<f64> = (0..k).map(|_| rng.gen_range(1.0..=diam.max(1.0 + 1e-9))).collect();

    let mut bumps = Vec::with_capacity(points.len());
    for &x in points {
        let weights: Vec<(VertexId, f64)> = centres
            .iter()
            .zip(&scales)
            .enumerate()
            .map(|(j, (&c, &s))| (VertexId::new(namespace, j as u64), 1.0 - space.distance(x, c) / s))
            .filter(|w| w.1 > 0.0)
            .collect();
        let total: f64 = weights.iter().map(|w| w.1).sum();
        let h = if weights.is_empty() {
            SimplexPoint::vertex(base)
        } else {
            SimplexPoint::new(weights.into_iter().map(|(v, w)| (v, w / total)).collect()).expect("normalized bumps")
        };
        bumps.push(h);
    }

    let mut t: f64 = 1.0;
    for (i, &x) in points.iter().enumerate() {
        for (j, &y) in points.iter().enumerate().skip(i + 1) {
            let diff = l1_distance(&bumps[i], &bumps[j]);
            if diff > 0.0 {
                t = t.min(delta * (space.distance(x, y) + 1.0) / diff);
            }
        }
    }
    let t = t * rng.gen_range(0.5..1.0);
    let constant = SimplexPoint::vertex(base);
    let entries = points.iter().zip(&bumps).map(|(&x, h)| (x, crate::simplex::convex_combine(t, h, &constant)));
    Ok(PartitionOfUnity::from_entries(space.len(), entries).expect("points come from the space"))
}
