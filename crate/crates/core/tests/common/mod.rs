#![allow(dead_code)]

use coarse_cert::generate;
use coarse_cert::{FiniteMetricSpace, PointSubset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A path, grid or connected random geometric graph (scaled to unit-ish
/// edge lengths), chosen by `seed`.
pub fn space(seed: u64, rng: &mut ChaCha8Rng) -> FiniteMetricSpace {
    match seed % 3 {
        0 => generate::path(rng.gen_range(30..=300)).unwrap(),
        1 => generate::grid(rng.gen_range(4..=20), rng.gen_range(4..=20)).unwrap(),
        _ => {
            let n = rng.gen_range(40..=150);
            (0u64..)
                .find_map(|k| generate::random_geometric(n, 0.25, seed * 1000 + k).ok())
                .map(|g| scaled(&g, 10.0))
                .unwrap()
        }
    }
}

fn scaled(g: &FiniteMetricSpace, factor: f64) -> FiniteMetricSpace {
    let edges: Vec<_> = g
        .adjacency()
        .unwrap()
        .iter()
        .enumerate()
        .flat_map(|(u, out)| out.iter().filter(move |e| u < e.0).map(move |&(v, w)| (u, v, w * factor)))
        .collect();
    FiniteMetricSpace::from_graph(g.len(), &edges).unwrap()
}

/// A nonempty proper-or-full subset: a closed ball or a random sample.
pub fn subset(space: &FiniteMetricSpace, rng: &mut ChaCha8Rng) -> PointSubset {
    let n = space.len();
    if rng.gen_bool(0.5) {
        let c = rng.gen_range(0..n);
        let row = space.row(c);
        let r = rng.gen_range(0.0..=row.iter().cloned().fold(0.0, f64::max) / 2.0);
        (0..n).filter(|&y| row[y] <= r).collect()
    } else {
        let p = rng.gen_range(0.05..0.9);
        let s: PointSubset = (0..n).filter(|_| rng.gen_bool(p)).collect();
        if s.is_empty() {
            PointSubset::new(vec![rng.gen_range(0..n)])
        } else {
            s
        }
    }
}
