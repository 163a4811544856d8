//! End-to-end certificates over decomposition trees.

use coarse_cert::covers::{brick_tree, DecompositionTree, TreeNode};
use coarse_cert::extend::{budget_schedule, build_certificate, CertificateConfig, ExtendError, Modulus, ScheduleMode};
use coarse_cert::generate::{grid, path};
use coarse_cert::verify::{lipschitz_check, CheckMode};
use coarse_cert::PointSubset;

/// Three-level tree on `0..n`: blocks of `outer` points split into blocks of
/// `inner` points, alternating two families at each level.
fn nested_interval_tree(n: usize, outer: usize, inner: usize, radii: [f64; 2]) -> DecompositionTree {
    let mut nodes = vec![TreeNode { id: 0, level: 1, members: PointSubset::all(n), families: vec![vec![], vec![]] }];
    for (k, lo) in (0..n).step_by(outer).enumerate() {
        let hi = (lo + outer).min(n);
        let id = nodes.len();
        nodes[0].families[k % 2].push(id);
        nodes.push(TreeNode { id, level: 2, members: PointSubset::range(lo, hi), families: vec![vec![], vec![]] });
        for (j, a) in (lo..hi).step_by(inner).enumerate() {
            let child = nodes.len();
            nodes[id].families[j % 2].push(child);
            nodes.push(TreeNode { id: child, level: 3, members: PointSubset::range(a, (a + inner).min(hi)), families: vec![] });
        }
    }
    DecompositionTree { m: 3, arity: vec![2, 2], radii: radii.to_vec(), leaf_bound: Some(inner as f64 - 1.0), nodes }
}

#[test]
fn grid_certificate() {
    let g = grid(40, 40).unwrap();
    let config = CertificateConfig::new(1.5, Modulus::Linear(2.0));
    let schedule = budget_schedule(&[3], 1.5, &config.modulus, ScheduleMode::Conservative).unwrap();
    let r = schedule.radii[0].ceil();
    let tree = brick_tree(&g, &[r], r + 1.0).unwrap();
    assert_eq!(tree.nodes[0].families.len(), 3);
    let cert = build_certificate(&g, &tree, &config).unwrap();
    assert!(cert.stats.branch1 > 0 && cert.stats.branch2 > 0);
    assert!(lipschitz_check(&g, &cert.pou, 1.5, 1.5, CheckMode::Full).unwrap().pass);
    assert!(cert.cobounded.tight_bound <= cert.bound);
}

#[test]
fn three_level_certificate() {
    let p = path(528).unwrap();
    let config = CertificateConfig::new(1.5, Modulus::Linear(2.0));
    let schedule = budget_schedule(&[2, 2], 1.5, &config.modulus, ScheduleMode::Conservative).unwrap();
    assert_eq!(schedule.p, vec![4, 2, 1]);
    let r = schedule.radii[0].ceil();
    let tree = nested_interval_tree(528, 88, 22, [r, r]);
    let cert = build_certificate(&p, &tree, &config).unwrap();
    assert_eq!(cert.stats.glues, 2 + 2 * 6);
    assert!(lipschitz_check(&p, &cert.pou, 1.5, 1.5, CheckMode::Full).unwrap().pass);

    let short = nested_interval_tree(528, 88, 22, [r - 1.0, r]);
    assert!(matches!(build_certificate(&p, &short, &config), Err(ExtendError::ScheduleMismatch { level: 1, .. })));
}

#[test]
fn paper_schedule_is_post_verified() {
    let p = path(640).unwrap();
    let config = CertificateConfig::new(0.5, Modulus::Linear(2.0)).with_mode(ScheduleMode::Paper);
    let schedule = budget_schedule(&[2, 2], 0.5, &config.modulus, ScheduleMode::Paper).unwrap();
    assert_eq!(schedule.radii, vec![3.0, 15.0]);
    assert_eq!(schedule.leaf_radius, Some(63.0));
    let tree = nested_interval_tree(640, 32, 16, [3.0, 15.0]);
    let cert = build_certificate(&p, &tree, &config).unwrap();
    // Some glues run below 2/(R+1) for the declared radii; the verifier still passes the result.
    assert!(cert.stats.budget_shortfalls > 0);
    assert!(lipschitz_check(&p, &cert.pou, 0.5, 0.5, CheckMode::Full).unwrap().pass);

    let conservative = CertificateConfig::new(0.5, Modulus::Linear(2.0));
    assert!(matches!(
        build_certificate(&p, &tree, &conservative),
        Err(ExtendError::ScheduleMismatch { level: 1, .. })
    ));
}
