use proptest::prelude::*;
use sparse_lqr_core::sparsity::{
    g_value, nnz, project_block, project_l0, project_l1, shrink, shrink_block, shrink_scalar,
};
use sparse_lqr_core::{Ball, BlockPartition, Mat, Regularizer};

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Mat> {
    (1..=max_rows, 1..=max_cols)
        .prop_flat_map(|(r, c)| prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| Mat::from_vec(r, c, v)))
}

fn pair(max_rows: usize, max_cols: usize) -> impl Strategy<Value = (Mat, Mat)> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        let v = || prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| Mat::from_vec(r, c, v));
        (v(), v())
    })
}

/// Random partition of `n` into contiguous pieces.
fn sizes(n: usize, cuts: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut run = 1;
    for i in 1..n {
        if cuts[i % cuts.len()] {
            out.push(run);
            run = 1;
        } else {
            run += 1;
        }
    }
    out.push(run);
    out
}

fn partition_for(k: &Mat, cuts: &[bool]) -> BlockPartition {
    let (half_a, half_b) = cuts.split_at(cuts.len() / 2);
    BlockPartition::new(sizes(k.nrows(), half_a), sizes(k.ncols(), half_b)).unwrap()
}

/// ℓ1 projection by bisection on the threshold λ of Σ max(|v| − λ, 0) = s.
fn l1_bisection(v: &Mat, s: f64) -> Mat {
    let total: f64 = v.iter().map(|x| x.abs()).sum();
    if total <= s {
        return v.clone();
    }
    let mass = |lam: f64| v.iter().map(|x| (x.abs() - lam).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, v.amax());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    v.map(|x| x.signum() * (x.abs() - lam).max(0.0))
}

/// Best ℓ0 approximation by enumerating every support of size ≤ s; returns
/// the squared distance.
fn l0_brute_force(v: &Mat, s: usize) -> f64 {
    let n = v.len();
    let vals: Vec<f64> = v.iter().copied().collect();
    let total: f64 = vals.iter().map(|x| x * x).sum();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > s {
            continue;
        }
        let kept: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| vals[i] * vals[i]).sum();
        best = best.min(total - kept);
    }
    best
}

fn prox_objective(x: &Mat, v: &Mat, a: f64) -> f64 {
    0.5 * (x - v).norm_squared() + a * x.iter().map(|e| e.abs()).sum::<f64>()
}

fn block_prox_objective(x: &Mat, v: &Mat, a: f64, p: &BlockPartition) -> f64 {
    0.5 * (x - v).norm_squared() + a * g_value(x, &Regularizer::block_l1(), p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn scalar_shrink_beats_grid(v in -5.0f64..5.0, a in 0.0f64..3.0) {
        let x = shrink_scalar(v, a);
        let obj = |t: f64| 0.5 * (t - v) * (t - v) + a * t.abs();
        for i in -2000..=2000 {
            let t = i as f64 * 0.005;
            prop_assert!(obj(x) <= obj(t) + 1e-12);
        }
    }

    #[test]
    fn shrink_minimizes_prox_objective(v in matrix(4, 4), a in 0.0f64..5.0, dir in matrix(4, 4)) {
        let x = shrink(&v, a);
        if dir.shape() == v.shape() {
            for t in [1e-3, 1e-2, 0.1, 1.0] {
                let y = &x + &dir * t;
                prop_assert!(prox_objective(&x, &v, a) <= prox_objective(&y, &v, a) + 1e-10);
            }
        }
    }

    #[test]
    fn block_shrink_minimizes_prox_objective(
        v in matrix(5, 5), a in 0.0f64..5.0, cuts in prop::collection::vec(any::<bool>(), 8), dir in matrix(5, 5),
    ) {
        let p = partition_for(&v, &cuts);
        let x = shrink_block(&v, a, &p).unwrap();
        if dir.shape() == v.shape() {
            for t in [1e-3, 1e-2, 0.1, 1.0] {
                let y = &x + &dir * t;
                prop_assert!(block_prox_objective(&x, &v, a, &p) <= block_prox_objective(&y, &v, a, &p) + 1e-10);
            }
        }
    }

    #[test]
    fn l1_projection_matches_bisection(v in matrix(6, 6), s in 0.01f64..30.0) {
        let x = project_l1(&v, s).unwrap();
        let oracle = l1_bisection(&v, s);
        prop_assert!((&x - &oracle).amax() <= 1e-8, "{}", (&x - &oracle).amax());
    }

    #[test]
    fn l1_projection_is_closest_point(v in matrix(5, 5), s in 0.01f64..30.0, z in matrix(5, 5)) {
        let x = project_l1(&v, s).unwrap();
        prop_assert!(Ball::L1(s).contains(&x, &BlockPartition::elementwise(v.nrows(), v.ncols()).unwrap()).unwrap());
        // Radially scaled point lies in the ball, so it cannot be closer.
        let l1: f64 = v.iter().map(|e| e.abs()).sum();
        if l1 > s {
            let radial = &v * (s / l1);
            prop_assert!((&x - &v).norm() <= (&radial - &v).norm() + 1e-10);
        }
        // Variational inequality against any feasible z.
        if z.shape() == v.shape() {
            let zl1: f64 = z.iter().map(|e| e.abs()).sum();
            let zf = if zl1 > s { &z * (s / zl1) } else { z.clone() };
            prop_assert!((&v - &x).dot(&(&zf - &x)) <= 1e-9 * (1.0 + v.norm_squared()));
        }
    }

    #[test]
    fn convex_projections_are_idempotent_and_nonexpansive(
        (a, b) in pair(5, 5), s in 0.01f64..30.0, cuts in prop::collection::vec(any::<bool>(), 8),
    ) {
        let p = partition_for(&a, &cuts);
        for ball in [Ball::L1(s), Ball::Block(s)] {
            let pa = ball.project(&a, &p).unwrap();
            let pb = ball.project(&b, &p).unwrap();
            prop_assert!(ball.contains(&pa, &p).unwrap());
            let again = ball.project(&pa, &p).unwrap();
            prop_assert!((&again - &pa).amax() <= 1e-12 * (1.0 + pa.amax()));
            prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn l0_projection_is_idempotent(v in matrix(5, 5), s in 1usize..25) {
        let s = s.min(v.len());
        let x = project_l0(&v, s).unwrap();
        prop_assert!(nnz(&x) <= s);
        prop_assert_eq!(project_l0(&x, s).unwrap(), x);
    }

    #[test]
    fn unit_blocks_match_l1_exactly(v in matrix(6, 6), s in 0.01f64..30.0) {
        let p = BlockPartition::elementwise(v.nrows(), v.ncols()).unwrap();
        prop_assert_eq!(project_block(&v, s, &p).unwrap(), project_l1(&v, s).unwrap());
    }

    #[test]
    fn block_projection_keeps_block_directions(
        v in matrix(6, 6), s in 0.01f64..30.0, cuts in prop::collection::vec(any::<bool>(), 10),
    ) {
        let p = partition_for(&v, &cuts);
        let x = project_block(&v, s, &p).unwrap();
        let before = p.block_norms(&v).unwrap();
        let after = p.block_norms(&x).unwrap();
        let total: f64 = after.iter().sum();
        prop_assert!(total <= s * (1.0 + 1e-10) || (&x - &v).amax() == 0.0);
        for i in 0..p.row_blocks() {
            for j in 0..p.col_blocks() {
                prop_assert!(after[(i, j)] <= before[(i, j)] * (1.0 + 1e-12));
                if after[(i, j)] > 0.0 {
                    // Each surviving block is a nonnegative multiple of the input block.
                    let scale = after[(i, j)] / before[(i, j)];
                    for r in p.row_range(i) {
                        for c in p.col_range(j) {
                            prop_assert!((x[(r, c)] - v[(r, c)] * scale).abs() <= 1e-12 * (1.0 + v[(r, c)].abs()));
                        }
                    }
                }
            }
        }
        // Shrinkage is uniform across blocks: reductions agree wherever a
        // block survives.
        let mut drop: Option<f64> = None;
        for (b, a) in before.iter().zip(after.iter()) {
            if *a > 0.0 {
                let d = b - a;
                if let Some(d0) = drop {
                    prop_assert!((d - d0).abs() <= 1e-9 * (1.0 + b));
                }
                drop = Some(d);
            }
        }
    }
}

#[test]
fn l0_projection_matches_brute_force() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
    for m in 1..=4 {
        for n in 1..=4 {
            if m * n > 12 {
                continue;
            }
            for _ in 0..30 {
                // Small integers make ties common.
                let v = Mat::from_fn(m, n, |_, _| rng.random_range(-3i32..=3) as f64);
                for s in 1..=m * n {
                    let x = project_l0(&v, s).unwrap();
                    assert!(nnz(&x) <= s);
                    for (xe, ve) in x.iter().zip(v.iter()) {
                        assert!(*xe == 0.0 || xe == ve);
                    }
                    let dist = (&x - &v).norm_squared();
                    assert_eq!(dist, l0_brute_force(&v, s), "{v} s = {s}");
                }
            }
        }
    }
}

#[test]
fn l0_ties_go_to_lowest_row_major_index() {
    let v = Mat::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 0.5]);
    let x = project_l0(&v, 2).unwrap();
    assert_eq!(x, Mat::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]));
}

#[test]
fn projections_reject_bad_radii() {
    let v = Mat::from_element(2, 2, 1.0);
    assert!(project_l0(&v, 0).is_err());
    assert!(project_l0(&v, 5).is_err());
    assert!(project_l1(&v, 0.0).is_err());
    assert!(project_l1(&v, f64::INFINITY).is_err());
    assert!(project_block(&v, -1.0, &BlockPartition::whole(2, 2).unwrap()).is_err());
}
