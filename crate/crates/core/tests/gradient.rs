mod common;

use common::*;
use sparse_lqr_core::linalg::{dual_lyapunov_residual, lyapunov_residual, min_symmetric_eigenvalue};
use sparse_lqr_core::objective::{closed_loop, eval_l, eval_p};
use sparse_lqr_core::{cost_j, grad_j, BlockPartition, Mat, Plant};

/// Central differences of `cost_j`, Richardson-extrapolated over steps h
/// and 2h so the h² truncation term cancels.
fn fd_gradient(plant: &Plant, k: &Mat) -> Mat {
    let central = |r: usize, c: usize, h: f64| {
        let mut kp = k.clone();
        kp[(r, c)] += h;
        let mut km = k.clone();
        km[(r, c)] -= h;
        (cost_j(plant, &kp).unwrap() - cost_j(plant, &km).unwrap()) / (2.0 * h)
    };
    Mat::from_fn(k.nrows(), k.ncols(), |r, c| {
        let h = 1e-5 * k[(r, c)].abs().max(1.0);
        (4.0 * central(r, c, h) - central(r, c, 2.0 * h)) / 3.0
    })
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = rng(21);
    let mut worst = 0f64;
    for trial in 0..100 {
        let n = 1 + trial % 6;
        let m = 1 + (trial / 6) % 6;
        let plant = moderate_plant(&mut rng, n, m, n);
        let k = random_stabilizing_gain(&mut rng, &plant);
        let g = grad_j(&plant, &k).unwrap();
        let fd = fd_gradient(&plant, &k);
        let err = rel_err(&g, &fd);
        worst = worst.max(err);
        assert!(err <= 1e-5, "trial {trial} (n {n}, m {m}): {err}");
    }
    assert!(worst.is_finite());
}

#[test]
fn p_and_l_solve_their_equations() {
    let mut rng = rng(22);
    for trial in 0..100 {
        let n = 1 + trial % 6;
        let m = 1 + (trial / 6) % 6;
        let plant = moderate_plant(&mut rng, n, m, n);
        let k = random_stabilizing_gain(&mut rng, &plant);
        let acl = closed_loop(&plant, &k).unwrap();
        let p = eval_p(&plant, &k).unwrap();
        let l = eval_l(&plant, &k).unwrap();

        let rhs_p = plant.q() + k.transpose() * plant.r() * &k;
        let rhs_l = plant.b2() * plant.b2().transpose();
        assert!(
            lyapunov_residual(&acl, &p, &rhs_p) <= 1e-8 * rhs_p.norm().max(1.0),
            "trial {trial}"
        );
        assert!(
            dual_lyapunov_residual(&acl, &l, &rhs_l) <= 1e-8 * rhs_l.norm().max(1.0),
            "trial {trial}"
        );
        assert!(rel_err(&p, &kron_lyapunov(&acl, &rhs_p)) <= 1e-8, "trial {trial}");
        assert!(rel_err(&l, &kron_lyapunov(&acl.transpose(), &rhs_l)) <= 1e-8);

        // Q ⪰ 0.1·I makes P positive definite.
        assert!(min_symmetric_eigenvalue(&p) > 0.0);
        assert!(min_symmetric_eigenvalue(&l) >= -1e-10 * l.norm().max(1.0));

        let j = cost_j(&plant, &k).unwrap();
        let trace = (plant.b2().transpose() * &p * plant.b2()).trace();
        assert!((j - trace).abs() <= 1e-12 * j.abs().max(1.0));
        let dual = (&l * &rhs_p).trace();
        assert!(
            (j - dual).abs() <= 1e-8 * j.abs().max(1.0),
            "trial {trial}: {j} vs {dual}"
        );
    }
}

fn permutation(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Mat {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    Mat::from_fn(n, n, |r, c| if idx[r] == c { 1.0 } else { 0.0 })
}

#[test]
fn cost_and_gradient_are_invariant_to_state_relabeling() {
    let mut rng = rng(23);
    for trial in 0..50 {
        let n = 2 + trial % 5;
        let m = 1 + trial % 3;
        let plant = moderate_plant(&mut rng, n, m, n);
        let k = random_stabilizing_gain(&mut rng, &plant);
        let pi = permutation(&mut rng, n);
        let permuted = Plant::new(
            &pi * plant.a() * pi.transpose(),
            &pi * plant.b1(),
            &pi * plant.b2(),
            &pi * plant.q() * pi.transpose(),
            plant.r().clone(),
            BlockPartition::whole(m, n).unwrap(),
        )
        .unwrap();
        let kp = &k * pi.transpose();
        let j = cost_j(&plant, &k).unwrap();
        let jp = cost_j(&permuted, &kp).unwrap();
        assert!((j - jp).abs() <= 1e-10 * j.abs().max(1.0), "trial {trial}");
        let g = grad_j(&plant, &k).unwrap() * pi.transpose();
        let gp = grad_j(&permuted, &kp).unwrap();
        assert!((g - &gp).norm() <= 1e-10 * gp.norm().max(1.0), "trial {trial}");
    }
}

#[test]
fn scalar_cost_and_gradient_closed_form() {
    // a = 1, b = 1, q = r = 1, b2 = 1: J(k) = (1 + k²) / (2(k − 1)).
    let plant = scalar_plant(1.0, 1.0, 1.0, 1.0, 1.0);
    for k in [1.5, 2.0, 2.414, 3.0, 10.0] {
        let km = Mat::from_element(1, 1, k);
        let j = (1.0 + k * k) / (2.0 * (k - 1.0));
        let dj = (k * k - 2.0 * k - 1.0) / (2.0 * (k - 1.0) * (k - 1.0));
        assert!((cost_j(&plant, &km).unwrap() - j).abs() < 1e-12);
        assert!((grad_j(&plant, &km).unwrap()[(0, 0)] - dj).abs() < 1e-12);
    }
    assert!(cost_j(&plant, &Mat::from_element(1, 1, 0.5)).is_err());
}
