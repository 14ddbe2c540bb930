mod common;

use common::*;
use sparse_lqr_core::linalg::{
    dual_lyapunov_residual, lyapunov_residual, min_symmetric_eigenvalue, riccati_residual, solve_care,
    solve_dual_lyapunov, solve_lyapunov, spectral_abscissa,
};
use sparse_lqr_core::{grad_j, Error, Mat};

#[test]
fn lyapunov_matches_kronecker_oracle() {
    let mut rng = rng(11);
    for trial in 0..200 {
        let n = 1 + trial % 8;
        let acl = random_stable(&mut rng, n);
        let b = gaussian(&mut rng, n, n);
        let rhs = &b * b.transpose();
        let x = solve_lyapunov(&acl, &rhs).unwrap();
        let oracle = kron_lyapunov(&acl, &rhs);
        assert!(rel_err(&x, &oracle) <= 1e-10, "n = {n}: {}", rel_err(&x, &oracle));
        assert_eq!(x, x.transpose());
        assert!(lyapunov_residual(&acl, &x, &rhs) <= 1e-8 * rhs.norm().max(1.0));
        assert!(min_symmetric_eigenvalue(&x) >= -1e-8);

        // A X + X Aᵀ + Rhs = 0 is the primal equation for Aᵀ.
        let y = solve_dual_lyapunov(&acl, &rhs).unwrap();
        let oracle = kron_lyapunov(&acl.transpose(), &rhs);
        assert!(rel_err(&y, &oracle) <= 1e-10);
        assert!(dual_lyapunov_residual(&acl, &y, &rhs) <= 1e-8 * rhs.norm().max(1.0));
    }
}

#[test]
fn lyapunov_worked_example() {
    let acl = Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
    let rhs = Mat::identity(2, 2);
    let x = solve_lyapunov(&acl, &rhs).unwrap();
    let oracle = kron_lyapunov(&acl, &rhs);
    assert!(rel_err(&x, &oracle) < 1e-14);
    let expected = Mat::from_row_slice(2, 2, &[0.5, 0.25, 0.25, 0.75]);
    assert!((x - expected).norm() < 1e-14);
}

#[test]
fn unstable_operator_is_refused() {
    let acl = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
    assert!(matches!(
        solve_lyapunov(&acl, &Mat::identity(2, 2)),
        Err(Error::NotHurwitz { .. })
    ));
}

#[test]
fn abscissa_examples() {
    let cases = [
        ([-1.0, 0.0, 0.0, -3.0], -1.0, true),
        ([0.0, 1.0, -1.0, 0.0], 0.0, false),
        ([1.0, 0.0, 0.0, -2.0], 1.0, false),
    ];
    for (m, want, hurwitz) in cases {
        let r = spectral_abscissa(&Mat::from_row_slice(2, 2, &m)).unwrap();
        assert!((r.abscissa - want).abs() < 1e-12);
        assert_eq!(r.is_hurwitz, hurwitz);
    }
    assert!(matches!(
        spectral_abscissa(&Mat::zeros(2, 3)),
        Err(Error::NonSquare { .. })
    ));
}

#[test]
fn care_on_random_instances() {
    let mut rng = rng(12);
    let mut above_bound = 0;
    for trial in 0..100 {
        let n = 1 + trial % 8;
        let m = 1 + trial % 3;
        let plant = random_plant(&mut rng, n, m, n);
        let p = solve_care(plant.a(), plant.b1(), plant.q(), plant.r()).unwrap();
        let res = riccati_residual(plant.a(), plant.b1(), plant.q(), plant.r(), &p);
        // Rounding in forming the residual itself; weakly controllable
        // draws have ‖P‖ ~ 1e5, where this floor exceeds the absolute bound.
        let g = plant.b1() * plant.r().clone().try_inverse().unwrap() * plant.b1().transpose();
        let floor = f64::EPSILON * (2.0 * plant.a().norm() * p.norm() + p.norm().powi(2) * g.norm() + plant.q().norm());
        let bound = 1e-8 * plant.q().norm().max(1.0);
        if res > bound {
            above_bound += 1;
            assert!(res <= 100.0 * floor, "trial {trial}: residual {res}, floor {floor}");
        }
        assert!(min_symmetric_eigenvalue(&p) >= -1e-8);
        let k0 = plant.r().clone().lu().solve(&(plant.b1().transpose() * &p)).unwrap();
        let acl = plant.a() - plant.b1() * &k0;
        assert!(spectral_abscissa(&acl).unwrap().is_hurwitz);
    }
    assert!(above_bound <= 5, "{above_bound} instances above the absolute bound");
}

#[test]
fn lqr_gain_is_stationary_on_moderate_instances() {
    let mut rng = rng(13);
    let mut checked = 0;
    while checked < 100 {
        let n = 1 + checked % 8;
        let m = 1 + checked % 3;
        let plant = moderate_plant(&mut rng, n, m, n);
        let p = solve_care(plant.a(), plant.b1(), plant.q(), plant.r()).unwrap();
        checked += 1;
        let res = riccati_residual(plant.a(), plant.b1(), plant.q(), plant.r(), &p);
        assert!(res <= 1e-8 * plant.q().norm().max(1.0));
        let k0 = plant.r().clone().lu().solve(&(plant.b1().transpose() * &p)).unwrap();
        assert!(grad_j(&plant, &k0).unwrap().norm() <= 1e-6);
    }
}

#[test]
fn care_never_fails_on_controllable_draws() {
    let mut rng = rng(14);
    for trial in 0..300 {
        let n = 1 + trial % 8;
        let m = 1 + trial % 3;
        let plant = random_plant_normalized(&mut rng, n, m, n);
        assert!(
            solve_care(plant.a(), plant.b1(), plant.q(), plant.r()).is_ok(),
            "trial {trial}"
        );
    }
}

#[test]
fn scalar_riccati_roots() {
    let s = |v| Mat::from_element(1, 1, v);
    let p = solve_care(&s(0.0), &s(1.0), &s(1.0), &s(1.0)).unwrap();
    assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
    // 2p − p² + 1 = 0, stabilizing root.
    let p = solve_care(&s(1.0), &s(1.0), &s(1.0), &s(1.0)).unwrap();
    assert!((p[(0, 0)] - (1.0 + 2f64.sqrt())).abs() < 1e-12);
}
