mod common;

use common::*;
use sparse_lqr_core::admm::admm_f_step;
use sparse_lqr_core::grasp::grasp_count;
use sparse_lqr_core::sparsity::nnz;
use sparse_lqr_core::systems::gen_multiagent;
use sparse_lqr_core::{
    admm_solve, grasp_solve, ispa_solve, ista_solve, lqr_gain, AdmmConfig, Ball, GraspConfig, IspaConfig, IstaConfig,
    Mat, Regularizer,
};

#[test]
fn admm_and_ista_agree_across_gamma() {
    let plant = gen_multiagent(5).unwrap();
    let k0 = lqr_gain(&plant).unwrap();
    let mut ista_cheaper = 0;
    let gammas = [0.1, 0.5, 1.0, 2.0, 5.0];
    for gamma in gammas {
        let ista = ista_solve(
            &plant,
            &k0,
            &IstaConfig {
                gamma,
                ..IstaConfig::default()
            },
        )
        .unwrap();
        let admm = admm_solve(
            &plant,
            &k0,
            &AdmmConfig {
                gamma,
                ..AdmmConfig::default()
            },
        )
        .unwrap();
        let (ji, ja) = (ista.gain.cost.unwrap(), admm.gain.cost.unwrap());
        assert!((ji - ja).abs() / ji <= 0.10, "γ {gamma}: J {ji} vs {ja}");
        let (ni, na) = (nnz(&ista.gain.k) as i64, nnz(&admm.gain.k) as i64);
        assert!((ni - na).abs() <= 15, "γ {gamma}: nnz {ni} vs {na}");
        assert!(admm.gain.abscissa < 0.0);
        if ista.trace.lyapunov_solves <= admm.trace.lyapunov_solves {
            ista_cheaper += 1;
        }
    }
    assert!(
        ista_cheaper * 10 >= gammas.len() * 6,
        "{ista_cheaper} of {}",
        gammas.len()
    );
}

#[test]
fn admm_f_step_is_shrinkage_of_shifted_point() {
    let plant = gen_multiagent(2).unwrap();
    let mut rng = rng(41);
    let k = gaussian(&mut rng, 4, 6);
    let lambda = gaussian(&mut rng, 4, 6);
    let (gamma, rho) = (0.7, 3.0);
    let f = admm_f_step(&k, &lambda, gamma, rho, &Regularizer::l1(), &plant).unwrap();
    let v = &k + &lambda / rho;
    let want = v.map(|x| x.signum() * (x.abs() - gamma / rho).max(0.0));
    assert_eq!(f, want);
}

#[test]
fn grasp_respects_budget() {
    let plant = gen_multiagent(5).unwrap();
    let k0 = lqr_gain(&plant).unwrap();
    for s in [40, 80, 120] {
        for exempt_diagonal in [true, false] {
            let cfg = GraspConfig {
                exempt_diagonal,
                ..GraspConfig::new(s)
            };
            let res = grasp_solve(&plant, &k0, &cfg).unwrap();
            assert!(grasp_count(&res.gain.k, plant.partition(), &cfg) <= s);
            assert!(res.gain.abscissa < 0.0);
            for r in &res.trace.records[1..] {
                assert!(r.abscissa < 0.0);
            }
            if !exempt_diagonal {
                assert!(nnz(&res.gain.k) <= s);
            }
        }
    }
}

#[test]
fn grasp_block_mode_counts_blocks() {
    let plant = gen_multiagent(4).unwrap();
    let k0 = lqr_gain(&plant).unwrap();
    let cfg = GraspConfig {
        block_mode: true,
        ..GraspConfig::new(4)
    };
    let res = grasp_solve(&plant, &k0, &cfg).unwrap();
    let norms = plant.partition().block_norms(&res.gain.k).unwrap();
    let off_diagonal = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && norms[(i, j)] > 0.0)
        .count();
    assert!(off_diagonal <= 4);
    assert_eq!(grasp_count(&res.gain.k, plant.partition(), &cfg), off_diagonal);
}

#[test]
fn ispa_matches_or_beats_grasp() {
    let plant = gen_multiagent(5).unwrap();
    let k0 = lqr_gain(&plant).unwrap();
    for s in (60..=140).step_by(20) {
        let ispa = ispa_solve(&plant, &k0, &IspaConfig::new(Ball::L0(s))).unwrap();
        let grasp = grasp_solve(
            &plant,
            &k0,
            &GraspConfig {
                exempt_diagonal: false,
                ..GraspConfig::new(s)
            },
        )
        .unwrap();
        let (ji, jg) = (ispa.gain.cost.unwrap(), grasp.gain.cost.unwrap());
        assert!(ji <= 1.05 * jg, "s {s}: ISPA {ji} vs GraSP {jg}");
    }
}

#[test]
fn baselines_reject_unstable_start() {
    let plant = scalar_plant(1.0, 1.0, 1.0, 1.0, 1.0);
    let k = Mat::from_element(1, 1, 0.0);
    assert!(admm_solve(&plant, &k, &AdmmConfig::default()).is_err());
    assert!(grasp_solve(&plant, &k, &GraspConfig::new(1)).is_err());
}
