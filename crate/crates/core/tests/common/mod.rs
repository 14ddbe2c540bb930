#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparse_lqr_core::linalg::{solve_care, spectral_abscissa};
use sparse_lqr_core::objective::closed_loop;
use sparse_lqr_core::{lqr_gain, BlockPartition, Mat, Plant};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Random Hurwitz matrix: a Gaussian matrix shifted left of the axis.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let g = gaussian(rng, n, n);
    let shift = spectral_abscissa(&g).unwrap().abscissa + rng.random_range(0.1..2.0);
    g - Mat::identity(n, n) * shift
}

/// Random plant with a possibly unstable `A`; Q ⪰ 0 and R ≻ 0.
pub fn random_plant(rng: &mut ChaCha8Rng, n: usize, m: usize, l: usize) -> Plant {
    let a = gaussian(rng, n, n) * 0.7;
    let b1 = gaussian(rng, n, m);
    let b2 = gaussian(rng, n, l);
    let c = gaussian(rng, n, n);
    let q = c.transpose() * &c * (1.0 / n as f64) + Mat::identity(n, n) * 0.1;
    let d = gaussian(rng, m, m);
    let r = d.transpose() * &d * (1.0 / m as f64) + Mat::identity(m, m);
    Plant::new(a, b1, b2, q, r, BlockPartition::whole(m, n).unwrap()).unwrap()
}

/// Perturb the LQR gain randomly, shrinking the perturbation until the
/// closed loop is stable.
pub fn random_stabilizing_gain(rng: &mut ChaCha8Rng, plant: &Plant) -> Mat {
    let k0 = lqr_gain(plant).unwrap();
    let dir = gaussian(rng, plant.m(), plant.n());
    let mut scale = 0.5 * k0.norm().max(1.0) / dir.norm();
    loop {
        let k = &k0 + &dir * scale;
        let acl = closed_loop(plant, &k).unwrap();
        if spectral_abscissa(&acl).unwrap().abscissa < -1e-3 {
            return k;
        }
        scale *= 0.5;
    }
}

/// Kronecker-vectorized solve of `Aᵀ X + X A + Rhs = 0`, independent of the
/// library's solvers.
pub fn kron_lyapunov(acl: &Mat, rhs: &Mat) -> Mat {
    let n = acl.nrows();
    let eye = Mat::identity(n, n);
    let at = acl.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let b = -Mat::from_column_slice(n * n, 1, rhs.as_slice());
    let x = op.lu().solve(&b).expect("stable operator is invertible");
    Mat::from_column_slice(n, n, x.as_slice())
}

pub fn rel_err(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn scalar_plant(a: f64, b: f64, b2: f64, q: f64, r: f64) -> Plant {
    let s = |v| Mat::from_element(1, 1, v);
    Plant::new(s(a), s(b), s(b2), s(q), s(r), BlockPartition::whole(1, 1).unwrap()).unwrap()
}

/// Random plant with `A` scaled by `1/√n` (spectral radius near one), so
/// the Riccati solution stays moderate.
pub fn random_plant_normalized(rng: &mut ChaCha8Rng, n: usize, m: usize, l: usize) -> Plant {
    let a = gaussian(rng, n, n) * (1.0 / (n as f64).sqrt());
    let b1 = gaussian(rng, n, m);
    let b2 = gaussian(rng, n, l);
    let c = gaussian(rng, n, n);
    let q = c.transpose() * &c * (1.0 / n as f64) + Mat::identity(n, n) * 0.1;
    let d = gaussian(rng, m, m);
    let r = d.transpose() * &d * (1.0 / m as f64) + Mat::identity(m, m);
    Plant::new(a, b1, b2, q, r, BlockPartition::whole(m, n).unwrap()).unwrap()
}

/// `random_plant_normalized`, redrawn until the Riccati solution has
/// `‖P‖_F ≤ 1e4`. Weakly controllable draws push absolute residual bounds
/// below the rounding floor of forming the residual.
pub fn moderate_plant(rng: &mut ChaCha8Rng, n: usize, m: usize, l: usize) -> Plant {
    loop {
        let plant = random_plant_normalized(rng, n, m, l);
        if let Ok(p) = solve_care(plant.a(), plant.b1(), plant.q(), plant.r()) {
            if p.norm() <= 1e4 {
                return plant;
            }
        }
    }
}
