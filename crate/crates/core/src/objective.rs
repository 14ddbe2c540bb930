//! LQR cost `J(K) = Tr(B2ᵀ P(K) B2)`, its gradient `2(RK − B1ᵀP)L`, the
//! quadratic surrogate used by the line searches, and `F = J + γG`.

use core::cell::{Cell, OnceCell};

use crate::error::{Error, Result};
use crate::linalg::{solve_care, Mat, RealSchur};
use crate::plant::{Gain, Plant};
use crate::sparsity::{g_value, Regularizer};

/// Closed loops with spectral abscissa at or above `-STABILITY_MARGIN` are
/// treated as not stabilizing.
pub const STABILITY_MARGIN: f64 = 1e-12;

/// `A − B1 K`.
pub fn closed_loop(plant: &Plant, k: &Mat) -> Result<Mat> {
    plant.check_gain(k)?;
    Ok(plant.a() - plant.b1() * k)
}

/// Closed-loop analysis of one gain. The Schur factorization is computed
/// once; `P` and `L` are solved on first use and cached, so the cost and
/// gradient together cost two Lyapunov solves.
#[derive(Debug)]
pub struct GainEval<'p> {
    plant: &'p Plant,
    k: Mat,
    schur: RealSchur,
    p: OnceCell<Mat>,
    l: OnceCell<Mat>,
    solves: Cell<usize>,
}

impl<'p> GainEval<'p> {
    /// Fails with [`Error::NotStabilizing`] when `A − B1K` is not Hurwitz
    /// with margin [`STABILITY_MARGIN`].
    pub fn new(plant: &'p Plant, k: Mat) -> Result<Self> {
        let acl = closed_loop(plant, &k)?;
        let schur = RealSchur::new(&acl)?;
        if schur.abscissa() >= -STABILITY_MARGIN {
            return Err(Error::NotStabilizing {
                abscissa: schur.abscissa(),
            });
        }
        Ok(Self {
            plant,
            k,
            schur,
            p: OnceCell::new(),
            l: OnceCell::new(),
            solves: Cell::new(0),
        })
    }

    pub fn plant(&self) -> &'p Plant {
        self.plant
    }

    pub fn k(&self) -> &Mat {
        &self.k
    }

    pub fn abscissa(&self) -> f64 {
        self.schur.abscissa()
    }

    /// Lyapunov solves performed so far by this evaluation.
    pub fn lyapunov_solves(&self) -> usize {
        self.solves.get()
    }

    pub fn p(&self) -> Result<&Mat> {
        if let Some(p) = self.p.get() {
            return Ok(p);
        }
        let rhs = self.plant.q() + self.k.transpose() * self.plant.r() * &self.k;
        let p = self.schur.solve_lyapunov(&rhs)?;
        self.solves.set(self.solves.get() + 1);
        Ok(self.p.get_or_init(|| p))
    }

    pub fn l(&self) -> Result<&Mat> {
        if let Some(l) = self.l.get() {
            return Ok(l);
        }
        let rhs = self.plant.b2() * self.plant.b2().transpose();
        let l = self.schur.solve_dual_lyapunov(&rhs)?;
        self.solves.set(self.solves.get() + 1);
        Ok(self.l.get_or_init(|| l))
    }

    pub fn cost(&self) -> Result<f64> {
        let b2 = self.plant.b2();
        Ok((b2.transpose() * self.p()? * b2).trace())
    }

    pub fn grad(&self) -> Result<Mat> {
        let p = self.p()?;
        let l = self.l()?;
        let inner = self.plant.r() * &self.k - self.plant.b1().transpose() * p;
        Ok(inner * l * 2.0)
    }

    pub fn into_gain(self) -> Gain {
        let cost = self.cost().ok();
        Gain {
            abscissa: self.schur.abscissa(),
            k: self.k,
            cost,
        }
    }
}

pub fn eval_p(plant: &Plant, k: &Mat) -> Result<Mat> {
    GainEval::new(plant, k.clone())?.p().cloned()
}

pub fn eval_l(plant: &Plant, k: &Mat) -> Result<Mat> {
    GainEval::new(plant, k.clone())?.l().cloned()
}

pub fn cost_j(plant: &Plant, k: &Mat) -> Result<f64> {
    GainEval::new(plant, k.clone())?.cost()
}

pub fn grad_j(plant: &Plant, k: &Mat) -> Result<Mat> {
    GainEval::new(plant, k.clone())?.grad()
}

/// `J(Kp) + ⟨K − Kp, ∇J(Kp)⟩ + ρ/2‖K − Kp‖²_F`.
pub fn surrogate_j(plant: &Plant, k: &Mat, k_prev: &Mat, rho: f64) -> Result<f64> {
    plant.check_gain(k)?;
    let prev = GainEval::new(plant, k_prev.clone())?;
    Ok(surrogate_from(prev.cost()?, &prev.grad()?, k, k_prev, rho))
}

/// Surrogate with `J(Kp)` and `∇J(Kp)` already known.
pub fn surrogate_from(j_prev: f64, grad_prev: &Mat, k: &Mat, k_prev: &Mat, rho: f64) -> f64 {
    let d = k - k_prev;
    j_prev + d.dot(grad_prev) + 0.5 * rho * d.norm_squared()
}

/// `F(K) = J(K) + γ·G(K)`.
pub fn objective_f(plant: &Plant, k: &Mat, reg: &Regularizer, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidConfig("gamma must be nonnegative"));
    }
    let j = cost_j(plant, k)?;
    Ok(j + gamma * g_value(k, reg, plant.partition())?)
}

/// Unregularized LQR gain `R⁻¹B1ᵀP` from the stabilizing Riccati solution.
pub fn lqr_gain(plant: &Plant) -> Result<Mat> {
    let p = solve_care(plant.a(), plant.b1(), plant.q(), plant.r())?;
    let rhs = plant.b1().transpose() * p;
    plant
        .r()
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or(Error::InvalidWeights("R is not positive definite"))
}
