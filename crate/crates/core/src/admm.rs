//! ADMM for `min J(K) + γG(F)` subject to `K = F`.
//!
//! The K-minimization of the augmented Lagrangian is carried out by an inner
//! gradient loop with stability-aware Armijo backtracking; the F-step is the
//! closed-form shrinkage of `K + Λ/ρ`.

use crate::error::{Error, Result};
use crate::ista::{eval_initial, try_eval};
use crate::linalg::{sqrt, Mat};
use crate::objective::GainEval;
use crate::plant::Plant;
use crate::sparsity::{g_value, nnz, Regularizer};
use crate::trace::{IterRecord, SolveResult, SolveTrace, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub gamma: f64,
    /// Augmented-Lagrangian penalty.
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub inner_steps: usize,
    pub inner_tol: f64,
    pub max_backtracks: usize,
    pub regularizer: Regularizer,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            rho: 100.0,
            eps_abs: 1e-4,
            eps_rel: 1e-2,
            max_iter: 1000,
            inner_steps: 50,
            inner_tol: 1e-6,
            max_backtracks: 60,
            regularizer: Regularizer::l1(),
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig("gamma must be nonnegative and finite"));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig("rho must be positive"));
        }
        if !(self.eps_abs > 0.0 && self.eps_rel > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive"));
        }
        if self.regularizer.kind().is_weighted() {
            return Err(Error::InvalidConfig("ADMM supports the l1 and block-l1 regularizers"));
        }
        Ok(())
    }
}

/// `F = prox_{γ/ρ·G}(K + Λ/ρ)`.
pub fn admm_f_step(k: &Mat, lambda: &Mat, gamma: f64, rho: f64, reg: &Regularizer, plant: &Plant) -> Result<Mat> {
    reg.prox(&(k + lambda / rho), gamma / rho, plant.partition())
}

struct Inner<'p> {
    eval: GainEval<'p>,
    j: f64,
    steps: usize,
    solves: usize,
}

/// Approximately minimize `J(K) + ρ/2‖K − V‖²` starting from `start`.
fn k_step<'p>(plant: &'p Plant, start: GainEval<'p>, j0: f64, v: &Mat, cfg: &AdmmConfig) -> Result<Inner<'p>> {
    let rho = cfg.rho;
    let phi = |k: &Mat, j: f64| j + 0.5 * rho * (k - v).norm_squared();
    let mut cur = start;
    let mut j = j0;
    let mut solves = 0;
    let mut steps = 0;
    let mut eta = 1.0 / rho;
    for _ in 0..cfg.inner_steps {
        let grad = cur.grad().map_err(|_| Error::InnerSolveFailed("gradient evaluation"))? + (cur.k() - v) * rho;
        let gnorm2 = grad.norm_squared();
        let phi0 = phi(cur.k(), j);
        let mut next = None;
        let mut step = eta;
        for _ in 0..=cfg.max_backtracks {
            let cand = cur.k() - &grad * step;
            if let Some((eval, jc)) = try_eval(plant, cand)? {
                if phi(eval.k(), jc) <= phi0 - 1e-4 * step * gnorm2 {
                    next = Some((eval, jc));
                    break;
                }
                solves += eval.lyapunov_solves();
            }
            step *= 0.5;
        }
        let Some((eval, jc)) = next else { break };
        steps += 1;
        let moved = (eval.k() - cur.k()).norm();
        let old = core::mem::replace(&mut cur, eval);
        solves += old.lyapunov_solves();
        j = jc;
        // Let the step grow back after a successful move.
        eta = (step * 2.0).min(1.0 / rho * 4.0);
        if moved < cfg.inner_tol {
            break;
        }
    }
    Ok(Inner {
        eval: cur,
        j,
        steps,
        solves,
    })
}

pub fn admm_solve(plant: &Plant, k0: &Mat, cfg: &AdmmConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let partition = plant.partition();
    let reg = &cfg.regularizer;
    let rho = cfg.rho;
    let (mut cur, mut j) = eval_initial(plant, k0)?;
    let mut f = k0.clone();
    let mut lambda = Mat::zeros(k0.nrows(), k0.ncols());
    let mut trace = SolveTrace::new();
    let mut solves = 0usize;
    let root_mn = sqrt(k0.len() as f64);

    let g0 = g_value(&f, reg, partition)?;
    trace.records.push(IterRecord {
        iter: 0,
        f: j + cfg.gamma * g0,
        j,
        g: g0,
        rho,
        nnz: nnz(&f),
        abscissa: cur.abscissa(),
        backtracks: 0,
    });

    for iter in 1..=cfg.max_iter {
        let v = &f - &lambda / rho;
        let inner = k_step(plant, cur, j, &v, cfg)?;
        solves += inner.solves;
        cur = inner.eval;
        j = inner.j;

        let f_prev = core::mem::replace(&mut f, admm_f_step(cur.k(), &lambda, cfg.gamma, rho, reg, plant)?);
        lambda += (cur.k() - &f) * rho;

        let primal = (cur.k() - &f).norm();
        let dual = rho * (&f - &f_prev).norm();
        let eps_pri = root_mn * cfg.eps_abs + cfg.eps_rel * cur.k().norm().max(f.norm());
        let eps_dual = root_mn * cfg.eps_abs + cfg.eps_rel * lambda.norm();

        let g = g_value(&f, reg, partition)?;
        trace.records.push(IterRecord {
            iter,
            f: j + cfg.gamma * g,
            j,
            g,
            rho,
            nnz: nnz(&f),
            abscissa: cur.abscissa(),
            backtracks: inner.steps,
        });
        if primal <= eps_pri && dual <= eps_dual {
            trace.status = Status::Converged;
            break;
        }
    }

    // Report the sparse variable when it stabilizes the plant.
    solves += cur.lyapunov_solves();
    let gain = match try_eval(plant, f)? {
        Some((eval, jf)) => {
            solves += eval.lyapunov_solves();
            let g = g_value(eval.k(), reg, partition)?;
            let last = trace.records.last_mut().expect("trace has a starting row");
            last.j = jf;
            last.f = jf + cfg.gamma * g;
            last.g = g;
            last.abscissa = eval.abscissa();
            eval.into_gain()
        }
        None => {
            let last = trace.records.last_mut().expect("trace has a starting row");
            last.nnz = nnz(cur.k());
            last.g = g_value(cur.k(), reg, partition)?;
            last.f = last.j + cfg.gamma * last.g;
            cur.into_gain()
        }
    };
    trace.lyapunov_solves = solves;
    Ok(SolveResult { gain, trace })
}
