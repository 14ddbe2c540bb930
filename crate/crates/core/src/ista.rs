//! Proximal-gradient solvers for `min J(K) + γG(K)` over stabilizing gains:
//! ISTA with stability-aware backtracking on the curvature ρ, and its
//! Nesterov-accelerated variant.

use crate::error::{Error, Result};
use crate::linalg::{sqrt, Mat};
use crate::objective::{surrogate_from, GainEval};
use crate::plant::Plant;
use crate::sparsity::{merit_value, nnz, update_weights, BlockPartition, Regularizer};
use crate::trace::{IterRecord, SolveResult, SolveTrace, Status};

/// Relative round-off allowance in the surrogate acceptance test.
pub const ACCEPT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IstaConfig {
    pub gamma: f64,
    pub rho0: f64,
    /// Multiplier applied to ρ after each rejected candidate.
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub regularizer: Regularizer,
    /// Reject a candidate when it is unstable *or* violates the surrogate
    /// bound. When false only stability is required.
    pub strict_acceptance: bool,
}

impl Default for IstaConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            rho0: 100.0,
            alpha: 1.5,
            tol: 1e-4,
            max_iter: 10_000,
            max_backtracks: 60,
            regularizer: Regularizer::l1(),
            strict_acceptance: true,
        }
    }
}

impl IstaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig("gamma must be nonnegative and finite"));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::InvalidConfig("rho0 must be positive"));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig("alpha must exceed 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive"));
        }
        Ok(())
    }
}

/// One proximal-gradient candidate `prox_{γ/ρ·G}(K − ∇J(K)/ρ)`.
pub fn ista_step(plant: &Plant, k: &Mat, rho: f64, gamma: f64, reg: &Regularizer) -> Result<Mat> {
    if !(rho > 0.0) {
        return Err(Error::InvalidConfig("rho must be positive"));
    }
    let eval = GainEval::new(plant, k.clone())?;
    let reg = if reg.kind().is_weighted() && reg.weights().is_none() {
        update_weights(k, reg, plant.partition())?
    } else {
        reg.clone()
    };
    prox_step(k, &eval.grad()?, rho, gamma, &reg, plant.partition())
}

pub(crate) fn prox_step(
    k: &Mat,
    grad: &Mat,
    rho: f64,
    gamma: f64,
    reg: &Regularizer,
    partition: &BlockPartition,
) -> Result<Mat> {
    let v = k - grad * (1.0 / rho);
    reg.prox(&v, gamma / rho, partition)
}

/// Next term of the momentum schedule `α ← (1 + √(1 + 4α²))/2`, `α₁ = 1`.
pub fn fista_alpha_next(alpha: f64) -> f64 {
    (1.0 + sqrt(1.0 + 4.0 * alpha * alpha)) / 2.0
}

/// Evaluate a candidate gain. Candidates that are not stabilizing, or whose
/// closed loop is too close to the boundary to solve reliably, yield `None`.
pub(crate) fn try_eval<'p>(plant: &'p Plant, k: Mat) -> Result<Option<(GainEval<'p>, f64)>> {
    let eval = match GainEval::new(plant, k) {
        Ok(e) => e,
        Err(e) if is_rejection(&e) => return Ok(None),
        Err(e) => return Err(e),
    };
    match eval.cost() {
        Ok(j) => Ok(Some((eval, j))),
        Err(e) if is_rejection(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

pub(crate) fn is_rejection(e: &Error) -> bool {
    matches!(
        e,
        Error::NotStabilizing { .. } | Error::SingularSystem { .. } | Error::EigenFailure
    )
}

/// Evaluate the starting gain, mapping instability to `InitNotStabilizing`.
pub(crate) fn eval_initial<'p>(plant: &'p Plant, k0: &Mat) -> Result<(GainEval<'p>, f64)> {
    let eval = match GainEval::new(plant, k0.clone()) {
        Ok(e) => e,
        Err(Error::NotStabilizing { abscissa }) => return Err(Error::InitNotStabilizing { abscissa }),
        Err(e) => return Err(e),
    };
    let j = eval.cost()?;
    Ok((eval, j))
}

struct Accepted<'p> {
    eval: GainEval<'p>,
    j: f64,
    rho: f64,
    backtracks: usize,
}

struct Base<'a, 'p> {
    eval: &'a GainEval<'p>,
    j: f64,
    grad: &'a Mat,
}

fn backtrack<'p>(
    plant: &'p Plant,
    base: Base<'_, 'p>,
    reg: &Regularizer,
    cfg: &IstaConfig,
    solves: &mut usize,
) -> Result<Option<Accepted<'p>>> {
    let mut rho = cfg.rho0;
    for backtracks in 0..=cfg.max_backtracks {
        let cand = prox_step(base.eval.k(), base.grad, rho, cfg.gamma, reg, plant.partition())?;
        if let Some((eval, j)) = try_eval(plant, cand)? {
            let bound = surrogate_from(base.j, base.grad, eval.k(), base.eval.k(), rho);
            if !cfg.strict_acceptance || j <= bound + ACCEPT_SLACK * (1.0 + bound.abs()) {
                return Ok(Some(Accepted {
                    eval,
                    j,
                    rho,
                    backtracks,
                }));
            }
            *solves += eval.lyapunov_solves();
        }
        rho *= cfg.alpha;
    }
    Ok(None)
}

pub fn ista_solve(plant: &Plant, k0: &Mat, cfg: &IstaConfig) -> Result<SolveResult> {
    proximal_solve(plant, k0, cfg, 0.0)
}

pub fn fista_solve(plant: &Plant, k0: &Mat, cfg: &IstaConfig) -> Result<SolveResult> {
    proximal_solve(plant, k0, cfg, 1.0)
}

/// FISTA with the extrapolation weight scaled by `momentum` (0 gives ISTA).
pub fn fista_solve_with_momentum(plant: &Plant, k0: &Mat, cfg: &IstaConfig, momentum: f64) -> Result<SolveResult> {
    proximal_solve(plant, k0, cfg, momentum)
}

fn proximal_solve(plant: &Plant, k0: &Mat, cfg: &IstaConfig, momentum: f64) -> Result<SolveResult> {
    cfg.validate()?;
    let partition = plant.partition();
    let gamma = cfg.gamma;
    let (mut cur, mut j) = eval_initial(plant, k0)?;
    let mut reg = cfg.regularizer.clone();
    let mut trace = SolveTrace::new();
    let mut solves = 0usize;

    let g0 = merit_value(cur.k(), &reg, partition)?;
    trace.records.push(IterRecord {
        iter: 0,
        f: j + gamma * g0,
        j,
        g: g0,
        rho: 0.0,
        nnz: nnz(cur.k()),
        abscissa: cur.abscissa(),
        backtracks: 0,
    });

    let mut prev_k: Option<Mat> = None;
    let mut a = 1.0;
    let mut exhausted = 0;
    for iter in 1..=cfg.max_iter {
        if reg.kind().is_weighted() {
            reg = update_weights(cur.k(), &reg, partition)?;
        }

        let a_next = fista_alpha_next(a);
        let beta = momentum * (a - 1.0) / a_next;
        let extrap = match &prev_k {
            Some(p) if beta != 0.0 => {
                let y = cur.k() + (cur.k() - p) * beta;
                try_eval(plant, y)?
            }
            _ => None,
        };

        let accepted = match &extrap {
            Some((y_eval, y_j)) => {
                let grad = y_eval.grad()?;
                let base = Base {
                    eval: y_eval,
                    j: *y_j,
                    grad: &grad,
                };
                backtrack(plant, base, &reg, cfg, &mut solves)?
            }
            None => {
                let grad = cur.grad()?;
                let base = Base {
                    eval: &cur,
                    j,
                    grad: &grad,
                };
                backtrack(plant, base, &reg, cfg, &mut solves)?
            }
        };
        if let Some((y_eval, _)) = extrap {
            solves += y_eval.lyapunov_solves();
        }

        match accepted {
            Some(step) => {
                exhausted = 0;
                let diff = (step.eval.k() - cur.k()).norm();
                let g = merit_value(step.eval.k(), &reg, partition)?;
                trace.records.push(IterRecord {
                    iter,
                    f: step.j + gamma * g,
                    j: step.j,
                    g,
                    rho: step.rho,
                    nnz: nnz(step.eval.k()),
                    abscissa: step.eval.abscissa(),
                    backtracks: step.backtracks,
                });
                let old = core::mem::replace(&mut cur, step.eval);
                solves += old.lyapunov_solves();
                prev_k = Some(old.k().clone());
                j = step.j;
                a = a_next;
                if diff < cfg.tol {
                    trace.status = Status::Converged;
                    break;
                }
            }
            None => {
                // Stay at the current point and restart the momentum.
                exhausted += 1;
                let mut rec = *trace.records.last().expect("trace has a starting row");
                rec.iter = iter;
                rec.backtracks = cfg.max_backtracks;
                rec.rho = f64::INFINITY;
                trace.records.push(rec);
                prev_k = None;
                a = 1.0;
                if exhausted >= 2 {
                    trace.status = Status::Stalled;
                    break;
                }
            }
        }
    }
    solves += cur.lyapunov_solves();
    trace.lyapunov_solves = solves;
    Ok(SolveResult {
        gain: cur.into_gain(),
        trace,
    })
}
