//! Projected gradient descent onto a sparsity ball with stability-aware
//! Armijo backtracking.

use crate::error::{Error, Result};
use crate::ista::{eval_initial, ista_solve, try_eval, IstaConfig};
use crate::linalg::Mat;
use crate::objective::GainEval;
use crate::plant::{Gain, Plant};
use crate::sparsity::{nnz, Ball};
use crate::trace::{IterRecord, SolveResult, SolveTrace, Status};

/// Doublings of γ tried when searching for a feasible starting point.
pub const HOMOTOPY_CAP: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct IspaConfig {
    pub ball: Ball,
    /// Initial step size of each iteration.
    pub rho0: f64,
    /// Step-size shrink factor applied after a rejected candidate.
    pub alpha: f64,
    pub armijo_c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl IspaConfig {
    pub fn new(ball: Ball) -> Self {
        Self {
            ball,
            rho0: 1.0,
            alpha: 0.7,
            armijo_c: 1e-4,
            tol: 1e-4,
            max_iter: 10_000,
            max_backtracks: 60,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::InvalidConfig("rho0 must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidConfig("armijo_c must lie in (0, 1)"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive"));
        }
        Ok(())
    }
}

/// A stabilizing gain inside `ball`, reached by solving the matching
/// shrinkage problem with γ = 1, 2, 4, … (warm-started) until the solution
/// fits.
pub fn ispa_find_feasible(plant: &Plant, k0: &Mat, ball: &Ball) -> Result<Gain> {
    ispa_find_feasible_with(plant, k0, ball, &IstaConfig::default())
}

/// As [`ispa_find_feasible`], with the inner ISTA settings (γ and the
/// regularizer are overridden).
pub fn ispa_find_feasible_with(plant: &Plant, k0: &Mat, ball: &Ball, inner: &IstaConfig) -> Result<Gain> {
    homotopy(plant, k0, ball, inner).map(|(g, _)| g)
}

/// Feasibility search returning the Lyapunov solves it spent.
fn homotopy(plant: &Plant, k0: &Mat, ball: &Ball, inner: &IstaConfig) -> Result<(Gain, usize)> {
    let partition = plant.partition();
    ball.validate(k0)?;
    let (start, _) = eval_initial(plant, k0)?;
    if ball.contains(k0, partition)? {
        let solves = start.lyapunov_solves();
        return Ok((start.into_gain(), solves));
    }
    let mut solves = start.lyapunov_solves();
    let mut k = k0.clone();
    let mut gamma = 1.0;
    for _ in 0..HOMOTOPY_CAP {
        let cfg = IstaConfig {
            gamma,
            regularizer: ball.matching_regularizer(),
            ..inner.clone()
        };
        let res = ista_solve(plant, &k, &cfg)?;
        solves += res.trace.lyapunov_solves;
        if ball.contains(&res.gain.k, partition)? {
            return Ok((res.gain, solves));
        }
        k = res.gain.k;
        gamma *= 2.0;
    }
    Err(Error::FeasibilityNotFound)
}

pub fn ispa_solve(plant: &Plant, k0: &Mat, cfg: &IspaConfig) -> Result<SolveResult> {
    ispa_solve_with(plant, k0, cfg, &IstaConfig::default())
}

/// ISPA with explicit settings for the feasibility search.
pub fn ispa_solve_with(plant: &Plant, k0: &Mat, cfg: &IspaConfig, homotopy_cfg: &IstaConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let (start, spent) = homotopy(plant, k0, &cfg.ball, homotopy_cfg)?;
    let mut res = projected_descent(plant, &start.k, cfg)?;
    res.trace.lyapunov_solves += spent;
    Ok(res)
}

/// ISPA iterations from a gain that is already feasible and stabilizing.
pub fn projected_descent(plant: &Plant, k0: &Mat, cfg: &IspaConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let partition = plant.partition();
    let ball = &cfg.ball;
    ball.validate(k0)?;
    if !ball.contains(k0, partition)? {
        return Err(Error::FeasibilityNotFound);
    }
    let (mut cur, mut j) = eval_initial(plant, k0)?;
    let mut trace = SolveTrace::new();
    let mut solves = 0usize;
    let record = |iter, eval: &GainEval<'_>, j: f64, rho, backtracks| -> Result<IterRecord> {
        Ok(IterRecord {
            iter,
            f: j,
            j,
            g: ball.value(eval.k(), partition)?,
            rho,
            nnz: nnz(eval.k()),
            abscissa: eval.abscissa(),
            backtracks,
        })
    };
    trace.records.push(record(0, &cur, j, 0.0, 0)?);

    let mut exhausted = 0;
    for iter in 1..=cfg.max_iter {
        let grad = cur.grad()?;
        let mut rho = cfg.rho0;
        let mut accepted = None;
        for backtracks in 0..=cfg.max_backtracks {
            let cand = ball.project(&(cur.k() - &grad * rho), partition)?;
            if let Some((eval, jc)) = try_eval(plant, cand)? {
                // Sufficient decrease measured along the projected step.
                let step = (eval.k() - cur.k()).norm_squared();
                if jc <= j - cfg.armijo_c / rho * step {
                    accepted = Some((eval, jc, rho, backtracks));
                    break;
                }
                solves += eval.lyapunov_solves();
            }
            rho *= cfg.alpha;
        }
        match accepted {
            Some((eval, jc, rho, backtracks)) => {
                exhausted = 0;
                let diff = (eval.k() - cur.k()).norm();
                trace.records.push(record(iter, &eval, jc, rho, backtracks)?);
                let old = core::mem::replace(&mut cur, eval);
                solves += old.lyapunov_solves();
                j = jc;
                if diff < cfg.tol {
                    trace.status = Status::Converged;
                    break;
                }
            }
            None => {
                exhausted += 1;
                let mut rec = *trace.records.last().expect("trace has a starting row");
                rec.iter = iter;
                rec.rho = 0.0;
                rec.backtracks = cfg.max_backtracks;
                trace.records.push(rec);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::lqr_gain;
    use crate::sparsity::BlockPartition;
    use crate::systems::gen_multiagent;

    #[test]
    fn feasible_start_is_returned() {
        let p = gen_multiagent(2).unwrap();
        let k0 = lqr_gain(&p).unwrap();
        let g = ispa_find_feasible(&p, &k0, &Ball::L0(k0.len())).unwrap();
        assert_eq!(g.k, k0);
        let big = Ball::L1(k0.iter().map(|v| v.abs()).sum::<f64>() + 1.0);
        assert_eq!(ispa_find_feasible(&p, &k0, &big).unwrap().k, k0);
    }

    #[test]
    fn loose_ball_keeps_the_lqr_optimum() {
        let p = gen_multiagent(2).unwrap();
        let k0 = lqr_gain(&p).unwrap();
        let radius = k0.iter().map(|v| v.abs()).sum::<f64>() * 2.0;
        let res = ispa_solve(&p, &k0, &IspaConfig::new(Ball::L1(radius))).unwrap();
        assert!(res.converged());
        assert!((&res.gain.k - &k0).norm() < 1e-4);
    }

    #[test]
    fn l0_iterates_stay_feasible() {
        let p = gen_multiagent(3).unwrap();
        let k0 = lqr_gain(&p).unwrap();
        let res = ispa_solve(&p, &k0, &IspaConfig::new(Ball::L0(20))).unwrap();
        for r in &res.trace.records {
            assert!(r.nnz <= 20);
            assert!(r.abscissa < 0.0);
        }
        let part = BlockPartition::uniform(3, 2, 3).unwrap();
        assert!(Ball::L0(20).contains(&res.gain.k, &part).unwrap());
    }
}
