//! Gradient support pursuit for `min J(K)` with at most `s` nonzero
//! (optionally off-diagonal) entries or blocks.
//!
//! Each iteration merges the current support with the largest gradient
//! entries, descends on the merged support, prunes back to `s`, and repairs
//! pruning-induced instability by bisecting toward the previous gain.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ista::{eval_initial, try_eval};
use crate::linalg::Mat;
use crate::objective::GainEval;
use crate::plant::Plant;
use crate::sparsity::{nnz, BlockPartition};
use crate::trace::{IterRecord, SolveResult, SolveTrace, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct GraspConfig {
    /// Budget of counted nonzeros (entries, or blocks in block mode).
    pub s: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub inner_steps: usize,
    /// Initial step size of the restricted descent.
    pub step0: f64,
    pub alpha: f64,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    pub max_bisections: usize,
    /// Diagonal blocks are neither counted nor pruned.
    pub exempt_diagonal: bool,
    /// Count whole off-diagonal blocks instead of entries.
    pub block_mode: bool,
}

impl GraspConfig {
    pub fn new(s: usize) -> Self {
        Self {
            s,
            tol: 1e-4,
            max_iter: 1000,
            inner_steps: 25,
            step0: 1.0,
            alpha: 0.7,
            armijo_c: 1e-4,
            max_backtracks: 60,
            max_bisections: 40,
            exempt_diagonal: true,
            block_mode: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.step0 > 0.0) {
            return Err(Error::InvalidConfig("tol and step0 must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidConfig("armijo_c must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Support bookkeeping over "units": single entries, or blocks in block
/// mode. Exempt units are always in the support.
struct Units<'a> {
    partition: &'a BlockPartition,
    cfg: &'a GraspConfig,
}

impl Units<'_> {
    fn count(&self) -> usize {
        if self.cfg.block_mode {
            self.partition.row_blocks() * self.partition.col_blocks()
        } else {
            self.partition.rows() * self.partition.cols()
        }
    }

    /// Unit index of entry `(r, c)`.
    fn unit_of(&self, r: usize, c: usize) -> usize {
        if self.cfg.block_mode {
            let (i, j) = self.partition.block_of(r, c);
            i * self.partition.col_blocks() + j
        } else {
            r * self.partition.cols() + c
        }
    }

    fn exempt(&self, r: usize, c: usize) -> bool {
        self.cfg.exempt_diagonal && self.partition.on_diagonal_block(r, c)
    }

    /// Squared magnitude of every non-exempt unit, row-major unit order.
    fn magnitudes(&self, k: &Mat) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.count()];
        let mut exempt = alloc::vec![false; self.count()];
        for r in 0..k.nrows() {
            for c in 0..k.ncols() {
                let u = self.unit_of(r, c);
                out[u] += k[(r, c)] * k[(r, c)];
                exempt[u] |= self.exempt(r, c);
            }
        }
        for (m, e) in out.iter_mut().zip(exempt) {
            if e {
                *m = -1.0;
            }
        }
        out
    }

    /// Indices of the `count` largest nonzero, non-exempt units; ties go to
    /// the lowest index.
    fn top(&self, k: &Mat, count: usize) -> Vec<usize> {
        let mags = self.magnitudes(k);
        let mut idx: Vec<usize> = (0..mags.len()).filter(|&u| mags[u] > 0.0).collect();
        idx.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));
        idx.truncate(count);
        idx
    }

    /// Counted (non-exempt) nonzero units.
    fn counted(&self, k: &Mat) -> usize {
        self.magnitudes(k).iter().filter(|&&m| m > 0.0).count()
    }

    fn mask(&self, keep: &[bool]) -> Mat {
        let (m, n) = (self.partition.rows(), self.partition.cols());
        Mat::from_fn(m, n, |r, c| {
            if self.exempt(r, c) || keep[self.unit_of(r, c)] {
                1.0
            } else {
                0.0
            }
        })
    }

    fn support_mask(&self, k: &Mat) -> Mat {
        let mags = self.magnitudes(k);
        let keep: Vec<bool> = mags.iter().map(|&m| m > 0.0).collect();
        self.mask(&keep)
    }

    /// Keep the `s` largest counted units and all exempt entries.
    fn prune(&self, k: &Mat, s: usize) -> Mat {
        let mut keep = alloc::vec![false; self.count()];
        for u in self.top(k, s) {
            keep[u] = true;
        }
        k.component_mul(&self.mask(&keep))
    }
}

/// Descend on `J` with the gradient restricted to `mask`.
fn restricted_descent<'p>(
    plant: &'p Plant,
    start: GainEval<'p>,
    j0: f64,
    mask: &Mat,
    cfg: &GraspConfig,
    solves: &mut usize,
) -> Result<(GainEval<'p>, f64, f64)> {
    let mut cur = start;
    let mut j = j0;
    let mut last_step = 0.0;
    for _ in 0..cfg.inner_steps {
        let grad = cur.grad()?.component_mul(mask);
        let gnorm2 = grad.norm_squared();
        if gnorm2 == 0.0 {
            break;
        }
        let mut step = cfg.step0;
        let mut next = None;
        for _ in 0..=cfg.max_backtracks {
            let cand = cur.k() - &grad * step;
            if let Some((eval, jc)) = try_eval(plant, cand)? {
                if jc <= j - cfg.armijo_c * step * gnorm2 {
                    next = Some((eval, jc));
                    break;
                }
                *solves += eval.lyapunov_solves();
            }
            step *= cfg.alpha;
        }
        let Some((eval, jc)) = next else { break };
        let moved = (eval.k() - cur.k()).norm();
        let old = core::mem::replace(&mut cur, eval);
        *solves += old.lyapunov_solves();
        j = jc;
        last_step = step;
        if moved < cfg.tol * 1e-2 {
            break;
        }
    }
    Ok((cur, j, last_step))
}

pub fn grasp_solve(plant: &Plant, k0: &Mat, cfg: &GraspConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let units = Units {
        partition: plant.partition(),
        cfg,
    };
    let (mut cur, mut j) = eval_initial(plant, k0)?;
    let mut trace = SolveTrace::new();
    let mut solves = 0usize;
    trace.records.push(IterRecord {
        iter: 0,
        f: j,
        j,
        g: units.counted(cur.k()) as f64,
        rho: 0.0,
        nnz: nnz(cur.k()),
        abscissa: cur.abscissa(),
        backtracks: 0,
    });

    let mut exhausted = 0;
    for iter in 1..=cfg.max_iter {
        let grad = cur.grad()?;
        let mut keep = alloc::vec![false; units.count()];
        for u in units.top(&grad, cfg.s) {
            keep[u] = true;
        }
        let merged = units.mask(&keep).zip_map(&units.support_mask(cur.k()), f64::max);

        let prev_k = cur.k().clone();
        let prev_counted = units.counted(&prev_k);
        let (desc, _, step) = restricted_descent(plant, cur, j, &merged, cfg, &mut solves)?;
        let pruned = units.prune(desc.k(), cfg.s);
        solves += desc.lyapunov_solves();
        let desc_k = desc.k().clone();
        drop(desc);

        let mut accepted = None;
        let mut bisections = 0;
        if let Some(found) = try_eval(plant, pruned.clone())? {
            accepted = Some(found);
        } else {
            let support = units.support_mask(&pruned);
            let prev_on_support = prev_k.component_mul(&support);
            let mut theta = 1.0;
            while bisections < cfg.max_bisections {
                bisections += 1;
                theta *= 0.5;
                let cand = &pruned * theta + &prev_on_support * (1.0 - theta);
                if let Some(found) = try_eval(plant, cand)? {
                    accepted = Some(found);
                    break;
                }
            }
        }

        let next = match accepted {
            Some(found) => Some(found),
            // Unpruned descent result is acceptable when it already meets the budget.
            None if units.counted(&desc_k) <= cfg.s => try_eval(plant, desc_k)?,
            None => None,
        };
        match next {
            Some((eval, jn)) => {
                exhausted = 0;
                let diff = (eval.k() - &prev_k).norm();
                trace.records.push(IterRecord {
                    iter,
                    f: jn,
                    j: jn,
                    g: units.counted(eval.k()) as f64,
                    rho: step,
                    nnz: nnz(eval.k()),
                    abscissa: eval.abscissa(),
                    backtracks: bisections,
                });
                cur = eval;
                j = jn;
                if diff < cfg.tol {
                    trace.status = Status::Converged;
                    break;
                }
            }
            None => {
                if prev_counted > cfg.s {
                    return Err(Error::BacktrackExhausted);
                }
                exhausted += 1;
                let (eval, jp) = eval_initial(plant, &prev_k)?;
                cur = eval;
                j = jp;
                let mut rec = *trace.records.last().expect("trace has a starting row");
                rec.iter = iter;
                rec.backtracks = bisections;
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

/// Counted nonzeros of `k` under the configuration's counting rule.
pub fn grasp_count(k: &Mat, partition: &BlockPartition, cfg: &GraspConfig) -> usize {
    Units { partition, cfg }.counted(k)
}
