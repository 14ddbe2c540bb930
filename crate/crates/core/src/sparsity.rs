//! Sparsity-promoting regularizers, their shrinkage operators, iterative
//! reweighting, and Euclidean projections onto ℓ0, ℓ1 and block-sparsity
//! balls.
//!
//! Block operators work on the agent grid described by [`BlockPartition`]:
//! block `(i, j)` holds the gains from agent `j`'s states to agent `i`'s
//! inputs.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{sqrt, Mat};

/// Default reweighting constant for the weighted regularizers.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Row/column grouping of a gain matrix into agent blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
}

impl BlockPartition {
    pub fn new(row_sizes: Vec<usize>, col_sizes: Vec<usize>) -> Result<Self> {
        if row_sizes.is_empty() || col_sizes.is_empty() {
            return Err(Error::InvalidConfig("partition needs at least one block"));
        }
        if row_sizes.iter().chain(&col_sizes).any(|&s| s == 0) {
            return Err(Error::InvalidConfig("partition block sizes must be >= 1"));
        }
        Ok(Self { row_sizes, col_sizes })
    }

    /// `agents` identical agents, each with `inputs` inputs and `states` states.
    pub fn uniform(agents: usize, inputs: usize, states: usize) -> Result<Self> {
        Self::new(alloc::vec![inputs; agents], alloc::vec![states; agents])
    }

    /// A single block covering the whole `m×n` gain.
    pub fn whole(m: usize, n: usize) -> Result<Self> {
        Self::new(alloc::vec![m], alloc::vec![n])
    }

    /// Every entry of an `m×n` gain is its own block.
    pub fn elementwise(m: usize, n: usize) -> Result<Self> {
        Self::new(alloc::vec![1; m], alloc::vec![1; n])
    }

    pub fn row_sizes(&self) -> &[usize] {
        &self.row_sizes
    }

    pub fn col_sizes(&self) -> &[usize] {
        &self.col_sizes
    }

    pub fn rows(&self) -> usize {
        self.row_sizes.iter().sum()
    }

    pub fn cols(&self) -> usize {
        self.col_sizes.iter().sum()
    }

    pub fn row_blocks(&self) -> usize {
        self.row_sizes.len()
    }

    pub fn col_blocks(&self) -> usize {
        self.col_sizes.len()
    }

    pub fn row_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.row_sizes[..i].iter().sum();
        start..start + self.row_sizes[i]
    }

    pub fn col_range(&self, j: usize) -> Range<usize> {
        let start: usize = self.col_sizes[..j].iter().sum();
        start..start + self.col_sizes[j]
    }

    pub fn check(&self, k: &Mat) -> Result<()> {
        if self.rows() != k.nrows() || self.cols() != k.ncols() {
            return Err(Error::PartitionMismatch {
                rows: self.rows(),
                cols: self.cols(),
                m: k.nrows(),
                n: k.ncols(),
            });
        }
        Ok(())
    }

    /// Block index owning entry `(r, c)`.
    pub fn block_of(&self, r: usize, c: usize) -> (usize, usize) {
        (locate(&self.row_sizes, r), locate(&self.col_sizes, c))
    }

    /// Whether entry `(r, c)` lies in a diagonal block `(i, i)`.
    pub fn on_diagonal_block(&self, r: usize, c: usize) -> bool {
        let (i, j) = self.block_of(r, c);
        i == j
    }

    /// Frobenius norm of every block, laid out on the block grid.
    pub fn block_norms(&self, k: &Mat) -> Result<Mat> {
        self.check(k)?;
        let mut out = Mat::zeros(self.row_blocks(), self.col_blocks());
        for i in 0..self.row_blocks() {
            let rows = self.row_range(i);
            for j in 0..self.col_blocks() {
                let cols = self.col_range(j);
                let mut ss = 0.0;
                for r in rows.clone() {
                    for c in cols.clone() {
                        ss += k[(r, c)] * k[(r, c)];
                    }
                }
                out[(i, j)] = sqrt(ss);
            }
        }
        Ok(out)
    }

    /// Multiply each block of `k` by `factor(i, j, block_norm)` where the
    /// factor is given as `target_norm`; blocks with zero norm stay zero.
    fn rescale_blocks(&self, k: &Mat, mut target: impl FnMut(usize, usize, f64) -> f64) -> Mat {
        let mut out = Mat::zeros(k.nrows(), k.ncols());
        for i in 0..self.row_blocks() {
            let rows = self.row_range(i);
            for j in 0..self.col_blocks() {
                let cols = self.col_range(j);
                let mut ss = 0.0;
                for r in rows.clone() {
                    for c in cols.clone() {
                        ss += k[(r, c)] * k[(r, c)];
                    }
                }
                let norm = sqrt(ss);
                if norm == 0.0 {
                    continue;
                }
                let t = target(i, j, norm);
                if t == 0.0 {
                    continue;
                }
                for r in rows.clone() {
                    for c in cols.clone() {
                        // (v / norm) is exactly ±1 for a 1×1 block.
                        out[(r, c)] = (k[(r, c)] / norm) * t;
                    }
                }
            }
        }
        out
    }
}

fn locate(sizes: &[usize], idx: usize) -> usize {
    let mut acc = 0;
    for (b, s) in sizes.iter().enumerate() {
        acc += s;
        if idx < acc {
            return b;
        }
    }
    sizes.len() - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerKind {
    L1,
    WeightedL1,
    BlockL1,
    WeightedBlockL1,
}

impl RegularizerKind {
    pub fn is_weighted(self) -> bool {
        matches!(self, Self::WeightedL1 | Self::WeightedBlockL1)
    }

    pub fn is_block(self) -> bool {
        matches!(self, Self::BlockL1 | Self::WeightedBlockL1)
    }
}

/// Sparsity-promoting function `G(K)`.
///
/// Weighted kinds carry their current weights: an `m×n` matrix for
/// [`RegularizerKind::WeightedL1`], a block-grid matrix for
/// [`RegularizerKind::WeightedBlockL1`].
#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    kind: RegularizerKind,
    epsilon: f64,
    weights: Option<Mat>,
}

impl Regularizer {
    pub fn new(kind: RegularizerKind) -> Self {
        Self {
            kind,
            epsilon: DEFAULT_EPSILON,
            weights: None,
        }
    }

    pub fn l1() -> Self {
        Self::new(RegularizerKind::L1)
    }

    pub fn block_l1() -> Self {
        Self::new(RegularizerKind::BlockL1)
    }

    pub fn weighted_l1() -> Self {
        Self::new(RegularizerKind::WeightedL1)
    }

    pub fn weighted_block_l1() -> Self {
        Self::new(RegularizerKind::WeightedBlockL1)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig("epsilon must be positive and finite"));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Mat) -> Result<Self> {
        if !self.kind.is_weighted() {
            return Err(Error::WrongKind);
        }
        if !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidWeights("weights must be positive and finite"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn kind(&self) -> RegularizerKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> Option<&Mat> {
        self.weights.as_ref()
    }

    fn required_weights(&self, rows: usize, cols: usize) -> Result<&Mat> {
        let w = self
            .weights
            .as_ref()
            .ok_or(Error::InvalidWeights("weights have not been set"))?;
        if w.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch {
                what: "regularizer weights",
                expected: (rows, cols),
                found: w.shape(),
            });
        }
        Ok(w)
    }

    /// Proximal step for `threshold·G` (threshold = γ/ρ): plain, block, or
    /// weighted shrinkage depending on the kind.
    pub fn prox(&self, v: &Mat, threshold: f64, partition: &BlockPartition) -> Result<Mat> {
        match self.kind {
            RegularizerKind::L1 => Ok(shrink(v, threshold)),
            RegularizerKind::BlockL1 => shrink_block(v, threshold, partition),
            RegularizerKind::WeightedL1 => shrink_weighted(v, threshold, self.required_weights(v.nrows(), v.ncols())?),
            RegularizerKind::WeightedBlockL1 => {
                let w = self.required_weights(partition.row_blocks(), partition.col_blocks())?;
                shrink_block_weighted(v, threshold, w, partition)
            }
        }
    }
}

/// `G(K)` for the given regularizer.
pub fn g_value(k: &Mat, reg: &Regularizer, partition: &BlockPartition) -> Result<f64> {
    match reg.kind {
        RegularizerKind::L1 => Ok(k.iter().map(|v| v.abs()).sum()),
        RegularizerKind::WeightedL1 => {
            let w = reg.required_weights(k.nrows(), k.ncols())?;
            Ok(k.iter().zip(w.iter()).map(|(v, w)| w * v.abs()).sum())
        }
        RegularizerKind::BlockL1 => Ok(partition.block_norms(k)?.iter().sum()),
        RegularizerKind::WeightedBlockL1 => {
            let norms = partition.block_norms(k)?;
            let w = reg.required_weights(norms.nrows(), norms.ncols())?;
            Ok(norms.iter().zip(w.iter()).map(|(n, w)| w * n).sum())
        }
    }
}

/// Merit function whose linearization the reweighting scheme minimizes.
///
/// For the unweighted kinds this is `G(K)` itself. For the weighted kinds it
/// is the log-sum penalty `Σ ln(1 + |K_lk|/ε)` (per block: `‖K_ij‖_F`),
/// whose gradient at `K` equals the weights `1/(|K|+ε)`. Proximal steps taken
/// with those weights decrease `J + γ·merit`, which makes it the quantity the
/// solvers report and check for monotonicity.
pub fn merit_value(k: &Mat, reg: &Regularizer, partition: &BlockPartition) -> Result<f64> {
    let eps = reg.epsilon;
    match reg.kind {
        RegularizerKind::L1 | RegularizerKind::BlockL1 => {
            let plain = Regularizer::new(reg.kind);
            g_value(k, &plain, partition)
        }
        RegularizerKind::WeightedL1 => Ok(k.iter().map(|v| libm::log1p(v.abs() / eps)).sum()),
        RegularizerKind::WeightedBlockL1 => Ok(partition.block_norms(k)?.iter().map(|n| libm::log1p(n / eps)).sum()),
    }
}

/// Soft-thresholding `sgn(x)·max(|x| − a, 0)`, elementwise.
pub fn shrink(k: &Mat, a: f64) -> Mat {
    k.map(|x| shrink_scalar(x, a))
}

#[inline]
pub fn shrink_scalar(x: f64, a: f64) -> f64 {
    x.signum() * (x.abs() - a).max(0.0)
}

/// Block soft-thresholding: every block's Frobenius norm drops by `a`
/// (floored at zero) with its direction kept.
pub fn shrink_block(k: &Mat, a: f64, partition: &BlockPartition) -> Result<Mat> {
    partition.check(k)?;
    Ok(partition.rescale_blocks(k, |_, _, norm| (norm - a).max(0.0)))
}

/// Elementwise shrinkage with per-entry threshold `gamma_over_rho·W_lk`.
pub fn shrink_weighted(k: &Mat, gamma_over_rho: f64, weights: &Mat) -> Result<Mat> {
    if weights.shape() != k.shape() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: k.shape(),
            found: weights.shape(),
        });
    }
    Ok(k.zip_map(weights, |x, w| shrink_scalar(x, gamma_over_rho * w)))
}

/// Block shrinkage with per-block threshold `gamma_over_rho·W_ij`.
pub fn shrink_block_weighted(k: &Mat, gamma_over_rho: f64, weights: &Mat, partition: &BlockPartition) -> Result<Mat> {
    partition.check(k)?;
    let grid = (partition.row_blocks(), partition.col_blocks());
    if weights.shape() != grid {
        return Err(Error::DimensionMismatch {
            what: "block weights",
            expected: grid,
            found: weights.shape(),
        });
    }
    Ok(partition.rescale_blocks(k, |i, j, norm| (norm - gamma_over_rho * weights[(i, j)]).max(0.0)))
}

/// Reweighting step: `W = 1/(|K| + ε)` per entry or `1/(‖K_ij‖_F + ε)` per
/// block.
pub fn update_weights(k: &Mat, reg: &Regularizer, partition: &BlockPartition) -> Result<Regularizer> {
    let eps = reg.epsilon;
    let weights = match reg.kind {
        RegularizerKind::WeightedL1 => k.map(|v| 1.0 / (v.abs() + eps)),
        RegularizerKind::WeightedBlockL1 => partition.block_norms(k)?.map(|n| 1.0 / (n + eps)),
        _ => return Err(Error::WrongKind),
    };
    Ok(Regularizer {
        kind: reg.kind,
        epsilon: eps,
        weights: Some(weights),
    })
}

/// Sparsity ball `{K : G(K) ≤ radius}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ball {
    /// At most this many nonzero entries.
    L0(usize),
    L1(f64),
    /// Sum of block Frobenius norms.
    Block(f64),
}

impl Ball {
    pub fn radius(&self) -> f64 {
        match *self {
            Ball::L0(s) => s as f64,
            Ball::L1(s) | Ball::Block(s) => s,
        }
    }

    /// `G(K)` measured the way this ball measures it.
    pub fn value(&self, k: &Mat, partition: &BlockPartition) -> Result<f64> {
        match self {
            Ball::L0(_) => Ok(nnz(k) as f64),
            Ball::L1(_) => Ok(k.iter().map(|v| v.abs()).sum()),
            Ball::Block(_) => Ok(partition.block_norms(k)?.iter().sum()),
        }
    }

    /// Membership test; continuous balls get a `1e-10·max(1, s)` tolerance.
    pub fn contains(&self, k: &Mat, partition: &BlockPartition) -> Result<bool> {
        let g = self.value(k, partition)?;
        Ok(match *self {
            Ball::L0(s) => g <= s as f64,
            Ball::L1(s) | Ball::Block(s) => g <= s + 1e-10 * s.max(1.0),
        })
    }

    pub fn project(&self, k: &Mat, partition: &BlockPartition) -> Result<Mat> {
        match *self {
            Ball::L0(s) => project_l0(k, s),
            Ball::L1(s) => project_l1(k, s),
            Ball::Block(s) => project_block(k, s, partition),
        }
    }

    /// The shrinkage regularizer whose γ-path approaches this ball.
    pub fn matching_regularizer(&self) -> Regularizer {
        match self {
            Ball::L0(_) | Ball::L1(_) => Regularizer::l1(),
            Ball::Block(_) => Regularizer::block_l1(),
        }
    }

    pub(crate) fn validate(&self, k: &Mat) -> Result<()> {
        match *self {
            Ball::L0(s) => {
                if s == 0 || s > k.len() {
                    return Err(Error::BadRadius("l0 radius must be in 1..=m*n"));
                }
            }
            Ball::L1(s) | Ball::Block(s) => {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::BadRadius("radius must be positive and finite"));
                }
            }
        }
        Ok(())
    }
}

pub fn nnz(k: &Mat) -> usize {
    k.iter().filter(|v| **v != 0.0).count()
}

/// Keep the `s` largest-magnitude entries. Ties go to the lowest row-major
/// index.
pub fn project_l0(k: &Mat, s: usize) -> Result<Mat> {
    Ball::L0(s).validate(k)?;
    Ok(keep_largest(k, s, |_, _| false))
}

/// ℓ0 truncation where entries flagged by `exempt` are always kept and do not
/// count against the budget `s` (which may be zero).
pub fn project_l0_masked(k: &Mat, s: usize, exempt: impl Fn(usize, usize) -> bool) -> Mat {
    keep_largest(k, s, exempt)
}

fn keep_largest(k: &Mat, s: usize, exempt: impl Fn(usize, usize) -> bool) -> Mat {
    let (m, n) = k.shape();
    // Row-major candidate list of non-exempt nonzeros.
    let mut cand: Vec<(usize, usize, f64)> = Vec::new();
    for r in 0..m {
        for c in 0..n {
            if !exempt(r, c) && k[(r, c)] != 0.0 {
                cand.push((r, c, k[(r, c)].abs()));
            }
        }
    }
    if cand.len() <= s {
        return k.clone();
    }
    // Stable sort keeps row-major order among equal magnitudes.
    cand.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut out = k.clone();
    for &(r, c, _) in &cand[s..] {
        out[(r, c)] = 0.0;
    }
    out
}

/// Threshold λ for projecting the nonnegative vector `u` onto
/// `{t ≥ 0, Σt ≤ s}`, assuming `Σu > s`.
fn simplex_threshold(u: &mut [f64], s: f64) -> f64 {
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut support = 0usize;
    let mut support_sum = 0.0;
    let mut acc = 0.0;
    for (j, &v) in u.iter().enumerate() {
        acc += v;
        if v - (acc - s) / ((j + 1) as f64) > 0.0 {
            support = j + 1;
            support_sum = acc;
        }
    }
    if support == 0 {
        return 0.0;
    }
    ((support_sum - s) / support as f64).max(0.0)
}

/// Euclidean projection onto the ℓ1 ball of radius `s`.
pub fn project_l1(k: &Mat, s: f64) -> Result<Mat> {
    Ball::L1(s).validate(k)?;
    let mut u: Vec<f64> = k.iter().map(|v| v.abs()).collect();
    if u.iter().sum::<f64>() <= s {
        return Ok(k.clone());
    }
    let lambda = simplex_threshold(&mut u, s);
    Ok(shrink(k, lambda))
}

/// Euclidean projection onto `{K : Σ_ij ‖K_ij‖_F ≤ s}`.
pub fn project_block(k: &Mat, s: f64, partition: &BlockPartition) -> Result<Mat> {
    Ball::Block(s).validate(k)?;
    let norms = partition.block_norms(k)?;
    let mut u: Vec<f64> = norms.iter().copied().collect();
    if u.iter().sum::<f64>() <= s {
        return Ok(k.clone());
    }
    let lambda = simplex_threshold(&mut u, s);
    Ok(partition.rescale_blocks(k, |_, _, norm| (norm - lambda).max(0.0)))
}
