//! Dense kernels: spectral abscissa, continuous-time Lyapunov solves and the
//! stabilizing Riccati solution.
//!
//! Everything is sized for desk-scale plants (state dimension up to ~100).
//! Lyapunov equations are solved by Bartels–Stewart on a real Schur form; the
//! Kronecker-vectorized linear solve is kept as a second route behind the same
//! contract.

use alloc::vec::Vec;

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Mat = DMatrix<f64>;

/// Condition estimate above which a Lyapunov operator is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

const SCHUR_MAX_ITER: usize = 100_000;

/// Kleinman–Newton iteration cap for [`solve_care`].
/// Iterative-refinement steps after a Bartels–Stewart solve.
pub const REFINE_STEPS: usize = 3;

pub const KLEINMAN_MAX_ITER: usize = 100;
/// Relative change in the Riccati iterate that stops the Kleinman–Newton loop.
pub const KLEINMAN_TOL: f64 = 1e-12;

/// Largest real part over the spectrum of a square matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    pub abscissa: f64,
    pub is_hurwitz: bool,
}

impl SpectralReport {
    fn from_abscissa(abscissa: f64) -> Self {
        Self {
            abscissa,
            is_hurwitz: abscissa < 0.0,
        }
    }
}

/// Which algorithm backs a Lyapunov solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LyapunovMethod {
    /// Schur reduction followed by block back-substitution. O(n³).
    #[default]
    BartelsStewart,
    /// Dense `(I⊗Aᵀ + Aᵀ⊗I) vec(X) = −vec(Rhs)` solve. O(n⁶).
    Kronecker,
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn frobenius(m: &Mat) -> f64 {
    sqrt(m.iter().map(|v| v * v).sum())
}

/// Replace `x` by `(x + xᵀ)/2` in place.
pub fn symmetrize(x: &mut Mat) {
    let n = x.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub(crate) fn ensure_finite(m: &Mat, what: &'static str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(m: &Mat) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn ensure_shape(m: &Mat, what: &'static str, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch {
            what,
            expected: (rows, cols),
            found: m.shape(),
        });
    }
    Ok(())
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Mat) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `‖Aᵀ X + X A + Rhs‖_F`.
pub fn lyapunov_residual(acl: &Mat, x: &Mat, rhs: &Mat) -> f64 {
    frobenius(&(acl.transpose() * x + x * acl + rhs))
}

/// `‖A X + X Aᵀ + Rhs‖_F`.
pub fn dual_lyapunov_residual(acl: &Mat, x: &Mat, rhs: &Mat) -> f64 {
    frobenius(&(acl * x + x * acl.transpose() + rhs))
}

/// `‖AᵀP + PA − P B R⁻¹ Bᵀ P + Q‖_F`.
pub fn riccati_residual(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> f64 {
    let r_inv = r
        .clone()
        .try_inverse()
        .unwrap_or_else(|| Mat::zeros(r.nrows(), r.ncols()));
    let g = b * r_inv * b.transpose();
    frobenius(&(a.transpose() * p + p * a - p * g * p + q))
}

#[derive(Debug, Clone, Copy)]
struct DiagBlock {
    start: usize,
    size: usize,
}

/// Real Schur factorization `M = U T Uᵀ` with the diagonal block structure of
/// `T` resolved. One factorization serves the stability test and both
/// Lyapunov solves for a given closed loop.
#[derive(Debug, Clone)]
pub struct RealSchur {
    m: Mat,
    u: Mat,
    t: Mat,
    blocks: Vec<DiagBlock>,
    abscissa: f64,
    norm: f64,
}

impl RealSchur {
    pub fn new(m: &Mat) -> Result<Self> {
        let n = ensure_square(m)?;
        ensure_finite(m, "matrix")?;
        let norm = frobenius(m);
        let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::EigenFailure)?;
        let (u, mut t) = schur.unpack();

        let mut blocks = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)] != 0.0 {
                blocks.push(DiagBlock { start: i, size: 2 });
                i += 2;
            } else {
                blocks.push(DiagBlock { start: i, size: 1 });
                i += 1;
            }
        }
        // Anything left below the block diagonal must be round-off.
        let mut block_end = alloc::vec![0usize; n];
        for b in &blocks {
            block_end[b.start..b.start + b.size].fill(b.start + b.size);
        }
        let mut stray = 0.0f64;
        for c in 0..n {
            for r in block_end[c]..n {
                stray = stray.max(t[(r, c)].abs());
                t[(r, c)] = 0.0;
            }
        }
        if stray > 1e-8 * norm.max(1.0) {
            return Err(Error::EigenFailure);
        }

        let abscissa = blocks
            .iter()
            .map(|b| block_max_real_part(&t, *b))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            m: m.clone(),
            u,
            t,
            blocks,
            abscissa,
            norm,
        })
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn report(&self) -> SpectralReport {
        SpectralReport::from_abscissa(self.abscissa)
    }

    fn check_solvable(&self) -> Result<()> {
        if self.abscissa >= 0.0 {
            return Err(Error::NotHurwitz {
                abscissa: self.abscissa,
            });
        }
        // For a Hurwitz matrix every eigenvalue sum λᵢ + λⱼ has modulus at
        // least 2|abscissa|, which bounds the separation of the operator.
        // Norms below one are measured against unit scale.
        let condition = self.norm.max(1.0) / (-self.abscissa);
        if !(condition <= SINGULAR_CONDITION) {
            return Err(Error::SingularSystem { condition });
        }
        Ok(())
    }

    /// Solve `Aᵀ X + X A + Rhs = 0` for the factored `A`.
    pub fn solve_lyapunov(&self, rhs: &Mat) -> Result<Mat> {
        self.solve(rhs, false)
    }

    /// Solve `A X + X Aᵀ + Rhs = 0` for the factored `A`.
    pub fn solve_dual_lyapunov(&self, rhs: &Mat) -> Result<Mat> {
        self.solve(rhs, true)
    }

    fn solve(&self, rhs: &Mat, dual: bool) -> Result<Mat> {
        let n = self.t.nrows();
        ensure_shape(rhs, "Lyapunov right-hand side", n, n)?;
        ensure_finite(rhs, "Lyapunov right-hand side")?;
        self.check_solvable()?;

        let residual = |x: &Mat| {
            if dual {
                &self.m * x + x * self.m.transpose() + rhs
            } else {
                self.m.transpose() * x + x * &self.m + rhs
            }
        };
        let mut x = self.solve_once(rhs, dual)?;
        // Refinement against the unfactored matrix removes the error from
        // round-off in U and from the sub-diagonal entries dropped from T.
        let mut res = residual(&x);
        let mut res_norm = frobenius(&res);
        for _ in 0..REFINE_STEPS {
            if res_norm <= f64::EPSILON * rhs.norm().max(1.0) {
                break;
            }
            let next = &x + self.solve_once(&res, dual)?;
            let next_res = residual(&next);
            let next_norm = frobenius(&next_res);
            if !(next_norm < res_norm) {
                break;
            }
            x = next;
            res = next_res;
            res_norm = next_norm;
        }
        Ok(x)
    }

    fn solve_once(&self, rhs: &Mat, dual: bool) -> Result<Mat> {
        let c = -(self.u.transpose() * rhs * &self.u);
        let y = if dual {
            self.back_substitute_dual(&c)?
        } else {
            self.back_substitute(&c)?
        };
        let mut x = &self.u * y * self.u.transpose();
        symmetrize(&mut x);
        Ok(x)
    }

    /// `Tᵀ Y + Y T = C`, sweeping blocks from the top-left corner.
    fn back_substitute(&self, c: &Mat) -> Result<Mat> {
        let t = &self.t;
        let n = t.nrows();
        let mut y = Mat::zeros(n, n);
        for bi in &self.blocks {
            for bj in &self.blocks {
                let (p, q) = (bi.size, bj.size);
                let mut rhs = [0.0; 4];
                for a in 0..p {
                    let r = bi.start + a;
                    for b in 0..q {
                        let col = bj.start + b;
                        let mut v = c[(r, col)];
                        for k in 0..bi.start {
                            v -= t[(k, r)] * y[(k, col)];
                        }
                        for k in 0..bj.start {
                            v -= y[(r, k)] * t[(k, col)];
                        }
                        rhs[a + p * b] = v;
                    }
                }
                // (I_q ⊗ T_IIᵀ + T_JJᵀ ⊗ I_p) vec(Y_IJ) = vec(rhs)
                let mut op = [0.0; 16];
                let dim = p * q;
                for b in 0..q {
                    for a in 0..p {
                        let row = a + p * b;
                        for a2 in 0..p {
                            op[row * dim + a2 + p * b] += t[(bi.start + a2, bi.start + a)];
                        }
                        for b2 in 0..q {
                            op[row * dim + a + p * b2] += t[(bj.start + b2, bj.start + b)];
                        }
                    }
                }
                solve_small(&mut op, &mut rhs, dim)?;
                for a in 0..p {
                    for b in 0..q {
                        y[(bi.start + a, bj.start + b)] = rhs[a + p * b];
                    }
                }
            }
        }
        Ok(y)
    }

    /// `T Y + Y Tᵀ = C`, sweeping blocks from the bottom-right corner.
    fn back_substitute_dual(&self, c: &Mat) -> Result<Mat> {
        let t = &self.t;
        let n = t.nrows();
        let mut y = Mat::zeros(n, n);
        for bi in self.blocks.iter().rev() {
            for bj in self.blocks.iter().rev() {
                let (p, q) = (bi.size, bj.size);
                let (i_end, j_end) = (bi.start + p, bj.start + q);
                let mut rhs = [0.0; 4];
                for a in 0..p {
                    let r = bi.start + a;
                    for b in 0..q {
                        let col = bj.start + b;
                        let mut v = c[(r, col)];
                        for k in i_end..n {
                            v -= t[(r, k)] * y[(k, col)];
                        }
                        for k in j_end..n {
                            v -= y[(r, k)] * t[(col, k)];
                        }
                        rhs[a + p * b] = v;
                    }
                }
                // (I_q ⊗ T_II + T_JJ ⊗ I_p) vec(Y_IJ) = vec(rhs)
                let mut op = [0.0; 16];
                let dim = p * q;
                for b in 0..q {
                    for a in 0..p {
                        let row = a + p * b;
                        for a2 in 0..p {
                            op[row * dim + a2 + p * b] += t[(bi.start + a, bi.start + a2)];
                        }
                        for b2 in 0..q {
                            op[row * dim + a + p * b2] += t[(bj.start + b, bj.start + b2)];
                        }
                    }
                }
                solve_small(&mut op, &mut rhs, dim)?;
                for a in 0..p {
                    for b in 0..q {
                        y[(bi.start + a, bj.start + b)] = rhs[a + p * b];
                    }
                }
            }
        }
        Ok(y)
    }
}

fn block_max_real_part(t: &Mat, b: DiagBlock) -> f64 {
    let s = b.start;
    if b.size == 1 {
        return t[(s, s)];
    }
    let (a, bb, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
    let half_trace = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + bb * c;
    if disc < 0.0 {
        half_trace
    } else {
        half_trace + sqrt(disc)
    }
}

/// Gaussian elimination with partial pivoting on a row-major `dim×dim`
/// system, `dim ≤ 4`. The solution overwrites `rhs`.
fn solve_small(op: &mut [f64; 16], rhs: &mut [f64; 4], dim: usize) -> Result<()> {
    let scale = op[..dim * dim].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..dim {
        let mut piv = col;
        for r in (col + 1)..dim {
            if op[r * dim + col].abs() > op[piv * dim + col].abs() {
                piv = r;
            }
        }
        let pv = op[piv * dim + col];
        if pv.abs() <= scale * f64::EPSILON * 16.0 || pv == 0.0 {
            return Err(Error::SingularSystem {
                condition: f64::INFINITY,
            });
        }
        if piv != col {
            for k in 0..dim {
                op.swap(piv * dim + k, col * dim + k);
            }
            rhs.swap(piv, col);
        }
        for r in (col + 1)..dim {
            let f = op[r * dim + col] / pv;
            if f != 0.0 {
                for k in col..dim {
                    op[r * dim + k] -= f * op[col * dim + k];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    for col in (0..dim).rev() {
        let mut v = rhs[col];
        for k in (col + 1)..dim {
            v -= op[col * dim + k] * rhs[k];
        }
        rhs[col] = v / op[col * dim + col];
    }
    Ok(())
}

/// Spectral abscissa (largest eigenvalue real part) of a square matrix.
pub fn spectral_abscissa(m: &Mat) -> Result<SpectralReport> {
    Ok(RealSchur::new(m)?.report())
}

/// Solve `Aclᵀ X + X Acl + Rhs = 0`.
pub fn solve_lyapunov(acl: &Mat, rhs: &Mat) -> Result<Mat> {
    solve_lyapunov_with(acl, rhs, LyapunovMethod::default())
}

/// Solve `Acl X + X Aclᵀ + Rhs = 0`.
pub fn solve_dual_lyapunov(acl: &Mat, rhs: &Mat) -> Result<Mat> {
    solve_dual_lyapunov_with(acl, rhs, LyapunovMethod::default())
}

pub fn solve_lyapunov_with(acl: &Mat, rhs: &Mat, method: LyapunovMethod) -> Result<Mat> {
    match method {
        LyapunovMethod::BartelsStewart => RealSchur::new(acl)?.solve_lyapunov(rhs),
        LyapunovMethod::Kronecker => kronecker_solve(acl, rhs),
    }
}

pub fn solve_dual_lyapunov_with(acl: &Mat, rhs: &Mat, method: LyapunovMethod) -> Result<Mat> {
    match method {
        LyapunovMethod::BartelsStewart => RealSchur::new(acl)?.solve_dual_lyapunov(rhs),
        LyapunovMethod::Kronecker => kronecker_solve(&acl.transpose(), rhs),
    }
}

fn kronecker_solve(acl: &Mat, rhs: &Mat) -> Result<Mat> {
    let n = ensure_square(acl)?;
    ensure_shape(rhs, "Lyapunov right-hand side", n, n)?;
    ensure_finite(acl, "closed-loop matrix")?;
    ensure_finite(rhs, "Lyapunov right-hand side")?;
    let report = spectral_abscissa(acl)?;
    if !report.is_hurwitz {
        return Err(Error::NotHurwitz {
            abscissa: report.abscissa,
        });
    }

    // Column-major vec: row i + n·j holds X[i, j].
    let nn = n * n;
    let mut op = Mat::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for k in 0..n {
                op[(row, k + n * j)] += acl[(k, i)];
                op[(row, i + n * k)] += acl[(k, j)];
            }
        }
    }
    let lu = op.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(&op) * one_norm(&inv);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let b = nalgebra::DVector::from_iterator(nn, rhs.iter().map(|v| -v));
    let sol = op.lu().solve(&b).ok_or(Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let mut x = Mat::from_column_slice(n, n, sol.as_slice());
    symmetrize(&mut x);
    Ok(x)
}

fn one_norm(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Stabilizing solution of `AᵀP + PA − P B R⁻¹ Bᵀ P + Q = 0`.
///
/// Kleinman–Newton iteration started from Bass's stabilizing gain. Each
/// Newton step is one Lyapunov solve.
pub fn solve_care(a: &Mat, b1: &Mat, q: &Mat, r: &Mat) -> Result<Mat> {
    let n = ensure_square(a)?;
    let m = b1.ncols();
    ensure_shape(b1, "B1", n, m)?;
    ensure_shape(q, "Q", n, n)?;
    ensure_shape(r, "R", m, m)?;
    for (mat, what) in [(a, "A"), (b1, "B1"), (q, "Q"), (r, "R")] {
        ensure_finite(mat, what)?;
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or(Error::InvalidWeights("R must be symmetric positive definite"))?;
    let gain_from = |p: &Mat| r_chol.solve(&(b1.transpose() * p));

    let mut k = bass_gain(a, b1)?;
    let mut p_prev: Option<Mat> = None;
    for _ in 0..KLEINMAN_MAX_ITER {
        let acl = a - b1 * &k;
        let schur = RealSchur::new(&acl)?;
        if !schur.report().is_hurwitz {
            return Err(Error::NoStabilizingSolution);
        }
        let p = schur
            .solve_lyapunov(&(q + k.transpose() * r * &k))
            .map_err(|_| Error::NoStabilizingSolution)?;
        k = gain_from(&p);
        if let Some(prev) = &p_prev {
            let change = frobenius(&(&p - prev));
            if change <= KLEINMAN_TOL * frobenius(&p).max(f64::MIN_POSITIVE) {
                return finish_care(a, b1, &k, p);
            }
        }
        p_prev = Some(p);
    }
    // Round-off can stall the relative-change test just above tolerance; the
    // last iterate is still usable if it stabilizes.
    match p_prev {
        Some(p) => finish_care(a, b1, &k, p),
        None => Err(Error::NoStabilizingSolution),
    }
}

fn finish_care(a: &Mat, b1: &Mat, k: &Mat, p: Mat) -> Result<Mat> {
    if spectral_abscissa(&(a - b1 * k))?.is_hurwitz {
        Ok(p)
    } else {
        Err(Error::NoStabilizingSolution)
    }
}

/// Bass's method: for β with `−(A+βI)` Hurwitz, solve
/// `(A+βI)Y + Y(A+βI)ᵀ = 2 B Bᵀ` and take `K = Bᵀ Y⁻¹`, which places the
/// closed loop left of `−β`.
///
/// The smallest admissible shift is tried first: large shifts make `Y`
/// badly conditioned for plants with few inputs. `β = ‖A‖_F + 1` is the
/// fallback.
fn bass_gain(a: &Mat, b1: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let rhs = b1 * b1.transpose() * 2.0;
    let zero_gain = Mat::zeros(b1.ncols(), n);
    let min_shift = spectral_abscissa(&(-a))?.abscissa.max(0.0) + 1.0;
    for beta in [min_shift, frobenius(a) + 1.0] {
        let shifted = -(a + Mat::identity(n, n) * beta);
        let candidate = solve_dual_lyapunov(&shifted, &rhs)
            .ok()
            .and_then(|y| y.cholesky())
            .map(|chol| chol.solve(b1).transpose());
        if let Some(k) = candidate {
            if k.iter().all(|v| v.is_finite()) && spectral_abscissa(&(a - b1 * &k))?.is_hurwitz {
                return Ok(k);
            }
        }
    }
    // Not controllable: a stable open loop still admits K = 0.
    if spectral_abscissa(a)?.is_hurwitz {
        return Ok(zero_gain);
    }
    Err(Error::NoStabilizingSolution)
}
