use alloc::string::String;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, is_finite, min_symmetric_eigenvalue, Mat};
use crate::sparsity::BlockPartition;

/// Tolerance for the symmetry and definiteness checks on `Q` and `R`.
pub const WEIGHT_TOL: f64 = 1e-10;

/// Continuous-time plant `ẋ = Ax + B1 u + B2 d` with LQR weights `Q`, `R`
/// and the agent partition of the gain `K` (`m×n`).
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: Mat,
    b1: Mat,
    b2: Mat,
    q: Mat,
    r: Mat,
    partition: BlockPartition,
    name: Option<String>,
}

impl Plant {
    pub fn new(a: Mat, b1: Mat, b2: Mat, q: Mat, r: Mat, partition: BlockPartition) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::NonSquare {
                rows: n,
                cols: a.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::Empty("state matrix"));
        }
        let m = b1.ncols();
        if b1.nrows() != n || m == 0 {
            return Err(Error::DimensionMismatch {
                what: "B1",
                expected: (n, m.max(1)),
                found: b1.shape(),
            });
        }
        if b2.nrows() != n || b2.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                what: "B2",
                expected: (n, b2.ncols().max(1)),
                found: b2.shape(),
            });
        }
        if q.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                what: "Q",
                expected: (n, n),
                found: q.shape(),
            });
        }
        if r.shape() != (m, m) {
            return Err(Error::DimensionMismatch {
                what: "R",
                expected: (m, m),
                found: r.shape(),
            });
        }
        for (mat, what) in [(&a, "A"), (&b1, "B1"), (&b2, "B2"), (&q, "Q"), (&r, "R")] {
            if !is_finite(mat) {
                return Err(Error::NonFinite(what));
            }
        }
        if !is_symmetric(&q) {
            return Err(Error::InvalidWeights("Q is not symmetric"));
        }
        if min_symmetric_eigenvalue(&q) < -WEIGHT_TOL * frobenius(&q).max(1.0) {
            return Err(Error::InvalidWeights("Q is not positive semidefinite"));
        }
        if !is_symmetric(&r) {
            return Err(Error::InvalidWeights("R is not symmetric"));
        }
        if min_symmetric_eigenvalue(&r) <= WEIGHT_TOL * frobenius(&r).max(1.0) {
            return Err(Error::InvalidWeights("R is not positive definite"));
        }
        if partition.rows() != m || partition.cols() != n {
            return Err(Error::PartitionMismatch {
                rows: partition.rows(),
                cols: partition.cols(),
                m,
                n,
            });
        }
        Ok(Self {
            a,
            b1,
            b2,
            q,
            r,
            partition,
            name: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b1(&self) -> &Mat {
        &self.b1
    }

    pub fn b2(&self) -> &Mat {
        &self.b2
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b1.ncols()
    }

    /// Disturbance dimension.
    pub fn l(&self) -> usize {
        self.b2.ncols()
    }

    /// Same plant with `A`, `B1`, `B2` replaced; weights and partition kept.
    pub fn with_dynamics(&self, a: Mat, b1: Mat, b2: Mat) -> Result<Self> {
        let mut p = Self::new(a, b1, b2, self.q.clone(), self.r.clone(), self.partition.clone())?;
        p.name = self.name.clone();
        Ok(p)
    }

    pub(crate) fn check_gain(&self, k: &Mat) -> Result<()> {
        if k.shape() != (self.m(), self.n()) {
            return Err(Error::DimensionMismatch {
                what: "gain",
                expected: (self.m(), self.n()),
                found: k.shape(),
            });
        }
        if !is_finite(k) {
            return Err(Error::NonFinite("gain"));
        }
        Ok(())
    }
}

fn is_symmetric(m: &Mat) -> bool {
    let scale = frobenius(m).max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > WEIGHT_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// A feedback gain together with its closed-loop abscissa and, when known,
/// its LQR cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Gain {
    pub k: Mat,
    pub abscissa: f64,
    pub cost: Option<f64>,
}
