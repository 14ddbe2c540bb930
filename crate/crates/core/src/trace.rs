use alloc::vec::Vec;

use crate::plant::Gain;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterReached,
    Stalled,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterReached => "max_iter_reached",
            Status::Stalled => "stalled",
        }
    }
}

/// One row of a solver trace. Row 0 describes the starting point.
///
/// `rho` is the accepted step parameter: the curvature ρ for ISTA/FISTA,
/// the step size for ISPA/GraSP, and the penalty for ADMM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub f: f64,
    pub j: f64,
    pub g: f64,
    pub rho: f64,
    pub nnz: usize,
    pub abscissa: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterRecord>,
    pub status: Status,
    /// Total Lyapunov solves, including rejected candidates.
    pub lyapunov_solves: usize,
}

impl SolveTrace {
    pub(crate) fn new() -> Self {
        Self {
            records: Vec::new(),
            status: Status::MaxIterReached,
            lyapunov_solves: 0,
        }
    }

    /// Number of iterations performed (rows after the starting point).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// Largest step parameter over the accepted iterations.
    pub fn max_rho(&self) -> f64 {
        self.records.iter().skip(1).map(|r| r.rho).fold(0.0, f64::max)
    }

    /// Whether `F` never increases by more than `1e-9·(1 + |F|)`.
    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].f <= w[0].f + 1e-9 * (1.0 + w[0].f.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub gain: Gain,
    pub trace: SolveTrace,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.trace.status == Status::Converged
    }
}
