//! Sparse LQR state-feedback design.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the CLI and
//! parallel sweeps live in the `sparse-lqr` companion crate.

#![no_std]
// Negated comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod admm;
mod error;
pub mod grasp;
pub mod ispa;
pub mod ista;
pub mod linalg;
pub mod objective;
pub mod plant;
pub mod sparsity;
pub mod systems;
pub mod trace;
pub mod unrolled;

pub use admm::{admm_solve, AdmmConfig};
pub use error::{Error, Result};
pub use grasp::{grasp_solve, GraspConfig};
pub use ispa::{ispa_solve, IspaConfig};
pub use ista::{fista_solve, ista_solve, IstaConfig};
pub use linalg::{Mat, SpectralReport};
pub use objective::{cost_j, grad_j, lqr_gain, GainEval};
pub use plant::{Gain, Plant};
pub use sparsity::{Ball, BlockPartition, Regularizer, RegularizerKind};
pub use trace::{IterRecord, SolveResult, SolveTrace, Status};
