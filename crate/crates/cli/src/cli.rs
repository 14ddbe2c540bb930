use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::files::Targets;

/// Sparse LQR feedback design: solvers, sweeps, datasets and tuned unrolled
/// networks.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "sparse-lqr", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for sweeps, datasets and network evaluation.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Stopping tolerance; defaults to each algorithm's own.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Iteration cap; defaults to each algorithm's own.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
pub enum Command {
    /// Write the multi-agent benchmark plant to plant.json.
    Gen(GenArgs),
    /// Solve one instance; writes gain.json and trace.csv.
    Solve(SolveArgs),
    /// Solve over a range of γ (or radius, or s); writes sweep.csv.
    Sweep(SweepArgs),
    /// Generate perturbed plants with reference gains; writes dataset.json.
    Dataset(DatasetArgs),
    /// Train an unrolled network; writes net.json.
    Tune(TuneArgs),
    /// NMSE of untuned and tuned networks, or of given estimates; writes nmse.csv.
    Eval(EvalArgs),
    /// Re-run a manifest into --out and compare output hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    /// Number of agents N (n = 3N states, m = 2N inputs).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub agents: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ista,
    Fista,
    Ispa,
    Admm,
    Grasp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegName {
    L1,
    BlockL1,
    WeightedL1,
    WeightedBlockL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BallName {
    L0,
    L1,
    Block,
}

/// Solver settings. Flags that do not apply to the chosen algorithm are
/// ignored; unset optional flags take the algorithm's default.
#[derive(Debug, Clone, Args, Serialize)]
pub struct AlgoArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,

    /// Regularization weight (ista, fista, admm).
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    #[arg(long, value_enum, default_value = "l1")]
    pub regularizer: RegName,

    /// Reweighting offset for weighted regularizers.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,

    /// Initial ρ (ista, fista; default 100) or step size (ispa; default 1).
    #[arg(long)]
    pub rho0: Option<f64>,

    /// Backtracking factor: ρ multiplier > 1 (ista, fista; default 1.5) or
    /// step shrink < 1 (ispa, grasp; default 0.7).
    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long, default_value_t = 60)]
    pub max_backtracks: usize,

    /// Accept any stabilizing candidate without checking the surrogate bound.
    #[arg(long)]
    pub non_strict: bool,

    /// Scale of the FISTA extrapolation weight.
    #[arg(long, default_value_t = 1.0)]
    pub momentum: f64,

    /// Constraint set (ispa).
    #[arg(long, value_enum, default_value = "l0")]
    pub ball: BallName,

    /// Ball radius (ispa); an integer count for the l0 ball.
    #[arg(long)]
    pub radius: Option<f64>,

    /// Sufficient-decrease constant (ispa, grasp).
    #[arg(long, default_value_t = 1e-4)]
    pub armijo_c: f64,

    /// Augmented-Lagrangian penalty (admm).
    #[arg(long, default_value_t = 100.0)]
    pub rho: f64,

    #[arg(long, default_value_t = 1e-4)]
    pub eps_abs: f64,

    #[arg(long, default_value_t = 1e-2)]
    pub eps_rel: f64,

    /// Inner descent steps (admm default 50, grasp default 25).
    #[arg(long)]
    pub inner_steps: Option<usize>,

    /// Inner stopping tolerance (admm).
    #[arg(long, default_value_t = 1e-6)]
    pub inner_tol: f64,

    /// Budget of counted nonzeros (grasp).
    #[arg(long)]
    pub s: Option<usize>,

    /// Initial restricted-descent step (grasp).
    #[arg(long, default_value_t = 1.0)]
    pub step0: f64,

    #[arg(long, default_value_t = 40)]
    pub max_bisections: usize,

    /// Count and prune diagonal blocks too (grasp).
    #[arg(long)]
    pub no_exempt_diagonal: bool,

    /// Count whole off-diagonal blocks (grasp).
    #[arg(long)]
    pub block_mode: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub plant: PathBuf,

    /// Starting gain: a JSON object with a `K` field (e.g. a previous
    /// gain.json); defaults to the LQR gain.
    #[arg(long)]
    pub k0: Option<PathBuf>,

    #[command(flatten)]
    pub algo: AlgoArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub plant: PathBuf,

    /// Swept values: γ (ista, fista, admm), radius (ispa) or s (grasp).
    #[arg(long, value_delimiter = ',', required_unless_present = "range")]
    pub values: Vec<f64>,

    /// Evenly spaced values as START:STOP:COUNT.
    #[arg(long, conflicts_with = "values")]
    pub range: Option<String>,

    #[command(flatten)]
    pub algo: AlgoArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// Base plant file; defaults to the multi-agent plant with --agents.
    #[arg(long, conflicts_with = "agents")]
    pub plant: Option<PathBuf>,

    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub agents: u64,

    #[arg(long, default_value_t = 120)]
    pub count: usize,

    /// Standard deviation of the additive perturbation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,

    #[arg(long, value_enum, default_value = "a")]
    pub targets: Targets,

    /// γ of the ISTA reference solves.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpArg {
    Elementwise,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Spsa,
    Fd,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NetArgs {
    /// ρ of the untuned network (w1 = 1/ρ, w2 = γ/ρ).
    #[arg(long, default_value_t = 100.0)]
    pub rho0: f64,

    /// γ of the untuned network; defaults to the dataset's reference γ.
    #[arg(long)]
    pub gamma: Option<f64>,

    #[arg(long, value_enum, default_value = "elementwise")]
    pub op: OpArg,

    /// Examples used for training; the rest are held out.
    #[arg(long, default_value_t = 100)]
    pub train: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TuneArgs {
    #[arg(long)]
    pub dataset: PathBuf,

    #[arg(long, default_value_t = 10)]
    pub layers: usize,

    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,

    /// Initial relative step.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,

    /// Relative perturbation size.
    #[arg(long, default_value_t = 1e-3)]
    pub perturb: f64,

    #[arg(long, default_value_t = 8)]
    pub batch: usize,

    #[arg(long, value_enum, default_value = "spsa")]
    pub mode: ModeArg,

    /// Epochs between full training-loss checkpoints.
    #[arg(long, default_value_t = 50)]
    pub checkpoint_every: usize,

    #[command(flatten)]
    pub net: NetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SetArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,

    /// Tuned network files; each adds a row at its depth.
    #[arg(long = "net")]
    pub nets: Vec<PathBuf>,

    /// Depths evaluated for the untuned network.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
    pub depths: Vec<usize>,

    /// Estimates file ({"estimates": [K, ...]}) scored instead of networks.
    #[arg(long, conflicts_with = "nets")]
    pub estimates: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "test")]
    pub set: SetArg,

    #[command(flatten)]
    pub net: NetArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
