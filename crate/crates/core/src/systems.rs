//! Benchmark plants and perturbed-plant datasets.
//!
//! The multi-agent model couples `N` three-state agents through a
//! communication network; agent `i` is driven by two inputs and three
//! disturbance channels.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ista::{is_rejection, ista_solve, IstaConfig};
use crate::linalg::Mat;
use crate::objective::lqr_gain;
use crate::plant::{Gain, Plant};
use crate::sparsity::BlockPartition;
use crate::trace::Status;

const AGENT_A: [f64; 9] = [-6.0, 0.0, -3.0, 3.0, -6.0, 0.0, 0.0, 3.0, -6.0];

/// `N`-agent benchmark: `n = 3N` states, `m = 2N` inputs, `l = 3N`
/// disturbances, `Q = I`, `R = I`.
pub fn gen_multiagent(agents: usize) -> Result<Plant> {
    if agents == 0 {
        return Err(Error::InvalidConfig("at least one agent is required"));
    }
    let n = 3 * agents;
    let m = 2 * agents;
    let mut a = Mat::zeros(n, n);
    let mut b1 = Mat::zeros(n, m);
    for i in 0..agents {
        let coupling: f64 = (0..agents).map(|j| (i as f64 - j as f64) * 0.5).sum();
        for r in 0..3 {
            for c in 0..3 {
                a[(3 * i + r, 3 * i + c)] = AGENT_A[3 * r + c];
            }
            a[(3 * i + r, 3 * i + r)] -= coupling;
        }
        for j in 0..agents {
            if j != i {
                for r in 0..3 {
                    a[(3 * i + r, 3 * j + r)] = 0.5 * (i as f64 - j as f64);
                }
            }
        }
        b1[(3 * i, 2 * i)] = 3.0;
        b1[(3 * i + 1, 2 * i + 1)] = 3.0;
    }
    let b2 = Mat::identity(n, n) * 3.0;
    let plant = Plant::new(
        a,
        b1,
        b2,
        Mat::identity(n, n),
        Mat::identity(m, m),
        BlockPartition::uniform(agents, 2, 3)?,
    )?;
    Ok(plant.with_name(alloc::format!("multiagent-{agents}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbTargets {
    /// Structural nonzeros of `A` only.
    A,
    /// Structural nonzeros of `A`, `B1` and `B2`.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub base: Plant,
    pub count: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub targets: PerturbTargets,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidConfig("dataset count must be >= 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise sigma must be nonnegative"));
        }
        Ok(())
    }

    /// Total draws allowed before generation gives up.
    pub fn draw_budget(&self) -> usize {
        10 * self.count
    }
}

/// A perturbed plant, its LQR starting gain and a converged reference gain.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub plant: Plant,
    pub k0: Mat,
    pub reference: Gain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    /// Perturbations drawn, including rejected ones.
    pub draws: usize,
}

impl Dataset {
    pub fn rejections(&self) -> usize {
        self.draws - self.examples.len()
    }

    /// Split by index: the first `train` examples, then the rest.
    pub fn split(&self, train: usize) -> (&[LabeledExample], &[LabeledExample]) {
        self.examples.split_at(train.min(self.examples.len()))
    }
}

/// Random stream for example `index`: the dataset seed selects the key and
/// the index selects the ChaCha stream, so examples are independent of
/// generation order.
pub fn example_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn perturb(m: &Mat, sigma: f64, rng: &mut ChaCha8Rng) -> Mat {
    let mut out = m.clone();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] != 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                out[(r, c)] += sigma * z;
            }
        }
    }
    out
}

/// Generate example `index`, redrawing rejected perturbations from the same
/// stream. Returns the example and the number of draws it took.
pub fn gen_example(spec: &DatasetSpec, reference: &IstaConfig, index: usize) -> Result<(LabeledExample, usize)> {
    spec.validate()?;
    let mut rng = example_rng(spec.seed, index);
    let base = &spec.base;
    for draw in 1..=spec.draw_budget() {
        let a = perturb(base.a(), spec.noise_sigma, &mut rng);
        let (b1, b2) = match spec.targets {
            PerturbTargets::A => (base.b1().clone(), base.b2().clone()),
            PerturbTargets::All => (
                perturb(base.b1(), spec.noise_sigma, &mut rng),
                perturb(base.b2(), spec.noise_sigma, &mut rng),
            ),
        };
        let plant = base.with_dynamics(a, b1, b2)?;
        let k0 = match lqr_gain(&plant) {
            Ok(k) => k,
            Err(Error::NoStabilizingSolution) => continue,
            Err(e) if is_rejection(&e) => continue,
            Err(e) => return Err(e),
        };
        let solved = match ista_solve(&plant, &k0, reference) {
            Ok(s) => s,
            Err(Error::InitNotStabilizing { .. }) => continue,
            Err(e) if is_rejection(&e) => continue,
            Err(e) => return Err(e),
        };
        if solved.trace.status != Status::Converged {
            continue;
        }
        let example = LabeledExample {
            plant,
            k0,
            reference: solved.gain,
        };
        return Ok((example, draw));
    }
    Err(Error::TooManyRejections {
        draws: spec.draw_budget(),
        count: spec.count,
    })
}

/// Assemble per-index results (in index order) into a dataset, enforcing the
/// total draw budget.
pub fn collect_dataset(
    spec: &DatasetSpec,
    results: impl IntoIterator<Item = Result<(LabeledExample, usize)>>,
) -> Result<Dataset> {
    let mut examples = Vec::with_capacity(spec.count);
    let mut draws = 0;
    for r in results {
        let (ex, d) = r?;
        draws += d;
        examples.push(ex);
    }
    if draws > spec.draw_budget() {
        return Err(Error::TooManyRejections {
            draws,
            count: spec.count,
        });
    }
    Ok(Dataset { examples, draws })
}

pub fn gen_dataset(spec: &DatasetSpec, reference: &IstaConfig) -> Result<Dataset> {
    spec.validate()?;
    collect_dataset(spec, (0..spec.count).map(|i| gen_example(spec, reference, i)))
}
