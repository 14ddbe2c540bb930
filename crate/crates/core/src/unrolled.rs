//! Unrolled proximal-gradient network with per-layer step size `w1`,
//! threshold `w2` and mixing weight `w3`, trained on labeled plants.
//!
//! Layer `t` maps `K` to `w3·S(K − w1∇J(K); w2) + (1 − w3)·K`, or leaves
//! `K` unchanged when that candidate does not stabilize the plant.

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ista::{eval_initial, is_rejection};
use crate::linalg::Mat;
use crate::objective::GainEval;
use crate::plant::{Gain, Plant};
use crate::sparsity::{shrink, shrink_block};
use crate::systems::LabeledExample;

/// Lower bound enforced on every step size after an update.
pub const MIN_STEP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerParams {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityOp {
    Elementwise,
    Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnrolledNet {
    layers: Vec<LayerParams>,
    op: SparsityOp,
}

impl UnrolledNet {
    pub fn new(layers: Vec<LayerParams>, op: SparsityOp) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer"));
        }
        for l in &layers {
            if !(l.w1 > 0.0 && l.w1.is_finite() && l.w2 >= 0.0 && l.w2.is_finite() && l.w3.is_finite()) {
                return Err(Error::InvalidConfig("layer needs w1 > 0, w2 >= 0, finite w3"));
            }
        }
        Ok(Self { layers, op })
    }

    /// Every layer set to the fixed-ρ ISTA step: `w1 = 1/ρ`, `w2 = γ/ρ`,
    /// `w3 = 1`.
    pub fn untuned(depth: usize, rho: f64, gamma: f64, op: SparsityOp) -> Result<Self> {
        let layer = LayerParams {
            w1: 1.0 / rho,
            w2: gamma / rho,
            w3: 1.0,
        };
        Self::new(alloc::vec![layer; depth], op)
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn op(&self) -> SparsityOp {
        self.op
    }

    /// First `depth` layers of this network.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        Self::new(self.layers[..depth.min(self.depth())].to_vec(), self.op)
    }

    fn to_vec(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| [l.w1, l.w2, l.w3]).collect()
    }

    /// Rebuild from a flat parameter vector, clamping onto the feasible set.
    fn with_params(&self, theta: &[f64]) -> Self {
        let layers = theta
            .chunks_exact(3)
            .map(|c| LayerParams {
                w1: c[0].max(MIN_STEP),
                w2: c[1].max(0.0),
                w3: c[2],
            })
            .collect();
        Self { layers, op: self.op }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub gain: Gain,
    /// Output of every layer, in order.
    pub outputs: Vec<Mat>,
    /// Layers whose candidate was rejected as not stabilizing.
    pub fallbacks: Vec<bool>,
}

impl ForwardOutput {
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.iter().filter(|f| **f).count()
    }
}

pub fn forward(net: &UnrolledNet, plant: &Plant, k0: &Mat) -> Result<ForwardOutput> {
    let (mut cur, _) = eval_initial(plant, k0)?;
    let mut outputs = Vec::with_capacity(net.depth());
    let mut fallbacks = Vec::with_capacity(net.depth());
    for layer in &net.layers {
        let v = cur.k() - cur.grad()? * layer.w1;
        let shrunk = match net.op {
            SparsityOp::Elementwise => shrink(&v, layer.w2),
            SparsityOp::Block => shrink_block(&v, layer.w2, plant.partition())?,
        };
        let cand = if layer.w3 == 1.0 {
            shrunk
        } else {
            shrunk * layer.w3 + cur.k() * (1.0 - layer.w3)
        };
        let next = match GainEval::new(plant, cand) {
            Ok(e) => Some(e),
            Err(e) if is_rejection(&e) => None,
            Err(e) => return Err(e),
        };
        match next {
            Some(e) => {
                cur = e;
                fallbacks.push(false);
            }
            None => fallbacks.push(true),
        }
        outputs.push(cur.k().clone());
    }
    Ok(ForwardOutput {
        gain: cur.into_gain(),
        outputs,
        fallbacks,
    })
}

/// `‖K* − forward(net, plant, K0)‖²_F` for one example.
pub fn example_loss(net: &UnrolledNet, ex: &LabeledExample) -> Result<f64> {
    let out = forward(net, &ex.plant, &ex.k0)?;
    Ok((&ex.reference.k - &out.gain.k).norm_squared())
}

/// Sum of per-example losses, accumulated in index order.
pub fn loss(net: &UnrolledNet, examples: &[LabeledExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        total += example_loss(net, ex)?;
    }
    Ok(total)
}

/// `(1/r) Σ ‖K̂ᵢ − K*ᵢ‖²_F / ‖K*ᵢ‖²_F`.
pub fn nmse(estimates: &[Mat], references: &[Mat]) -> Result<f64> {
    if estimates.len() != references.len() {
        return Err(Error::DimensionMismatch {
            what: "estimate count",
            expected: (references.len(), 1),
            found: (estimates.len(), 1),
        });
    }
    if references.is_empty() {
        return Err(Error::Empty("nmse inputs"));
    }
    let mut total = 0.0;
    for (index, (e, r)) in estimates.iter().zip(references).enumerate() {
        if e.shape() != r.shape() {
            return Err(Error::DimensionMismatch {
                what: "estimate",
                expected: r.shape(),
                found: e.shape(),
            });
        }
        let denom = r.norm_squared();
        if denom == 0.0 {
            return Err(Error::ZeroReference { index });
        }
        total += (e - r).norm_squared() / denom;
    }
    Ok(total / references.len() as f64)
}

/// NMSE of the network's outputs against the examples' reference gains.
pub fn net_nmse(net: &UnrolledNet, examples: &[LabeledExample]) -> Result<f64> {
    let mut est = Vec::with_capacity(examples.len());
    let mut refs = Vec::with_capacity(examples.len());
    for ex in examples {
        est.push(forward(net, &ex.plant, &ex.k0)?.gain.k);
        refs.push(ex.reference.k.clone());
    }
    nmse(&est, &refs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Simultaneous-perturbation estimate: two loss evaluations per epoch.
    Spsa,
    /// Central differences in every parameter: `6·depth` evaluations.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Initial relative step; grows by 1.2× on accepted updates and halves
    /// on rejected ones.
    pub step: f64,
    /// Relative perturbation size.
    pub perturb: f64,
    pub batch: usize,
    pub seed: u64,
    pub mode: GradientMode,
    pub checkpoint_every: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 1000,
            step: 0.1,
            perturb: 1e-3,
            batch: 8,
            seed: 0,
            mode: GradientMode::Spsa,
            checkpoint_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub net: UnrolledNet,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub accepted: usize,
    /// False when no update lowered the full training loss; `net` is then
    /// the initial network.
    pub improved: bool,
}

/// Train on `examples` with per-example losses evaluated sequentially.
pub fn train(net: &UnrolledNet, examples: &[LabeledExample], opts: &TrainOptions) -> Result<TrainReport> {
    train_with(net, examples, opts, |n, batch| {
        batch.iter().map(|ex| example_loss(n, ex)).collect()
    })
}

/// Train with a caller-supplied batch evaluator returning one loss per
/// example in batch order (e.g. a parallel map). Losses are summed in order
/// so the result does not depend on how the evaluator schedules work.
///
/// Each epoch draws a minibatch, estimates the gradient in coordinates
/// scaled by the initial parameter magnitudes, and keeps the update only if
/// the minibatch loss does not increase. Every `checkpoint_every` epochs the
/// full training loss is evaluated: the best network so far is kept, and a
/// network that got worse is reset to it with the step halved.
pub fn train_with<F>(
    net: &UnrolledNet,
    examples: &[LabeledExample],
    opts: &TrainOptions,
    eval: F,
) -> Result<TrainReport>
where
    F: Fn(&UnrolledNet, &[&LabeledExample]) -> Result<Vec<f64>>,
{
    if examples.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !(opts.step > 0.0 && opts.perturb > 0.0) || opts.batch == 0 || opts.checkpoint_every == 0 {
        return Err(Error::InvalidConfig(
            "step, perturbation, batch and checkpoint interval must be positive",
        ));
    }
    let batch_loss = |n: &UnrolledNet, batch: &[&LabeledExample]| -> Result<f64> { Ok(eval(n, batch)?.iter().sum()) };
    let all: Vec<&LabeledExample> = examples.iter().collect();
    let initial_loss = batch_loss(net, &all)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut theta = net.to_vec();
    let scale: Vec<f64> = theta.iter().map(|t| t.abs().max(1e-3)).collect();
    let mut current = net.clone();
    let mut step = opts.step;
    let mut accepted = 0;
    let batch_size = opts.batch.min(examples.len());
    let mut best = (net.clone(), initial_loss);

    for epoch in 1..=opts.epochs {
        let mut idx = sample(&mut rng, examples.len(), batch_size).into_vec();
        idx.sort_unstable();
        let batch: Vec<&LabeledExample> = idx.iter().map(|&i| &examples[i]).collect();
        let base = batch_loss(&current, &batch)?;
        if base == 0.0 {
            break;
        }

        let c = opts.perturb;
        let grad: Vec<f64> = match opts.mode {
            GradientMode::Spsa => {
                let delta: Vec<f64> = (0..theta.len())
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect();
                let shifted = |sign: f64| -> Vec<f64> {
                    theta
                        .iter()
                        .zip(&delta)
                        .zip(&scale)
                        .map(|((t, d), s)| t + sign * c * s * d)
                        .collect()
                };
                let plus = batch_loss(&current.with_params(&shifted(1.0)), &batch)?;
                let minus = batch_loss(&current.with_params(&shifted(-1.0)), &batch)?;
                delta.iter().map(|d| (plus - minus) / (2.0 * c * d)).collect()
            }
            GradientMode::FiniteDifference => {
                let mut g = alloc::vec![0.0; theta.len()];
                for i in 0..theta.len() {
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[i] += c * scale[i];
                    tm[i] -= c * scale[i];
                    let plus = batch_loss(&current.with_params(&tp), &batch)?;
                    let minus = batch_loss(&current.with_params(&tm), &batch)?;
                    g[i] = (plus - minus) / (2.0 * c);
                }
                g
            }
        };

        let cand_theta: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .zip(&scale)
            .map(|((t, g), s)| t - step * s * g / base)
            .collect();
        let cand = current.with_params(&cand_theta);
        let cand_loss = batch_loss(&cand, &batch)?;
        if cand_loss <= base {
            theta = cand.to_vec();
            current = cand;
            accepted += 1;
            step *= 1.2;
        } else {
            step *= 0.5;
        }

        if epoch % opts.checkpoint_every == 0 || epoch == opts.epochs {
            let full = batch_loss(&current, &all)?;
            if full < best.1 {
                best = (current.clone(), full);
            } else if full > best.1 {
                current = best.0.clone();
                theta = current.to_vec();
                step *= 0.5;
            }
        }
    }

    let (best_net, final_loss) = best;
    Ok(TrainReport {
        improved: final_loss < initial_loss,
        net: best_net,
        initial_loss,
        final_loss,
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ista::ista_step;
    use crate::objective::lqr_gain;
    use crate::sparsity::Regularizer;
    use crate::systems::gen_multiagent;

    #[test]
    fn untuned_net_matches_fixed_step_ista() {
        let p = gen_multiagent(3).unwrap();
        let k0 = lqr_gain(&p).unwrap();
        let net = UnrolledNet::untuned(5, 100.0, 1.0, SparsityOp::Elementwise).unwrap();
        let out = forward(&net, &p, &k0).unwrap();
        assert_eq!(out.fallback_count(), 0);
        let mut k = k0;
        for layer_out in &out.outputs {
            k = ista_step(&p, &k, 100.0, 1.0, &Regularizer::l1()).unwrap();
            assert_eq!(&k, layer_out);
        }
    }

    #[test]
    fn destabilizing_layer_falls_back() {
        let p = gen_multiagent(2).unwrap();
        let k0 = Mat::zeros(p.m(), p.n());
        // Large negative mixing turns the layer into a long ascent step.
        let huge = LayerParams {
            w1: 1.0,
            w2: 0.0,
            w3: -1e6,
        };
        let net = UnrolledNet::new(alloc::vec![huge], SparsityOp::Elementwise).unwrap();
        let out = forward(&net, &p, &k0).unwrap();
        assert_eq!(out.fallbacks, alloc::vec![true]);
        assert_eq!(out.gain.k, k0);
    }

    #[test]
    fn nmse_examples() {
        let r = alloc::vec![Mat::from_element(2, 2, 1.5)];
        assert_eq!(nmse(&r, &r).unwrap(), 0.0);
        assert_eq!(nmse(&[&r[0] * 2.0], &r).unwrap(), 1.0);
        assert_eq!(nmse(&[Mat::zeros(2, 2)], &r).unwrap(), 1.0);
        assert_eq!(
            nmse(&r, &[Mat::zeros(2, 2)]).unwrap_err(),
            Error::ZeroReference { index: 0 }
        );
    }

    #[test]
    fn net_validation() {
        let bad = LayerParams {
            w1: 0.0,
            w2: 0.0,
            w3: 1.0,
        };
        assert!(UnrolledNet::new(alloc::vec![bad], SparsityOp::Block).is_err());
        assert!(UnrolledNet::new(Vec::new(), SparsityOp::Block).is_err());
    }
}
