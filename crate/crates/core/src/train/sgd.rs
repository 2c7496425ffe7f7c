//! Minibatch SGD with momentum over tape gradients.
//!
//! One optimizer serves both model kinds: labeled-sequence classifiers
//! (cross-entropy) and single-sequence next-step predictors (mean squared
//! geodesic distance, one sequence per step). After every parameter update
//! the raw Frechet-mean weights are pushed back to magnitude at least
//! `RAW_FLOOR`, preserving sign, so weight groups never collapse onto zero.
//! All randomness comes from one seeded generator, making a run a pure
//! function of its inputs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::{ManifoldSequence, NetConfig};
use crate::wfm::RAW_FLOOR;

use super::graph::{classifier_loss_grad, group_loss_grad};
use super::params::ModelParams;

#[derive(Clone, Copy, Debug)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { lr: 0.01, momentum: 0.9, epochs: 10, batch_size: 16, seed: 0 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::domain(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::domain(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(Error::domain("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Mean loss and accuracy over one pass of the data, measured at the
/// parameter values each sample was visited with.
#[derive(Clone, Copy, Debug)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Eigendecomposition nodes across all steps that needed the
    /// finite-difference gradient fallback.
    pub fd_fallbacks: usize,
}

/// Per-epoch mean next-step loss of a group model run.
#[derive(Clone, Debug, Default)]
pub struct GroupTrainReport {
    pub losses: Vec<f64>,
    pub fd_fallbacks: usize,
}

fn check_finite_loss(loss: f64, epoch: usize, item: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::numerical(format!(
            "loss became non-finite at epoch {epoch}, item {item}; aborting training"
        )));
    }
    Ok(())
}

/// Clamp raw Frechet-mean weights away from zero, preserving sign.
/// Exact zeros move to `+RAW_FLOOR`.
fn enforce_weight_floor(params: &mut ModelParams) {
    let groups: Vec<(usize, usize)> = params
        .index()
        .iter()
        .filter(|(name, _, _)| ModelParams::is_weight_group(name))
        .map(|&(_, off, len)| (off, len))
        .collect();
    let values = params.values_mut();
    for (off, len) in groups {
        for v in &mut values[off..off + len] {
            if v.abs() < RAW_FLOOR {
                *v = if *v < 0.0 { -RAW_FLOOR } else { RAW_FLOOR };
            }
        }
    }
}

fn apply_update(params: &mut ModelParams, velocity: &mut [f64], grad: &[f64], sgd: &SgdConfig) {
    let values = params.values_mut();
    for i in 0..values.len() {
        velocity[i] = sgd.momentum * velocity[i] - sgd.lr * grad[i];
        values[i] += velocity[i];
    }
    enforce_weight_floor(params);
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Trains a classifier from freshly initialized parameters (deterministic
/// in `sgd.seed`). See [`train_classifier_from`].
pub fn train_classifier(
    config: &NetConfig,
    samples: &[(ManifoldSequence, usize)],
    sgd: &SgdConfig,
) -> Result<(ModelParams, TrainReport)> {
    let params = ModelParams::init(config, sgd.seed);
    train_classifier_from(config, samples, sgd, params)
}

/// Trains a cross-entropy classifier starting from the given parameters.
///
/// Each epoch shuffles the sample order, accumulates mean gradients over
/// minibatches and applies momentum SGD. Reported loss and accuracy are
/// measured sample by sample as the epoch progresses. A non-finite loss
/// aborts with an error rather than continuing from poisoned state.
pub fn train_classifier_from(
    config: &NetConfig,
    samples: &[(ManifoldSequence, usize)],
    sgd: &SgdConfig,
    mut params: ModelParams,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    sgd.validate()?;
    if samples.is_empty() {
        return Err(Error::domain("training needs at least one sample"));
    }
    if !params.layout_matches(config) {
        return Err(Error::domain("parameter layout does not match the architecture"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sgd.seed);
    let mut velocity = vec![0.0; params.len()];
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..sgd.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(sgd.batch_size) {
            let mut grad = vec![0.0; params.len()];
            for &i in batch {
                let (seq, label) = &samples[i];
                let out = classifier_loss_grad(config, &params, seq, *label)?;
                check_finite_loss(out.loss, epoch, i)?;
                loss_sum += out.loss;
                if argmax(&out.logits) == *label {
                    correct += 1;
                }
                for (g, d) in grad.iter_mut().zip(&out.grad) {
                    *g += d;
                }
                report.fd_fallbacks += out.fd_fallbacks;
            }
            let inv = 1.0 / batch.len() as f64;
            for g in &mut grad {
                *g *= inv;
            }
            apply_update(&mut params, &mut velocity, &grad, sgd);
        }
        report.epochs.push(EpochStats {
            loss: loss_sum / samples.len() as f64,
            accuracy: correct as f64 / samples.len() as f64,
        });
    }
    Ok((params, report))
}

/// Trains a next-step predictor on a set of sequences, one sequence per
/// optimizer step, starting from the given parameters.
pub fn train_group_model(
    config: &NetConfig,
    sequences: &[ManifoldSequence],
    sgd: &SgdConfig,
    init: &ModelParams,
) -> Result<(ModelParams, GroupTrainReport)> {
    config.validate()?;
    sgd.validate()?;
    if sequences.is_empty() {
        return Err(Error::domain("training needs at least one sequence"));
    }
    if !init.layout_matches(config) {
        return Err(Error::domain("parameter layout does not match the architecture"));
    }
    let mut params = init.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(sgd.seed);
    let mut velocity = vec![0.0; params.len()];
    let mut report = GroupTrainReport::default();
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    for epoch in 0..sgd.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let out = group_loss_grad(config, &params, &sequences[i])?;
            check_finite_loss(out.loss, epoch, i)?;
            loss_sum += out.loss;
            report.fd_fallbacks += out.fd_fallbacks;
            apply_update(&mut params, &mut velocity, &out.grad, sgd);
        }
        report.losses.push(loss_sum / sequences.len() as f64);
    }
    Ok((params, report))
}
