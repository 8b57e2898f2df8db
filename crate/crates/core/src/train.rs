//! Deterministic single-threaded training loop: seeded shuffles, AdamW with
//! the cosine schedule stepped once per batch, optional inverse-frequency
//! class weighting.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::net::{
    init_params, loss_and_grads, recalibrate_running_stats, NetError, NetworkParameters,
    NetworkSpec,
};
use crate::optim::{adamw_step, cosine_lr, AdamMoments, OptimError};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            base_lr: 0.001,
            weight_decay: 0.01,
            batch_size: 16,
            seed: 0,
            class_weighting: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    EmptyTrainingSet,
    BadConfig(String),
    Net(NetError),
    Optim(OptimError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyTrainingSet => write!(f, "training set is empty"),
            TrainError::BadConfig(reason) => write!(f, "bad training config: {reason}"),
            TrainError::Net(e) => write!(f, "{e}"),
            TrainError::Optim(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<NetError> for TrainError {
    fn from(e: NetError) -> Self {
        TrainError::Net(e)
    }
}

impl From<OptimError> for TrainError {
    fn from(e: OptimError) -> Self {
        TrainError::Optim(e)
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: NetworkParameters<f32>,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Class weights actually used (unit weights when disabled or when the
    /// set is single-class).
    pub class_weights: [f32; 2],
}

/// Inverse-frequency weights `n_total / (2 * n_class)`. A single-class set
/// falls back to unit weights rather than an infinite one.
pub fn class_weights(labels: &[u8], enabled: bool) -> [f32; 2] {
    if !enabled {
        return [1.0, 1.0];
    }
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return [1.0, 1.0];
    }
    let total = labels.len() as f32;
    [total / (2.0 * n0 as f32), total / (2.0 * n1 as f32)]
}

/// Trains a fresh network on `(inputs, labels)`.
///
/// `inputs` is `[n x channels x input_len]` flattened; one example per
/// label. Bit-deterministic given (spec, data, config): initialization,
/// shuffling, and dropout each use a stream derived from `config.seed`.
pub fn train(
    spec: &NetworkSpec,
    inputs: &[f32],
    labels: &[u8],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    spec.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(TrainError::EmptyTrainingSet);
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(TrainError::BadConfig(
            "epochs and batch_size must be at least 1".into(),
        ));
    }
    if !(config.base_lr > 0.0) {
        return Err(TrainError::BadConfig("base_lr must be positive".into()));
    }
    let example_len = spec.n_channels * spec.input_len;
    if inputs.len() != n * example_len {
        return Err(TrainError::Net(NetError::ShapeMismatch {
            layer: "training set".into(),
            expected: alloc::vec![n, spec.n_channels, spec.input_len],
            got: alloc::vec![inputs.len()],
        }));
    }

    let root = Rng::new(config.seed);
    let mut params = init_params::<f32>(spec, &mut root.derive("init"));
    let mut shuffle_rng = root.derive("shuffle");
    let mut dropout_rng = root.derive("dropout");

    let weights = class_weights(labels, config.class_weighting);
    let mut moments = AdamMoments::zeros(&params);

    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = (config.epochs * batches_per_epoch) as u64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_data: Vec<f32> = Vec::new();
    let mut batch_labels: Vec<u8> = Vec::new();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step: u64 = 0;

    for _ in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0f64;
        for chunk in order.chunks(config.batch_size) {
            batch_data.clear();
            batch_labels.clear();
            for &i in chunk {
                batch_data.extend_from_slice(&inputs[i * example_len..(i + 1) * example_len]);
                batch_labels.push(labels[i]);
            }
            let (loss, grads) = loss_and_grads(
                &mut params,
                spec,
                &batch_data,
                chunk.len(),
                &batch_labels,
                weights,
                &mut dropout_rng,
            )?;
            let lr = cosine_lr(config.base_lr, step, total_steps);
            step += 1;
            adamw_step(&mut params, &grads, &mut moments, step, lr, config.weight_decay)?;
            epoch_loss += loss as f64 * chunk.len() as f64;
        }
        epoch_losses.push(epoch_loss / n as f64);
    }

    recalibrate_running_stats(&mut params, spec, inputs, n, config.batch_size)?;

    Ok(TrainOutcome {
        params,
        epoch_losses,
        class_weights: weights,
    })
}
