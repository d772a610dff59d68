//! Mini-batch ADAM over the flat parameter vector, with a seeded per-epoch
//! shuffle. Serial execution is the reference behavior: for a fixed seed the
//! result is reproducible to the bit.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::backward::gradients;
use super::model::Model;
use super::{DepthVector, HmpnnError};
use crate::hypergraph::{FeatureAssignment, Hypergraph3};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, epochs: 50, batch_size: 8 }
    }
}

/// One labelled instance: encoded formula, its features, and target depths.
pub type TrainSample = (Hypergraph3, FeatureAssignment, DepthVector);

/// Trains a copy of `model` on the dataset and returns it with the history
/// of mean training loss per epoch (`history.len() == cfg.epochs`).
///
/// Each batch applies one ADAM step on the mean gradient; batches follow a
/// fresh shuffle every epoch, all drawn from one seeded generator.
pub fn train(
    model: &Model,
    dataset: &[TrainSample],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Model, Vec<f64>), HmpnnError> {
    if dataset.is_empty() {
        return Err(HmpnnError::EmptyDataset);
    }
    assert!(cfg.lr >= 0.0, "learning rate must be nonnegative");
    assert!(cfg.batch_size > 0, "batch size must be positive");

    let mut model = model.clone();
    let mut params = model.pack();
    let mut m1 = vec![0.0; params.len()];
    let mut m2 = vec![0.0; params.len()];
    let mut step = 0u32;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();

    for _ in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(cfg.batch_size) {
            let mut grad_sum = vec![0.0; params.len()];
            for &i in batch {
                let (hg, feats, y_star) = &dataset[i];
                let (loss, grad) = gradients(&model, hg, feats, y_star)?;
                epoch_loss += loss;
                for (acc, g) in grad_sum.iter_mut().zip(grad.pack()) {
                    *acc += g;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            step += 1;
            let bias1 = 1.0 - ADAM_BETA1.powi(step as i32);
            let bias2 = 1.0 - ADAM_BETA2.powi(step as i32);
            for i in 0..params.len() {
                let g = grad_sum[i] * inv;
                m1[i] = ADAM_BETA1 * m1[i] + (1.0 - ADAM_BETA1) * g;
                m2[i] = ADAM_BETA2 * m2[i] + (1.0 - ADAM_BETA2) * g * g;
                let mhat = m1[i] / bias1;
                let vhat = m2[i] / bias2;
                params[i] -= cfg.lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
            model.unpack(&params);
        }
        history.push(epoch_loss / dataset.len() as f64);
    }
    Ok((model, history))
}
