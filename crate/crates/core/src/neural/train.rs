use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::network::{Network, NetworkConfig, Params};
use super::tensor::Matrix;
use super::NeuralError;

/// One training example: a `steps × features` window and its next value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Matrix,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.batch_size == 0 {
            return Err(NeuralError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(NeuralError::InvalidConfig(format!("lr {} must be positive", self.lr)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(NeuralError::InvalidConfig(format!("clip_norm {c} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Inference-mode MSE over the dataset before the first update.
    pub initial_loss: f64,
    /// Mean training-mode loss of each epoch.
    pub history: Vec<f64>,
    /// Inference-mode MSE over the dataset after training.
    pub final_loss: f64,
    /// Updates whose gradient norm exceeded the clip ceiling.
    pub clipped_steps: usize,
}

/// `((pred - target)², 2(pred - target))`
pub fn mse_loss(pred: f64, target: f64) -> (f64, f64) {
    let d = pred - target;
    (d * d, 2.0 * d)
}

/// Inference-mode mean squared error over `data`.
pub fn evaluate_mse(network: &Network, data: &[Sample]) -> Result<f64, NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let losses = data
        .par_iter()
        .map(|s| Ok(mse_loss(network.predict(&s.input)?, s.target).0))
        .collect::<Result<Vec<f64>, NeuralError>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

/// Builds a network from `config` and trains it.
pub fn train(
    data: &[Sample],
    config: NetworkConfig,
    train_cfg: &TrainConfig,
) -> Result<(Network, TrainReport), NeuralError> {
    let mut net = Network::new(config)?;
    let report = train_network(&mut net, data, train_cfg)?;
    Ok((net, report))
}

/// Mini-batch Adam on an existing network. Batches are drawn from a seeded
/// shuffle each epoch; per-sample gradients may be computed in parallel but
/// are summed in sample order, so results do not depend on thread count.
pub fn train_network(
    network: &mut Network,
    data: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainReport, NeuralError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let initial_loss = evaluate_mse(network, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(network.param_count(), cfg.lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut clipped_steps = 0;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| rng.random()).collect();
            let net = &*network;
            let per_sample = batch
                .par_iter()
                .zip(seeds)
                .map(|(&i, seed)| {
                    let (pred, cache) = net.forward(&data[i].input, true, seed)?;
                    let (loss, grad) = mse_loss(pred, data[i].target);
                    Ok((loss, net.backward(&cache, grad)?))
                })
                .collect::<Result<Vec<(f64, Params)>, NeuralError>>()?;
            let mut grads = network.params().zeros_like();
            for (loss, g) in &per_sample {
                epoch_loss += loss;
                grads.add_assign(g);
            }
            grads.scale(1.0 / batch.len() as f64);
            if let Some(limit) = cfg.clip_norm {
                let norm = grads.norm();
                if norm > limit {
                    grads.scale(limit / norm);
                    clipped_steps += 1;
                }
            }
            adam_step(network.params_mut(), &grads, &mut adam)?;
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(NeuralError::NonFinite);
        }
        history.push(mean);
    }

    Ok(TrainReport {
        initial_loss,
        final_loss: evaluate_mse(network, data)?,
        history,
        clipped_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::CellKind;

    fn constant_sequences(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v: f64 = rng.random_range(-0.8..0.8);
                Sample {
                    input: Matrix::from_vec(5, 1, vec![v; 5]).unwrap(),
                    target: v,
                }
            })
            .collect()
    }

    fn cfg(cell: CellKind) -> NetworkConfig {
        NetworkConfig {
            cell,
            layers: 2,
            hidden: 8,
            input_features: 1,
            dropout_rate: 0.0,
            seed: 5,
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(1.5, 1.5), (0.0, 0.0));
        assert_eq!(mse_loss(3.0, 1.0), (4.0, 4.0));
        assert_eq!(mse_loss(0.2, -0.7).0, mse_loss(-0.7, 0.2).0);
    }

    #[test]
    fn learns_constant_sequence_mean() {
        let data = constant_sequences(64, 1);
        let tc = TrainConfig {
            epochs: 200,
            batch_size: 16,
            lr: 1e-2,
            seed: 2,
            clip_norm: Some(5.0),
        };
        for cell in CellKind::ALL {
            let (_, report) = train(&data, cfg(cell), &tc).unwrap();
            assert!(report.final_loss < 1e-3, "{cell}: {}", report.final_loss);
            assert!(report.final_loss < report.initial_loss);
        }
    }

    #[test]
    fn zero_epochs_keeps_weights() {
        let data = constant_sequences(8, 3);
        let tc = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (net, report) = train(&data, cfg(CellKind::Gru), &tc).unwrap();
        assert_eq!(net, Network::new(cfg(CellKind::Gru)).unwrap());
        assert!(report.history.is_empty());
    }

    #[test]
    fn seeded_history_is_reproducible() {
        let data = constant_sequences(40, 4);
        let mut nc = cfg(CellKind::Lstm);
        nc.dropout_rate = 0.2;
        let tc = TrainConfig {
            epochs: 5,
            batch_size: 7,
            lr: 1e-2,
            seed: 9,
            clip_norm: Some(5.0),
        };
        let (a, ra) = train(&data, nc.clone(), &tc).unwrap();
        let (b, rb) = train(&data, nc, &tc).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_dataset() {
        assert_eq!(
            train(&[], cfg(CellKind::Rnn), &TrainConfig::default()).unwrap_err(),
            NeuralError::EmptyDataset
        );
    }
}
