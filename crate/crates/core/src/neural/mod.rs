//! Recurrent networks (RNN, GRU, LSTM) with backpropagation through time
//! and Adam, sized for one-step-ahead regression on short windows.

mod adam;
mod cell;
mod checkpoint;
mod network;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState};
pub use cell::{gru_cell, lstm_cell, rnn_cell, CellKind, CellParams};
pub use checkpoint::{from_checkpoint_str, to_checkpoint_string, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{ForwardCache, Network, NetworkConfig, OutputHead, Params};
pub use tensor::Matrix;
pub use train::{evaluate_mse, mse_loss, train, train_network, Sample, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("forward cache does not belong to the current network weights")]
    StaleCache,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in network parameters or loss")]
    NonFinite,
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
}
