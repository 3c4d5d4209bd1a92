//! Stacked bidirectional LSTM next-word model.

mod checkpoint;
mod lstm;
mod model;
mod optim;
mod tensor;
mod train;

pub use checkpoint::{checkpoint_bytes, read_checkpoint, write_checkpoint};
pub use lstm::{lstm_step, Gate, LstmCellParams};
pub use model::{init_model, Dense, ModelConfig, NeuralModel, Parameters, TensorView, TENSOR_NAMES};
pub use optim::{Adam, Optimizer, OptimizerKind};
pub use tensor::{softmax, Matrix};
pub use train::{evaluate, train, train_with_heldout, EpochMetrics, TrainOptions, TrainReport};

pub(crate) use model::top_k;
