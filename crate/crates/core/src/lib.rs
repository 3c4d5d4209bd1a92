//! Next-word prediction and sentence completion for Bangla text.
//!
//! The pipeline: [`text`] cleans and splits raw documents, [`vocab`] assigns
//! token ids, [`dataset`] cuts fixed-context examples for orders 1–5,
//! [`backoff`] and [`neural`] learn next-token distributions from them, and
//! [`predictor`] routes arbitrary-length contexts to the right model.
//!
//! The neural stack is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod backoff;
pub mod bundle;
pub mod dataset;
mod error;
pub mod neural;
pub mod predictor;
mod scalar;
pub mod text;
pub mod vocab;

pub use backoff::{count_ngrams, train_backoff, BackoffConfig, BackoffModel, CountTable};
pub use bundle::BundleLayout;
pub use dataset::{build_dataset, build_split, dataset_stats, heldout_partition, DatasetStats, NGramDataset, NGramExample, MAX_ORDER};
pub use error::{Error, Result};
pub use neural::{init_model, train, ModelConfig, TrainOptions, TrainReport};
pub use predictor::{route, Candidate, Completion, Engine, Route, Suggestions, Termination};
pub use scalar::Scalar;
pub use text::{CleaningConfig, RawDocument, Script, Sentence};
pub use vocab::{build_vocabulary, Vocabulary, UNK_TOKEN};

/// Dense vocabulary index.
pub type TokenId = u32;

pub type NeuralModel<F> = neural::NeuralModel<F>;
pub type NeuralModel32 = neural::NeuralModel<f32>;
pub type NeuralModel64 = neural::NeuralModel<f64>;
pub type Parameters64 = neural::Parameters<f64>;
pub type ModelBundle<F> = predictor::ModelBundle<F>;
pub type ModelBundle32 = predictor::ModelBundle<f32>;
pub type ModelBundle64 = predictor::ModelBundle<f64>;
