//! Mini-batch training loop with per-epoch metrics.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::NeuralModel;
use super::optim::{Adam, Optimizer, OptimizerKind};
use super::tensor::log_sum_exp;
use crate::dataset::{NGramDataset, NGramExample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// 0 means full batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub optimizer: OptimizerKind,
    pub shuffle_seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            optimizer: OptimizerKind::Adam,
            shuffle_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Loss and top-1 accuracy on the training set after each epoch.
    pub epochs: Vec<EpochMetrics>,
    /// Same, on the held-out set, when one was supplied.
    pub heldout: Vec<EpochMetrics>,
    pub wall_time: Duration,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    /// `epoch,loss,accuracy` CSV.
    pub fn to_csv(&self) -> String {
        metrics_csv(&self.epochs)
    }

    pub fn heldout_csv(&self) -> String {
        metrics_csv(&self.heldout)
    }
}

fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,loss,accuracy\n");
    for m in rows {
        writeln!(out, "{},{:.8},{:.8}", m.epoch, m.loss, m.accuracy).unwrap();
    }
    out
}

/// Mean cross-entropy and top-1 accuracy over `examples`. Empty input yields zeros.
pub fn evaluate<F: Scalar>(model: &NeuralModel<F>, examples: &[NGramExample]) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ex in examples {
        let logits = model.logits(&ex.context)?;
        let target = ex.target as usize;
        loss += (log_sum_exp(&logits) - logits[target]).to_f64_lossy();
        let best = super::model::top_k(&logits, 1, |_| true);
        if best.first().map(|b| b.0) == Some(ex.target) {
            correct += 1;
        }
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train<F: Scalar>(
    model: NeuralModel<F>,
    dataset: &NGramDataset,
    opts: &TrainOptions,
) -> Result<(NeuralModel<F>, TrainReport)> {
    train_with_heldout(model, dataset, None, opts)
}

pub fn train_with_heldout<F: Scalar>(
    mut model: NeuralModel<F>,
    dataset: &NGramDataset,
    heldout: Option<&NGramDataset>,
    opts: &TrainOptions,
) -> Result<(NeuralModel<F>, TrainReport)> {
    for d in Some(dataset).into_iter().chain(heldout) {
        if d.order != model.config.context_len {
            return Err(Error::OrderMismatch {
                expected: model.config.context_len,
                found: d.order,
            });
        }
        if d.vocab_size != model.config.vocab_size {
            return Err(Error::ShapeMismatch(format!(
                "dataset vocabulary {} vs model vocabulary {}",
                d.vocab_size, model.config.vocab_size
            )));
        }
    }
    let start = Instant::now();
    let mut report = TrainReport::default();
    if opts.epochs == 0 {
        return Ok((model, report));
    }
    if dataset.is_empty() {
        log::warn!("order-{} dataset is empty; model left untrained", dataset.order);
        return Ok((model, report));
    }

    let cast = F::from_f64_lossy;
    let mut optimizer = match opts.optimizer {
        OptimizerKind::Adam => Optimizer::Adam(Adam::new(
            &model.params,
            cast(opts.learning_rate),
            cast(opts.beta1),
            cast(opts.beta2),
            cast(opts.eps),
        )),
        OptimizerKind::Sgd => Optimizer::Sgd {
            lr: cast(opts.learning_rate),
        },
    };
    let batch_size = match opts.batch_size {
        0 => dataset.len(),
        b => b,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.shuffle_seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut batch = Vec::with_capacity(batch_size);
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset.examples[i].clone()));
            let (_, grads) = model.loss_and_grads(&batch)?;
            optimizer.step(&mut model.params, &grads);
        }
        let (loss, accuracy) = evaluate(&model, &dataset.examples)?;
        report.epochs.push(EpochMetrics { epoch, loss, accuracy });
        if let Some(h) = heldout {
            let (loss, accuracy) = evaluate(&model, &h.examples)?;
            report.heldout.push(EpochMetrics { epoch, loss, accuracy });
        }
        log::debug!("order {} epoch {epoch}: loss {loss:.6} accuracy {accuracy:.4}", dataset.order);
    }
    report.wall_time = start.elapsed();
    Ok((model, report))
}
