//! Embedding → Bi-LSTM → Bi-LSTM → dense ReLU → dense softmax.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lstm::{backward_sequence, run_sequence, LstmCellParams, StepCache};
use super::tensor::{add_assign, log_sum_exp, softmax, Matrix};
use crate::dataset::{check_order, NGramExample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::TokenId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Number of context tokens, i.e. the n-gram order.
    pub context_len: usize,
    pub lstm_units: usize,
    pub dense_hidden: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, context_len: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 64,
            context_len,
            lstm_units: 100,
            dense_hidden: 128,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.context_len)?;
        let dims = [self.vocab_size, self.embed_dim, self.lstm_units, self.dense_hidden];
        if dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<F> {
    /// `out × in`
    pub weights: Matrix<F>,
    pub bias: Vec<F>,
}

impl<F: Scalar> Dense<F> {
    fn zeros(out: usize, inp: usize) -> Self {
        Self {
            weights: Matrix::zeros(out, inp),
            bias: vec![F::zero(); out],
        }
    }

    fn apply(&self, x: &[F]) -> Vec<F> {
        let mut z = self.bias.clone();
        self.weights.matvec_add(x, &mut z);
        z
    }
}

/// Every trainable tensor of the network. Also used to hold gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters<F> {
    /// `vocab × embed`
    pub embedding: Matrix<F>,
    pub layer1_fwd: LstmCellParams<F>,
    pub layer1_bwd: LstmCellParams<F>,
    pub layer2_fwd: LstmCellParams<F>,
    pub layer2_bwd: LstmCellParams<F>,
    /// `dense_hidden × 2·units`, ReLU
    pub dense1: Dense<F>,
    /// `vocab × dense_hidden`, softmax
    pub dense2: Dense<F>,
}

/// Borrowed view of one tensor: checkpoint name, shape, row-major data.
pub struct TensorView<'a, F> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: &'a [F],
}

pub const TENSOR_NAMES: [&str; 17] = [
    "embedding",
    "layer1_fwd.w_input",
    "layer1_fwd.w_recurrent",
    "layer1_fwd.bias",
    "layer1_bwd.w_input",
    "layer1_bwd.w_recurrent",
    "layer1_bwd.bias",
    "layer2_fwd.w_input",
    "layer2_fwd.w_recurrent",
    "layer2_fwd.bias",
    "layer2_bwd.w_input",
    "layer2_bwd.w_recurrent",
    "layer2_bwd.bias",
    "dense1.weights",
    "dense1.bias",
    "dense2.weights",
    "dense2.bias",
];

impl<F: Scalar> Parameters<F> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let u = config.lstm_units;
        Self {
            embedding: Matrix::zeros(config.vocab_size, config.embed_dim),
            layer1_fwd: LstmCellParams::zeros(u, config.embed_dim),
            layer1_bwd: LstmCellParams::zeros(u, config.embed_dim),
            layer2_fwd: LstmCellParams::zeros(u, 2 * u),
            layer2_bwd: LstmCellParams::zeros(u, 2 * u),
            dense1: Dense::zeros(config.dense_hidden, 2 * u),
            dense2: Dense::zeros(config.vocab_size, config.dense_hidden),
        }
    }

    fn cells(&self) -> [&LstmCellParams<F>; 4] {
        [&self.layer1_fwd, &self.layer1_bwd, &self.layer2_fwd, &self.layer2_bwd]
    }

    /// Tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> Vec<TensorView<'_, F>> {
        let mut out = vec![TensorView {
            name: TENSOR_NAMES[0],
            shape: vec![self.embedding.rows(), self.embedding.cols()],
            data: self.embedding.as_slice(),
        }];
        for (c, cell) in self.cells().into_iter().enumerate() {
            let names = &TENSOR_NAMES[1 + 3 * c..4 + 3 * c];
            out.push(TensorView {
                name: names[0],
                shape: vec![cell.w_input.rows(), cell.w_input.cols()],
                data: cell.w_input.as_slice(),
            });
            out.push(TensorView {
                name: names[1],
                shape: vec![cell.w_recurrent.rows(), cell.w_recurrent.cols()],
                data: cell.w_recurrent.as_slice(),
            });
            out.push(TensorView {
                name: names[2],
                shape: vec![cell.bias.len()],
                data: &cell.bias,
            });
        }
        for (d, dense) in [&self.dense1, &self.dense2].into_iter().enumerate() {
            out.push(TensorView {
                name: TENSOR_NAMES[13 + 2 * d],
                shape: vec![dense.weights.rows(), dense.weights.cols()],
                data: dense.weights.as_slice(),
            });
            out.push(TensorView {
                name: TENSOR_NAMES[14 + 2 * d],
                shape: vec![dense.bias.len()],
                data: &dense.bias,
            });
        }
        out
    }

    /// Mutable tensors in [`TENSOR_NAMES`] order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = vec![self.embedding.as_mut_slice()];
        for cell in [
            &mut self.layer1_fwd,
            &mut self.layer1_bwd,
            &mut self.layer2_fwd,
            &mut self.layer2_bwd,
        ] {
            out.push(cell.w_input.as_mut_slice());
            out.push(cell.w_recurrent.as_mut_slice());
            out.push(&mut cell.bias);
        }
        for dense in [&mut self.dense1, &mut self.dense2] {
            out.push(dense.weights.as_mut_slice());
            out.push(&mut dense.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralModel<F> {
    pub config: ModelConfig,
    pub params: Parameters<F>,
}

/// Deterministic initialization from `config.seed`.
pub fn init_model<F: Scalar>(config: ModelConfig) -> Result<NeuralModel<F>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (v, o, u, d) = (
        config.vocab_size,
        config.embed_dim,
        config.lstm_units,
        config.dense_hidden,
    );
    let params = Parameters {
        embedding: Matrix::glorot(v, o, v, o, &mut rng),
        layer1_fwd: LstmCellParams::init(u, o, &mut rng),
        layer1_bwd: LstmCellParams::init(u, o, &mut rng),
        layer2_fwd: LstmCellParams::init(u, 2 * u, &mut rng),
        layer2_bwd: LstmCellParams::init(u, 2 * u, &mut rng),
        dense1: Dense {
            weights: Matrix::glorot(d, 2 * u, 2 * u, d, &mut rng),
            bias: vec![F::zero(); d],
        },
        dense2: Dense {
            weights: Matrix::glorot(v, d, d, v, &mut rng),
            bias: vec![F::zero(); v],
        },
    };
    Ok(NeuralModel { config, params })
}

struct ForwardCache<F> {
    l1_fwd: Vec<StepCache<F>>,
    l1_bwd: Vec<StepCache<F>>,
    l2_fwd: Vec<StepCache<F>>,
    l2_bwd: Vec<StepCache<F>>,
    readout: Vec<F>,
    hidden_pre: Vec<F>,
    hidden: Vec<F>,
    logits: Vec<F>,
}

/// Runs both directions over `xs` and returns per-position `[h_fwd; h_bwd]`
/// plus the caches (backward caches are in reverse position order).
fn bi_layer<F: Scalar>(
    fwd: &LstmCellParams<F>,
    bwd: &LstmCellParams<F>,
    xs: &[&[F]],
) -> (Vec<StepCache<F>>, Vec<StepCache<F>>) {
    let rev: Vec<&[F]> = xs.iter().rev().copied().collect();
    (run_sequence(fwd, xs), run_sequence(bwd, &rev))
}

impl<F: Scalar> NeuralModel<F> {
    pub fn new(config: ModelConfig) -> Result<Self> {
        init_model(config)
    }

    fn check_context(&self, context: &[TokenId]) -> Result<()> {
        if context.len() != self.config.context_len {
            return Err(Error::ShapeMismatch(format!(
                "context has {} tokens, model expects {}",
                context.len(),
                self.config.context_len
            )));
        }
        if let Some(&id) = context.iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(Error::IdOutOfRange {
                id,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    fn forward_cached(&self, context: &[TokenId]) -> ForwardCache<F> {
        let p = &self.params;
        let n = context.len();
        let embedded: Vec<&[F]> = context.iter().map(|&id| p.embedding.row(id as usize)).collect();
        let (l1_fwd, l1_bwd) = bi_layer(&p.layer1_fwd, &p.layer1_bwd, &embedded);
        let seq1: Vec<Vec<F>> = (0..n)
            .map(|t| [l1_fwd[t].h.as_slice(), l1_bwd[n - 1 - t].h.as_slice()].concat())
            .collect();
        let seq1_refs: Vec<&[F]> = seq1.iter().map(Vec::as_slice).collect();
        let (l2_fwd, l2_bwd) = bi_layer(&p.layer2_fwd, &p.layer2_bwd, &seq1_refs);
        // last forward state and the backward state at position 0
        let readout = [l2_fwd[n - 1].h.as_slice(), l2_bwd[n - 1].h.as_slice()].concat();
        let hidden_pre = p.dense1.apply(&readout);
        let hidden: Vec<F> = hidden_pre.iter().map(|&z| z.max(F::zero())).collect();
        let logits = p.dense2.apply(&hidden);
        ForwardCache {
            l1_fwd,
            l1_bwd,
            l2_fwd,
            l2_bwd,
            readout,
            hidden_pre,
            hidden,
            logits,
        }
    }

    /// Next-token distribution for a context of exactly `context_len` ids.
    pub fn forward(&self, context: &[TokenId]) -> Result<Vec<F>> {
        self.check_context(context)?;
        Ok(softmax(&self.forward_cached(context).logits))
    }

    /// Unnormalized output scores.
    pub fn logits(&self, context: &[TokenId]) -> Result<Vec<F>> {
        self.check_context(context)?;
        Ok(self.forward_cached(context).logits)
    }

    /// Mean cross-entropy over `batch` and its gradient for every parameter.
    pub fn loss_and_grads(&self, batch: &[NGramExample]) -> Result<(F, Parameters<F>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut grads = Parameters::zeros(&self.config);
        let mut total = F::zero();
        let scale = F::one() / F::from_usize(batch.len()).expect("batch size fits");
        for ex in batch {
            self.check_context(&ex.context)?;
            if ex.target as usize >= self.config.vocab_size {
                return Err(Error::IdOutOfRange {
                    id: ex.target,
                    vocab_size: self.config.vocab_size,
                });
            }
            total += self.backprop_one(ex, scale, &mut grads);
        }
        Ok((total * scale, grads))
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, batch: &[NGramExample]) -> Result<F> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut total = F::zero();
        for ex in batch {
            self.check_context(&ex.context)?;
            let logits = self.forward_cached(&ex.context).logits;
            total += log_sum_exp(&logits) - logits[ex.target as usize];
        }
        Ok(total / F::from_usize(batch.len()).expect("batch size fits"))
    }

    /// Accumulates `scale · ∂loss/∂θ` for one example and returns its loss.
    fn backprop_one(&self, ex: &NGramExample, scale: F, grads: &mut Parameters<F>) -> F {
        let p = &self.params;
        let n = ex.context.len();
        let u = self.config.lstm_units;
        let cache = self.forward_cached(&ex.context);
        let target = ex.target as usize;
        let loss = log_sum_exp(&cache.logits) - cache.logits[target];

        let mut d_logits = softmax(&cache.logits);
        d_logits[target] -= F::one();
        d_logits.iter_mut().for_each(|g| *g *= scale);

        grads.dense2.weights.outer_add(&d_logits, &cache.hidden);
        add_assign(&mut grads.dense2.bias, &d_logits);
        let mut d_hidden = vec![F::zero(); self.config.dense_hidden];
        p.dense2.weights.matvec_t_add(&d_logits, &mut d_hidden);
        for (g, &z) in d_hidden.iter_mut().zip(&cache.hidden_pre) {
            if z <= F::zero() {
                *g = F::zero();
            }
        }
        grads.dense1.weights.outer_add(&d_hidden, &cache.readout);
        add_assign(&mut grads.dense1.bias, &d_hidden);
        let mut d_readout = vec![F::zero(); 2 * u];
        p.dense1.weights.matvec_t_add(&d_hidden, &mut d_readout);

        let last = n - 1;
        let dx2_fwd = backward_sequence(
            &p.layer2_fwd,
            &cache.l2_fwd,
            |s| (s == last).then(|| d_readout[..u].to_vec()),
            &mut grads.layer2_fwd,
        );
        let dx2_bwd = backward_sequence(
            &p.layer2_bwd,
            &cache.l2_bwd,
            |s| (s == last).then(|| d_readout[u..].to_vec()),
            &mut grads.layer2_bwd,
        );
        // gradient on layer-1 output at each position
        let d_seq1: Vec<Vec<F>> = (0..n)
            .map(|t| {
                let mut d = dx2_fwd[t].clone();
                add_assign(&mut d, &dx2_bwd[n - 1 - t]);
                d
            })
            .collect();
        let dx1_fwd = backward_sequence(
            &p.layer1_fwd,
            &cache.l1_fwd,
            |s| Some(d_seq1[s][..u].to_vec()),
            &mut grads.layer1_fwd,
        );
        let dx1_bwd = backward_sequence(
            &p.layer1_bwd,
            &cache.l1_bwd,
            |s| Some(d_seq1[n - 1 - s][u..].to_vec()),
            &mut grads.layer1_bwd,
        );
        for (t, &id) in ex.context.iter().enumerate() {
            let row = grads.embedding.row_mut(id as usize);
            add_assign(row, &dx1_fwd[t]);
            add_assign(row, &dx1_bwd[n - 1 - t]);
        }
        loss
    }

    /// The `k` most probable ids, descending; ties go to the lower id.
    pub fn predict_topk(&self, context: &[TokenId], k: usize) -> Result<Vec<(TokenId, F)>> {
        let probs = self.forward(context)?;
        Ok(top_k(&probs, k, |_| true))
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }
}

/// Top `k` entries of `probs` among ids accepted by `keep`.
pub(crate) fn top_k<F: Scalar>(probs: &[F], k: usize, keep: impl Fn(TokenId) -> bool) -> Vec<(TokenId, F)> {
    let mut ranked: Vec<(TokenId, F)> = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| (i as TokenId, p))
        .filter(|&(i, _)| keep(i))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}
