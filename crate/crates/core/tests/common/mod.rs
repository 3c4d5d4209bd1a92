//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::HashMap;

use nextword_core::neural::{NeuralModel, TENSOR_NAMES};
use nextword_core::{NGramExample, TokenId};
use rand::seq::index::sample;
use rand::Rng;

/// Worst relative error seen in one parameter tensor.
#[derive(Debug)]
pub struct GroupCheck {
    pub name: &'static str,
    pub checked: usize,
    pub max_rel_err: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps exact zeros comparable.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares backprop against central differences on `per_group` random
/// coordinates of every tensor (all of them when the tensor is smaller).
pub fn finite_difference_check<R: Rng>(
    model: &NeuralModel<f64>,
    batch: &[NGramExample],
    eps: f64,
    per_group: usize,
    rng: &mut R,
) -> Vec<GroupCheck> {
    let (_, grads) = model.loss_and_grads(batch).expect("valid batch");
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.data.to_vec()).collect();
    let mut out = Vec::new();
    for (g, name) in TENSOR_NAMES.iter().enumerate() {
        let len = analytic[g].len();
        let coords: Vec<usize> = if len <= per_group {
            (0..len).collect()
        } else {
            sample(rng, len, per_group).into_vec()
        };
        let mut worst: f64 = 0.0;
        for &i in &coords {
            let mut plus = model.clone();
            plus.params.tensors_mut()[g][i] += eps;
            let mut minus = model.clone();
            minus.params.tensors_mut()[g][i] -= eps;
            let numeric = (plus.loss(batch).unwrap() - minus.loss(batch).unwrap()) / (2.0 * eps);
            worst = worst.max(rel_err(analytic[g][i], numeric));
        }
        out.push(GroupCheck {
            name,
            checked: coords.len(),
            max_rel_err: worst,
        });
    }
    out
}

/// Double loop over every start position, kept deliberately index-based.
#[allow(clippy::needless_range_loop)]
pub fn naive_windows(sentences: &[Vec<TokenId>], n: usize) -> Vec<NGramExample> {
    let mut out = Vec::new();
    for s in sentences {
        let mut i = 0;
        while i + n < s.len() {
            let mut context = Vec::new();
            for j in i..i + n {
                context.push(s[j]);
            }
            out.push(NGramExample {
                context,
                target: s[i + n],
            });
            i += 1;
        }
    }
    out
}

/// Reference Katz model: counts by direct scanning, back-off weights by
/// explicit summation over the unseen words, full distributions materialized.
pub struct BruteKatz {
    sentences: Vec<Vec<TokenId>>,
    max_order: usize,
    vocab: usize,
    k: u64,
}

impl BruteKatz {
    pub fn new(sentences: &[Vec<TokenId>], max_order: usize, vocab: usize, k: u64) -> Self {
        Self {
            sentences: sentences.to_vec(),
            max_order,
            vocab,
            k,
        }
    }

    fn count(&self, tuple: &[TokenId]) -> u64 {
        let mut c = 0;
        for s in &self.sentences {
            if s.len() >= tuple.len() {
                for i in 0..=s.len() - tuple.len() {
                    if &s[i..i + tuple.len()] == tuple {
                        c += 1;
                    }
                }
            }
        }
        c
    }

    fn discount(&self, len: usize, r: u64) -> f64 {
        if r > self.k {
            return r as f64;
        }
        let mut counts: HashMap<Vec<TokenId>, u64> = HashMap::new();
        for s in &self.sentences {
            for i in 0..s.len() {
                if i + len <= s.len() {
                    *counts.entry(s[i..i + len].to_vec()).or_default() += 1;
                }
            }
        }
        let n = |x: u64| counts.values().filter(|&&c| c == x).count() as f64;
        let k = self.k as f64;
        let common = if n(1) > 0.0 { (k + 1.0) * n(self.k + 1) / n(1) } else { 0.0 };
        let rf = r as f64;
        let ratio = ((rf + 1.0) * n(r + 1) / (rf * n(r)) - common) / (1.0 - common);
        if n(r + 1) > 0.0 && ratio > 0.0 && ratio <= 1.0 {
            rf * ratio
        } else {
            rf
        }
    }

    pub fn distribution(&self, context: &[TokenId]) -> Vec<f64> {
        let h = &context[context.len().saturating_sub(self.max_order)..];
        if h.is_empty() {
            let total: u64 = self.sentences.iter().map(|s| s.len() as u64).sum();
            return (0..self.vocab as TokenId)
                .map(|w| (self.count(&[w]) as f64 + 1.0) / (total as f64 + self.vocab as f64))
                .collect();
        }
        let lower = self.distribution(&h[1..]);
        let mut tuple = h.to_vec();
        tuple.push(0);
        let counts: Vec<u64> = (0..self.vocab as TokenId)
            .map(|w| {
                *tuple.last_mut().unwrap() = w;
                self.count(&tuple)
            })
            .collect();
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return lower;
        }
        let discounted: Vec<f64> = counts
            .iter()
            .map(|&r| if r > 0 { self.discount(h.len() + 1, r) } else { 0.0 })
            .collect();
        let left = 1.0 - discounted.iter().sum::<f64>() / total as f64;
        let unseen: f64 = (0..self.vocab).filter(|&w| counts[w] == 0).map(|w| lower[w]).sum();
        if unseen <= 1e-12 {
            return counts.iter().map(|&r| r as f64 / total as f64).collect();
        }
        let alpha = (left / unseen).max(0.0);
        (0..self.vocab)
            .map(|w| {
                if counts[w] > 0 {
                    discounted[w] / total as f64
                } else {
                    alpha * lower[w]
                }
            })
            .collect()
    }

    /// First index of the maximum.
    pub fn argmax(&self, context: &[TokenId]) -> TokenId {
        let d = self.distribution(context);
        let mut best = 0;
        for w in 1..d.len() {
            if d[w] > d[best] {
                best = w;
            }
        }
        best as TokenId
    }
}
