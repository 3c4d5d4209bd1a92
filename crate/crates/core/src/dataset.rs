//! Fixed-context supervised examples for each n-gram order.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TokenId;

pub const MIN_ORDER: usize = 1;
pub const MAX_ORDER: usize = 5;
const DATASET_VERSION: u32 = 1;

pub(crate) fn check_order(n: usize) -> Result<()> {
    if (MIN_ORDER..=MAX_ORDER).contains(&n) {
        Ok(())
    } else {
        Err(Error::OrderOutOfRange(n))
    }
}

/// `context.len()` tokens followed by `target`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NGramExample {
    pub context: Vec<TokenId>,
    pub target: TokenId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NGramDataset {
    pub order: usize,
    pub vocab_size: usize,
    pub examples: Vec<NGramExample>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub example_count: usize,
    pub distinct_contexts: usize,
    pub distinct_targets: usize,
}

/// Slides a window of `n` tokens over each sentence; windows never span two sentences.
pub fn build_dataset(sentences: &[Vec<TokenId>], n: usize, vocab_size: usize) -> Result<NGramDataset> {
    check_order(n)?;
    let examples = sentences
        .iter()
        .flat_map(|s| {
            s.windows(n + 1).map(|w| NGramExample {
                context: w[..n].to_vec(),
                target: w[n],
            })
        })
        .collect();
    Ok(NGramDataset {
        order: n,
        vocab_size,
        examples,
    })
}

/// Splits sentences into (train, held-out); every `every`-th sentence (1-based)
/// is held out. `None` or `Some(0)` keeps everything for training.
pub fn heldout_partition(sentences: &[Vec<TokenId>], every: Option<usize>) -> (Vec<Vec<TokenId>>, Vec<Vec<TokenId>>) {
    match every {
        Some(k) if k >= 1 => {
            let (train, heldout): (Vec<_>, Vec<_>) = sentences.iter().enumerate().partition(|(i, _)| (i + 1) % k != 0);
            let strip = |v: Vec<(usize, &Vec<TokenId>)>| v.into_iter().map(|(_, s)| s.clone()).collect();
            (strip(train), strip(heldout))
        }
        _ => (sentences.to_vec(), Vec::new()),
    }
}

/// Train/held-out datasets built from [`heldout_partition`].
pub fn build_split(
    sentences: &[Vec<TokenId>],
    n: usize,
    vocab_size: usize,
    heldout_every: Option<usize>,
) -> Result<(NGramDataset, NGramDataset)> {
    let (train, heldout) = heldout_partition(sentences, heldout_every);
    Ok((
        build_dataset(&train, n, vocab_size)?,
        build_dataset(&heldout, n, vocab_size)?,
    ))
}

impl NGramDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        dataset_stats(self)
    }

    /// Header line of JSON, then `c1 c2 ... cn → t` per example.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{{\"version\":{},\"order\":{},\"vocab_size\":{}}}\n",
            DATASET_VERSION, self.order, self.vocab_size
        );
        for ex in &self.examples {
            for id in &ex.context {
                write!(out, "{id} ").unwrap();
            }
            writeln!(out, "→ {}", ex.target).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
            order: usize,
            vocab_size: usize,
        }
        let mut lines = text.lines();
        let header: Header = serde_json::from_str(lines.next().unwrap_or_default())
            .map_err(|e| Error::format("dataset header", e.to_string()))?;
        if header.version != DATASET_VERSION {
            return Err(Error::VersionMismatch {
                what: "dataset",
                expected: DATASET_VERSION,
                found: header.version,
            });
        }
        check_order(header.order)?;
        let mut examples = Vec::new();
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |d: &str| Error::format("dataset", format!("line {}: {d}", lineno + 2));
            let (ctx, target) = line.split_once('→').ok_or_else(|| bad("missing →"))?;
            let context = ctx
                .split_whitespace()
                .map(|t| t.parse::<TokenId>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(&e.to_string()))?;
            let target: TokenId = target.trim().parse().map_err(|_| bad("bad target"))?;
            if context.len() != header.order {
                return Err(bad("context length differs from order"));
            }
            if context.iter().chain(Some(&target)).any(|&id| id as usize >= header.vocab_size) {
                return Err(bad("id outside vocabulary"));
            }
            examples.push(NGramExample { context, target });
        }
        Ok(Self {
            order: header.order,
            vocab_size: header.vocab_size,
            examples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub fn dataset_stats(d: &NGramDataset) -> DatasetStats {
    let contexts: HashSet<&[TokenId]> = d.examples.iter().map(|e| e.context.as_slice()).collect();
    let targets: HashSet<TokenId> = d.examples.iter().map(|e| e.target).collect();
    DatasetStats {
        example_count: d.examples.len(),
        distinct_contexts: contexts.len(),
        distinct_targets: targets.len(),
    }
}
