//! On-disk layout of a trained bundle.

use std::path::{Path, PathBuf};

use crate::backoff::BackoffModel;
use crate::dataset::{MAX_ORDER, MIN_ORDER};
use crate::error::{Error, Result};
use crate::neural::NeuralModel;
use crate::predictor::ModelBundle;
use crate::scalar::Scalar;
use crate::text::CleaningConfig;
use crate::vocab::Vocabulary;
use crate::TokenId;
use serde::{Deserialize, Serialize};

/// File names inside an output directory.
#[derive(Clone, Debug)]
pub struct BundleLayout {
    root: PathBuf,
}

impl BundleLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn vocabulary(&self) -> PathBuf {
        self.root.join("vocab.json")
    }

    pub fn cleaning(&self) -> PathBuf {
        self.root.join("cleaning.json")
    }

    /// Encoded sentences, one per line of space-separated ids.
    pub fn sentences(&self) -> PathBuf {
        self.root.join("sentences.txt")
    }

    pub fn dataset(&self, order: usize) -> PathBuf {
        self.root.join(format!("dataset_order{order}.txt"))
    }

    pub fn heldout_dataset(&self, order: usize) -> PathBuf {
        self.root.join(format!("heldout_order{order}.txt"))
    }

    pub fn checkpoint(&self, order: usize) -> PathBuf {
        self.root.join(format!("model_order{order}.ckpt"))
    }

    pub fn report(&self, order: usize) -> PathBuf {
        self.root.join(format!("report_order{order}.csv"))
    }

    pub fn heldout_report(&self, order: usize) -> PathBuf {
        self.root.join(format!("report_order{order}_heldout.csv"))
    }

    pub fn backoff(&self) -> PathBuf {
        self.root.join("backoff.txt")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats.json")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval.csv")
    }

    pub fn run_config(&self) -> PathBuf {
        self.root.join("run_config.txt")
    }
}

const CLEANING_VERSION: u32 = 1;
const SENTENCES_VERSION: u32 = 1;
const SENTENCES_MAGIC: &str = "nextword-sentences";

#[derive(Serialize, Deserialize)]
struct CleaningFile {
    version: u32,
    #[serde(flatten)]
    cleaning: CleaningConfig,
}

pub fn save_cleaning(path: &Path, cleaning: &CleaningConfig) -> Result<()> {
    let file = CleaningFile {
        version: CLEANING_VERSION,
        cleaning: cleaning.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_cleaning(path: &Path) -> Result<CleaningConfig> {
    let file: CleaningFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.version != CLEANING_VERSION {
        return Err(Error::VersionMismatch {
            what: "cleaning rules",
            expected: CLEANING_VERSION,
            found: file.version,
        });
    }
    Ok(file.cleaning)
}

/// One sentence per line as space-separated ids, after a version line.
pub fn encoded_sentences_to_text(sentences: &[Vec<TokenId>]) -> String {
    let mut out = format!("{SENTENCES_MAGIC} {SENTENCES_VERSION}\n");
    for s in sentences {
        let line: Vec<String> = s.iter().map(|id| id.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn encoded_sentences_from_text(text: &str, vocab_size: usize) -> Result<Vec<Vec<TokenId>>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let version = header
        .strip_prefix(SENTENCES_MAGIC)
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| Error::format("sentence file", format!("bad header {header:?}")))?;
    if version != SENTENCES_VERSION {
        return Err(Error::VersionMismatch {
            what: "sentence file",
            expected: SENTENCES_VERSION,
            found: version,
        });
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split_whitespace()
                .map(|t| match t.parse::<TokenId>() {
                    Ok(id) if (id as usize) < vocab_size => Ok(id),
                    _ => Err(Error::format("sentence file", format!("bad id {t:?}"))),
                })
                .collect()
        })
        .collect()
}

pub fn save_sentences(path: &Path, sentences: &[Vec<TokenId>]) -> Result<()> {
    std::fs::write(path, encoded_sentences_to_text(sentences))?;
    Ok(())
}

pub fn load_sentences(path: &Path, vocab_size: usize) -> Result<Vec<Vec<TokenId>>> {
    encoded_sentences_from_text(&std::fs::read_to_string(path)?, vocab_size)
}

impl<F: Scalar> ModelBundle<F> {
    /// Loads vocabulary, cleaning rules, every checkpoint present for orders
    /// 1–5 and the back-off model if one was written.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let layout = BundleLayout::new(dir);
        let vocab = Vocabulary::load(&layout.vocabulary())?;
        let cleaning = load_cleaning(&layout.cleaning())?;
        let mut bundle = ModelBundle::new(vocab, cleaning);
        for order in MIN_ORDER..=MAX_ORDER {
            let path = layout.checkpoint(order);
            if path.exists() {
                let model = NeuralModel::<F>::load(&path)?;
                if model.config.context_len != order {
                    return Err(Error::OrderMismatch {
                        expected: order,
                        found: model.config.context_len,
                    });
                }
                bundle.insert_neural(model)?;
            }
        }
        let backoff = layout.backoff();
        if backoff.exists() {
            bundle = bundle.with_statistical(BackoffModel::load(&backoff)?)?;
        }
        Ok(bundle)
    }
}
