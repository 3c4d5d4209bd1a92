//! Run configuration: a flat `key = value` file, overridden by flags.
//!
//! Keys (defaults in brackets):
//!
//! | key | meaning |
//! |---|---|
//! | `corpus` | input text file; repeat the key for several files |
//! | `scripts` | comma list of `bengali`, `latin` [bengali] |
//! | `terminators` | sentence-ending characters [`।?!`] |
//! | `strip_digits` | drop digits during cleaning [true] |
//! | `min_count` | words seen fewer times become unk [1] |
//! | `orders` | comma list of context lengths to build and train [1,2,3,4,5] |
//! | `embed_dim`, `lstm_units`, `dense_hidden` | model sizes [64, 100, 128] |
//! | `epochs`, `batch_size`, `learning_rate`, `optimizer` | training [100, 32, 0.001, adam] |
//! | `heldout_every` | hold out every k-th sentence, 0 for none [0] |
//! | `k_gt` | Good-Turing threshold for the back-off model [5] |
//! | `out` | bundle directory [bundle] |
//! | `engine` | `neural` or `statistical` [neural] |
//! | `seed` | initialization and shuffling seed [0] |
//! | `k`, `max_len` | suggestions per query, completion cap [5, 50] |
//! | `parallel` | train the per-order models on separate threads [true] |
//! | `host`, `port`, `cors_origin` | server settings [127.0.0.1, 8080, any] |

use std::fmt::Write as _;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nextword_core::neural::OptimizerKind;
use nextword_core::predictor::DEFAULT_MAX_LEN;
use nextword_core::{BackoffConfig, CleaningConfig, Engine, ModelConfig, Script, TrainOptions, MAX_ORDER};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    pub scripts: Vec<Script>,
    pub terminators: Vec<char>,
    pub strip_digits: bool,
    pub min_count: usize,
    pub orders: Vec<usize>,
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub dense_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub heldout_every: usize,
    pub k_gt: u64,
    pub out: PathBuf,
    pub engine: Engine,
    pub seed: u64,
    pub k: usize,
    pub max_len: usize,
    pub parallel: bool,
    pub host: IpAddr,
    pub port: u16,
    pub cors_origin: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cleaning = CleaningConfig::default();
        let model = ModelConfig::new(1, 1);
        let train = TrainOptions::default();
        Self {
            corpus: Vec::new(),
            scripts: cleaning.scripts,
            terminators: cleaning.terminators,
            strip_digits: cleaning.strip_digits,
            min_count: 1,
            orders: (1..=MAX_ORDER).collect(),
            embed_dim: model.embed_dim,
            lstm_units: model.lstm_units,
            dense_hidden: model.dense_hidden,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            optimizer: train.optimizer,
            heldout_every: 0,
            k_gt: BackoffConfig::default().k_gt,
            out: PathBuf::from("bundle"),
            engine: Engine::Neural,
            seed: 0,
            k: 5,
            max_len: DEFAULT_MAX_LEN,
            parallel: true,
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            cors_origin: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("bad value {value:?} for {key}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("bad value {value:?} for {key}: expected true or false"))),
    }
}

fn list<T>(value: &str, item: impl Fn(&str) -> CliResult<T>) -> CliResult<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

impl RunConfig {
    /// Applies one `key = value` setting. `corpus` appends; every other key replaces.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key {
            "corpus" => self.corpus.push(PathBuf::from(value)),
            "scripts" => {
                self.scripts = list(value, |s| {
                    Script::parse(s).ok_or_else(|| CliError::Usage(format!("unknown script {s:?}")))
                })?
            }
            "terminators" => self.terminators = value.chars().filter(|c| !c.is_whitespace()).collect(),
            "strip_digits" => self.strip_digits = parse_bool(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "orders" => self.orders = list(value, |s| parse(key, s))?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "lstm_units" => self.lstm_units = parse(key, value)?,
            "dense_hidden" => self.dense_hidden = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "optimizer" => {
                self.optimizer = OptimizerKind::parse(value)
                    .ok_or_else(|| CliError::Usage(format!("unknown optimizer {value:?}")))?
            }
            "heldout_every" => self.heldout_every = parse(key, value)?,
            "k_gt" => self.k_gt = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "engine" => {
                self.engine =
                    Engine::parse(value).ok_or_else(|| CliError::Usage(format!("unknown engine {value:?}")))?
            }
            "seed" => self.seed = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "parallel" => self.parallel = parse_bool(key, value)?,
            "host" => self.host = parse(key, value)?,
            "port" => self.port = parse(key, value)?,
            "cors_origin" => self.cors_origin = Some(value.to_owned()).filter(|v| !v.is_empty()),
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every setting in a config file body. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value, got {raw:?}", i + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("reading config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Serialized form; [`RunConfig::apply_text`] on it reproduces `self`.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut out = String::from("# nextword run configuration\n");
        for c in &self.corpus {
            writeln!(out, "corpus = {}", c.display()).unwrap();
        }
        let pairs: [(&str, String); 23] = [
            ("scripts", join(self.scripts.iter().map(|s| s.name().to_owned()).collect())),
            ("terminators", self.terminators.iter().collect()),
            ("strip_digits", self.strip_digits.to_string()),
            ("min_count", self.min_count.to_string()),
            ("orders", join(self.orders.iter().map(usize::to_string).collect())),
            ("embed_dim", self.embed_dim.to_string()),
            ("lstm_units", self.lstm_units.to_string()),
            ("dense_hidden", self.dense_hidden.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("optimizer", self.optimizer.name().to_owned()),
            ("heldout_every", self.heldout_every.to_string()),
            ("k_gt", self.k_gt.to_string()),
            ("out", self.out.display().to_string()),
            ("engine", self.engine.name().to_owned()),
            ("seed", self.seed.to_string()),
            ("k", self.k.to_string()),
            ("max_len", self.max_len.to_string()),
            ("parallel", self.parallel.to_string()),
            ("host", self.host.to_string()),
            ("port", self.port.to_string()),
            ("cors_origin", self.cors_origin.clone().unwrap_or_default()),
        ];
        for (k, v) in pairs {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    /// Checks everything that can be checked before touching the disk.
    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.orders.is_empty() {
            return usage("orders must list at least one context length".into());
        }
        if let Some(n) = self.orders.iter().find(|&&n| n == 0 || n > MAX_ORDER) {
            return usage(format!("order {n} outside 1..={MAX_ORDER}"));
        }
        if self.scripts.is_empty() {
            return usage("scripts must name at least one script".into());
        }
        if self.terminators.is_empty() {
            return usage("terminators must not be empty".into());
        }
        if self.min_count == 0 {
            return usage("min_count must be at least 1".into());
        }
        if [self.embed_dim, self.lstm_units, self.dense_hidden].contains(&0) {
            return usage("model sizes must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return usage(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.k_gt == 0 {
            return usage("k_gt must be at least 1".into());
        }
        Ok(())
    }

    pub fn cleaning(&self) -> CleaningConfig {
        CleaningConfig {
            scripts: self.scripts.clone(),
            terminators: self.terminators.clone(),
            strip_digits: self.strip_digits,
        }
    }

    pub fn model_config(&self, vocab_size: usize, order: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            context_len: order,
            lstm_units: self.lstm_units,
            dense_hidden: self.dense_hidden,
            seed: self.seed,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            shuffle_seed: self.seed,
            ..TrainOptions::default()
        }
    }

    pub fn backoff_config(&self) -> BackoffConfig {
        BackoffConfig {
            k_gt: self.k_gt,
            ..BackoffConfig::default()
        }
    }

    pub fn heldout(&self) -> Option<usize> {
        (self.heldout_every > 0).then_some(self.heldout_every)
    }
}
