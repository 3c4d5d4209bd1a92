//! The verbs behind the `nextword` binary. Each returns what it would print
//! so the binary stays a thin shell.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nextword_core::bundle::{load_sentences, save_cleaning, save_sentences};
use nextword_core::neural::{evaluate, train_with_heldout, NeuralModel, TrainReport};
use nextword_core::predictor::ModelBundle;
use nextword_core::text::{normalize, split_sentences, tokenize};
use nextword_core::{
    build_split, build_vocabulary, heldout_partition, init_model, train_backoff, BundleLayout, Engine, Error,
    ModelBundle64, NGramDataset, NGramExample, RawDocument, Termination, Vocabulary, MAX_ORDER,
};
use nextword_server::ServerConfig;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Text for stdout plus warnings for stderr.
#[derive(Debug, Default, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub warnings: Vec<String>,
}

impl Output {
    fn line(&mut self, text: impl AsRef<str>) {
        self.stdout.push_str(text.as_ref());
        self.stdout.push('\n');
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::data(format!("writing {}", path.display()), e))
}

fn ensure_out_dir(cfg: &RunConfig) -> CliResult<BundleLayout> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::data(format!("creating {}", cfg.out.display()), e))?;
    Ok(BundleLayout::new(&cfg.out))
}

fn save_run_config(layout: &BundleLayout, cfg: &RunConfig) -> CliResult<()> {
    write_file(&layout.run_config(), cfg.to_text())
}

fn load_vocab(layout: &BundleLayout) -> CliResult<Vocabulary> {
    let path = layout.vocabulary();
    Vocabulary::load(&path).map_err(|e| CliError::data(format!("{} (run `nextword build` first?)", path.display()), e))
}

fn words_only(tokens: &[String], terminators: &[String]) -> Vec<String> {
    tokens.iter().filter(|t| !terminators.contains(t)).cloned().collect()
}

/// Reads and cleans every corpus file, then writes the vocabulary, the
/// encoded sentences, one dataset per order and `stats.json`.
pub fn build(cfg: &RunConfig) -> CliResult<Output> {
    cfg.validate()?;
    if cfg.corpus.is_empty() {
        return Err(CliError::Usage("no corpus given; pass --corpus PATH or set corpus in the config".into()));
    }
    let rules = cfg.cleaning();
    let terminators = rules.terminator_tokens();
    let mut sentences = Vec::new();
    let mut sources = Vec::new();
    for path in &cfg.corpus {
        let bytes = fs::read(path).map_err(|e| CliError::data(format!("reading {}", path.display()), e))?;
        let doc = RawDocument::from_bytes(path.display().to_string(), bytes)
            .map_err(|e| CliError::data(path.display(), e))?;
        let doc_sentences = split_sentences(tokenize(&normalize(&doc, &rules)), &terminators);
        let words: Vec<String> = doc_sentences
            .iter()
            .flat_map(|s| words_only(s.tokens(), &terminators))
            .collect();
        let distinct: BTreeSet<&String> = words.iter().collect();
        sources.push(json!({
            "path": path.display().to_string(),
            "sentences": doc_sentences.len(),
            "total_words": words.len(),
            "distinct_words": distinct.len(),
        }));
        sentences.extend(doc_sentences);
    }
    let vocab = build_vocabulary(&sentences, cfg.min_count).map_err(|e| match e {
        Error::EmptyCorpus => CliError::Data("the corpus has no usable tokens after cleaning".into()),
        other => CliError::data("building vocabulary", other),
    })?;
    let encoded: Vec<_> = sentences.iter().map(|s| vocab.encode_all(s.tokens())).collect();

    let layout = ensure_out_dir(cfg)?;
    vocab.save(&layout.vocabulary()).map_err(|e| CliError::data("writing vocabulary", e))?;
    save_cleaning(&layout.cleaning(), &rules).map_err(|e| CliError::data("writing cleaning rules", e))?;
    save_sentences(&layout.sentences(), &encoded).map_err(|e| CliError::data("writing sentences", e))?;

    let mut out = Output::default();
    out.line(format!("vocabulary: {} tokens, {} sentences", vocab.size(), encoded.len()));
    let mut order_stats = serde_json::Map::new();
    for &n in &cfg.orders {
        let (train, heldout) =
            build_split(&encoded, n, vocab.size(), cfg.heldout()).map_err(|e| CliError::data(format!("order {n}"), e))?;
        train.save(&layout.dataset(n)).map_err(|e| CliError::data(format!("writing order-{n} dataset"), e))?;
        let heldout_path = layout.heldout_dataset(n);
        if cfg.heldout().is_some() {
            heldout.save(&heldout_path).map_err(|e| CliError::data(format!("writing order-{n} held-out set"), e))?;
        } else if heldout_path.exists() {
            fs::remove_file(&heldout_path).map_err(|e| CliError::data(heldout_path.display(), e))?;
        }
        if train.is_empty() {
            out.warnings.push(format!("order-{n} dataset is empty: no sentence is longer than {n} tokens"));
        }
        let stats = train.stats();
        order_stats.insert(
            n.to_string(),
            json!({
                "examples": stats.example_count,
                "distinct_contexts": stats.distinct_contexts,
                "distinct_targets": stats.distinct_targets,
                "heldout_examples": heldout.len(),
            }),
        );
        out.line(format!("order {n}: {} examples, {} held out", train.len(), heldout.len()));
    }
    let stats = json!({
        "vocab_size": vocab.size(),
        "sentences": encoded.len(),
        "sources": sources,
        "orders": order_stats,
    });
    write_file(&layout.stats(), serde_json::to_string_pretty(&stats).expect("json value") + "\n")?;
    save_run_config(&layout, cfg)?;
    Ok(out)
}

fn load_dataset(path: &Path, vocab: &Vocabulary, order: usize) -> CliResult<NGramDataset> {
    let data = NGramDataset::load(path).map_err(|e| CliError::data(path.display(), e))?;
    if data.order != order {
        return Err(CliError::data(path.display(), Error::OrderMismatch { expected: order, found: data.order }));
    }
    if data.vocab_size != vocab.size() {
        return Err(CliError::Data(format!(
            "{}: built for a vocabulary of {} tokens, bundle has {}",
            path.display(),
            data.vocab_size,
            vocab.size()
        )));
    }
    Ok(data)
}

struct Trained {
    order: usize,
    examples: usize,
    model: NeuralModel<f64>,
    report: TrainReport,
}

fn train_order(cfg: &RunConfig, order: usize, train: &NGramDataset, heldout: Option<&NGramDataset>) -> CliResult<Trained> {
    let model = init_model(cfg.model_config(train.vocab_size, order)).map_err(|e| CliError::model(format!("order {order}"), e))?;
    let (model, report) = train_with_heldout(model, train, heldout, &cfg.train_options())
        .map_err(|e| CliError::model(format!("training order {order}"), e))?;
    if !model.params.is_finite() {
        return Err(CliError::Model(format!("training order {order} diverged; try a smaller learning_rate")));
    }
    Ok(Trained {
        order,
        examples: train.len(),
        model,
        report,
    })
}

/// Trains one network per configured order plus the back-off model and
/// writes checkpoints and per-epoch CSVs.
pub fn train(cfg: &RunConfig) -> CliResult<Output> {
    cfg.validate()?;
    let layout = BundleLayout::new(&cfg.out);
    let vocab = load_vocab(&layout)?;
    let mut jobs = Vec::new();
    for &n in &cfg.orders {
        let train = load_dataset(&layout.dataset(n), &vocab, n)?;
        let heldout_path = layout.heldout_dataset(n);
        let heldout = if heldout_path.exists() {
            Some(load_dataset(&heldout_path, &vocab, n)?)
        } else {
            None
        };
        jobs.push((n, train, heldout));
    }

    let results: Vec<CliResult<Trained>> = if cfg.parallel && jobs.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(n, train, heldout)| scope.spawn(move || train_order(cfg, *n, train, heldout.as_ref())))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Model("training thread panicked".into()))))
                .collect()
        })
    } else {
        jobs.iter()
            .map(|(n, train, heldout)| train_order(cfg, *n, train, heldout.as_ref()))
            .collect()
    };

    let mut out = Output::default();
    for result in results {
        let t = result?;
        t.model
            .save(&layout.checkpoint(t.order))
            .map_err(|e| CliError::model(format!("writing order-{} checkpoint", t.order), e))?;
        write_file(&layout.report(t.order), t.report.to_csv())?;
        if !t.report.heldout.is_empty() {
            write_file(&layout.heldout_report(t.order), t.report.heldout_csv())?;
        }
        match t.report.last() {
            Some(m) => out.line(format!(
                "order {}: {} examples, {} epochs, loss {:.6}, accuracy {:.4}",
                t.order, t.examples, m.epoch, m.loss, m.accuracy
            )),
            None => {
                out.warnings.push(format!("order {}: nothing to train on; checkpoint is untrained", t.order));
                out.line(format!("order {}: 0 examples", t.order));
            }
        }
    }

    let sentences =
        load_sentences(&layout.sentences(), vocab.size()).map_err(|e| CliError::data(layout.sentences().display(), e))?;
    let (train_sentences, _) = heldout_partition(&sentences, cfg.heldout());
    let backoff = train_backoff(&train_sentences, MAX_ORDER, vocab.size(), cfg.backoff_config())
        .map_err(|e| CliError::model("building back-off model", e))?;
    backoff.save(&layout.backoff()).map_err(|e| CliError::model("writing back-off model", e))?;
    out.line(format!("back-off model: {} contexts", backoff.observed_contexts().count()));
    save_run_config(&layout, cfg)?;
    Ok(out)
}

pub fn load_bundle(cfg: &RunConfig) -> CliResult<ModelBundle64> {
    ModelBundle::load_dir(&cfg.out).map_err(|e| CliError::model(format!("loading bundle {}", cfg.out.display()), e))
}

fn query_error(e: Error) -> CliError {
    match e {
        Error::EmptyContext => CliError::Data("empty context".into()),
        other => CliError::Model(other.to_string()),
    }
}

fn input_tokens(bundle: &ModelBundle64, text: &str, what: &str) -> CliResult<Vec<String>> {
    let tokens = bundle.tokenize_input(text);
    if tokens.is_empty() {
        return Err(CliError::Data(format!("{what} has no usable tokens: {text:?}")));
    }
    Ok(tokens)
}

/// Ranked next-word suggestions, one `token p=0.123456` line each.
pub fn predict(cfg: &RunConfig, context: &str) -> CliResult<Output> {
    let bundle = load_bundle(cfg)?;
    predict_with(&bundle, cfg, context)
}

pub fn predict_with(bundle: &ModelBundle64, cfg: &RunConfig, context: &str) -> CliResult<Output> {
    let tokens = input_tokens(bundle, context, "context")?;
    let mut out = Output::default();
    let limit = bundle.suggestable();
    let k = if cfg.k == 0 {
        out.warnings.push("k=0 requested; showing 1 suggestion".into());
        1
    } else if cfg.k > limit {
        out.warnings.push(format!("k={} exceeds the {limit} suggestable tokens; clamped to {limit}", cfg.k));
        limit
    } else {
        cfg.k
    };
    let s = bundle.suggest(&tokens, k, cfg.engine).map_err(query_error)?;
    for c in s.candidates {
        out.line(format!("{} p={:.6}", c.token, c.probability));
    }
    Ok(out)
}

/// Greedy sentence completion printed as space-separated tokens.
pub fn complete(cfg: &RunConfig, prefix: &str) -> CliResult<Output> {
    let bundle = load_bundle(cfg)?;
    complete_with(&bundle, cfg, prefix)
}

pub fn complete_with(bundle: &ModelBundle64, cfg: &RunConfig, prefix: &str) -> CliResult<Output> {
    let tokens = input_tokens(bundle, prefix, "prefix")?;
    let c = bundle.complete_sentence(&tokens, cfg.engine, cfg.max_len).map_err(query_error)?;
    let mut out = Output::default();
    out.line(c.text());
    if c.terminated_by == Termination::LengthCap {
        out.warnings.push(format!("length-cap: stopped after {} generated tokens without a terminator", c.steps));
    }
    Ok(out)
}

fn statistical_metrics(bundle: &ModelBundle64, examples: &[NGramExample]) -> (f64, f64) {
    let model = bundle.statistical().expect("checked by caller");
    let mut loss = 0.0;
    let mut correct = 0;
    for ex in examples {
        let dist = model.distribution(&ex.context);
        loss -= dist[ex.target as usize].ln();
        if model.predict_next(&ex.context).0 == ex.target {
            correct += 1;
        }
    }
    let n = examples.len() as f64;
    (loss / n, correct as f64 / n)
}

/// Mean cross-entropy and top-1 accuracy of both engines on every dataset
/// file, written to `eval.csv` and echoed.
pub fn eval(cfg: &RunConfig) -> CliResult<Output> {
    cfg.validate()?;
    let bundle = load_bundle(cfg)?;
    let layout = BundleLayout::new(&cfg.out);
    let mut out = Output::default();
    let mut csv = String::from("order,engine,split,examples,loss,accuracy\n");
    for &n in &cfg.orders {
        let mut splits = vec![("train", load_dataset(&layout.dataset(n), bundle.vocabulary(), n)?)];
        let heldout_path = layout.heldout_dataset(n);
        if heldout_path.exists() {
            splits.push(("heldout", load_dataset(&heldout_path, bundle.vocabulary(), n)?));
        }
        for (split, data) in &splits {
            if data.is_empty() {
                out.warnings.push(format!("order {n} {split}: no examples, skipped"));
                continue;
            }
            if let Some(model) = bundle.neural_model(n) {
                let (loss, acc) = evaluate(model, &data.examples).map_err(|e| CliError::model(format!("order {n}"), e))?;
                writeln!(csv, "{n},{},{split},{},{loss:.6},{acc:.6}", Engine::Neural, data.len()).unwrap();
            } else {
                out.warnings.push(format!("no order-{n} checkpoint"));
            }
            if bundle.statistical().is_some() {
                let (loss, acc) = statistical_metrics(&bundle, &data.examples);
                writeln!(csv, "{n},{},{split},{},{loss:.6},{acc:.6}", Engine::Statistical, data.len()).unwrap();
            }
        }
    }
    write_file(&layout.eval(), &csv)?;
    out.stdout = csv;
    Ok(out)
}

/// Serves the bundle in `out` until interrupted.
pub fn serve(cfg: &RunConfig) -> CliResult<()> {
    if !BundleLayout::new(&cfg.out).vocabulary().exists() {
        return Err(CliError::Model(format!("no bundle in {}", cfg.out.display())));
    }
    let config = ServerConfig {
        host: cfg.host,
        port: cfg.port,
        cors_origin: cfg.cors_origin.clone(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Model(format!("starting runtime: {e}")))?;
    runtime
        .block_on(nextword_server::serve(config, cfg.out.clone()))
        .map_err(|e| CliError::model("server", e))
}
