//! End-to-end acceptance checks. Prints one `[PASS]`/`[FAIL]` line per
//! criterion and exits non-zero if any fail.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::HashSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::{finite_difference_check, naive_windows, BruteKatz};
use http_body_util::BodyExt;
use nextword_cli::commands;
use nextword_cli::RunConfig;
use nextword_core::neural::{init_model, ModelConfig, NeuralModel};
use nextword_core::predictor::ModelBundle;
use nextword_core::{
    build_dataset, train_backoff, BackoffConfig, BundleLayout, Engine, ModelBundle64, NGramExample,
    Termination, TokenId, UNK_TOKEN,
};
use nextword_server::{app, AppState, ServerConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

// Thresholds.
const TRAIN_EPOCHS: usize = 150;
const MAX_EPOCHS: usize = 300;
const MIN_ACCURACY: f64 = 0.99;
const MAX_FINAL_LOSS: f64 = 0.05;
const TRAIN_BUDGET: Duration = Duration::from_secs(300);
const GRAD_EPS: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_COORDS: usize = 20;
const GRAD_BUDGET: Duration = Duration::from_secs(10);
const NORM_TOL: f64 = 1e-6;
const NORM_BUDGET: Duration = Duration::from_secs(5);
const P50_BUDGET: Duration = Duration::from_millis(50);

const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy_corpus_bn.txt");

fn toy_config(out: &Path) -> RunConfig {
    RunConfig {
        corpus: vec![PathBuf::from(CORPUS)],
        embed_dim: 16,
        lstm_units: 32,
        dense_hidden: 64,
        epochs: TRAIN_EPOCHS,
        batch_size: 32,
        learning_rate: 0.01,
        seed: 7,
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

fn last_row(csv: &str) -> (usize, f64, f64) {
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let f: Vec<&str> = rows.last().expect("at least one epoch").split(',').collect();
    (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
}

/// Builds and trains the toy bundle; all five orders share one configuration.
fn toy_corpus_training(out: &Path) -> String {
    let cfg = toy_config(out);
    let start = Instant::now();
    commands::build(&cfg).expect("build");
    commands::train(&cfg).expect("train");
    let elapsed = start.elapsed();
    let layout = BundleLayout::new(out);
    let mut notes = Vec::new();
    for n in 1..=5 {
        let csv = fs::read_to_string(layout.report(n)).unwrap();
        assert!(csv.starts_with("epoch,loss,accuracy\n"));
        let (epochs, loss, acc) = last_row(&csv);
        assert!(epochs <= MAX_EPOCHS);
        if n >= 4 {
            assert!(acc >= MIN_ACCURACY, "order {n} accuracy {acc}");
            assert!(loss <= MAX_FINAL_LOSS, "order {n} loss {loss}");
        }
        notes.push(format!("o{n} acc={acc:.4} loss={loss:.4}"));
    }
    assert!(elapsed < TRAIN_BUDGET, "took {elapsed:?}");
    format!("{} ({} epochs, {:.1}s)", notes.join(", "), TRAIN_EPOCHS, elapsed.as_secs_f64())
}

fn gradient_oracle() -> String {
    let start = Instant::now();
    let model: NeuralModel<f64> = init_model(ModelConfig {
        vocab_size: 7,
        embed_dim: 4,
        context_len: 3,
        lstm_units: 3,
        dense_hidden: 5,
        seed: 1,
    })
    .unwrap();
    let batch: Vec<NGramExample> = [([1, 2, 3], 4), ([0, 6, 6], 2), ([5, 4, 1], 0), ([3, 3, 2], 6)]
        .into_iter()
        .map(|(c, t)| NGramExample {
            context: c.to_vec(),
            target: t,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let groups = finite_difference_check(&model, &batch, GRAD_EPS, GRAD_COORDS, &mut rng);
    let sizes: Vec<usize> = model.params.tensors().iter().map(|t| t.data.len()).collect();
    let mut worst: f64 = 0.0;
    for (g, size) in groups.iter().zip(sizes) {
        assert!(g.checked >= GRAD_COORDS.min(size), "{} checked only {}", g.name, g.checked);
        assert!(g.max_rel_err < GRAD_TOL, "{}: {:.3e}", g.name, g.max_rel_err);
        worst = worst.max(g.max_rel_err);
    }
    let elapsed = start.elapsed();
    assert!(elapsed < GRAD_BUDGET, "took {elapsed:?}");
    format!("{} groups, worst rel err {worst:.2e}, {:.2}s", groups.len(), elapsed.as_secs_f64())
}

fn katz_normalization(bundle: &ModelBundle64) -> String {
    let start = Instant::now();
    let model = bundle.statistical().expect("back-off model in bundle");
    let v = bundle.vocabulary().size();
    let mut contexts: Vec<Vec<TokenId>> = model.observed_contexts().map(<[_]>::to_vec).collect();
    let observed = contexts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut unseen = 0;
    while unseen < 100 {
        let len = rng.gen_range(1..=5);
        let ctx: Vec<TokenId> = (0..len).map(|_| rng.gen_range(0..v as TokenId)).collect();
        if model.counts().get(&ctx) == 0 {
            contexts.push(ctx);
            unseen += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for ctx in &contexts {
        let total: f64 = (0..v as TokenId).map(|w| model.katz_prob(ctx, w)).sum();
        worst = worst.max((total - 1.0).abs());
    }
    assert!(worst <= NORM_TOL, "worst deviation {worst:.3e}");
    let elapsed = start.elapsed();
    assert!(elapsed < NORM_BUDGET, "took {elapsed:?}");
    format!("{observed} observed + {unseen} unseen contexts, max |sum-1| = {worst:.1e}, {:.2}s", elapsed.as_secs_f64())
}

fn statistical_argmax_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut queries = 0;
    let mut ties = 0;
    while queries < 1000 {
        let vocab = rng.gen_range(3..9);
        let mut corpus: Vec<Vec<TokenId>> = Vec::new();
        let mut tokens = 0;
        while tokens < 50 {
            let len = rng.gen_range(1..=7).min(50 - tokens);
            let mut s: Vec<TokenId> = (0..len).map(|_| rng.gen_range(1..vocab as TokenId)).collect();
            *s.last_mut().unwrap() = 1;
            tokens += s.len();
            corpus.push(s);
        }
        let max_order = rng.gen_range(1..=5);
        let model = train_backoff(&corpus, max_order, vocab, BackoffConfig::default()).unwrap();
        let oracle = BruteKatz::new(&corpus, max_order, vocab, BackoffConfig::default().k_gt);
        for _ in 0..50 {
            let ctx: Vec<TokenId> = (0..rng.gen_range(0..=6)).map(|_| rng.gen_range(0..vocab as TokenId)).collect();
            let dist = oracle.distribution(&ctx);
            let best = dist.iter().cloned().fold(f64::MIN, f64::max);
            if dist.iter().filter(|&&p| p == best).count() > 1 {
                ties += 1;
            }
            assert_eq!(model.predict_next(&ctx).0, oracle.argmax(&ctx), "context {ctx:?} corpus {corpus:?}");
            queries += 1;
        }
    }
    assert!(ties > 0, "no tied queries were exercised");
    format!("{queries} queries agree, {ties} with tied maxima")
}

fn dataset_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sentences: Vec<Vec<TokenId>> = (0..100)
        .map(|_| (0..rng.gen_range(0..=12)).map(|_| rng.gen_range(0..40)).collect())
        .collect();
    let mut counts = Vec::new();
    for n in 1..=5 {
        let built = build_dataset(&sentences, n, 40).unwrap();
        assert_eq!(built.examples, naive_windows(&sentences, n), "order {n}");
        let expected: usize = sentences.iter().map(|s| s.len().saturating_sub(n)).sum();
        assert_eq!(built.len(), expected);
        counts.push(built.len());
    }
    format!("orders 1-5 match, window counts {counts:?}")
}

fn random_tokens(rng: &mut ChaCha8Rng, bundle: &ModelBundle64, len: usize) -> Vec<String> {
    let tokens = bundle.vocabulary().tokens();
    (0..len).map(|_| tokens.choose(rng).unwrap().clone()).collect()
}

fn routing_law(bundle: &ModelBundle64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checks = 0;
    for _ in 0..100 {
        let len = rng.gen_range(6..=12);
        let ctx = random_tokens(&mut rng, bundle, len);
        for engine in [Engine::Neural, Engine::Statistical] {
            for k in [1, 5] {
                let full = bundle.suggest(&ctx, k, engine).unwrap();
                let tail = bundle.suggest(&ctx[len - 5..], k, engine).unwrap();
                assert_eq!(full, tail, "{ctx:?} {engine} k={k}");
                assert_eq!(full.order_used, 5);
                checks += 1;
            }
        }
    }
    format!("{checks} comparisons")
}

fn completion_termination(bundle: &ModelBundle64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let terminators: HashSet<String> = bundle.terminators().into_iter().collect();
    let mut prefixes: Vec<Vec<String>> = Vec::new();
    for t in &terminators {
        prefixes.push(vec![t.clone()]);
    }
    for len in 1..=7 {
        prefixes.push(vec![UNK_TOKEN.to_owned(); len]);
        prefixes.push(vec!["অজানা".to_owned(); len]);
    }
    while prefixes.len() < 1000 {
        let len = rng.gen_range(1..=9);
        prefixes.push(random_tokens(&mut rng, bundle, len));
    }
    let (mut by_terminator, mut by_cap) = (0, 0);
    for (i, prefix) in prefixes.iter().enumerate() {
        let max_len = if i % 4 == 0 { rng.gen_range(0..4) } else { 50 };
        let engine = if i % 2 == 0 { Engine::Neural } else { Engine::Statistical };
        let c = bundle.complete_sentence(prefix, engine, max_len).unwrap();
        assert!(c.steps <= max_len);
        assert_eq!(c.tokens.len(), prefix.len() + c.steps);
        assert_eq!(&c.tokens[..prefix.len()], &prefix[..]);
        match &c.terminated_by {
            Termination::Terminator(t) => {
                assert!(terminators.contains(t));
                assert_eq!(c.tokens.last(), Some(t));
                by_terminator += 1;
            }
            Termination::LengthCap => by_cap += 1,
        }
    }
    format!("{} prefixes: {by_terminator} ended by a terminator, {by_cap} by the cap", prefixes.len())
}

fn nextword(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nextword"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

/// Two independent build, train, predict runs through the binary.
fn determinism(scratch: &Path) -> String {
    let run = |name: &str| -> Vec<(String, Vec<u8>)> {
        let out = scratch.join(name);
        let out_s = out.to_str().unwrap();
        let common = [
            "--corpus", CORPUS, "--out", out_s, "--seed", "11", "--set", "epochs=3", "--set", "lstm_units=16",
            "--set", "embed_dim=8", "--set", "dense_hidden=16",
        ];
        for verb in ["build", "train"] {
            let o = nextword(&[&[verb][..], &common].concat());
            assert!(o.status.success(), "{verb}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let mut artifacts: Vec<(String, Vec<u8>)> = Vec::new();
        let layout = BundleLayout::new(&out);
        for n in 1..=5 {
            for p in [layout.checkpoint(n), layout.report(n)] {
                artifacts.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()));
            }
        }
        artifacts.push(("backoff.txt".into(), fs::read(layout.backoff()).unwrap()));
        for (i, ctx) in ["আমি ভাত", "সে কাল", "তারা কি আজ", "বাবা কি খবর"].iter().enumerate() {
            for engine in ["neural", "statistical"] {
                let o = nextword(&["predict", ctx, "--out", out_s, "--k", "5", "--engine", engine]);
                assert!(o.status.success());
                artifacts.push((format!("predict {i} {engine}"), o.stdout));
            }
        }
        artifacts
    };
    let (a, b) = (run("first"), run("second"));
    assert_eq!(a.len(), b.len());
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        assert!(x == y, "{name} differs between runs");
    }
    format!("{} artifacts byte-identical", a.len())
}

async fn call(router: &Router, method: &str, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(if method == "GET" { Body::empty() } else { Body::from(body.to_string()) })
        .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).expect("json body"))
}

fn check_suggest_schema(v: &Value) {
    let obj = v.as_object().expect("object");
    assert_eq!(obj.len(), 3, "{v}");
    let order = v["order_used"].as_u64().expect("order_used integer");
    assert!((1..=5).contains(&order));
    assert!(v["latency_ms"].as_f64().expect("latency_ms number") >= 0.0);
    let candidates = v["candidates"].as_array().expect("candidates array");
    let mut last = f64::INFINITY;
    for c in candidates {
        assert_eq!(c.as_object().unwrap().len(), 2);
        let tok = c["token"].as_str().expect("token string");
        assert!(tok != UNK_TOKEN);
        let p = c["probability"].as_f64().expect("probability number");
        assert!((0.0..=1.0).contains(&p) && p <= last);
        last = p;
    }
}

fn strip_latency(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("latency_ms");
    v
}

fn server_contract(bundle_dir: &Path) -> String {
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let state = AppState::new();
        let router = app(state.clone(), &ServerConfig::default()).unwrap();
        let (status, _) = call(&router, "GET", "/api/health", Value::Null).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
        state.install(ModelBundle::load_dir(bundle_dir).unwrap());
        let bundle = state.bundle().unwrap();

        let (status, health) = call(&router, "GET", "/api/health", Value::Null).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(health, json!({"status": "ok", "bundle_orders": [1, 2, 3, 4, 5], "vocab_size": bundle.vocabulary().size()}));
        let vocab_file: Value = serde_json::from_str(&fs::read_to_string(BundleLayout::new(bundle_dir).vocabulary()).unwrap()).unwrap();
        assert_eq!(health["vocab_size"].as_u64().unwrap() as usize, vocab_file["tokens"].as_array().unwrap().len());

        let (status, s) = call(&router, "POST", "/api/suggest", json!({"context": "আমি ভাত", "k": 3})).await;
        assert_eq!(status, StatusCode::OK);
        check_suggest_schema(&s);
        assert_eq!(s["candidates"].as_array().unwrap().len(), 3);
        assert_eq!(s["candidates"][0]["token"], "খাই");
        let (_, s) = call(&router, "POST", "/api/suggest", json!({"context": "আমি", "k": 999})).await;
        assert_eq!(s["candidates"].as_array().unwrap().len(), 20);
        for (body, code) in [
            (json!({"context": "", "k": 1}), StatusCode::BAD_REQUEST),
            (json!({"context": "আমি", "engine": "oracle"}), StatusCode::UNPROCESSABLE_ENTITY),
        ] {
            let (status, err) = call(&router, "POST", "/api/suggest", body).await;
            assert_eq!(status, code);
            assert!(err["error"].is_string());
        }

        let terminators: Vec<String> = bundle.terminators();
        for engine in ["neural", "statistical"] {
            let (status, c) = call(&router, "POST", "/api/complete", json!({"prefix": "আমি ভাত", "engine": engine})).await;
            assert_eq!(status, StatusCode::OK);
            assert_eq!(c.as_object().unwrap().len(), 3);
            let tokens: Vec<&str> = c["tokens"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
            let by = c["terminated_by"].as_str().unwrap();
            assert!(by == "length-cap" || terminators.iter().any(|t| t == by));
            assert_eq!(c["steps"].as_u64().unwrap() as usize, tokens.len() - 2);
            assert_eq!(tokens, ["আমি", "ভাত", "খাই", "।"], "{engine}");
        }
        let (_, c) = call(&router, "POST", "/api/complete", json!({"prefix": "আমি", "max_len": 1})).await;
        assert_eq!(c["steps"], 1);

        // concurrency against sequential answers
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let requests: Vec<Value> = (0..100)
            .map(|i| {
                let len = rng.gen_range(1..=7);
                let ctx = random_tokens(&mut rng, bundle, len).join(" ");
                json!({"context": ctx, "k": 5, "engine": if i % 3 == 0 { "statistical" } else { "neural" }})
            })
            .collect();
        let mut sequential = Vec::new();
        let mut latencies = Vec::new();
        for r in &requests {
            let start = Instant::now();
            let (status, body) = call(&router, "POST", "/api/suggest", r.clone()).await;
            latencies.push(start.elapsed());
            assert_eq!(status, StatusCode::OK, "{r}");
            check_suggest_schema(&body);
            sequential.push(strip_latency(body));
        }
        let handles: Vec<_> = requests
            .iter()
            .map(|r| {
                let router = router.clone();
                let r = r.clone();
                tokio::spawn(async move { call(&router, "POST", "/api/suggest", r).await })
            })
            .collect();
        for (h, expected) in handles.into_iter().zip(&sequential) {
            let (status, body) = h.await.unwrap();
            assert_eq!(status, StatusCode::OK);
            assert_eq!(&strip_latency(body), expected);
        }
        latencies.sort();
        let p50 = latencies[latencies.len() / 2];
        assert!(p50 < P50_BUDGET, "p50 {p50:?}");
        format!("schemas valid, 100 concurrent = sequential, p50 {:.2} ms", p50.as_secs_f64() * 1e3)
    })
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temp dir");
    let bundle_dir = scratch.path().join("toy");
    let mut results: Vec<(u8, &str, Result<String, String>)> = Vec::new();
    let mut check = |id: u8, name: &'static str, f: &mut dyn FnMut() -> String| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).map_err(|e| {
            e.downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())
        });
        let tag = if outcome.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &outcome {
            Ok(d) | Err(d) => d.clone(),
        };
        println!("[{tag}] {id}. {name}: {detail}");
        results.push((id, name, outcome));
    };

    check(1, "toy-corpus training", &mut || toy_corpus_training(&bundle_dir));
    check(2, "gradient oracle", &mut gradient_oracle);
    let bundle = ModelBundle::load_dir(&bundle_dir).ok();
    let need = || bundle.as_ref().expect("toy bundle from criterion 1");
    check(3, "katz normalization", &mut || katz_normalization(need()));
    check(4, "statistical argmax oracle", &mut statistical_argmax_oracle);
    check(5, "dataset builder oracle", &mut dataset_oracle);
    check(6, "routing law", &mut || routing_law(need()));
    check(7, "completion termination", &mut || completion_termination(need()));
    check(8, "determinism", &mut || determinism(scratch.path()));
    check(9, "server contract", &mut || server_contract(&bundle_dir));

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
