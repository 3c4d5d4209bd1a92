use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{self, Output};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "nextword", version, about = "Bangla next-word prediction toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Corpus file; repeat for several. Replaces any corpus from the config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub corpus: Vec<PathBuf>,
    /// Work on a single context length instead of every configured order.
    #[arg(long, global = true, value_name = "N")]
    pub order: Option<usize>,
    /// neural or statistical.
    #[arg(long, global = true)]
    pub engine: Option<String>,
    /// Number of suggestions.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bundle directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Most tokens a completion may add.
    #[arg(long = "max-len", global = true, value_name = "N")]
    pub max_len: Option<usize>,
    #[arg(long, global = true)]
    pub port: Option<u16>,
    /// Browser origin allowed by the server (default: any).
    #[arg(long = "cors-origin", global = true, value_name = "URL")]
    pub cors_origin: Option<String>,
    /// Any config key, e.g. --set epochs=300.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean the corpus and write the vocabulary and per-order datasets.
    Build,
    /// Train one network per order and the back-off model.
    Train,
    /// Print ranked next-word suggestions for a context.
    Predict { context: String },
    /// Extend a prefix greedily until a sentence terminator.
    Complete { prefix: String },
    /// Score both engines on the built datasets.
    Eval,
    /// Serve the bundle over HTTP.
    Serve,
}

impl Cli {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        if !self.corpus.is_empty() {
            cfg.corpus = self.corpus.clone();
        }
        if let Some(n) = self.order {
            cfg.orders = vec![n];
        }
        if let Some(e) = &self.engine {
            cfg.set("engine", e)?;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(m) = self.max_len {
            cfg.max_len = m;
        }
        if let Some(p) = self.port {
            cfg.port = p;
        }
        if let Some(o) = &self.cors_origin {
            cfg.cors_origin = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> CliResult<Output> {
    let cfg = cli.resolve()?;
    match &cli.command {
        Command::Build => commands::build(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Predict { context } => commands::predict(&cfg, context),
        Command::Complete { prefix } => commands::complete(&cfg, prefix),
        Command::Eval => commands::eval(&cfg),
        Command::Serve => commands::serve(&cfg).map(|()| Output::default()),
    }
}

/// Parses `args`, runs the command and reports on the given streams.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            for w in &out.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            let _ = stdout.write_all(out.stdout.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
