use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use topicforge::config::ConfigError;
use topicforge::eval::{evaluate, read_labels, read_scores};
use topicforge::io::{load_corpus, write_ndjson, ColumnMap, CorpusFormat};
use topicforge::report::{render_comparison, render_results, write_outputs};
use topicforge::{run_parallel, AnyTrainerFactory, ExperimentConfig, ReportFormat, RunManifest};
use topicforge_core::evaluation::compare;
use topicforge_core::runner::{plan_topic, FailMode, RunError};
use topicforge_core::schedule::{split_target, SplitOptions, DEFAULT_BUDGET, DEFAULT_MIN_TEST};
use topicforge_core::similarity::order_sources;
use topicforge_core::synthetic::{generate_synthetic, SyntheticSpec};
use topicforge_core::{ApDenominator, Claim, Corpus, NormalizationConfig, Scheme};

#[derive(Parser)]
#[command(
    name = "topicforge",
    version,
    about = "Gradual topic learning curricula and cross-topic ranking evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a leave-one-topic-out sweep described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Stop at the first topic failure.
        #[arg(long)]
        strict: bool,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the stage plan for one target topic as JSON.
    Plan {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        target: String,
        #[arg(long)]
        scheme: Scheme,
        #[arg(long)]
        stages: usize,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the plan here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print source topics ordered by ascending similarity to the target (CSV).
    Similarity {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        target: String,
        #[command(flatten)]
        split: SplitArgs,
        /// Seed of the few-shot sample that represents the target.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Represent the target by all of its claims instead of the few-shot sample.
        #[arg(long)]
        whole_target: bool,
    },
    /// Compute AveP per topic and MAP for a score file.
    Eval {
        /// CSV with `id,score` columns.
        #[arg(long)]
        scores: PathBuf,
        /// Corpus file, or CSV with `id,label` and optional `topic` columns.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "relevant")]
        ap_denominator: ApDenominator,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
    /// Per-topic improvement of a candidate report over a baseline report.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
    /// Generate a synthetic corpus as NDJSON.
    Synth {
        /// JSON synthetic corpus spec.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the built-in trainer over the external trainer protocol on stdin/stdout.
    ServeBuiltin,
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file (NDJSON, or CSV/TSV with a header).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_parser = parse_format)]
    corpus_format: Option<CorpusFormat>,
    #[arg(long, default_value = "id")]
    col_id: String,
    #[arg(long, default_value = "topic")]
    col_topic: String,
    #[arg(long, default_value = "text")]
    col_text: String,
    #[arg(long, default_value = "label")]
    col_label: String,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus, CliError> {
        let columns = ColumnMap {
            id: self.col_id.clone(),
            topic: self.col_topic.clone(),
            text: self.col_text.clone(),
            label: self.col_label.clone(),
        };
        load_corpus(
            &self.corpus,
            self.corpus_format,
            &columns,
            &NormalizationConfig::default(),
        )
        .map_err(|e| CliError::Other(e.to_string()))
    }
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_TEST)]
    min_test: usize,
}

impl SplitArgs {
    fn options(&self) -> SplitOptions {
        SplitOptions {
            budget: self.budget,
            min_test: self.min_test,
        }
    }
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    match s {
        "ndjson" | "jsonl" => Ok(CorpusFormat::Ndjson),
        "csv" => Ok(CorpusFormat::Csv),
        "tsv" => Ok(CorpusFormat::Tsv),
        other => Err(format!("unknown corpus format `{other}`")),
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Strict(RunError),
    #[error("{0}")]
    Trainer(RunError),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Strict(_) => 3,
            CliError::Trainer(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            strict,
            jobs,
            out,
        } => run(&config, strict, jobs, out),
        Command::Plan {
            corpus,
            target,
            scheme,
            stages,
            split,
            seed,
            out,
        } => {
            let corpus = corpus.load()?;
            let plan = plan_topic(&corpus, &target, scheme, stages, split.options(), seed)
                .map_err(other)?;
            let mut text = serde_json::to_string_pretty(&plan).map_err(other)?;
            text.push('\n');
            emit(out.as_deref(), text.as_bytes())
        }
        Command::Similarity {
            corpus,
            target,
            split,
            seed,
            whole_target,
        } => {
            let corpus = corpus.load()?;
            let reference: Vec<&Claim> = if whole_target {
                corpus.topic_claims(&target)
            } else {
                let sample =
                    split_target(&corpus, &target, split.options(), seed).map_err(other)?;
                sample
                    .train_ids
                    .iter()
                    .filter_map(|id| corpus.get(id))
                    .collect()
            };
            let ordering = order_sources(&corpus, &target, &reference).map_err(other)?;
            let mut text = String::from("topic_id,similarity\n");
            for s in &ordering.ordered_sources {
                text.push_str(&format!("{},{:.6}\n", s.topic_id, s.similarity));
            }
            emit(None, text.as_bytes())
        }
        Command::Eval {
            scores,
            labels,
            ap_denominator,
            format,
        } => {
            let file =
                fs::File::open(&scores).map_err(|e| other(format!("{}: {e}", scores.display())))?;
            let scores = read_scores(file).map_err(other)?;
            let labels = read_labels(&labels).map_err(other)?;
            let (results, map) = evaluate(&labels, &scores, ap_denominator).map_err(other)?;
            emit(None, render_results(&results, map, format).as_bytes())
        }
        Command::Compare {
            baseline,
            candidate,
            format,
        } => {
            let read = |p: &Path| {
                let text =
                    fs::read_to_string(p).map_err(|e| other(format!("{}: {e}", p.display())))?;
                topicforge::report::parse_results(&text)
                    .map_err(|e| other(format!("{}: {e}", p.display())))
            };
            let cmp = compare(&read(&baseline)?, &read(&candidate)?).map_err(other)?;
            emit(None, render_comparison(&cmp, format).as_bytes())
        }
        Command::Synth { spec, seed, out } => {
            let text =
                fs::read_to_string(&spec).map_err(|e| other(format!("{}: {e}", spec.display())))?;
            let spec: SyntheticSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))?;
            let corpus = generate_synthetic(&spec, seed)
                .map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))?;
            let mut buf = Vec::new();
            write_ndjson(&mut buf, corpus.claims()).map_err(other)?;
            emit(out.as_deref(), &buf)
        }
        Command::ServeBuiltin => {
            let stdin = io::stdin().lock();
            let stdout = io::stdout().lock();
            topicforge::serve::serve(stdin, stdout).map_err(other)
        }
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| other(format!("{}: {e}", p.display()))),
        None => {
            let mut out = BufWriter::new(io::stdout().lock());
            out.write_all(bytes)
                .and_then(|()| out.flush())
                .map_err(other)
        }
    }
}

fn run(
    config_path: &Path,
    strict: bool,
    jobs: usize,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let sweep = cfg.sweep_config()?;
    let corpus = cfg.load_corpus().map_err(other)?;
    let out_dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| config_path.parent().unwrap_or(Path::new(".")).join("out"));
    log::info!(
        "{} claims in {} topics; {} cells x {} seeds",
        corpus.len(),
        corpus.num_topics(),
        sweep.cells().len(),
        sweep.seeds.len()
    );
    let mode = if strict {
        FailMode::Strict
    } else {
        FailMode::Soft
    };
    let factory = AnyTrainerFactory {
        config: cfg.trainer.clone(),
    };
    let result = run_parallel(&sweep, &corpus, &factory, mode, jobs).map_err(|e| {
        if e.is_trainer_failure() {
            CliError::Trainer(e)
        } else if matches!(e.kind, topicforge_core::runner::RunErrorKind::Config(_)) {
            CliError::Config(ConfigError::Invalid(e.kind.to_string()))
        } else if strict {
            CliError::Strict(e)
        } else {
            other(e)
        }
    })?;
    for cell in &result.cells {
        for f in &cell.failures {
            log::warn!(
                "{} s{} seed {} topic {}: {}",
                cell.scheme,
                cell.stages,
                f.seed,
                f.topic_id,
                f.error
            );
        }
    }
    let manifest = RunManifest::new(&cfg, sweep.seeds.clone(), &corpus, result);
    let written = write_outputs(&out_dir, &manifest)
        .map_err(|e| other(format!("{}: {e}", out_dir.display())))?;
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    emit(
        None,
        topicforge::report::sweep_csv(&manifest.result).as_bytes(),
    )
}
