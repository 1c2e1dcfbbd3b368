//! `tutorkit` subcommands. Every command prints a JSON summary on stdout.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tutorkit_core::corpus::{act_distribution, corpus_stats, load_corpus, render_archive, split_corpus};
use tutorkit_core::engine::{
    evaluate, ChatProvider, Engine, ExampleIndex, ExemplarPolicy, GoldReplayProvider, HttpProvider, Mode,
    ProviderConfig, RecordingProvider, RunOptions, DEFAULT_CONCURRENCY,
};
use tutorkit_core::instruct::{load_expert_file, InstructionSets, MissingContextOptions, Task};
use tutorkit_core::metrics::{
    build_report, format_table, EmbeddingProvider, EvalReport, FileEmbedder, HashEmbedder, HttpEmbedder,
    PredictionRecord, DEFAULT_TARGET,
};
use tutorkit_core::scenario::{build_scenarios, ScenarioOptions, TestScenario};
use tutorkit_core::{jsonl, Exec, Session, Taxonomy};

use crate::server::{self, AppState};
use crate::store::EventStore;

#[derive(Debug, Parser)]
#[command(
    name = "tutorkit",
    version,
    about = "Act-annotated tutoring corpus pipeline and live tutor service"
)]
pub struct Cli {
    /// Act taxonomy TOML (defaults to the bundled one).
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
    /// Disable data-parallel batch processing.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a transcript file or directory.
    Parse {
        input: PathBuf,
        /// Write the normalized archive here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus statistics and tutor act distribution.
    Stats { input: PathBuf },
    /// Hold out test sessions.
    Split {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compile the instruction-tuning task files.
    BuildInstructions {
        input: PathBuf,
        /// Expert-authored rows for the minority-act task.
        #[arg(long)]
        expert: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Fraction of missing-context cuts to keep.
        #[arg(long, default_value_t = 1.0)]
        sample_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample evaluation scenarios from held-out sessions.
    BuildScenarios {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TARGET)]
        per_act: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only the last N turns of each context.
        #[arg(long)]
        max_turns: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a tutor over a scenario file.
    Eval(EvalArgs),
    /// Score one or more evaluation runs.
    Report(ReportArgs),
    /// Start the live session service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// OpenAI-compatible chat completions endpoint.
    Http,
    /// Answers with the scenarios' gold acts and utterances.
    Gold,
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, default_value = "http")]
    pub provider: ProviderKind,
    #[arg(long, env = "PROVIDER_MODEL", default_value = "gpt-4")]
    pub model: String,
    /// Overrides PROVIDER_BASE_URL.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 512)]
    pub max_tokens: u32,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long, default_value = "one_shot")]
    pub mode: Mode,
    /// Training corpus for one-shot exemplars.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    /// Key exemplars on the scenario's gold act instead of the selected one.
    #[arg(long)]
    pub gold_exemplar: bool,
    /// Rotate exemplars by a seeded hash instead of taking the first.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
    pub concurrency: usize,
    /// Receives predictions.jsonl and prompts.jsonl.
    #[arg(long)]
    pub run_dir: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    /// Deterministic offline hash embeddings.
    Hash,
    /// Precomputed vectors (see --embeddings).
    File,
    /// OpenAI-compatible embeddings endpoint.
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `NAME=PATH`, where PATH is a run directory or a predictions file.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    #[arg(long, value_enum, default_value = "hash")]
    pub embedder: EmbedderKind,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value = "text-embedding-3-small")]
    pub embed_model: String,
    /// Expected predictions per teaching act.
    #[arg(long, default_value_t = DEFAULT_TARGET)]
    pub target: usize,
    #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
    pub concurrency: usize,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "BIND_ADDR", default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Directory of per-session event logs.
    #[arg(long, default_value = "sessions")]
    pub data_dir: PathBuf,
    /// Training corpus for one-shot exemplars.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    #[arg(long, env = "PROVIDER_MODEL", default_value = "gpt-4")]
    pub model: String,
    #[arg(long)]
    pub base_url: Option<String>,
}

fn taxonomy(cli: &Cli) -> Result<Arc<Taxonomy>> {
    Ok(Arc::new(match &cli.taxonomy {
        Some(p) => Taxonomy::load(p).with_context(|| format!("loading taxonomy {}", p.display()))?,
        None => Taxonomy::bundled().clone(),
    }))
}

fn corpus(path: &Path, tax: &Taxonomy) -> Result<Vec<Session>> {
    load_corpus(path, tax).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: &mut dyn Write, value: serde_json::Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn provider_config(base_url: Option<&String>, model: &str) -> ProviderConfig {
    let mut c = ProviderConfig::from_env(model);
    if let Some(b) = base_url {
        c.base_url = b.clone();
    }
    c
}

fn index(train: Option<&PathBuf>, tax: &Taxonomy, max_turns: Option<usize>) -> Result<Arc<ExampleIndex>> {
    Ok(Arc::new(match train {
        Some(p) => ExampleIndex::build(&corpus(p, tax)?, max_turns),
        None => ExampleIndex::default(),
    }))
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let tax = taxonomy(&cli)?;
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match cli.command {
        Command::Parse { input, out: dest } => {
            let c = corpus(&input, &tax)?;
            if let Some(dest) = &dest {
                write_text(dest, &render_archive(&c))?;
            }
            emit(
                out,
                json!({
                    "sessions": c.len(),
                    "turns": c.iter().map(|s| s.turns.len()).sum::<usize>(),
                    "act_utterances": c.iter().map(Session::utterance_count).sum::<usize>(),
                    "ids": c.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(),
                    "out": dest,
                }),
            )
        }
        Command::Stats { input } => {
            let c = corpus(&input, &tax)?;
            emit(
                out,
                json!({
                    "stats": corpus_stats(&c)?,
                    "tutor_act_distribution": act_distribution(&c)?,
                }),
            )
        }
        Command::Split {
            input,
            n_test,
            seed,
            out_dir,
        } => {
            let c = corpus(&input, &tax)?;
            let (train, test) = split_corpus(&c, n_test, seed)?;
            write_text(&out_dir.join("train.txt"), &render_archive(&train))?;
            write_text(&out_dir.join("test.txt"), &render_archive(&test))?;
            emit(
                out,
                json!({
                    "seed": seed,
                    "train": train.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(),
                    "test": test.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(),
                }),
            )
        }
        Command::BuildInstructions {
            input,
            expert,
            out_dir,
            sample_rate,
            seed,
        } => {
            let c = corpus(&input, &tax)?;
            let rows = match &expert {
                Some(p) => load_expert_file(p)?,
                None => Vec::new(),
            };
            let sets = InstructionSets::build(&c, &rows, &tax, MissingContextOptions { sample_rate, seed }, exec)?;
            sets.write(&out_dir)?;
            let counts: serde_json::Map<String, serde_json::Value> = Task::ALL
                .iter()
                .map(|t| (t.file_name().to_string(), json!(sets.get(*t).len())))
                .collect();
            emit(
                out,
                json!({ "seed": seed, "sample_rate": sample_rate, "files": counts }),
            )
        }
        Command::BuildScenarios {
            input,
            per_act,
            seed,
            max_turns,
            out: dest,
        } => {
            let c = corpus(&input, &tax)?;
            let sc = build_scenarios(
                &c,
                &tax,
                ScenarioOptions {
                    per_act,
                    seed,
                    max_turns,
                },
                exec,
            )?;
            write_text(&dest, &jsonl::to_string(&sc))?;
            emit(
                out,
                json!({ "seed": seed, "per_act": per_act, "scenarios": sc.len(), "out": dest }),
            )
        }
        Command::Eval(args) => eval(args, tax, exec, out),
        Command::Report(args) => report(args, &tax, exec, out),
        Command::Serve(args) => {
            let index = index(args.train.as_ref(), &tax, args.max_turns)?;
            let provider: Arc<dyn ChatProvider> =
                Arc::new(HttpProvider::new(provider_config(args.base_url.as_ref(), &args.model))?);
            let state = Arc::new(AppState::open(EventStore::open(&args.data_dir)?, provider, tax, index)?);
            let rt = tokio::runtime::Runtime::new()?;
            // the blocking http client inside the provider must not drop on the runtime
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&args.bind)
                    .await
                    .with_context(|| format!("binding {}", args.bind))?;
                let addr = listener.local_addr()?;
                emit(out, json!({ "listening": addr.to_string(), "data_dir": args.data_dir }))?;
                out.flush()?;
                tracing::info!(%addr, "serving");
                server::serve(listener, state.clone()).await?;
                Ok(())
            })
        }
    }
}

fn eval(args: EvalArgs, tax: Arc<Taxonomy>, exec: Exec, out: &mut dyn Write) -> Result<()> {
    let scenarios: Vec<TestScenario> = jsonl::read(&args.scenarios)?;
    if scenarios.is_empty() {
        bail!("{} holds no scenarios", args.scenarios.display());
    }
    std::fs::create_dir_all(&args.run_dir)?;
    let inner: Arc<dyn ChatProvider> = match args.provider.provider {
        ProviderKind::Http => {
            let mut c = provider_config(args.provider.base_url.as_ref(), &args.provider.model);
            c.temperature = args.provider.temperature;
            c.max_tokens = args.provider.max_tokens;
            Arc::new(HttpProvider::new(c)?)
        }
        ProviderKind::Gold => Arc::new(GoldReplayProvider::new(&scenarios)),
    };
    let prompts = args.run_dir.join("prompts.jsonl");
    let recorder = RecordingProvider::new(inner, &prompts)?;
    let policy = if args.gold_exemplar {
        ExemplarPolicy::GoldAct
    } else {
        ExemplarPolicy::PredictedAct
    };
    let engine = Engine::new(Arc::new(recorder), tax.clone(), args.mode)
        .with_index(index(args.train.as_ref(), &tax, args.max_turns)?)
        .with_policy(policy)
        .with_rotation(args.seed);
    let records = evaluate(
        &engine,
        &scenarios,
        RunOptions {
            concurrency: args.concurrency,
            exec,
        },
    );
    let predictions = args.run_dir.join("predictions.jsonl");
    jsonl::write(&predictions, &records)?;
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    emit(
        out,
        json!({
            "mode": args.mode,
            "model": args.provider.model,
            "scenarios": records.len(),
            "failed": failed,
            "predictions": predictions,
            "prompts": prompts,
        }),
    )
}

fn embedder(args: &ReportArgs) -> Result<Box<dyn EmbeddingProvider>> {
    Ok(match args.embedder {
        EmbedderKind::Hash => Box::new(HashEmbedder::default()),
        EmbedderKind::File => {
            let Some(p) = &args.embeddings else {
                bail!("--embedder file needs --embeddings PATH");
            };
            Box::new(FileEmbedder::load(p)?)
        }
        EmbedderKind::Http => {
            let c = ProviderConfig::from_env(&args.embed_model);
            Box::new(HttpEmbedder::new(c.base_url, c.api_key, args.embed_model.clone()))
        }
    })
}

fn report(args: ReportArgs, tax: &Taxonomy, exec: Exec, out: &mut dyn Write) -> Result<()> {
    let provider = embedder(&args)?;
    let teaching = tax.teaching_acts();
    let mut rows: Vec<(String, EvalReport)> = Vec::new();
    for entry in &args.runs {
        let Some((name, path)) = entry.split_once('=') else {
            bail!("--run expects NAME=PATH, got `{entry}`");
        };
        let path = PathBuf::from(path);
        let file = if path.is_dir() {
            path.join("predictions.jsonl")
        } else {
            path
        };
        let records: Vec<PredictionRecord> = jsonl::read(&file)?;
        let rep = build_report(
            &records,
            provider.as_ref(),
            &teaching,
            args.target,
            exec,
            args.concurrency,
        )
        .with_context(|| format!("scoring {name}"))?;
        rows.push((name.to_string(), rep));
    }
    match args.format {
        ReportFormat::Table => {
            write!(out, "{}", format_table(&rows))?;
            Ok(())
        }
        ReportFormat::Json => emit(
            out,
            json!(rows
                .iter()
                .map(|(n, r)| json!({ "run": n, "report": r }))
                .collect::<Vec<_>>()),
        ),
    }
}
