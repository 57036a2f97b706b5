//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tgg_core::bench::{run_bench, workload};
use tgg_core::corpus::{
    evaluate, generate, random_baseline, train_hmms, train_weights, CorpusConfig, CorpusItem, Layout, TrainingConfig,
};
use tgg_core::engine::{write_trace, EngineConfig, ScenarioSession};
use tgg_core::tracker::HmmSet;

use crate::{load_models, load_scenario, read, repl, service, write, CliError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tgg", version, about = "Ground facts and commands against a simulated tabletop")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scripted scenario, printing one grounding result per line.
    Run(RunArgs),
    /// Talk to a scenario interactively.
    Repl(ReplArgs),
    /// Train HMMs or graph weights.
    Train {
        #[command(subcommand)]
        what: TrainWhat,
    },
    /// Write a deterministic evaluation corpus.
    GenCorpus(GenArgs),
    /// Score the engine on a corpus.
    Eval(EvalArgs),
    /// Compare state-keeping strategies on a growing interaction stream.
    Bench(BenchArgs),
    /// Serve the JSON session API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Graph weights JSON; defaults to the shipped table.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// HMM set JSON; defaults to the shipped table.
    #[arg(long)]
    pub hmms: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file or showcase name.
    #[arg(long)]
    pub scenario: String,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Overrides the scenario's detector seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Writes the trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplArgs {
    #[arg(long)]
    pub scenario: String,
    #[command(flatten)]
    pub models: ModelArgs,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Scenarios to generate.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = LayoutArg::Evaluation)]
    pub layout: LayoutArg,
}

impl CorpusArgs {
    fn config(&self, base: CorpusConfig) -> CorpusConfig {
        CorpusConfig {
            scenarios: self.n.unwrap_or(base.scenarios),
            seed: self.seed.unwrap_or(base.seed),
            layout: self.layout.into(),
            ..base
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayoutArg {
    Evaluation,
    Baseline,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Evaluation => Layout::Evaluation,
            LayoutArg::Baseline => Layout::Baseline,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum TrainWhat {
    /// Hard-EM training of the event and region HMMs.
    Hmm(TrainHmmArgs),
    /// Gradient training of the graph weights over a fixed HMM set.
    Dcg(TrainDcgArgs),
}

#[derive(Debug, Args)]
pub struct TrainHmmArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Directory for `hmms.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainDcgArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// HMM set to ground training episodes with; defaults to the shipped one.
    #[arg(long)]
    pub hmms: Option<PathBuf>,
    /// Synthetic episodes added to the corpus ones.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Directory for `weights.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Corpus directory written by `gen-corpus`; generated in memory otherwise.
    #[arg(long)]
    pub corpus_dir: Option<PathBuf>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Also score a uniformly random guesser over this many trials.
    #[arg(long, default_value_t = 0)]
    pub baseline_trials: usize,
    /// Writes the full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Utterances in the stream.
    #[arg(long, default_value_t = 16)]
    pub len: usize,
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    /// Passes per strategy; the fastest time per step is kept.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Use facts that name a single object.
    #[arg(long)]
    pub determined: bool,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
    #[command(flatten)]
    pub models: ModelArgs,
}

fn models(a: &ModelArgs) -> Result<Arc<tgg_core::engine::Models>, CliError> {
    Ok(Arc::new(load_models(a.weights.as_deref(), a.hmms.as_deref())?))
}

/// Runs a scenario; every grounding result, or its error, is one JSON line.
/// Fails when any utterance did not ground.
pub fn run(a: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut scenario = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let mut ss = ScenarioSession::new(scenario, models(&a.models)?, EngineConfig::default())?;
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    ss.run_each(|tick, text, r| match r {
        Ok(r) => lines.push(r.to_json()),
        Err(e) => {
            failed.push(format!("tick {tick}: `{text}`: {e}"));
            lines.push(json!({ "tick": tick, "utterance": text, "error": e.to_string() }).to_string());
        }
    })?;
    let stdout = |e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    };
    for l in lines {
        writeln!(out, "{l}").map_err(stdout)?;
    }
    if let Some(p) = &a.trace {
        let mut buf = Vec::new();
        write_trace(&mut buf, ss.session().trace()).map_err(stdout)?;
        write(p, buf)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(failed.join("\n")))
    }
}

fn training(c: &CorpusArgs) -> TrainingConfig {
    let base = TrainingConfig::default();
    TrainingConfig {
        corpus: c.config(base.corpus),
        ..base
    }
}

/// Writes one file per item plus `manifest.json` listing them.
pub fn gen_corpus(a: &GenArgs) -> Result<Vec<CorpusItem>, CliError> {
    let cfg = a.corpus.config(CorpusConfig::default());
    let items = generate(&cfg);
    for item in &items {
        write(&a.out.join(format!("{}.json", item.id)), serde_json::to_string_pretty(item).expect("item serializes"))?;
    }
    let ids: Vec<&str> = items.iter().map(|i| i.id.as_str()).collect();
    let manifest = json!({ "config": cfg, "items": ids });
    write(&a.out.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(items)
}

pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusItem>, CliError> {
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.join("manifest.json"))?)
        .map_err(|e| CliError::Invalid(format!("manifest: {e}")))?;
    let ids = manifest
        .get("items")
        .and_then(|v| v.as_array())
        .ok_or_else(|| CliError::Invalid("manifest has no item list".into()))?;
    ids.iter()
        .map(|id| {
            let id = id.as_str().ok_or_else(|| CliError::Invalid("item ids must be strings".into()))?;
            serde_json::from_str(&read(&dir.join(format!("{id}.json")))?)
                .map_err(|e| CliError::Invalid(format!("{id}: {e}")))
        })
        .collect()
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Run(a) => run(&a, out),
        Command::Repl(a) => {
            let mut ss = ScenarioSession::new(load_scenario(&a.scenario)?, models(&a.models)?, EngineConfig::default())?;
            repl::repl(&mut ss, std::io::stdin().lock(), out).map_err(|e| CliError::Io {
                path: "<stdin>".into(),
                source: e,
            })
        }
        Command::Train { what: TrainWhat::Hmm(a) } => {
            let mut cfg = training(&a.corpus);
            cfg.em_iterations = a.iterations.unwrap_or(cfg.em_iterations);
            let (hmms, report) = train_hmms(&cfg)?;
            write(&a.out.join("hmms.json"), hmms.to_json())?;
            emit(out, &serde_json::to_string(&report).expect("report serializes"))
        }
        Command::Train { what: TrainWhat::Dcg(a) } => {
            let mut cfg = training(&a.corpus);
            cfg.synthetic = a.synthetic.unwrap_or(cfg.synthetic);
            let hmms = match &a.hmms {
                Some(p) => HmmSet::from_json(&read(p)?).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?,
                None => tgg_core::engine::Models::builtin().hmms,
            };
            let (models, report, examples) = train_weights(&cfg, hmms)?;
            write(&a.out.join("weights.json"), models.weights.to_json())?;
            emit(out, &json!({ "examples": examples, "report": report }).to_string())
        }
        Command::GenCorpus(a) => {
            let items = gen_corpus(&a)?;
            emit(out, &format!("wrote {} scenarios to {}", items.len(), a.out.display()))
        }
        Command::Eval(a) => {
            let items = match &a.corpus_dir {
                Some(d) => load_corpus(d)?,
                None => generate(&a.corpus.config(CorpusConfig::default())),
            };
            if items.is_empty() {
                return Err(CliError::Invalid("empty corpus".into()));
            }
            let report = evaluate(&items, models(&a.models)?, EngineConfig::default());
            emit(
                out,
                &format!(
                    "accuracy {:.4} ({}/{}); single {:.4} ({}/{}); multi {:.4} ({}/{})",
                    report.all.accuracy(),
                    report.all.correct,
                    report.all.total,
                    report.single.accuracy(),
                    report.single.correct,
                    report.single.total,
                    report.multi.accuracy(),
                    report.multi.correct,
                    report.multi.total
                ),
            )?;
            let baseline = (a.baseline_trials > 0).then(|| random_baseline(&items, a.baseline_trials, 0));
            if let Some(b) = &baseline {
                emit(out, &format!("random baseline {:.4} ± {:.4} over {} trials", b.accuracy, b.std_error, b.trials))?;
            }
            if let Some(p) = &a.json {
                let body = json!({ "report": report, "baseline": baseline });
                write(p, serde_json::to_string_pretty(&body).expect("report serializes"))?;
            }
            Ok(())
        }
        Command::Bench(a) => {
            let w = workload(a.len, a.seed, !a.determined);
            let report = run_bench(&w, &Arc::new(tgg_core::engine::Models::builtin()), EngineConfig::default(), a.repeats.max(1))?;
            if let Some(p) = &a.json {
                write(p, report.to_json())?;
            }
            emit(out, report.table().trim_end())
        }
        Command::Serve(a) => {
            let app = service::AppState::new(models(&a.models)?, EngineConfig::default());
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Invalid(e.to_string()))?;
            rt.block_on(service::serve(SocketAddr::new(a.host, a.port), app))
                .map_err(|e| CliError::Invalid(format!("serve: {e}")))
        }
    }
}

/// Parses `argv` and runs the command. Returns the process exit code.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}
