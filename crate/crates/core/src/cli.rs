//! The `akm` command line. Progress and diagnostics go to stderr through
//! `log`; stdout carries only `key=value` summaries (or the search hits and
//! report table), so it can be piped.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adr::{parse_adr, SourceConfig};
use crate::config::{Config, ProviderKind};
use crate::eval::{aggregate, build_study_bundle, load_keys, read_ratings};
use crate::extract::ExtractError;
use crate::llm::{Completer, Gateway};
use crate::model::{RunStatus, WorkflowRun};
use crate::orchestrator::{embed_adr, replay, run_pipeline, OrchestratorError, RUN_FILE};
use crate::retrieval::{embedder_from_config, VectorStore};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_WARNINGS: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "akm", version, about = "Generate and validate Architecture Decision Records from a code repository")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the agentic summarize/validate/generate/validate workflow
    Generate(GenerateArgs),
    /// Run the single-prompt baseline
    Baseline(RunArgs),
    /// Add ADR files to a vector store
    Index(IndexArgs),
    /// Query a vector store
    Search(SearchArgs),
    /// Build a blinded four-configuration study bundle for one repository
    Study(StudyArgs),
    /// Aggregate study ratings into per-configuration means
    Report(ReportArgs),
    /// Re-execute a recorded run from its event log and compare outputs
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    max_iterations: Option<u32>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    adr_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(short = 'k', default_value_t = 3)]
    k: usize,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Two model ids, comma separated
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    models: Vec<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long)]
    keys: PathBuf,
    /// Also write report.json and report.txt here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    run: PathBuf,
    /// Where to write the replayed run (default: `<run>/replay`)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and executes the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Generate(a) => cmd_run(&a.run, SourceConfig::Agentic, a.max_iterations),
        Command::Baseline(a) => cmd_run(&a, SourceConfig::Baseline, None),
        Command::Index(a) => cmd_index(&a),
        Command::Search(a) => cmd_search(&a),
        Command::Study(a) => cmd_study(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn usage(message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}\n\nFor more information, try '--help'.");
    EXIT_USAGE
}

fn failed(message: impl std::fmt::Display) -> i32 {
    log::error!("{message}");
    EXIT_FAILED
}

fn load_config(path: Option<&Path>) -> Result<Config, i32> {
    match path {
        Some(p) => Config::load(p).map_err(usage),
        None => Ok(Config::default()),
    }
}

pub fn exit_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::CompletedWithWarnings => EXIT_WARNINGS,
        RunStatus::Failed => EXIT_FAILED,
    }
}

fn print_run_summary(run: &WorkflowRun, out: &Path) {
    println!("status={}", run.status);
    println!("pipeline={}", run.config_snapshot.pipeline);
    println!("run={}", out.join(RUN_FILE).display());
    println!("adrs={}", run.final_adrs.len());
    println!("stages={}", run.stages.len());
    println!("warnings={}", run.warnings.len());
}

fn cmd_run(args: &RunArgs, pipeline: SourceConfig, max_iterations: Option<u32>) -> i32 {
    if !args.repo.is_dir() {
        return usage(format!("--repo {} is not a directory", args.repo.display()));
    }
    let mut config = match load_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    config.pipeline = pipeline;
    config.output_dir = args.out.clone();
    if let Some(n) = max_iterations {
        config.max_iterations = n;
    }
    if let Err(e) = config.validate() {
        return usage(e);
    }
    let gateway = match Gateway::from_config(&config) {
        Ok(g) => g,
        Err(e) => return failed(e),
    };
    match run_pipeline(&args.repo, &config, &gateway) {
        Ok(run) => {
            print_run_summary(&run, &config.output_dir);
            exit_code(run.status)
        }
        Err(OrchestratorError::Config(e)) => usage(e),
        Err(OrchestratorError::Extract(e @ ExtractError::NotADirectory(_))) => usage(e),
        Err(e) => failed(e),
    }
}

fn cmd_index(args: &IndexArgs) -> i32 {
    let config = match load_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mut files: Vec<PathBuf> = match fs::read_dir(&args.adr_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "md"))
            .collect(),
        Err(e) => return usage(format!("--adr-dir {}: {e}", args.adr_dir.display())),
    };
    files.sort();
    let embedder = match embedder_from_config(&config) {
        Ok(e) => e,
        Err(e) => return failed(e),
    };
    let mut store = match VectorStore::open_or_new(&args.store) {
        Ok(s) => s,
        Err(e) => return failed(e),
    };
    let (mut indexed, mut skipped) = (0, 0);
    for path in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let parsed =
            fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| parse_adr(&t).map_err(|e| e.to_string()));
        let adr = match parsed {
            Ok(a) => a,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped += 1;
                continue;
            }
        };
        match embed_adr(embedder.as_ref(), &adr, &name).and_then(|doc| store.add(doc)) {
            Ok(()) => indexed += 1,
            Err(e) => return failed(e),
        }
    }
    if let Err(e) = store.save(&args.store) {
        return failed(e);
    }
    println!("store={}", args.store.display());
    println!("indexed={indexed}");
    println!("skipped={skipped}");
    println!("size={}", store.len());
    if skipped > 0 {
        EXIT_WARNINGS
    } else {
        EXIT_OK
    }
}

fn cmd_search(args: &SearchArgs) -> i32 {
    if args.k == 0 {
        return usage("-k must be at least 1");
    }
    let config = match load_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if !args.store.is_file() {
        return usage(format!("--store {} does not exist", args.store.display()));
    }
    let result = VectorStore::load(&args.store).and_then(|store| {
        let embedder = embedder_from_config(&config)?;
        let hits = store.search(&embedder.embed(&args.query)?, args.k)?;
        Ok((store, hits))
    });
    let (store, hits) = match result {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    for hit in hits {
        let title = store
            .get(&hit.doc_id)
            .and_then(|d| d.metadata.get("title").cloned())
            .unwrap_or_else(|| hit.text.lines().next().unwrap_or_default().to_string());
        println!("{:.4}\t{}\t{}", hit.score, hit.doc_id, title);
    }
    EXIT_OK
}

/// The four study configurations: both pipelines for each model.
pub fn study_configs(base: &Config, models: &[String]) -> Vec<Config> {
    let mut configs = Vec::new();
    for model in models {
        for pipeline in [SourceConfig::Baseline, SourceConfig::Agentic] {
            let mut c = base.clone();
            c.pipeline = pipeline;
            c.llm.model_id = model.clone();
            if c.llm.provider == ProviderKind::Openai && model.to_ascii_lowercase().starts_with("gemini") {
                c.llm.provider = ProviderKind::Gemini;
            }
            configs.push(c);
        }
    }
    configs
}

fn cmd_study(args: &StudyArgs) -> i32 {
    if args.models.len() != 2 {
        return usage(format!("--models needs exactly two model ids, got {}", args.models.len()));
    }
    if !args.repo.is_dir() {
        return usage(format!("--repo {} is not a directory", args.repo.display()));
    }
    let base = match load_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let configs = study_configs(&base, &args.models);
    let connect = |c: &Config| Gateway::from_config(c).map(|g| Box::new(g) as Box<dyn Completer>);
    match build_study_bundle(&args.repo, &configs, args.seed, &args.out, &connect) {
        Ok(bundle) => {
            for f in &bundle.key.failures {
                log::error!("{}: {}", f.identity, f.message);
            }
            println!("repo_id={}", bundle.key.repo_id);
            println!("key={}", bundle.dir.join(crate::eval::KEY_FILE).display());
            println!("participant={}", bundle.dir.join(crate::eval::PARTICIPANT_DIR).display());
            println!("complete={}", bundle.key.complete);
            println!("redactions={}", bundle.key.redactions);
            if bundle.key.complete {
                EXIT_OK
            } else {
                EXIT_WARNINGS
            }
        }
        Err(e) => failed(e),
    }
}

fn cmd_report(args: &ReportArgs) -> i32 {
    let result = read_ratings(&args.ratings).and_then(|ratings| {
        let keys = load_keys(&args.keys)?;
        aggregate(&ratings, &keys)
    });
    let report = match result {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    if let Some(out) = &args.out {
        if let Err(e) = report.write(out) {
            return failed(e);
        }
        log::info!("wrote {}", out.display());
    }
    print!("{}", report.to_table());
    EXIT_OK
}

fn cmd_replay(args: &ReplayArgs) -> i32 {
    if !args.run.join(RUN_FILE).is_file() {
        return usage(format!("--run {} has no {RUN_FILE}", args.run.display()));
    }
    let out = args.out.clone().unwrap_or_else(|| args.run.join("replay"));
    match replay(&args.run, &out) {
        Ok(outcome) => {
            for f in &outcome.mismatched_files {
                log::error!("differs: {f}");
            }
            println!("identical={}", outcome.identical());
            println!("status={}", outcome.replayed.status);
            println!("out={}", out.display());
            println!("mismatched={}", outcome.mismatched_files.len());
            if outcome.identical() {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => failed(e),
    }
}
