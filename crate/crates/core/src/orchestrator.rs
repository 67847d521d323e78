//! Runs the agentic workflow and the single-prompt baseline, persists their
//! artifacts and audit trail, and replays recorded runs.
//!
//! Output layout under `output_dir`:
//!
//! - `adr/NNNN-slug.md`: one file per final record
//! - `events.jsonl`: one [`StageRecord`] per completed model exchange, appended as it happens
//! - `run.json`: the full [`WorkflowRun`], written when the run ends

use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use thiserror::Error;

use crate::adr::{adr_filename, render_adr, Adr, AdrStatus, SourceConfig};
use crate::agents::{adr_embedding_text, AdrSetDraft, AgentError, AgentSuite, Retrieval, Turn};
use crate::config::{Config, ConfigError};
use crate::extract::{extract_context, ExtractError, PackedContext};
use crate::llm::{estimate_tokens, ChatRequest, ChatResponse, Completer, LlmError};
use crate::model::{
    exchange_id, RepoSummary, RunFailure, RunStatus, StageName, StageRecord, ValidationVerdict, WorkflowRun,
};
use crate::retrieval::{embedder_from_config, EmbeddedDoc, Embedder, RetrievalError, VectorStore};

pub const ADR_DIR: &str = "adr";
pub const RUN_FILE: &str = "run.json";
pub const EVENTS_FILE: &str = "events.jsonl";

pub const WARN_SUMMARY_UNVALIDATED: &str = "summary unvalidated";
pub const WARN_ADRS_UNVALIDATED: &str = "adrs unvalidated";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read run record {path}: {message}")]
    RunRecord { path: PathBuf, message: String },
    #[error("replay diverged at {stage}#{iteration}: {reason}")]
    ReplayDivergence { stage: StageName, iteration: u32, reason: String },
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> OrchestratorError {
    let context = context.into();
    move |source| OrchestratorError::Io { context, source }
}

/// Source of model replies for a run, told which stage is asking.
pub trait Transport {
    fn exchange(&self, stage: StageName, iteration: u32, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// Passes every exchange straight to a live [`Completer`].
pub struct LiveTransport<'a>(pub &'a dyn Completer);

impl Transport for LiveTransport<'_> {
    fn exchange(&self, _: StageName, _: u32, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.0.complete(request)
    }
}

struct StageCompleter<'a> {
    transport: &'a dyn Transport,
    stage: StageName,
    iteration: u32,
}

impl Completer for StageCompleter<'_> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.transport.exchange(self.stage, self.iteration, request)
    }
}

/// Serves recorded responses in order, checking that each request matches the
/// recorded stage, iteration and prompt.
pub struct ReplayTransport {
    records: Mutex<VecDeque<StageRecord>>,
    failure: Option<RunFailure>,
    divergence: Mutex<Option<(StageName, u32, String)>>,
}

impl ReplayTransport {
    pub fn new(records: Vec<StageRecord>, failure: Option<RunFailure>) -> Self {
        Self { records: Mutex::new(records.into()), failure, divergence: Mutex::new(None) }
    }

    fn diverge(&self, stage: StageName, iteration: u32, reason: String) -> LlmError {
        let mut slot = self.divergence.lock().expect("divergence slot poisoned");
        if slot.is_none() {
            *slot = Some((stage, iteration, reason.clone()));
        }
        LlmError::Configuration(format!("replay diverged: {reason}"))
    }

    pub fn divergence(&self) -> Option<(StageName, u32, String)> {
        self.divergence.lock().expect("divergence slot poisoned").clone()
    }

    pub fn unused(&self) -> Option<StageRecord> {
        self.records.lock().expect("records poisoned").front().cloned()
    }
}

impl Transport for ReplayTransport {
    fn exchange(&self, stage: StageName, iteration: u32, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let wanted = exchange_id(stage, iteration);
        let next = self.records.lock().expect("records poisoned").pop_front();
        let Some(record) = next else {
            return match &self.failure {
                Some(f) if f.stage == stage && f.iteration == iteration => Err(LlmError::Recorded(f.message.clone())),
                _ => Err(self.diverge(stage, iteration, format!("no recorded exchange for {wanted}"))),
            };
        };
        if record.stage_name != stage || record.iteration != iteration {
            return Err(self.diverge(
                stage,
                iteration,
                format!("expected recorded exchange {wanted}, found {}", record.exchange_id()),
            ));
        }
        if record.prompt != request.user_prompt || record.system_prompt != request.system_prompt {
            return Err(self.diverge(stage, iteration, format!("prompt for {wanted} differs from the recording")));
        }
        Ok(ChatResponse {
            input_token_estimate: request.input_token_estimate(),
            output_token_estimate: estimate_tokens(&record.response),
            text: record.response,
            latency_ms: 0,
            attempt_count: 1,
        })
    }
}

struct EventLog {
    file: File,
    path: PathBuf,
}

impl EventLog {
    fn create(path: PathBuf) -> Result<Self, OrchestratorError> {
        let file = File::create(&path).map_err(io_err(format!("creating {}", path.display())))?;
        Ok(Self { file, path })
    }

    fn append(&mut self, record: &StageRecord) -> Result<(), OrchestratorError> {
        let line = serde_json::to_string(record).expect("stage records always serialize");
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(io_err(format!("appending to {}", self.path.display())))
    }
}

/// Outcome of one agent exchange inside a loop.
enum Step<T> {
    Parsed(T),
    Unparseable(String),
}

struct Runner<'a> {
    config: &'a Config,
    agents: AgentSuite,
    transport: &'a dyn Transport,
    embedder: Box<dyn Embedder>,
    store: VectorStore,
    events: EventLog,
    run: WorkflowRun,
    output_dir: PathBuf,
}

impl<'a> Runner<'a> {
    fn start(repo: &Path, config: &'a Config, transport: &'a dyn Transport) -> Result<Self, OrchestratorError> {
        config.validate()?;
        let agents = AgentSuite::from_config(config)?;
        let embedder = embedder_from_config(config)?;
        let store = match &config.retrieval.store_path {
            Some(path) => VectorStore::open_or_new(path)?,
            None => VectorStore::new(),
        };
        if let Some(d) = store.dimension() {
            if d != embedder.dimension() {
                return Err(RetrievalError::DimensionMismatch { expected: d, actual: embedder.dimension() }.into());
            }
        }
        let repo = repo.canonicalize().map_err(|_| ExtractError::NotADirectory(repo.to_path_buf()))?;
        if !repo.is_dir() {
            return Err(ExtractError::NotADirectory(repo).into());
        }

        let output_dir = config.output_dir.clone();
        let adr_dir = output_dir.join(ADR_DIR);
        fs::create_dir_all(&adr_dir).map_err(io_err(format!("creating {}", adr_dir.display())))?;
        clear_adr_files(&adr_dir)?;
        let events = EventLog::create(output_dir.join(EVENTS_FILE))?;

        let now = Utc::now();
        let run = WorkflowRun {
            run_id: uuid::Uuid::new_v4().to_string(),
            repo_path: repo.display().to_string(),
            config_snapshot: config.clone(),
            stages: Vec::new(),
            final_adrs: Vec::new(),
            status: RunStatus::Completed,
            warnings: Vec::new(),
            failure: None,
            started_at: now,
            ended_at: now,
        };
        Ok(Self { config, agents, transport, embedder, store, events, run, output_dir })
    }

    fn repo(&self) -> PathBuf {
        PathBuf::from(&self.run.repo_path)
    }

    fn context(&self) -> Result<PackedContext, OrchestratorError> {
        let repo = self.repo();
        // keep our own output out of the prompt when it lives inside the repo
        let excluded = fs::canonicalize(&self.output_dir)
            .ok()
            .and_then(|out| out.strip_prefix(&repo).ok().map(|rel| rel.to_string_lossy().replace('\\', "/")))
            .filter(|rel| !rel.is_empty())
            .into_iter()
            .collect();
        let ctx = extract_context(&repo, &self.config.extract, excluded)?;
        log::info!(
            "packed {} files (~{} tokens of {}), {} excluded",
            ctx.included.len(),
            ctx.total_token_estimate,
            ctx.budget,
            ctx.excluded_count
        );
        Ok(ctx)
    }

    fn completer(&self, stage: StageName, iteration: u32) -> StageCompleter<'a> {
        StageCompleter { transport: self.transport, stage, iteration }
    }

    fn record<T>(
        &mut self,
        stage: StageName,
        iteration: u32,
        turn: &Turn<T>,
        verdict: Option<ValidationVerdict>,
    ) -> Result<(), OrchestratorError> {
        let record = StageRecord {
            stage_name: stage,
            iteration,
            agent_name: turn.agent.to_string(),
            system_prompt: turn.request.system_prompt.clone(),
            prompt: turn.request.user_prompt.clone(),
            response: turn.response.text.clone(),
            verdict,
            parse_error: turn.output.as_ref().err().map(ToString::to_string),
            token_estimate: turn.response.input_token_estimate + turn.response.output_token_estimate,
            at: Utc::now(),
        };
        log::info!("{}: {} (~{} tokens)", record.exchange_id(), record.agent_name, record.token_estimate);
        self.events.append(&record)?;
        self.run.stages.push(record);
        Ok(())
    }

    /// Records an agent turn, converting its parse outcome into a loop step.
    fn parsed<T>(&mut self, stage: StageName, iteration: u32, turn: Turn<T>) -> Result<Step<T>, OrchestratorError> {
        self.record(stage, iteration, &turn, None)?;
        Ok(match turn.output {
            Ok(v) => Step::Parsed(v),
            Err(e) => {
                log::warn!("{}: unparseable reply: {e}", exchange_id(stage, iteration));
                Step::Unparseable(format!("the previous reply could not be parsed: {e}"))
            }
        })
    }

    fn verdict(
        &mut self,
        stage: StageName,
        iteration: u32,
        turn: Turn<ValidationVerdict>,
    ) -> Result<ValidationVerdict, OrchestratorError> {
        let verdict = turn.output.clone().expect("verdict parsing is total");
        self.record(stage, iteration, &turn, Some(verdict.clone()))?;
        log::info!(
            "{}: {}",
            exchange_id(stage, iteration),
            if verdict.accepted {
                "accepted".to_string()
            } else {
                format!("rejected ({} issues)", verdict.issues.len())
            }
        );
        Ok(verdict)
    }

    fn fail(&mut self, stage: StageName, iteration: u32, message: String) {
        log::error!("run failed at {}: {message}", exchange_id(stage, iteration));
        self.run.status = RunStatus::Failed;
        self.run.failure = Some(RunFailure { stage, iteration, message });
    }

    fn warn(&mut self, warning: &str) {
        log::warn!("{warning}");
        self.run.warnings.push(warning.to_string());
        if self.run.status == RunStatus::Completed {
            self.run.status = RunStatus::CompletedWithWarnings;
        }
    }

    fn agentic(&mut self) -> Result<(), OrchestratorError> {
        let ctx = self.context()?;
        let max = self.config.max_iterations;

        // summary loop
        let mut summary: Option<(RepoSummary, u32)> = None;
        let mut issues: Vec<String> = Vec::new();
        let mut summary_accepted = false;
        for i in 1..=max {
            let llm = self.completer(StageName::Summarize, i);
            let turn = match self.agents.summarize_repo(&llm, &ctx, summary.as_ref().map(|s| &s.0), &issues) {
                Ok(t) => t,
                Err(e) => {
                    self.fail(StageName::Summarize, i, e.to_string());
                    return Ok(());
                }
            };
            let mut draft = match self.parsed(StageName::Summarize, i, turn)? {
                Step::Parsed(s) => s,
                Step::Unparseable(issue) => {
                    issues = vec![issue];
                    continue;
                }
            };
            draft.revision = i;
            let llm = self.completer(StageName::ValidateSummary, i);
            let turn = match self.agents.validate_summary(&llm, &draft, &ctx) {
                Ok(t) => t,
                Err(e) => {
                    self.fail(StageName::ValidateSummary, i, e.to_string());
                    return Ok(());
                }
            };
            let verdict = self.verdict(StageName::ValidateSummary, i, turn)?;
            summary = Some((draft, i));
            if verdict.accepted {
                summary_accepted = true;
                break;
            }
            issues = verdict.issues;
        }
        let Some((summary, summary_iteration)) = summary else {
            self.fail(StageName::Summarize, max, format!("no parseable summary after {max} iteration(s)"));
            return Ok(());
        };
        if !summary_accepted {
            self.warn(WARN_SUMMARY_UNVALIDATED);
        }

        // ADR loop
        let retrieval = Retrieval { store: &self.store, embedder: self.embedder.as_ref(), k: self.config.retrieval.k };
        let retrieved = match retrieval.related(&summary.to_marked_text(), self.config.retrieval.k) {
            Ok(hits) => hits,
            Err(e) => {
                self.fail(StageName::GenerateAdrs, 1, e.to_string());
                return Ok(());
            }
        };
        let mut draft: Option<(AdrSetDraft, u32)> = None;
        let mut issues: Vec<String> = Vec::new();
        let mut accepted_at = None;
        for i in 1..=max {
            let llm = self.completer(StageName::GenerateAdrs, i);
            let turn =
                match self.agents.generate_adrs(&llm, &summary, &retrieved, draft.as_ref().map(|d| &d.0), &issues) {
                    Ok(t) => t,
                    Err(e) => {
                        self.fail(StageName::GenerateAdrs, i, e.to_string());
                        return Ok(());
                    }
                };
            let candidate = match self.parsed(StageName::GenerateAdrs, i, turn)? {
                Step::Parsed(d) => d,
                Step::Unparseable(issue) => {
                    issues = vec![issue];
                    continue;
                }
            };
            let llm = self.completer(StageName::ValidateAdrs, i);
            let retrieval =
                Retrieval { store: &self.store, embedder: self.embedder.as_ref(), k: self.config.retrieval.k };
            let turn = match self.agents.validate_adrs(&llm, &candidate, &summary, Some(&retrieval)) {
                Ok(t) => t,
                Err(e) => {
                    self.fail(StageName::ValidateAdrs, i, e.to_string());
                    return Ok(());
                }
            };
            let verdict = self.verdict(StageName::ValidateAdrs, i, turn)?;
            draft = Some((candidate, i));
            if verdict.accepted {
                accepted_at = Some(i);
                break;
            }
            issues = verdict.issues;
        }
        let Some((draft, draft_iteration)) = draft else {
            self.fail(StageName::GenerateAdrs, max, format!("no parseable ADR set after {max} iteration(s)"));
            return Ok(());
        };
        let status = if accepted_at.is_some() {
            AdrStatus::Accepted
        } else {
            self.warn(WARN_ADRS_UNVALIDATED);
            AdrStatus::Unvalidated
        };
        let provenance = vec![
            exchange_id(StageName::Summarize, summary_iteration),
            exchange_id(StageName::ValidateSummary, summary_iteration),
            exchange_id(StageName::GenerateAdrs, draft_iteration),
            exchange_id(StageName::ValidateAdrs, draft_iteration),
        ];
        self.run.final_adrs = finalize(draft.adrs, status, SourceConfig::Agentic, &provenance);
        Ok(())
    }

    fn baseline(&mut self) -> Result<(), OrchestratorError> {
        let ctx = self.context()?;
        let llm = self.completer(StageName::Baseline, 1);
        let turn = match self.agents.generate_baseline(&llm, &ctx) {
            Ok(t) => t,
            Err(e) => {
                self.fail(StageName::Baseline, 1, e.to_string());
                return Ok(());
            }
        };
        self.record(StageName::Baseline, 1, &turn, None)?;
        match turn.output {
            Ok(draft) => {
                let provenance = vec![exchange_id(StageName::Baseline, 1)];
                self.run.final_adrs = finalize(draft.adrs, AdrStatus::Proposed, SourceConfig::Baseline, &provenance);
            }
            Err(e) => self.fail(StageName::Baseline, 1, format!("unparseable reply: {e}")),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<WorkflowRun, OrchestratorError> {
        if self.run.status != RunStatus::Failed {
            write_adrs(&self.output_dir.join(ADR_DIR), &self.run.final_adrs)?;
            if self.config.retrieval.index_outputs {
                self.index_outputs()?;
            }
        } else {
            self.run.final_adrs.clear();
        }
        self.run.ended_at = Utc::now();
        let path = self.output_dir.join(RUN_FILE);
        let json = serde_json::to_string_pretty(&self.run).expect("run record always serializes");
        fs::write(&path, json + "\n").map_err(io_err(format!("writing {}", path.display())))?;
        log::info!("run {} finished: {}", self.run.run_id, self.run.status);
        Ok(self.run)
    }

    fn index_outputs(&mut self) -> Result<(), OrchestratorError> {
        let Some(path) = self.config.retrieval.store_path.clone() else {
            log::warn!("retrieval.index_outputs is set but retrieval.store_path is not; skipping");
            return Ok(());
        };
        for adr in self.run.final_adrs.iter().filter(|a| a.status == AdrStatus::Accepted) {
            self.store.add(embed_adr(self.embedder.as_ref(), adr, &adr_filename(adr))?)?;
        }
        self.store.save(&path)?;
        Ok(())
    }
}

/// Builds the store document for a record; `doc_id` is usually its file name.
pub fn embed_adr(embedder: &dyn Embedder, adr: &Adr, doc_id: &str) -> Result<EmbeddedDoc, RetrievalError> {
    let text = adr_embedding_text(&adr.title, &adr.context, &adr.decision);
    let mut doc = EmbeddedDoc::new(doc_id, text.clone(), embedder.embed(&text)?);
    doc.metadata.insert("title".into(), adr.title.clone());
    doc.metadata.insert("status".into(), adr.status.to_string());
    Ok(doc)
}

fn finalize(mut adrs: Vec<Adr>, status: AdrStatus, source: SourceConfig, provenance: &[String]) -> Vec<Adr> {
    for (i, adr) in adrs.iter_mut().enumerate() {
        adr.id = i as u32 + 1;
        adr.status = status;
        adr.source_config = source;
        adr.provenance = provenance.to_vec();
    }
    adrs
}

fn is_adr_file(name: &str) -> bool {
    name.ends_with(".md") && name.len() >= 7 && name.as_bytes()[..4].iter().all(u8::is_ascii_digit)
}

/// Removes record files left by an earlier run in the same directory.
fn clear_adr_files(dir: &Path) -> Result<(), OrchestratorError> {
    for entry in fs::read_dir(dir).map_err(io_err(format!("listing {}", dir.display())))? {
        let entry = entry.map_err(io_err(format!("listing {}", dir.display())))?;
        if entry.file_name().to_str().is_some_and(is_adr_file) && entry.path().is_file() {
            fs::remove_file(entry.path()).map_err(io_err(format!("removing {}", entry.path().display())))?;
        }
    }
    Ok(())
}

fn write_adrs(dir: &Path, adrs: &[Adr]) -> Result<(), OrchestratorError> {
    for adr in adrs {
        let path = dir.join(adr_filename(adr));
        let doc = render_adr(adr).map_err(|e| OrchestratorError::Io {
            context: format!("rendering ADR {}", adr.id),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        fs::write(&path, doc).map_err(io_err(format!("writing {}", path.display())))?;
    }
    Ok(())
}

pub fn run_agentic_with(
    repo: &Path,
    config: &Config,
    transport: &dyn Transport,
) -> Result<WorkflowRun, OrchestratorError> {
    let mut runner = Runner::start(repo, config, transport)?;
    runner.agentic()?;
    runner.finish()
}

pub fn run_baseline_with(
    repo: &Path,
    config: &Config,
    transport: &dyn Transport,
) -> Result<WorkflowRun, OrchestratorError> {
    let mut runner = Runner::start(repo, config, transport)?;
    runner.baseline()?;
    runner.finish()
}

/// Summarize/validate loop, then generate/validate loop, each bounded by `max_iterations`.
pub fn run_agentic(repo: &Path, config: &Config, llm: &dyn Completer) -> Result<WorkflowRun, OrchestratorError> {
    run_agentic_with(repo, config, &LiveTransport(llm))
}

/// One prompt, one reply, no validation.
pub fn run_baseline(repo: &Path, config: &Config, llm: &dyn Completer) -> Result<WorkflowRun, OrchestratorError> {
    run_baseline_with(repo, config, &LiveTransport(llm))
}

/// Runs whichever pipeline `config.pipeline` selects.
pub fn run_pipeline(repo: &Path, config: &Config, llm: &dyn Completer) -> Result<WorkflowRun, OrchestratorError> {
    match config.pipeline {
        SourceConfig::Agentic => run_agentic(repo, config, llm),
        SourceConfig::Baseline => run_baseline(repo, config, llm),
    }
}

pub fn read_run(run_dir: &Path) -> Result<WorkflowRun, OrchestratorError> {
    let path = run_dir.join(RUN_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| OrchestratorError::RunRecord { path: path.clone(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| OrchestratorError::RunRecord { path, message: e.to_string() })
}

pub fn read_events(run_dir: &Path) -> Result<Vec<StageRecord>, OrchestratorError> {
    let path = run_dir.join(EVENTS_FILE);
    let file =
        File::open(&path).map_err(|e| OrchestratorError::RunRecord { path: path.clone(), message: e.to_string() })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let bad =
            |m: String| OrchestratorError::RunRecord { path: path.clone(), message: format!("line {}: {m}", i + 1) };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?);
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub original: WorkflowRun,
    pub replayed: WorkflowRun,
    /// Record files whose bytes differ between the original and the replay, or exist in only one.
    pub mismatched_files: Vec<String>,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        self.mismatched_files.is_empty()
            && self.original.status == self.replayed.status
            && self.original.failure == self.replayed.failure
    }
}

/// Re-executes a recorded run from `run_dir` against its recorded responses,
/// writing into `out_dir`. The repository must still be present.
pub fn replay(run_dir: &Path, out_dir: &Path) -> Result<ReplayOutcome, OrchestratorError> {
    let original = read_run(run_dir)?;
    let records = read_events(run_dir)?;
    let mut config = original.config_snapshot.clone();
    config.output_dir = out_dir.to_path_buf();
    config.retrieval.index_outputs = false;

    let transport = ReplayTransport::new(records, original.failure.clone());
    let repo = PathBuf::from(&original.repo_path);
    let replayed = match config.pipeline {
        SourceConfig::Agentic => run_agentic_with(&repo, &config, &transport)?,
        SourceConfig::Baseline => run_baseline_with(&repo, &config, &transport)?,
    };
    if let Some((stage, iteration, reason)) = transport.divergence() {
        return Err(OrchestratorError::ReplayDivergence { stage, iteration, reason });
    }
    if let Some(extra) = transport.unused() {
        return Err(OrchestratorError::ReplayDivergence {
            stage: extra.stage_name,
            iteration: extra.iteration,
            reason: "recorded exchange was never requested".into(),
        });
    }
    let mismatched_files = compare_adr_dirs(&run_dir.join(ADR_DIR), &out_dir.join(ADR_DIR))?;
    Ok(ReplayOutcome { original, replayed, mismatched_files })
}

fn adr_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, OrchestratorError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(format!("listing {}", dir.display())))? {
        let entry = entry.map_err(io_err(format!("listing {}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if is_adr_file(&name) {
            out.push((name, fs::read(entry.path()).map_err(io_err(format!("reading {}", entry.path().display())))?));
        }
    }
    out.sort();
    Ok(out)
}

fn compare_adr_dirs(a: &Path, b: &Path) -> Result<Vec<String>, OrchestratorError> {
    let (left, right) = (adr_files(a)?, adr_files(b)?);
    let mut names: Vec<&String> = left.iter().chain(&right).map(|(n, _)| n).collect();
    names.sort();
    names.dedup();
    Ok(names
        .into_iter()
        .filter(|name| {
            let l = left.iter().find(|(n, _)| n == *name).map(|(_, b)| b);
            let r = right.iter().find(|(n, _)| n == *name).map(|(_, b)| b);
            l != r
        })
        .cloned()
        .collect())
}
