//! Blind comparison of pipelines: build anonymized study bundles, ingest 1–5
//! star ratings, and aggregate them into per-configuration means.
//!
//! Bundle layout:
//!
//! ```text
//! out/
//!   key.json                  label → true identity (never shown to raters)
//!   participant/config 1/...  anonymized records, one directory per label
//!   runs/<identity>/...       full run outputs (run.json, events.jsonl, adr/)
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adr::{render_adr_anonymous, slugify, SourceConfig};
use crate::config::Config;
use crate::llm::{Completer, LlmError};
use crate::model::RunStatus;
use crate::orchestrator::{run_pipeline, OrchestratorError};

pub const CONFIGURATIONS: usize = 4;
pub const KEY_FILE: &str = "key.json";
pub const PARTICIPANT_DIR: &str = "participant";
pub const RUNS_DIR: &str = "runs";
pub const RATINGS_HEADER: &str = "repo_id,label,relevance,coherence,completeness,conciseness,overall";
pub const CRITERIA: [&str; 5] = ["Relevance", "Coherence", "Completeness", "Conciseness", "Overall"];
const REDACTED: &str = "[redacted]";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ratings file: {0}")]
    Csv(String),
    #[error("ratings header must be `{RATINGS_HEADER}`, found `{0}`")]
    BadHeader(String),
    #[error("no key for repository `{0}`")]
    UnknownRepo(String),
    #[error("label `{label}` is not in the key for repository `{repo_id}`")]
    UnknownLabel { repo_id: String, label: String },
    #[error("rating for {repo_id}/{label}: {criterion} = {value} is outside [1, 5]")]
    OutOfRange { repo_id: String, label: String, criterion: &'static str, value: u8 },
    #[error("invalid key file {path}: {message}")]
    Key { path: PathBuf, message: String },
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> EvalError {
    let context = context.into();
    move |source| EvalError::Io { context, source }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Identity {
    pub pipeline: SourceConfig,
    pub model_id: String,
}

impl Identity {
    pub fn of(config: &Config) -> Self {
        Self { pipeline: config.pipeline, model_id: config.llm.model_id.clone() }
    }

    /// Table column value: `LLM` for the baseline, `Agent` for the agentic pipeline.
    pub fn source_label(&self) -> &'static str {
        match self.pipeline {
            SourceConfig::Baseline => "LLM",
            SourceConfig::Agentic => "Agent",
        }
    }

    fn dir_name(&self) -> String {
        format!("{}-{}", self.pipeline, slugify(&self.model_id))
    }

    /// Baseline rows first, then agentic, each by model id.
    fn sort_key(&self) -> (u8, &str) {
        (if self.pipeline == SourceConfig::Baseline { 0 } else { 1 }, &self.model_id)
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.pipeline, self.model_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyConfigLabel {
    pub label: String,
    pub true_identity: Identity,
    pub permutation_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityFailure {
    pub identity: Identity,
    pub message: String,
}

/// Contents of `key.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyKey {
    pub repo_id: String,
    pub labels: Vec<StudyConfigLabel>,
    pub complete: bool,
    #[serde(default)]
    pub failures: Vec<IdentityFailure>,
    /// Occurrences of identifying strings scrubbed from participant files.
    #[serde(default)]
    pub redactions: usize,
}

impl StudyKey {
    pub fn identity_for(&self, label: &str) -> Option<&Identity> {
        self.labels.iter().find(|l| l.label == label).map(|l| &l.true_identity)
    }
}

pub fn label_name(index: usize) -> String {
    format!("config {}", index + 1)
}

/// Seeded permutation: `result[j]` is the input index shown as `config {j+1}`.
pub fn label_permutation(seed: u64) -> [usize; CONFIGURATIONS] {
    let mut order = [0, 1, 2, 3];
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Strings that must never appear in participant-facing files.
pub fn forbidden_terms(identities: &[Identity]) -> Vec<String> {
    let mut terms = vec!["agentic".to_string(), "baseline".to_string()];
    for id in identities {
        if !terms.iter().any(|t| t.eq_ignore_ascii_case(&id.model_id)) {
            terms.push(id.model_id.clone());
        }
    }
    terms
}

/// Case-insensitive (ASCII) replacement of every term; returns the count replaced.
pub fn redact(text: &str, terms: &[String], replacement: &str) -> (String, usize) {
    let mut out = text.to_string();
    let mut count = 0;
    for term in terms.iter().filter(|t| !t.is_empty()) {
        let needle = term.to_ascii_lowercase();
        let mut result = String::with_capacity(out.len());
        let mut rest = out.as_str();
        loop {
            let lower = rest.to_ascii_lowercase();
            match lower.find(&needle) {
                Some(pos) => {
                    result.push_str(&rest[..pos]);
                    result.push_str(replacement);
                    rest = &rest[pos + needle.len()..];
                    count += 1;
                }
                None => {
                    result.push_str(rest);
                    break;
                }
            }
        }
        out = result;
    }
    (out, count)
}

/// Builds the model client for one study configuration.
pub type Connect = dyn Fn(&Config) -> Result<Box<dyn Completer>, LlmError>;

#[derive(Debug, Clone)]
pub struct StudyBundle {
    pub dir: PathBuf,
    pub key: StudyKey,
}

/// Runs all four configurations on `repo`, then writes blinded copies of
/// their records under `participant/` and the label key to `key.json`.
///
/// `connect` builds the model client for each configuration.
pub fn build_study_bundle(
    repo: &Path,
    configs: &[Config],
    seed: u64,
    out_dir: &Path,
    connect: &Connect,
) -> Result<StudyBundle, EvalError> {
    if configs.len() != CONFIGURATIONS {
        return Err(EvalError::Precondition(format!(
            "expected {CONFIGURATIONS} configurations, got {}",
            configs.len()
        )));
    }
    let identities: Vec<Identity> = configs.iter().map(Identity::of).collect();
    if identities.iter().collect::<HashSet<_>>().len() != CONFIGURATIONS {
        return Err(EvalError::Precondition("configurations must have distinct (pipeline, model) identities".into()));
    }
    let repo_id = repo
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| repo.display().to_string());

    let mut failures = Vec::new();
    let mut adr_sets = Vec::new();
    for (config, identity) in configs.iter().zip(&identities) {
        let mut config = config.clone();
        config.output_dir = out_dir.join(RUNS_DIR).join(identity.dir_name());
        log::info!("study: running {identity}");
        let outcome = connect(&config)
            .map_err(EvalError::from)
            .and_then(|llm| run_pipeline(repo, &config, llm.as_ref()).map_err(EvalError::from));
        match outcome {
            Ok(run) if run.status != RunStatus::Failed => adr_sets.push(run.final_adrs),
            Ok(run) => {
                let message = run.failure.map_or_else(
                    || "run failed".to_string(),
                    |f| format!("{}#{}: {}", f.stage, f.iteration, f.message),
                );
                failures.push(IdentityFailure { identity: identity.clone(), message });
                adr_sets.push(Vec::new());
            }
            Err(e) => {
                failures.push(IdentityFailure { identity: identity.clone(), message: e.to_string() });
                adr_sets.push(Vec::new());
            }
        }
    }

    let terms = forbidden_terms(&identities);
    let participant = out_dir.join(PARTICIPANT_DIR);
    if participant.exists() {
        fs::remove_dir_all(&participant).map_err(io_err(format!("clearing {}", participant.display())))?;
    }
    let order = label_permutation(seed);
    let mut labels = Vec::with_capacity(CONFIGURATIONS);
    let mut redactions = 0;
    for (j, &idx) in order.iter().enumerate() {
        let label = label_name(j);
        let dir = participant.join(&label);
        fs::create_dir_all(&dir).map_err(io_err(format!("creating {}", dir.display())))?;
        for adr in &adr_sets[idx] {
            let doc = render_adr_anonymous(adr).map_err(|e| EvalError::Precondition(e.to_string()))?;
            let (doc, n) = redact(&doc, &terms, REDACTED);
            let (slug, m) = redact(&slugify(&adr.title), &terms, "redacted");
            redactions += n + m;
            let name = if slug.is_empty() { format!("{:04}.md", adr.id) } else { format!("{:04}-{slug}.md", adr.id) };
            fs::write(dir.join(&name), doc).map_err(io_err(format!("writing {name}")))?;
        }
        labels.push(StudyConfigLabel { label, true_identity: identities[idx].clone(), permutation_seed: seed });
    }

    let key = StudyKey { repo_id, labels, complete: failures.is_empty(), failures, redactions };
    let json = serde_json::to_string_pretty(&key).expect("keys always serialize");
    fs::write(out_dir.join(KEY_FILE), json + "\n").map_err(io_err("writing key.json"))?;
    Ok(StudyBundle { dir: out_dir.to_path_buf(), key })
}

/// Finds every `key.json` (or `*.key.json`) under `dir`, keyed by repository id.
pub fn load_keys(dir: &Path) -> Result<BTreeMap<String, StudyKey>, EvalError> {
    let mut keys = BTreeMap::new();
    for entry in walkdir::WalkDir::new(dir).max_depth(4).sort_by_file_name() {
        let entry = entry.map_err(|e| EvalError::Key { path: dir.to_path_buf(), message: e.to_string() })?;
        let name = entry.file_name().to_string_lossy();
        if !entry.file_type().is_file() || !(name == KEY_FILE || name.ends_with(".key.json")) {
            continue;
        }
        let path = entry.path();
        let bad = |message: String| EvalError::Key { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let key: StudyKey = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if keys.contains_key(&key.repo_id) {
            return Err(bad(format!("duplicate key for repository `{}`", key.repo_id)));
        }
        keys.insert(key.repo_id.clone(), key);
    }
    Ok(keys)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub repo_id: String,
    pub label: String,
    pub relevance: u8,
    pub coherence: u8,
    pub completeness: u8,
    pub conciseness: u8,
    pub overall: u8,
}

impl RatingRecord {
    pub fn scores(&self) -> [u8; 5] {
        [self.relevance, self.coherence, self.completeness, self.conciseness, self.overall]
    }
}

pub fn parse_ratings(text: &str) -> Result<Vec<RatingRecord>, EvalError> {
    let header = text.lines().next().unwrap_or("").trim_end_matches('\r');
    if header != RATINGS_HEADER {
        return Err(EvalError::BadHeader(header.to_string()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(|e: csv::Error| EvalError::Csv(e.to_string()))).collect()
}

pub fn read_ratings(path: &Path) -> Result<Vec<RatingRecord>, EvalError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    parse_ratings(&text)
}

pub fn write_ratings(path: &Path, ratings: &[RatingRecord]) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| EvalError::Csv(e.to_string()))?;
    for r in ratings {
        writer.serialize(r).map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    writer.flush().map_err(io_err(format!("writing {}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub source: String,
    pub identity: Identity,
    pub ratings: u64,
    /// Integer sums per criterion, in [`CRITERIA`] order.
    pub sums: [u64; 5],
    /// Full-precision means per criterion.
    pub means: [f64; 5],
    /// Means rounded half-up to one decimal.
    pub display: [String; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub repositories: usize,
    pub rows: Vec<ReportRow>,
}

/// `sum / count` rounded half-up to one decimal, computed exactly in integers.
pub fn display_mean(sum: u64, count: u64) -> String {
    assert!(count > 0, "mean of zero ratings");
    let tenths = (20 * sum + count) / (2 * count);
    format!("{}.{}", tenths / 10, tenths % 10)
}

pub fn aggregate(ratings: &[RatingRecord], keys: &BTreeMap<String, StudyKey>) -> Result<Report, EvalError> {
    let mut acc: BTreeMap<Identity, ([u64; 5], u64)> = BTreeMap::new();
    let mut repos = HashSet::new();
    for r in ratings {
        let key = keys.get(&r.repo_id).ok_or_else(|| EvalError::UnknownRepo(r.repo_id.clone()))?;
        let identity = key
            .identity_for(&r.label)
            .ok_or_else(|| EvalError::UnknownLabel { repo_id: r.repo_id.clone(), label: r.label.clone() })?;
        let scores = r.scores();
        for (criterion, value) in CRITERIA.iter().zip(scores) {
            if !(1..=5).contains(&value) {
                return Err(EvalError::OutOfRange {
                    repo_id: r.repo_id.clone(),
                    label: r.label.clone(),
                    criterion,
                    value,
                });
            }
        }
        let entry = acc.entry(identity.clone()).or_insert(([0; 5], 0));
        for (sum, value) in entry.0.iter_mut().zip(scores) {
            *sum += u64::from(value);
        }
        entry.1 += 1;
        repos.insert(r.repo_id.as_str());
    }
    let mut rows: Vec<ReportRow> = acc
        .into_iter()
        .map(|(identity, (sums, n))| ReportRow {
            source: identity.source_label().to_string(),
            ratings: n,
            means: sums.map(|s| s as f64 / n as f64),
            display: sums.map(|s| display_mean(s, n)),
            sums,
            identity,
        })
        .collect();
    rows.sort_by(|a, b| a.identity.sort_key().cmp(&b.identity.sort_key()));
    Ok(Report { repositories: repos.len(), rows })
}

impl Report {
    /// Plain-text table with the columns Source, Model, then the five criteria.
    pub fn to_table(&self) -> String {
        let mut header = vec!["Source".to_string(), "Model".to_string()];
        header.extend(CRITERIA.iter().map(|c| c.to_string()));
        let mut lines = vec![header];
        for row in &self.rows {
            let mut cells = vec![row.source.clone(), row.identity.model_id.clone()];
            cells.extend(row.display.iter().cloned());
            lines.push(cells);
        }
        let widths: Vec<usize> =
            (0..lines[0].len()).map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (i, cells) in lines.iter().enumerate() {
            let line: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
                out.push('\n');
            }
        }
        out.push_str(&format!("Means over {} repositories, 1-5 scale.\n", self.repositories));
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
        let json = serde_json::to_string_pretty(self).expect("reports always serialize");
        fs::write(dir.join("report.json"), json + "\n").map_err(io_err("writing report.json"))?;
        fs::write(dir.join("report.txt"), self.to_table()).map_err(io_err("writing report.txt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(repo: &str) -> StudyKey {
        let ids = [
            (SourceConfig::Baseline, "gpt-5"),
            (SourceConfig::Baseline, "gemini"),
            (SourceConfig::Agentic, "gpt-5"),
            (SourceConfig::Agentic, "gemini"),
        ];
        StudyKey {
            repo_id: repo.into(),
            labels: ids
                .iter()
                .enumerate()
                .map(|(i, (p, m))| StudyConfigLabel {
                    label: label_name(i),
                    true_identity: Identity { pipeline: *p, model_id: m.to_string() },
                    permutation_seed: 0,
                })
                .collect(),
            complete: true,
            failures: vec![],
            redactions: 0,
        }
    }

    fn rating(repo: &str, label: &str, overall: u8) -> RatingRecord {
        RatingRecord {
            repo_id: repo.into(),
            label: label.into(),
            relevance: 3,
            coherence: 3,
            completeness: 3,
            conciseness: 3,
            overall,
        }
    }

    #[test]
    fn single_identity_mean() {
        let keys: BTreeMap<_, _> = ["r1", "r2", "r3", "r4"].iter().map(|r| (r.to_string(), key(r))).collect();
        let ratings: Vec<_> =
            [("r1", 4), ("r2", 4), ("r3", 3), ("r4", 5)].iter().map(|(r, o)| rating(r, "config 3", *o)).collect();
        let report = aggregate(&ratings, &keys).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].means[4], 4.0);
        assert_eq!(report.rows[0].display[4], "4.0");
        assert_eq!(report.rows[0].source, "Agent");
        assert_eq!(report.repositories, 4);
    }

    #[test]
    fn half_up_display() {
        assert_eq!(display_mean(77, 20), "3.9"); // 3.85
        assert_eq!(display_mean(3, 4), "0.8"); // 0.75
        assert_eq!(display_mean(113, 29), "3.9"); // 3.896...
        assert_eq!(display_mean(112, 29), "3.9"); // 3.862...
        assert_eq!(display_mean(111, 29), "3.8"); // 3.827...
        assert_eq!(display_mean(5, 1), "5.0");
        // the float route would get this one wrong
        assert_eq!(display_mean(3, 20), "0.2");
        assert_eq!(format!("{:.1}", 3.0_f64 / 20.0), "0.1");
    }

    #[test]
    fn unknown_label_and_range_errors() {
        let keys = BTreeMap::from([("r1".to_string(), key("r1"))]);
        assert!(matches!(aggregate(&[rating("r1", "config 9", 3)], &keys), Err(EvalError::UnknownLabel { .. })));
        assert!(matches!(aggregate(&[rating("r2", "config 1", 3)], &keys), Err(EvalError::UnknownRepo(_))));
        assert!(matches!(
            aggregate(&[rating("r1", "config 1", 6)], &keys),
            Err(EvalError::OutOfRange { criterion: "Overall", value: 6, .. })
        ));
        assert!(matches!(aggregate(&[rating("r1", "config 1", 0)], &keys), Err(EvalError::OutOfRange { .. })));
    }

    #[test]
    fn ratings_csv_parsing() {
        let text = format!("{RATINGS_HEADER}\nr1,config 1,1,2,3,4,5\n");
        let parsed = parse_ratings(&text).unwrap();
        assert_eq!(parsed[0].scores(), [1, 2, 3, 4, 5]);
        assert!(matches!(parse_ratings("repo,label\n"), Err(EvalError::BadHeader(_))));
        assert!(matches!(
            parse_ratings(&format!("{RATINGS_HEADER}\nr1,config 1,1,2,3.5,4,5\n")),
            Err(EvalError::Csv(_))
        ));
        assert!(matches!(parse_ratings(&format!("{RATINGS_HEADER}\nr1,config 1,1,2,3,4\n")), Err(EvalError::Csv(_))));
    }

    #[test]
    fn permutation_is_seeded() {
        assert_eq!(label_permutation(42), label_permutation(42));
        let mut sorted = label_permutation(7);
        sorted.sort();
        assert_eq!(sorted, [0, 1, 2, 3]);
        let distinct: HashSet<_> = (0..50).map(label_permutation).collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn redaction_is_case_insensitive() {
        let terms = forbidden_terms(&[Identity { pipeline: SourceConfig::Agentic, model_id: "GPT-5".into() }]);
        let (out, n) = redact("An Agentic baseline via gpt-5.", &terms, "[x]");
        assert_eq!(out, "An [x] [x] via [x].");
        assert_eq!(n, 3);
    }

    #[test]
    fn table_layout() {
        let keys = BTreeMap::from([("r1".to_string(), key("r1"))]);
        let ratings = vec![rating("r1", "config 1", 4), rating("r1", "config 4", 5)];
        let table = aggregate(&ratings, &keys).unwrap().to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Source  Model"));
        assert!(lines[0].ends_with("Conciseness  Overall"));
        assert!(lines[2].starts_with("LLM     gpt-5"));
        assert!(lines[3].starts_with("Agent   gemini"));
        assert!(lines[3].ends_with("5.0"));
    }
}
