//! Domain records shared across the workflow: summaries, verdicts, stage
//! records and the run record persisted as `run.json`.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::adr::Adr;
use crate::config::Config;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub responsibility: String,
}

/// High-level architecture summary of a repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoSummary {
    pub overview: String,
    pub components: Vec<Component>,
    pub technologies: Vec<String>,
    /// Candidate architectural decisions spotted in the code.
    pub decision_hints: Vec<String>,
    /// Refinement iteration that produced this summary, starting at 1.
    pub revision: u32,
}

impl RepoSummary {
    /// Renders the summary in the same marker layout the summarizer emits.
    pub fn to_marked_text(&self) -> String {
        let mut out = format!("OVERVIEW:\n{}\n\nCOMPONENTS:\n", self.overview);
        for c in &self.components {
            out.push_str(&format!("- {}: {}\n", c.name, c.responsibility));
        }
        out.push_str("\nTECHNOLOGIES:\n");
        for t in &self.technologies {
            out.push_str(&format!("- {t}\n"));
        }
        out.push_str("\nDECISION_HINTS:\n");
        for h in &self.decision_hints {
            out.push_str(&format!("- {h}\n"));
        }
        out
    }
}

pub const UNSPECIFIED_REJECTION: &str = "unspecified rejection";
pub const UNPARSEABLE_VALIDATOR_OUTPUT: &str = "unparseable validator output";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub accepted: bool,
    /// Empty when accepted; never empty when rejected.
    pub issues: Vec<String>,
    pub raw_response: String,
}

impl ValidationVerdict {
    pub fn reject(issues: Vec<String>, raw_response: impl Into<String>) -> Self {
        let issues = if issues.is_empty() { vec![UNSPECIFIED_REJECTION.to_string()] } else { issues };
        Self { accepted: false, issues, raw_response: raw_response.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageName {
    Summarize,
    ValidateSummary,
    GenerateAdrs,
    ValidateAdrs,
    Baseline,
}

impl StageName {
    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Summarize => "summarize",
            StageName::ValidateSummary => "validate-summary",
            StageName::GenerateAdrs => "generate-adrs",
            StageName::ValidateAdrs => "validate-adrs",
            StageName::Baseline => "baseline",
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifier of one agent exchange, e.g. `validate-adrs#2`.
pub fn exchange_id(stage: StageName, iteration: u32) -> String {
    format!("{stage}#{iteration}")
}

/// One line of `events.jsonl`: a single completed gateway exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage_name: StageName,
    pub iteration: u32,
    pub agent_name: String,
    pub system_prompt: String,
    pub prompt: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ValidationVerdict>,
    /// Set when the agent's reply could not be parsed; the iteration counts as a rejection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub token_estimate: usize,
    pub at: DateTime<Utc>,
}

impl StageRecord {
    pub fn exchange_id(&self) -> String {
        exchange_id(self.stage_name, self.iteration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    CompletedWithWarnings,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::CompletedWithWarnings => "completed-with-warnings",
            RunStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub stage: StageName,
    pub iteration: u32,
    pub message: String,
}

/// Complete record of one orchestrated run, persisted as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowRun {
    pub run_id: String,
    pub repo_path: String,
    pub config_snapshot: Config,
    pub stages: Vec<StageRecord>,
    pub final_adrs: Vec<Adr>,
    pub status: RunStatus,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<RunFailure>,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
}
