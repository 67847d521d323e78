//! The instantiated agents: Repo Summarizer, Summary Validator, ADR Generator,
//! ADR Validator, plus the single-prompt baseline generator.
//!
//! Each agent is a prompt template and an output grammar around a
//! [`Completer`]. Prompt construction is a pure function of the template and
//! the inputs; the `*_request` methods expose it directly.

pub mod grammar;
pub mod template;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adr::SourceConfig;
use crate::config::Config;
use crate::extract::PackedContext;
use crate::llm::{ChatRequest, ChatResponse, Completer, LlmError};
use crate::model::{RepoSummary, ValidationVerdict};
use crate::retrieval::{Embedder, RetrievalError, SearchHit, VectorStore};

pub use grammar::{parse_adr_set, parse_summary, parse_verdict, AdrSetDraft, GrammarError};
pub use template::{Template, TemplateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentName {
    RepoSummarizer,
    SummaryValidator,
    AdrGenerator,
    AdrValidator,
    BaselineGenerator,
}

impl AgentName {
    pub const ALL: [AgentName; 5] = [
        AgentName::RepoSummarizer,
        AgentName::SummaryValidator,
        AgentName::AdrGenerator,
        AgentName::AdrValidator,
        AgentName::BaselineGenerator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentName::RepoSummarizer => "repo_summarizer",
            AgentName::SummaryValidator => "summary_validator",
            AgentName::AdrGenerator => "adr_generator",
            AgentName::AdrValidator => "adr_validator",
            AgentName::BaselineGenerator => "baseline_generator",
        }
    }
}

impl fmt::Display for AgentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputGrammar {
    Summary,
    Verdict,
    AdrSet,
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub name: AgentName,
    /// Sent as the system prompt.
    pub role_description: String,
    pub template: Template,
    pub output_grammar: OutputGrammar,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("template for {agent}: {source}")]
    Template {
        agent: AgentName,
        #[source]
        source: TemplateError,
    },
    #[error("cannot read template for {agent} from {path}: {source}")]
    TemplateIo {
        agent: AgentName,
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown agent `{0}` in config")]
    UnknownAgent(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// One exchange with an agent: what was sent, what came back, and the parsed output.
#[derive(Debug, Clone)]
pub struct Turn<T> {
    pub agent: AgentName,
    pub request: ChatRequest,
    pub response: ChatResponse,
    pub output: Result<T, GrammarError>,
}

/// Read access to past decisions for the generator and the validator.
pub struct Retrieval<'a> {
    pub store: &'a VectorStore,
    pub embedder: &'a dyn Embedder,
    pub k: usize,
}

impl Retrieval<'_> {
    pub fn related(&self, text: &str, k: usize) -> Result<Vec<SearchHit>, RetrievalError> {
        if self.store.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.embedder.embed(text)?;
        self.store.search(&q, k)
    }
}

fn default_spec(name: AgentName) -> (&'static str, &'static str, OutputGrammar) {
    match name {
        AgentName::RepoSummarizer => (
            "You are a software architect who reads code repositories and summarizes their architecture: \
             overall style, primary components, key technologies, and the architectural decisions the code reveals.",
            include_str!("../../templates/repo_summarizer.txt"),
            OutputGrammar::Summary,
        ),
        AgentName::SummaryValidator => (
            "You are a meticulous reviewer who checks architecture summaries against the source code they describe. \
             You reject summaries that are inaccurate or incomplete.",
            include_str!("../../templates/summary_validator.txt"),
            OutputGrammar::Verdict,
        ),
        AgentName::AdrGenerator => (
            "You are a software architect who documents architectural decisions as Architecture Decision Records.",
            include_str!("../../templates/adr_generator.txt"),
            OutputGrammar::AdrSet,
        ),
        AgentName::AdrValidator => (
            "You are a reviewer of Architecture Decision Records. You check logical consistency, format \
             correctness, overall quality, and redundancy with existing decisions.",
            include_str!("../../templates/adr_validator.txt"),
            OutputGrammar::Verdict,
        ),
        AgentName::BaselineGenerator => (
            "You are a software architect who documents architectural decisions as Architecture Decision Records.",
            include_str!("../../templates/baseline_generator.txt"),
            OutputGrammar::AdrSet,
        ),
    }
}

#[derive(Debug, Clone)]
pub struct AgentSuite {
    specs: BTreeMap<AgentName, AgentSpec>,
    model_id: String,
    temperature: f64,
    max_output_tokens: u32,
}

impl AgentSuite {
    /// The built-in templates with the given model settings.
    pub fn with_defaults(model_id: impl Into<String>) -> Self {
        let specs = AgentName::ALL
            .into_iter()
            .map(|name| {
                let (role, template, grammar) = default_spec(name);
                let template = Template::parse(template).expect("built-in templates are valid");
                (name, AgentSpec { name, role_description: role.to_string(), template, output_grammar: grammar })
            })
            .collect();
        Self { specs, model_id: model_id.into(), temperature: 0.0, max_output_tokens: 8192 }
    }

    /// Applies `agents.<name>.template_path` overrides. Template errors surface here, at startup.
    pub fn from_config(config: &Config) -> Result<Self, AgentError> {
        let mut suite = Self::with_defaults(config.llm.model_id.clone());
        suite.temperature = config.llm.temperature;
        suite.max_output_tokens = config.llm.max_output_tokens;
        for (key, agent_override) in &config.agents {
            let name = AgentName::ALL
                .into_iter()
                .find(|n| n.as_str() == key)
                .ok_or_else(|| AgentError::UnknownAgent(key.clone()))?;
            if let Some(path) = &agent_override.template_path {
                let text = std::fs::read_to_string(path).map_err(|source| AgentError::TemplateIo {
                    agent: name,
                    path: path.display().to_string(),
                    source,
                })?;
                suite.set_template(name, &text)?;
            }
        }
        Ok(suite)
    }

    pub fn set_template(&mut self, name: AgentName, text: &str) -> Result<(), AgentError> {
        let template = Template::parse(text).map_err(|source| AgentError::Template { agent: name, source })?;
        self.specs.get_mut(&name).expect("every agent has a spec").template = template;
        Ok(())
    }

    pub fn spec(&self, name: AgentName) -> &AgentSpec {
        &self.specs[&name]
    }

    fn request(&self, name: AgentName, values: BTreeMap<&str, String>) -> Result<ChatRequest, AgentError> {
        let spec = self.spec(name);
        let user_prompt =
            spec.template.render(&values).map_err(|source| AgentError::Template { agent: name, source })?;
        Ok(ChatRequest {
            system_prompt: spec.role_description.clone(),
            user_prompt,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            model_id: self.model_id.clone(),
        })
    }

    pub fn summary_request(
        &self,
        context: &PackedContext,
        previous: Option<&RepoSummary>,
        prior_issues: &[String],
    ) -> Result<ChatRequest, AgentError> {
        let summary = previous
            .map(|s| format!("\nYour previous summary, to be revised:\n\n{}", s.to_marked_text()))
            .unwrap_or_default();
        let values = BTreeMap::from([
            ("repo_context", context.render()),
            ("summary", summary),
            ("issues", issues_section(prior_issues)),
            ("adrs", String::new()),
            ("retrieved", String::new()),
        ]);
        self.request(AgentName::RepoSummarizer, values)
    }

    pub fn summarize_repo(
        &self,
        llm: &dyn Completer,
        context: &PackedContext,
        previous: Option<&RepoSummary>,
        prior_issues: &[String],
    ) -> Result<Turn<RepoSummary>, AgentError> {
        let request = self.summary_request(context, previous, prior_issues)?;
        let response = llm.complete(&request)?;
        let revision = previous.map_or(1, |p| p.revision + 1);
        let output = parse_summary(&response.text, revision);
        Ok(Turn { agent: AgentName::RepoSummarizer, request, response, output })
    }

    pub fn summary_validation_request(
        &self,
        summary: &RepoSummary,
        context: &PackedContext,
    ) -> Result<ChatRequest, AgentError> {
        let values = BTreeMap::from([
            ("repo_context", context.render()),
            ("summary", summary.to_marked_text()),
            ("issues", String::new()),
            ("adrs", String::new()),
            ("retrieved", String::new()),
        ]);
        self.request(AgentName::SummaryValidator, values)
    }

    pub fn validate_summary(
        &self,
        llm: &dyn Completer,
        summary: &RepoSummary,
        context: &PackedContext,
    ) -> Result<Turn<ValidationVerdict>, AgentError> {
        let request = self.summary_validation_request(summary, context)?;
        let response = llm.complete(&request)?;
        let output = Ok(parse_verdict(&response.text));
        Ok(Turn { agent: AgentName::SummaryValidator, request, response, output })
    }

    pub fn generation_request(
        &self,
        summary: &RepoSummary,
        retrieved: &[SearchHit],
        previous: Option<&AdrSetDraft>,
        prior_issues: &[String],
    ) -> Result<ChatRequest, AgentError> {
        let retrieved_section = if retrieved.is_empty() {
            String::new()
        } else {
            let mut s = String::from(
                "\nExisting decisions on record. Stay consistent with them and do not duplicate them:\n\n",
            );
            for hit in retrieved {
                s.push_str(&format!("[{}]\n{}\n\n", hit.doc_id, hit.text));
            }
            s
        };
        let adrs = previous
            .map(|d| format!("\nYour previous draft, to be revised:\n\n{}", grammar::render_adr_set(&d.adrs)))
            .unwrap_or_default();
        let values = BTreeMap::from([
            ("repo_context", String::new()),
            ("summary", summary.to_marked_text()),
            ("issues", issues_section(prior_issues)),
            ("adrs", adrs),
            ("retrieved", retrieved_section),
        ]);
        self.request(AgentName::AdrGenerator, values)
    }

    pub fn generate_adrs(
        &self,
        llm: &dyn Completer,
        summary: &RepoSummary,
        retrieved: &[SearchHit],
        previous: Option<&AdrSetDraft>,
        prior_issues: &[String],
    ) -> Result<Turn<AdrSetDraft>, AgentError> {
        let request = self.generation_request(summary, retrieved, previous, prior_issues)?;
        let response = llm.complete(&request)?;
        let output = parse_adr_set(&response.text, SourceConfig::Agentic);
        Ok(Turn { agent: AgentName::AdrGenerator, request, response, output })
    }

    /// Looks up the closest existing decision for every draft record and puts
    /// it in front of the validator.
    pub fn adr_validation_request(
        &self,
        draft: &AdrSetDraft,
        summary: &RepoSummary,
        retrieval: Option<&Retrieval<'_>>,
    ) -> Result<ChatRequest, AgentError> {
        let mut nearest = String::new();
        if let Some(r) = retrieval {
            for adr in &draft.adrs {
                if let Some(hit) =
                    r.related(&adr_embedding_text(&adr.title, &adr.context, &adr.decision), 1)?.into_iter().next()
                {
                    nearest.push_str(&format!(
                        "Draft record {} (\"{}\") is closest to existing decision [{}] (similarity {:.4}):\n{}\n\n",
                        adr.id, adr.title, hit.doc_id, hit.score, hit.text
                    ));
                }
            }
        }
        let retrieved = if nearest.is_empty() {
            "\nThere are no existing decisions on record.\n".to_string()
        } else {
            format!("\nExisting decisions closest to each draft record:\n\n{nearest}")
        };
        let values = BTreeMap::from([
            ("repo_context", String::new()),
            ("summary", summary.to_marked_text()),
            ("issues", String::new()),
            ("adrs", grammar::render_adr_set(&draft.adrs)),
            ("retrieved", retrieved),
        ]);
        self.request(AgentName::AdrValidator, values)
    }

    pub fn validate_adrs(
        &self,
        llm: &dyn Completer,
        draft: &AdrSetDraft,
        summary: &RepoSummary,
        retrieval: Option<&Retrieval<'_>>,
    ) -> Result<Turn<ValidationVerdict>, AgentError> {
        let request = self.adr_validation_request(draft, summary, retrieval)?;
        let response = llm.complete(&request)?;
        let output = Ok(parse_verdict(&response.text));
        Ok(Turn { agent: AgentName::AdrValidator, request, response, output })
    }

    pub fn baseline_request(&self, context: &PackedContext) -> Result<ChatRequest, AgentError> {
        let values = BTreeMap::from([
            ("repo_context", context.render()),
            ("summary", String::new()),
            ("issues", String::new()),
            ("adrs", String::new()),
            ("retrieved", String::new()),
        ]);
        self.request(AgentName::BaselineGenerator, values)
    }

    pub fn generate_baseline(
        &self,
        llm: &dyn Completer,
        context: &PackedContext,
    ) -> Result<Turn<AdrSetDraft>, AgentError> {
        let request = self.baseline_request(context)?;
        let response = llm.complete(&request)?;
        let output = parse_adr_set(&response.text, SourceConfig::Baseline);
        Ok(Turn { agent: AgentName::BaselineGenerator, request, response, output })
    }
}

/// Text embedded for a record when indexing or looking up similar decisions.
pub fn adr_embedding_text(title: &str, context: &str, decision: &str) -> String {
    format!("{title}\n{context}\n{decision}")
}

fn issues_section(issues: &[String]) -> String {
    if issues.is_empty() {
        return String::new();
    }
    let mut s = String::from("\nA reviewer rejected the previous draft. Address each of these issues:\n");
    for issue in issues {
        s.push_str(&format!("- {issue}\n"));
    }
    s
}
