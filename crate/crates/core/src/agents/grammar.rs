//! Parsers for the three agent output grammars: marker-delimited summaries,
//! validator verdicts, and `=== ADR ===`-delimited record sets.

use thiserror::Error;

use crate::adr::{parse_adr_body, Adr, SourceConfig};
use crate::model::{Component, RepoSummary, ValidationVerdict, UNPARSEABLE_VALIDATOR_OUTPUT};

pub const ADR_DELIMITER: &str = "=== ADR ===";
pub const VERDICT_ACCEPT: &str = "VERDICT: ACCEPT";
pub const VERDICT_REJECT: &str = "VERDICT: REJECT";
pub const ISSUE_PREFIX: &str = "ISSUE:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("summary is missing the `OVERVIEW:` marker")]
    MissingOverview,
    #[error("summary overview is empty")]
    EmptyOverview,
    #[error("component on line {0} has an empty name")]
    EmptyComponentName(usize),
    #[error("reply contains no `{ADR_DELIMITER}` blocks")]
    NoAdrBlocks,
    #[error("block {index}: {message}")]
    BadAdrBlock { index: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Overview,
    Components,
    Technologies,
    DecisionHints,
}

/// Recognizes a marker line, tolerating markdown decoration like `## ` or `**`.
fn marker(line: &str) -> Option<(Section, &str)> {
    let stripped = line.trim().trim_start_matches(['#', '*', ' ']);
    for (name, section) in [
        ("OVERVIEW:", Section::Overview),
        ("COMPONENTS:", Section::Components),
        ("TECHNOLOGIES:", Section::Technologies),
        ("DECISION_HINTS:", Section::DecisionHints),
    ] {
        if let Some(rest) = stripped.strip_prefix(name) {
            return Some((section, rest.trim_start_matches('*').trim()));
        }
    }
    None
}

fn list_item(line: &str) -> Option<&str> {
    let t = line.trim();
    let t = t.strip_prefix("- ").or_else(|| t.strip_prefix("* ")).unwrap_or(t).trim();
    (!t.is_empty()).then_some(t)
}

pub fn parse_summary(text: &str, revision: u32) -> Result<RepoSummary, GrammarError> {
    let mut section = None;
    let mut saw_overview = false;
    let mut overview = Vec::new();
    let mut components = Vec::new();
    let mut technologies = Vec::new();
    let mut decision_hints = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let (content, is_marker) = match marker(line) {
            Some((s, rest)) => {
                section = Some(s);
                saw_overview |= s == Section::Overview;
                (rest, true)
            }
            None => (line, false),
        };
        match section {
            None => {}
            Some(Section::Overview) => {
                if !(is_marker && content.is_empty()) {
                    overview.push(content.trim_end());
                }
            }
            Some(Section::Components) => {
                if let Some(item) = list_item(content) {
                    let (name, resp) = item.split_once(':').unwrap_or((item, ""));
                    let name = name.trim().trim_matches(['*', '`']).trim();
                    if name.is_empty() {
                        return Err(GrammarError::EmptyComponentName(i + 1));
                    }
                    components.push(Component { name: name.to_string(), responsibility: resp.trim().to_string() });
                }
            }
            Some(Section::Technologies) => technologies.extend(list_item(content).map(String::from)),
            Some(Section::DecisionHints) => decision_hints.extend(list_item(content).map(String::from)),
        }
    }
    if !saw_overview {
        return Err(GrammarError::MissingOverview);
    }
    let overview = overview.join("\n").trim().to_string();
    if overview.is_empty() {
        return Err(GrammarError::EmptyOverview);
    }
    Ok(RepoSummary { overview, components, technologies, decision_hints, revision })
}

/// Fail-closed verdict parsing: only an exact `VERDICT: ACCEPT` line, with no
/// `VERDICT: REJECT` line anywhere, counts as acceptance.
pub fn parse_verdict(text: &str) -> ValidationVerdict {
    let mut accept = false;
    let mut reject = false;
    let mut issues = Vec::new();
    for line in text.lines().map(str::trim) {
        if line == VERDICT_ACCEPT {
            accept = true;
        } else if line == VERDICT_REJECT {
            reject = true;
        } else if let Some(issue) = line.strip_prefix(ISSUE_PREFIX) {
            let issue = issue.trim();
            if !issue.is_empty() {
                issues.push(issue.to_string());
            }
        }
    }
    match (accept, reject) {
        (true, false) => ValidationVerdict { accepted: true, issues: Vec::new(), raw_response: text.to_string() },
        (_, true) => ValidationVerdict::reject(issues, text),
        (false, false) => ValidationVerdict::reject(vec![UNPARSEABLE_VALIDATOR_OUTPUT.to_string()], text),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdrSetDraft {
    pub adrs: Vec<Adr>,
    /// Any text the generator wrote before the first record.
    pub generator_notes: String,
}

/// Splits a generator reply into records; ids are assigned 1, 2, ... in order.
pub fn parse_adr_set(text: &str, source: SourceConfig) -> Result<AdrSetDraft, GrammarError> {
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut notes = Vec::new();
    for line in text.lines() {
        if line.trim() == ADR_DELIMITER {
            blocks.push(Vec::new());
        } else if let Some(block) = blocks.last_mut() {
            block.push(line);
        } else {
            notes.push(line);
        }
    }
    let blocks: Vec<String> = blocks.into_iter().map(|b| b.join("\n")).filter(|b| !b.trim().is_empty()).collect();
    if blocks.is_empty() {
        return Err(GrammarError::NoAdrBlocks);
    }
    let adrs = blocks
        .iter()
        .enumerate()
        .map(|(i, block)| {
            parse_adr_body(block, i as u32 + 1, source)
                .map_err(|e| GrammarError::BadAdrBlock { index: i + 1, message: e.to_string() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AdrSetDraft { adrs, generator_notes: notes.join("\n").trim().to_string() })
}

/// Renders a draft in the generator's own block format, for feeding back to
/// the generator or the validator.
pub fn render_adr_set(adrs: &[Adr]) -> String {
    let mut out = String::new();
    for adr in adrs {
        out.push_str(&format!(
            "{ADR_DELIMITER}\n# {}\n\n## Context\n\n{}\n\n## Decision\n\n{}\n\n## Consequences\n\n{}\n\n",
            adr.title, adr.context, adr.decision, adr.consequences
        ));
    }
    out
}
