//! Architecture Decision Records and their markdown file format.
//!
//! A rendered record looks like this:
//!
//! ```text
//! # 0001. Adopt layered architecture
//!
//! Status: accepted
//! Source: agentic
//! Provenance: generate-adrs#1, validate-adrs#1
//!
//! ## Context
//!
//! ...
//!
//! ## Decision
//!
//! ...
//!
//! ## Consequences
//!
//! ...
//! ```
//!
//! The `Source:` and `Provenance:` lines are optional on input. `Provenance:`
//! is only written when the record has provenance entries.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_TITLE_CHARS: usize = 200;
pub const MAX_SLUG_CHARS: usize = 60;

const CONTEXT_HEADING: &str = "## Context";
const DECISION_HEADING: &str = "## Decision";
const CONSEQUENCES_HEADING: &str = "## Consequences";
const SECTION_HEADINGS: [&str; 3] = [CONTEXT_HEADING, DECISION_HEADING, CONSEQUENCES_HEADING];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdrStatus {
    Proposed,
    Accepted,
    Unvalidated,
}

impl AdrStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AdrStatus::Proposed => "proposed",
            AdrStatus::Accepted => "accepted",
            AdrStatus::Unvalidated => "unvalidated",
        }
    }
}

impl fmt::Display for AdrStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdrStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(AdrStatus::Proposed),
            "accepted" => Ok(AdrStatus::Accepted),
            "unvalidated" => Ok(AdrStatus::Unvalidated),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// Which pipeline produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceConfig {
    Agentic,
    Baseline,
}

impl SourceConfig {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceConfig::Agentic => "agentic",
            SourceConfig::Baseline => "baseline",
        }
    }
}

impl fmt::Display for SourceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "agentic" => Ok(SourceConfig::Agentic),
            "baseline" => Ok(SourceConfig::Baseline),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adr {
    pub id: u32,
    pub title: String,
    pub status: AdrStatus,
    pub context: String,
    pub decision: String,
    pub consequences: String,
    pub source_config: SourceConfig,
    /// Identifiers of the agent exchanges that produced this record, e.g. `generate-adrs#2`.
    #[serde(default)]
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid ADR field `{field}`: {reason}")]
pub struct SchemaError {
    pub field: &'static str,
    pub reason: String,
}

impl SchemaError {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self { field, reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct AdrParseError {
    pub line: usize,
    pub message: String,
}

impl AdrParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

impl Adr {
    /// Checks every field invariant; the first failing field is reported.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.id == 0 {
            return Err(SchemaError::new("id", "must be >= 1"));
        }
        check_title(&self.title)?;
        check_body("context", &self.context)?;
        check_body("decision", &self.decision)?;
        check_body("consequences", &self.consequences)?;
        for entry in &self.provenance {
            if entry.is_empty() || entry.contains(',') || entry.chars().any(char::is_whitespace) {
                return Err(SchemaError::new(
                    "provenance",
                    format!("entry `{entry}` must be nonempty with no commas or whitespace"),
                ));
            }
        }
        Ok(())
    }
}

fn check_title(title: &str) -> Result<(), SchemaError> {
    let chars = title.chars().count();
    if chars == 0 {
        return Err(SchemaError::new("title", "must not be empty"));
    }
    if chars > MAX_TITLE_CHARS {
        return Err(SchemaError::new("title", format!("{chars} characters exceeds {MAX_TITLE_CHARS}")));
    }
    if title.contains(['\n', '\r']) {
        return Err(SchemaError::new("title", "must be a single line"));
    }
    if title.trim() != title {
        return Err(SchemaError::new("title", "must not have leading or trailing whitespace"));
    }
    Ok(())
}

fn check_body(field: &'static str, body: &str) -> Result<(), SchemaError> {
    if body.trim().is_empty() {
        return Err(SchemaError::new(field, "must not be empty"));
    }
    if body.trim() != body {
        return Err(SchemaError::new(field, "must not have leading or trailing whitespace"));
    }
    if body.contains('\r') {
        return Err(SchemaError::new(field, "must use LF line endings"));
    }
    if let Some(line) = body.lines().find(|l| SECTION_HEADINGS.contains(&l.trim_end())) {
        return Err(SchemaError::new(field, format!("contains a reserved section heading `{line}`")));
    }
    Ok(())
}

pub fn render_adr(adr: &Adr) -> Result<String, SchemaError> {
    adr.validate()?;
    let mut out = format!("# {:04}. {}\n\n", adr.id, adr.title);
    out.push_str(&format!("Status: {}\n", adr.status));
    out.push_str(&format!("Source: {}\n", adr.source_config));
    if !adr.provenance.is_empty() {
        out.push_str(&format!("Provenance: {}\n", adr.provenance.join(", ")));
    }
    push_sections(&mut out, adr);
    Ok(out)
}

/// Renders a record without the `Source:` and `Provenance:` lines, for readers
/// who must not learn which pipeline produced it.
pub fn render_adr_anonymous(adr: &Adr) -> Result<String, SchemaError> {
    adr.validate()?;
    let mut out = format!("# {:04}. {}\n\nStatus: {}\n", adr.id, adr.title, adr.status);
    push_sections(&mut out, adr);
    Ok(out)
}

fn push_sections(out: &mut String, adr: &Adr) {
    for (heading, body) in
        [(CONTEXT_HEADING, &adr.context), (DECISION_HEADING, &adr.decision), (CONSEQUENCES_HEADING, &adr.consequences)]
    {
        out.push('\n');
        out.push_str(heading);
        out.push_str("\n\n");
        out.push_str(body);
        out.push('\n');
    }
}

pub fn parse_adr(document: &str) -> Result<Adr, AdrParseError> {
    let lines: Vec<&str> = document.lines().collect();
    let first =
        lines.iter().position(|l| !l.trim().is_empty()).ok_or_else(|| AdrParseError::new(1, "empty document"))?;
    let (id, title) = parse_id_line(lines[first]).map_err(|m| AdrParseError::new(first + 1, m))?;
    let header = parse_metadata(&lines, first + 1)?;
    let sections = parse_sections(&lines, header.next_line, first + 1)?;

    let adr = Adr {
        id,
        title,
        status: header.status.ok_or_else(|| AdrParseError::new(first + 2, "missing `Status:` line"))?,
        context: sections[0].clone(),
        decision: sections[1].clone(),
        consequences: sections[2].clone(),
        source_config: header.source.unwrap_or(SourceConfig::Agentic),
        provenance: header.provenance,
    };
    adr.validate().map_err(|e| AdrParseError::new(first + 1, e.to_string()))?;
    Ok(adr)
}

fn parse_id_line(line: &str) -> Result<(u32, String), String> {
    let rest = line.strip_prefix("# ").ok_or("expected `# NNNN. Title` id line")?;
    let (digits, title) = rest.split_once(". ").ok_or("malformed id line: expected `NNNN. ` before the title")?;
    if digits.len() < 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("malformed id `{digits}`: expected at least four digits"));
    }
    let id: u32 = digits.parse().map_err(|_| format!("id `{digits}` out of range"))?;
    if format!("{id:04}") != digits {
        return Err(format!("id `{digits}` is not canonically zero-padded"));
    }
    Ok((id, title.to_string()))
}

#[derive(Default)]
struct Metadata {
    status: Option<AdrStatus>,
    source: Option<SourceConfig>,
    provenance: Vec<String>,
    next_line: usize,
}

/// Reads the `Status:`/`Source:`/`Provenance:` block that precedes the first
/// section heading. `start` is a 0-based line index.
fn parse_metadata(lines: &[&str], start: usize) -> Result<Metadata, AdrParseError> {
    let mut meta = Metadata::default();
    let mut i = start;
    while i < lines.len() {
        let line = lines[i].trim_end();
        if line.starts_with("## ") {
            break;
        }
        if let Some(v) = line.strip_prefix("Status:") {
            meta.status = Some(v.trim().parse().map_err(|e: String| AdrParseError::new(i + 1, e))?);
        } else if let Some(v) = line.strip_prefix("Source:") {
            meta.source = Some(v.trim().parse().map_err(|e: String| AdrParseError::new(i + 1, e))?);
        } else if let Some(v) = line.strip_prefix("Provenance:") {
            meta.provenance = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        } else if !line.trim().is_empty() {
            return Err(AdrParseError::new(i + 1, format!("unexpected line before `{CONTEXT_HEADING}`")));
        }
        i += 1;
    }
    meta.next_line = i;
    Ok(meta)
}

/// Splits the remainder of the document into the three required sections, in order.
fn parse_sections(lines: &[&str], start: usize, title_line: usize) -> Result<[String; 3], AdrParseError> {
    let mut positions = [None; 3];
    let mut expected = 0usize;
    for (i, line) in lines.iter().enumerate().skip(start) {
        let line = line.trim_end();
        if let Some(idx) = SECTION_HEADINGS.iter().position(|h| *h == line) {
            if idx != expected {
                let missing = SECTION_HEADINGS.get(expected).copied().unwrap_or("end of document");
                return Err(AdrParseError::new(i + 1, format!("out-of-order heading `{line}`, expected `{missing}`")));
            }
            positions[idx] = Some(i);
            expected += 1;
        }
    }
    if expected < 3 {
        let line = lines.len().max(title_line);
        return Err(AdrParseError::new(line, format!("missing section `{}`", SECTION_HEADINGS[expected])));
    }
    let pos = positions.map(|p| p.expect("all headings located"));
    let body = |from: usize, to: usize| lines[from + 1..to].join("\n").trim().to_string();
    Ok([body(pos[0], pos[1]), body(pos[1], pos[2]), body(pos[2], lines.len())])
}

/// Parses one generator block: the ADR grammar without the id line, so the
/// title line is `# Title`. Any `Status:`/`Source:` lines are ignored; the
/// caller assigns id, status and source.
pub(crate) fn parse_adr_body(block: &str, id: u32, source: SourceConfig) -> Result<Adr, AdrParseError> {
    let lines: Vec<&str> = block.lines().collect();
    let first = lines.iter().position(|l| !l.trim().is_empty()).ok_or_else(|| AdrParseError::new(1, "empty block"))?;
    let raw_title = lines[first]
        .trim_end()
        .strip_prefix("# ")
        .ok_or_else(|| AdrParseError::new(first + 1, "expected `# Title` line"))?;
    let title = strip_numbering(raw_title).trim().to_string();

    let mut i = first + 1;
    while i < lines.len() && !lines[i].trim_end().starts_with("## ") {
        let l = lines[i].trim();
        if !(l.is_empty() || l.starts_with("Status:") || l.starts_with("Source:") || l.starts_with("Provenance:")) {
            return Err(AdrParseError::new(i + 1, format!("unexpected line before `{CONTEXT_HEADING}`")));
        }
        i += 1;
    }
    let sections = parse_sections(&lines, i, first + 1)?;
    let adr = Adr {
        id,
        title,
        status: AdrStatus::Proposed,
        context: sections[0].clone(),
        decision: sections[1].clone(),
        consequences: sections[2].clone(),
        source_config: source,
        provenance: Vec::new(),
    };
    adr.validate().map_err(|e| AdrParseError::new(first + 1, e.to_string()))?;
    Ok(adr)
}

/// Drops a leading `NNNN. ` if a model copied the numbered title style.
fn strip_numbering(title: &str) -> &str {
    match title.split_once(". ") {
        Some((digits, rest)) if digits.len() == 4 && digits.bytes().all(|b| b.is_ascii_digit()) => rest,
        _ => title,
    }
}

pub fn slugify(title: &str) -> String {
    let mut slug = String::with_capacity(title.len());
    let mut pending_dash = false;
    for c in title.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            if pending_dash && !slug.is_empty() {
                slug.push('-');
            }
            pending_dash = false;
            slug.push(c);
        } else {
            pending_dash = true;
        }
    }
    let truncated: String = slug.chars().take(MAX_SLUG_CHARS).collect();
    truncated.trim_end_matches('-').to_string()
}

pub fn adr_filename(adr: &Adr) -> String {
    let slug = slugify(&adr.title);
    if slug.is_empty() {
        format!("{:04}.md", adr.id)
    } else {
        format!("{:04}-{}.md", adr.id, slug)
    }
}
