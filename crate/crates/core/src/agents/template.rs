//! `{name}` placeholder templates. No nesting and no escapes: a `{` opens a
//! placeholder only when followed by an identifier and a closing `}`; any
//! other brace is literal text.

use std::collections::BTreeMap;

use thiserror::Error;

pub const PLACEHOLDERS: &[&str] = &["repo_context", "summary", "issues", "adrs", "retrieved"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown placeholder `{{{name}}}` at byte {offset}")]
    UnknownPlaceholder { name: String, offset: usize },
    #[error("no value supplied for placeholder `{{{0}}}`")]
    MissingValue(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    segments: Vec<Segment>,
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut rest = source;
        let mut offset = 0;
        while let Some(open) = rest.find('{') {
            literal.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let ident_len = after.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(after.len());
            if ident_len > 0 && after[ident_len..].starts_with('}') {
                let name = &after[..ident_len];
                let known = PLACEHOLDERS.iter().find(|p| **p == name).ok_or_else(|| {
                    TemplateError::UnknownPlaceholder { name: name.to_string(), offset: offset + open }
                })?;
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Placeholder(known));
                let consumed = open + 1 + ident_len + 1;
                offset += consumed;
                rest = &rest[consumed..];
            } else {
                literal.push('{');
                offset += open + 1;
                rest = after;
            }
        }
        literal.push_str(rest);
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Self { source: source.to_string(), segments })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Placeholder(p) => Some(*p),
            Segment::Literal(_) => None,
        })
    }

    /// Substitutes in a single pass; inserted values are never re-scanned.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len());
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Placeholder(p) => {
                    out.push_str(values.get(p).ok_or_else(|| TemplateError::MissingValue(p.to_string()))?)
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(pairs: &[(&'static str, &str)]) -> BTreeMap<&'static str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn substitutes_known_placeholders() {
        let t = Template::parse("A {summary} B {issues}").unwrap();
        assert_eq!(t.render(&values(&[("summary", "S"), ("issues", "I")])).unwrap(), "A S B I");
        assert_eq!(t.placeholders().collect::<Vec<_>>(), ["summary", "issues"]);
    }

    #[test]
    fn unknown_placeholder_is_error() {
        assert_eq!(
            Template::parse("x {sumary}").unwrap_err(),
            TemplateError::UnknownPlaceholder { name: "sumary".into(), offset: 2 }
        );
    }

    #[test]
    fn non_placeholder_braces_are_literal() {
        let t = Template::parse("{ } {} {a b} {{summary}}").unwrap();
        assert_eq!(t.render(&values(&[("summary", "S")])).unwrap(), "{ } {} {a b} {S}");
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = Template::parse("{summary}").unwrap();
        assert_eq!(t.render(&values(&[("summary", "{issues}")])).unwrap(), "{issues}");
    }

    #[test]
    fn missing_value_is_error() {
        let t = Template::parse("{adrs}").unwrap();
        assert!(matches!(t.render(&BTreeMap::new()), Err(TemplateError::MissingValue(_))));
    }
}
