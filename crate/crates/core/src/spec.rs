//! Declarative infrastructure specifications.
//!
//! A specification is a small line-oriented document that declares resources
//! (with scalar attributes) and the properties the deployed infrastructure is
//! expected to satisfy. Each property is the unit of verification.
//!
//! ```text
//! # comments start with '#'
//! spec shop
//! meta owner = "sre"
//!
//! resource web {
//!   ami = "ami-123"
//!   security_group = "sg-web"
//! }
//!
//! property web-sg: attribute security_group == "sg-web" on web "web keeps its security group"
//! property: service_running on web
//! ```
//!
//! Predicates:
//!
//! | expression                       | meaning                                       |
//! |----------------------------------|-----------------------------------------------|
//! | `reachable`                      | the node answers at its declared `ip`         |
//! | `service_running`                | the resource's primary process is running     |
//! | `attribute <name> == <scalar>`   | live attribute equals the declared value      |
//! | `logs_clean "<pattern>"`         | no log line contains the pattern              |
//! | `metric <name> in [<lo>, <hi>]`  | every sample of the metric lies in the range  |
//!
//! A property without an explicit id gets `line-<n>`, where `n` is the 1-based
//! line number of its stanza. The trailing quoted string is an optional
//! description.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable property identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropertyId(String);

impl PropertyId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PropertyId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for PropertyId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Scalar attribute or argument value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Scalar {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Plain rendering used in telemetry text (strings unquoted).
    pub fn render(&self) -> String {
        match self {
            Scalar::Str(s) => s.clone(),
            Scalar::Int(i) => i.to_string(),
            Scalar::Float(x) => render_float(*x),
            Scalar::Bool(b) => b.to_string(),
        }
    }

    /// Rendering in the spec document syntax (strings quoted and escaped).
    pub fn to_literal(&self) -> String {
        match self {
            Scalar::Str(s) => quote(s),
            other => other.render(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Str(s.to_string())
    }
}

impl From<i64> for Scalar {
    fn from(i: i64) -> Self {
        Scalar::Int(i)
    }
}

fn render_float(x: f64) -> String {
    let s = x.to_string();
    if s.contains(['.', 'e', 'E']) || !x.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// What a property asserts about its subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropertyPredicate {
    Reachable,
    ServiceRunning,
    AttributeEquals { name: String, expected: Scalar },
    LogsClean { pattern: String },
    MetricInRange { name: String, lo: f64, hi: f64 },
}

impl PropertyPredicate {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PropertyPredicate::Reachable => "reachable",
            PropertyPredicate::ServiceRunning => "service_running",
            PropertyPredicate::AttributeEquals { .. } => "attribute",
            PropertyPredicate::LogsClean { .. } => "logs_clean",
            PropertyPredicate::MetricInRange { .. } => "metric",
        }
    }

    fn to_expr(&self) -> String {
        match self {
            PropertyPredicate::Reachable => "reachable".into(),
            PropertyPredicate::ServiceRunning => "service_running".into(),
            PropertyPredicate::AttributeEquals { name, expected } => {
                format!("attribute {name} == {}", expected.to_literal())
            }
            PropertyPredicate::LogsClean { pattern } => format!("logs_clean {}", quote(pattern)),
            PropertyPredicate::MetricInRange { name, lo, hi } => {
                format!("metric {name} in [{}, {}]", render_float(*lo), render_float(*hi))
            }
        }
    }

    fn default_description(&self, subject: &str) -> String {
        match self {
            PropertyPredicate::Reachable => format!("{subject} is reachable at its declared address"),
            PropertyPredicate::ServiceRunning => format!("{subject} has its service running"),
            PropertyPredicate::AttributeEquals { name, expected } => {
                format!("{subject}.{name} equals {}", expected.render())
            }
            PropertyPredicate::LogsClean { pattern } => {
                format!("{subject} logs contain no \"{pattern}\"")
            }
            PropertyPredicate::MetricInRange { name, lo, hi } => format!(
                "{subject} {name} stays within [{}, {}]",
                render_float(*lo),
                render_float(*hi)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub id: PropertyId,
    pub subject: String,
    pub predicate: PropertyPredicate,
    pub description: String,
}

/// A declared resource with its intended attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceDecl {
    pub name: String,
    pub attributes: IndexMap<String, Scalar>,
}

impl ResourceDecl {
    /// Name of the process that must be running for the resource to be healthy.
    pub fn primary_service(&self) -> String {
        self.attributes
            .get("service")
            .and_then(Scalar::as_str)
            .unwrap_or(&self.name)
            .to_string()
    }

    /// Logical node identifier, for resources addressable by id.
    pub fn node_id(&self) -> Option<String> {
        self.attributes.get("node_id").map(Scalar::render)
    }

    pub fn ip(&self) -> Option<String> {
        self.attributes.get("ip").map(Scalar::render)
    }
}

/// The intended state of an infrastructure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Specification {
    pub id: String,
    pub metadata: IndexMap<String, String>,
    pub resources: Vec<ResourceDecl>,
    pub properties: Vec<Property>,
}

impl Specification {
    pub fn resource(&self, name: &str) -> Option<&ResourceDecl> {
        self.resources.iter().find(|r| r.name == name)
    }

    pub fn property(&self, id: &PropertyId) -> Option<&Property> {
        self.properties.iter().find(|p| &p.id == id)
    }

    pub fn node_by_id(&self, node_id: &str) -> Option<&ResourceDecl> {
        self.resources
            .iter()
            .find(|r| r.node_id().as_deref() == Some(node_id))
    }

    /// Checks the structural invariants a parsed document guarantees.
    pub fn validate(&self) -> Result<(), SpecError> {
        if !is_ident(&self.id) {
            return Err(SpecError::syntax(0, format!("invalid spec id {:?}", self.id)));
        }
        let mut seen_res = std::collections::HashSet::new();
        for r in &self.resources {
            if !is_ident(&r.name) || !seen_res.insert(r.name.as_str()) {
                return Err(SpecError::syntax(0, format!("invalid or duplicate resource {:?}", r.name)));
            }
        }
        if self.properties.is_empty() {
            return Err(SpecError::syntax(0, "specification declares no properties"));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.properties {
            if !seen.insert(p.id.as_str()) {
                return Err(SpecError::DuplicatePropertyId(p.id.to_string()));
            }
            let Some(subject) = self.resource(&p.subject) else {
                return Err(SpecError::UnknownSubject(p.subject.clone()));
            };
            check_predicate(&p.predicate, subject).map_err(|m| SpecError::syntax(0, m))?;
        }
        Ok(())
    }
}

fn check_predicate(pred: &PropertyPredicate, subject: &ResourceDecl) -> Result<(), String> {
    match pred {
        PropertyPredicate::Reachable if subject.node_id().is_none() || subject.ip().is_none() => Err(
            format!("reachable requires `node_id` and `ip` on resource {}", subject.name),
        ),
        PropertyPredicate::MetricInRange { lo, hi, .. } if lo.partial_cmp(hi).is_none_or(|o| o.is_gt()) => {
            Err(format!("metric range [{lo}, {hi}] is empty"))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictValue {
    Satisfied,
    Violated,
    Inconclusive,
}

impl fmt::Display for VerdictValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictValue::Satisfied => "satisfied",
            VerdictValue::Violated => "violated",
            VerdictValue::Inconclusive => "inconclusive",
        })
    }
}

/// Points at one record of one goal in the tool history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRef {
    pub property: PropertyId,
    pub record: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    pub rationale: String,
    pub evidence: Vec<EvidenceRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("syntax error at line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("duplicate property id {0:?}")]
    DuplicatePropertyId(String),
    #[error("property subject {0:?} is not a declared resource")]
    UnknownSubject(String),
}

impl SpecError {
    fn syntax(line: usize, message: impl Into<String>) -> Self {
        SpecError::SyntaxError { line, message: message.into() }
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Num(String),
    Sym(&'static str),
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Tok>, SpecError> {
    let mut toks = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(_, c)) = chars.peek() {
        match c {
            ' ' | '\t' | '\r' => {
                chars.next();
            }
            '#' => break,
            '{' | '}' | ':' | '[' | ']' | ',' => {
                chars.next();
                toks.push(Tok::Sym(match c {
                    '{' => "{",
                    '}' => "}",
                    ':' => ":",
                    '[' => "[",
                    ']' => "]",
                    _ => ",",
                }));
            }
            '=' => {
                chars.next();
                if chars.peek().map(|&(_, c)| c) == Some('=') {
                    chars.next();
                    toks.push(Tok::Sym("=="));
                } else {
                    toks.push(Tok::Sym("="));
                }
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match chars.next().map(|(_, c)| c) {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(c @ ('"' | '\\')) => s.push(c),
                            other => {
                                return Err(SpecError::syntax(
                                    lineno,
                                    format!("bad escape \\{}", other.map(String::from).unwrap_or_default()),
                                ))
                            }
                        },
                        c => s.push(c),
                    }
                }
                if !closed {
                    return Err(SpecError::syntax(lineno, "unterminated string"));
                }
                toks.push(Tok::Str(s));
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => {
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+' | '_') {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                if s.parse::<f64>().is_ok() {
                    toks.push(Tok::Num(s));
                } else {
                    toks.push(Tok::Word(s));
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == '.' => {
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push(Tok::Word(s));
            }
            other => {
                return Err(SpecError::syntax(lineno, format!("unexpected character {other:?}")));
            }
        }
    }
    Ok(toks)
}

struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn err(&self, msg: impl Into<String>) -> SpecError {
        SpecError::syntax(self.line, msg)
    }

    fn word(&mut self, what: &str) -> Result<String, SpecError> {
        match self.next() {
            Some(Tok::Word(w)) if is_ident(w) => Ok(w.clone()),
            Some(Tok::Num(n)) if is_ident(n) => Ok(n.clone()),
            other => Err(self.err(format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SpecError> {
        match self.next() {
            Some(Tok::Word(w)) if w == kw => Ok(()),
            other => Err(self.err(format!("expected `{kw}`, found {}", describe(other)))),
        }
    }

    fn sym(&mut self, s: &str) -> Result<(), SpecError> {
        match self.next() {
            Some(Tok::Sym(x)) if *x == s => Ok(()),
            other => Err(self.err(format!("expected `{s}`, found {}", describe(other)))),
        }
    }

    fn string(&mut self) -> Result<String, SpecError> {
        match self.next() {
            Some(Tok::Str(s)) => Ok(s.clone()),
            other => Err(self.err(format!("expected quoted string, found {}", describe(other)))),
        }
    }

    fn number(&mut self) -> Result<f64, SpecError> {
        match self.next() {
            Some(Tok::Num(n)) => n.parse().map_err(|_| self.err(format!("bad number {n}"))),
            other => Err(self.err(format!("expected number, found {}", describe(other)))),
        }
    }

    fn scalar(&mut self) -> Result<Scalar, SpecError> {
        match self.next() {
            Some(Tok::Str(s)) => Ok(Scalar::Str(s.clone())),
            Some(Tok::Num(n)) => {
                if let Ok(i) = n.parse::<i64>() {
                    Ok(Scalar::Int(i))
                } else {
                    n.parse::<f64>()
                        .map(Scalar::Float)
                        .map_err(|_| self.err(format!("bad number {n}")))
                }
            }
            Some(Tok::Word(w)) if w == "true" => Ok(Scalar::Bool(true)),
            Some(Tok::Word(w)) if w == "false" => Ok(Scalar::Bool(false)),
            other => Err(self.err(format!("expected scalar value, found {}", describe(other)))),
        }
    }

    fn end(&self) -> Result<(), SpecError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("unexpected trailing {}", describe(Some(t))))),
        }
    }
}

fn describe(t: Option<&Tok>) -> String {
    match t {
        None => "end of line".into(),
        Some(Tok::Word(w)) => format!("`{w}`"),
        Some(Tok::Str(s)) => format!("string {s:?}"),
        Some(Tok::Num(n)) => format!("number {n}"),
        Some(Tok::Sym(s)) => format!("`{s}`"),
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// Parses a specification document.
pub fn parse_spec(text: &str) -> Result<Specification, SpecError> {
    let mut id: Option<String> = None;
    let mut metadata = IndexMap::new();
    let mut resources: Vec<ResourceDecl> = Vec::new();
    let mut properties: Vec<Property> = Vec::new();
    let mut open: Option<(ResourceDecl, usize)> = None;
    let mut prop_lines: Vec<usize> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let toks = lex(raw, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor { toks: &toks, pos: 0, line: lineno };

        if let Some((res, _)) = open.as_mut() {
            if toks == [Tok::Sym("}")] {
                let (res, _) = open.take().expect("open resource");
                if resources.iter().any(|r| r.name == res.name) {
                    return Err(SpecError::syntax(lineno, format!("duplicate resource {}", res.name)));
                }
                resources.push(res);
                continue;
            }
            let attr = cur.word("attribute name")?;
            cur.sym("=")?;
            let value = cur.scalar()?;
            cur.end()?;
            if res.attributes.insert(attr.clone(), value).is_some() {
                return Err(cur.err(format!("duplicate attribute {attr}")));
            }
            continue;
        }

        match cur.next() {
            Some(Tok::Word(w)) if w == "spec" => {
                if id.is_some() {
                    return Err(cur.err("duplicate `spec` line"));
                }
                id = Some(cur.word("spec id")?);
                cur.end()?;
            }
            Some(Tok::Word(w)) if w == "meta" => {
                let key = cur.word("metadata key")?;
                cur.sym("=")?;
                let value = match cur.next() {
                    Some(Tok::Str(s)) | Some(Tok::Word(s)) | Some(Tok::Num(s)) => s.clone(),
                    other => return Err(cur.err(format!("expected metadata value, found {}", describe(other)))),
                };
                cur.end()?;
                metadata.insert(key, value);
            }
            Some(Tok::Word(w)) if w == "resource" => {
                let name = cur.word("resource name")?;
                cur.sym("{")?;
                cur.end()?;
                open = Some((ResourceDecl { name, attributes: IndexMap::new() }, lineno));
            }
            Some(Tok::Word(w)) if w == "property" => {
                let pid = match cur.peek() {
                    Some(Tok::Sym(":")) => PropertyId::new(format!("line-{lineno}")),
                    _ => PropertyId::new(cur.word("property id")?),
                };
                cur.sym(":")?;
                let predicate = parse_predicate(&mut cur)?;
                cur.keyword("on")?;
                let subject = cur.word("subject")?;
                let description = match cur.peek() {
                    Some(Tok::Str(_)) => cur.string()?,
                    _ => predicate.default_description(&subject),
                };
                cur.end()?;
                properties.push(Property { id: pid, subject, predicate, description });
                prop_lines.push(lineno);
            }
            other => {
                return Err(cur.err(format!(
                    "expected `spec`, `meta`, `resource` or `property`, found {}",
                    describe(other)
                )))
            }
        }
    }

    if let Some((res, line)) = open {
        return Err(SpecError::syntax(line, format!("resource {} is never closed", res.name)));
    }

    let spec = Specification {
        id: id.unwrap_or_else(|| "spec".to_string()),
        metadata,
        resources,
        properties,
    };
    // Re-run validation with line information for property-level problems.
    let mut seen = std::collections::HashSet::new();
    for (p, line) in spec.properties.iter().zip(&prop_lines) {
        if !seen.insert(p.id.as_str()) {
            return Err(SpecError::DuplicatePropertyId(p.id.to_string()));
        }
        let Some(subject) = spec.resource(&p.subject) else {
            return Err(SpecError::UnknownSubject(p.subject.clone()));
        };
        check_predicate(&p.predicate, subject).map_err(|m| SpecError::syntax(*line, m))?;
    }
    if spec.properties.is_empty() {
        let last = text.lines().count();
        return Err(SpecError::syntax(last, "specification declares no properties"));
    }
    Ok(spec)
}

fn parse_predicate(cur: &mut Cursor<'_>) -> Result<PropertyPredicate, SpecError> {
    let kw = cur.word("predicate")?;
    match kw.as_str() {
        "reachable" => Ok(PropertyPredicate::Reachable),
        "service_running" => Ok(PropertyPredicate::ServiceRunning),
        "attribute" => {
            let name = cur.word("attribute name")?;
            cur.sym("==")?;
            let expected = cur.scalar()?;
            Ok(PropertyPredicate::AttributeEquals { name, expected })
        }
        "logs_clean" => Ok(PropertyPredicate::LogsClean { pattern: cur.string()? }),
        "metric" => {
            let name = cur.word("metric name")?;
            cur.keyword("in")?;
            cur.sym("[")?;
            let lo = cur.number()?;
            cur.sym(",")?;
            let hi = cur.number()?;
            cur.sym("]")?;
            Ok(PropertyPredicate::MetricInRange { name, lo, hi })
        }
        other => Err(cur.err(format!("unknown predicate `{other}`"))),
    }
}

/// Renders a specification in canonical document form.
pub fn serialize_spec(spec: &Specification) -> String {
    let mut out = String::new();
    out.push_str(&format!("spec {}\n", spec.id));
    for (k, v) in &spec.metadata {
        out.push_str(&format!("meta {k} = {}\n", quote(v)));
    }
    for r in &spec.resources {
        out.push_str(&format!("\nresource {} {{\n", r.name));
        for (k, v) in &r.attributes {
            out.push_str(&format!("  {k} = {}\n", v.to_literal()));
        }
        out.push_str("}\n");
    }
    out.push('\n');
    for p in &spec.properties {
        out.push_str(&format!(
            "property {}: {} on {} {}\n",
            p.id,
            p.predicate.to_expr(),
            p.subject,
            quote(&p.description)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_NODES: &str = r#"
spec pair
resource node0 {
  node_id = "0"
  ip = "172.17.0.5"
}
resource node1 {
  node_id = "1"
  ip = "172.17.0.6"
}
property n0: reachable on node0
property n1: reachable on node1
"#;

    #[test]
    fn two_node_document_maps_to_two_properties() {
        let spec = parse_spec(TWO_NODES).unwrap();
        assert_eq!(spec.id, "pair");
        assert_eq!(spec.resources.len(), 2);
        assert_eq!(spec.properties.len(), 2);
        assert_eq!(spec.properties[1].subject, "node1");
        assert_eq!(spec.properties[1].predicate, PropertyPredicate::Reachable);
    }

    #[test]
    fn duplicate_property_id_is_rejected() {
        let doc = TWO_NODES.replace("property n1", "property n0");
        assert_eq!(parse_spec(&doc), Err(SpecError::DuplicatePropertyId("n0".into())));
    }

    #[test]
    fn unknown_subject_is_rejected() {
        let doc = TWO_NODES.replace("on node1", "on node7");
        assert_eq!(parse_spec(&doc), Err(SpecError::UnknownSubject("node7".into())));
    }

    #[test]
    fn default_ids_are_line_numbers() {
        let doc = "resource web {\n  ami = \"x\"\n}\nproperty: service_running on web\n";
        let spec = parse_spec(doc).unwrap();
        assert_eq!(spec.properties[0].id.as_str(), "line-4");
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let doc = "resource web {\n  ami = \n}\nproperty: service_running on web\n";
        match parse_spec(doc) {
            Err(SpecError::SyntaxError { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let doc = "resource web {\n}\nproperty p: metric cpu in [5, 1] on web\n";
        match parse_spec(doc) {
            Err(SpecError::SyntaxError { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unclosed_resource_and_empty_spec() {
        assert!(matches!(
            parse_spec("resource web {\n ami = 1\n"),
            Err(SpecError::SyntaxError { line: 1, .. })
        ));
        assert!(matches!(
            parse_spec("resource web {\n}\n"),
            Err(SpecError::SyntaxError { .. })
        ));
    }

    #[test]
    fn reachable_requires_an_addressable_node() {
        let doc = "resource web {\n}\nproperty p: reachable on web\n";
        assert!(matches!(parse_spec(doc), Err(SpecError::SyntaxError { line: 3, .. })));
    }

    #[test]
    fn all_predicates_round_trip() {
        let doc = r#"
spec mix
meta owner = "sre team"
resource web {
  service = "nginx"
  replicas = 3
  ratio = 0.5
  public = false
  tags.Name = "web \"server\""
}
property a: attribute replicas == 3 on web
property b: logs_clean "ERROR" on web
property c: metric latency_ms in [0, 250.5] on web
property d: service_running on web "custom description"
"#;
        let spec = parse_spec(doc).unwrap();
        assert_eq!(spec.resources[0].primary_service(), "nginx");
        assert_eq!(spec.properties[3].description, "custom description");
        let text = serialize_spec(&spec);
        assert_eq!(parse_spec(&text).unwrap(), spec);
    }

    #[test]
    fn float_rendering_keeps_a_decimal_point() {
        assert_eq!(render_float(1.0), "1.0");
        assert_eq!(render_float(250.5), "250.5");
        assert_eq!(Scalar::Float(3.0).to_literal(), "3.0");
    }
}
