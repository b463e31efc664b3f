//! Answer scoring.
//!
//! Answers are normalized before matching: lowercased, every
//! non-alphanumeric character becomes a separator, and filler words such as
//! "the", "service" or "root cause" are dropped. Localization answers may name
//! several components separated by `,`, `;` or "and"; one exact match is
//! enough. Analysis answers must contain the component and a phrase naming
//! the right fault kind, and no phrase naming a different kind.

use crate::agents::{Solution, TaskType};
use crate::env::{FaultKind, GroundTruth};

const STOPWORDS: &[&str] = &[
    "the", "a", "an", "service", "component", "resource", "pod", "instance", "is", "faulty", "root", "cause",
];

fn raw_tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Normalized tokens with filler words removed.
pub fn normalize(s: &str) -> Vec<String> {
    raw_tokens(s).into_iter().filter(|t| !STOPWORDS.contains(&t.as_str())).collect()
}

fn contains_seq(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Phrases that name a fault kind in free text.
pub fn kind_phrases(kind: FaultKind) -> &'static [&'static str] {
    match kind {
        FaultKind::AttributeDrift => &["attribute drift", "attribute_drift", "configuration drift", "config drift", "misconfiguration"],
        FaultKind::ServiceDown => &["service down", "service_down", "crashed", "not running", "process exited"],
        FaultKind::StaleMapping => &["stale mapping", "stale_mapping", "stale address", "address mismatch"],
        FaultKind::MetricAnomaly => &["metric anomaly", "metric_anomaly", "latency spike", "anomalous metric"],
        FaultKind::LogErrorBurst => &["log error burst", "log_error_burst", "error burst", "log errors"],
    }
}

fn names_kind(tokens: &[String], kind: FaultKind) -> bool {
    kind_phrases(kind).iter().any(|p| contains_seq(tokens, &raw_tokens(p)))
}

fn names_component(answer: &str, canonical: &str, aliases: &[String]) -> bool {
    let tokens = normalize(answer);
    std::iter::once(canonical)
        .chain(aliases.iter().map(String::as_str))
        .any(|name| contains_seq(&tokens, &normalize(name)))
}

fn localization_parts(answer: &str) -> Vec<String> {
    let lower = answer.to_lowercase();
    lower
        .split([',', ';'])
        .flat_map(|p| p.split(" and "))
        .map(|p| normalize(p).join(" "))
        .filter(|p| !p.is_empty())
        .collect()
}

/// Pure scoring of one solution against the oracle.
pub fn score(task_type: TaskType, solution: Option<&Solution>, truth: &GroundTruth, aliases: &[String]) -> bool {
    let Some(solution) = solution else {
        return false;
    };
    if solution.task_type != task_type || solution.answer.trim().is_empty() {
        return false;
    }
    let answer = solution.answer.as_str();
    let first = raw_tokens(answer).into_iter().next().unwrap_or_default();
    let says_none = matches!(first.as_str(), "none" | "no" | "nothing");
    match task_type {
        TaskType::Detection => {
            let positive = match first.as_str() {
                "yes" | "true" | "detected" | "incident" => true,
                "no" | "false" | "none" | "healthy" => false,
                _ => return false,
            };
            positive == !truth.violated_properties.is_empty()
        }
        TaskType::Localization => match &truth.faulty_component {
            None => says_none,
            Some(c) => {
                let wanted: Vec<String> = std::iter::once(c.as_str())
                    .chain(aliases.iter().map(String::as_str))
                    .map(|n| normalize(n).join(" "))
                    .collect();
                localization_parts(answer).iter().any(|p| wanted.contains(p))
            }
        },
        TaskType::Analysis => match (&truth.faulty_component, truth.root_cause) {
            (Some(c), Some(kind)) => {
                let tokens = raw_tokens(answer);
                names_component(answer, c, aliases)
                    && names_kind(&tokens, kind)
                    && FaultKind::ALL.iter().filter(|k| **k != kind).all(|k| !names_kind(&tokens, *k))
            }
            _ => says_none,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn truth(component: Option<&str>, kind: Option<FaultKind>) -> GroundTruth {
        GroundTruth {
            violated_properties: component.map(|_| "p".into()).into_iter().collect::<BTreeSet<_>>(),
            faulty_component: component.map(str::to_string),
            root_cause: kind,
        }
    }

    fn sol(t: TaskType, a: &str) -> Solution {
        Solution { task_type: t, answer: a.into() }
    }

    #[test]
    fn detection_no_incident() {
        let t = truth(None, None);
        assert!(score(TaskType::Detection, Some(&sol(TaskType::Detection, "no")), &t, &[]));
        assert!(!score(TaskType::Detection, Some(&sol(TaskType::Detection, "Yes, drift")), &t, &[]));
        assert!(!score(TaskType::Detection, Some(&sol(TaskType::Detection, "maybe")), &t, &[]));
    }

    #[test]
    fn localization_normalizes_filler_words() {
        let t = truth(Some("web"), Some(FaultKind::AttributeDrift));
        let ok = |a: &str| score(TaskType::Localization, Some(&sol(TaskType::Localization, a)), &t, &[]);
        assert!(ok("the web service"));
        assert!(ok("  WEB "));
        assert!(ok("db, web"));
        assert!(!ok("webserver"));
        assert!(!ok("web-db"));
    }

    #[test]
    fn localization_accepts_aliases() {
        let t = truth(Some("node1"), Some(FaultKind::StaleMapping));
        let aliases = vec!["node 1".to_string()];
        assert!(score(TaskType::Localization, Some(&sol(TaskType::Localization, "Node 1")), &t, &aliases));
    }

    #[test]
    fn analysis_is_conjunctive() {
        let t = truth(Some("web"), Some(FaultKind::AttributeDrift));
        let ok = |a: &str| score(TaskType::Analysis, Some(&sol(TaskType::Analysis, a)), &t, &[]);
        assert!(ok("web: attribute_drift (security group changed)"));
        assert!(ok("Configuration drift on the web instance"));
        assert!(!ok("web: service_down"));
        assert!(!ok("db: attribute_drift"));
        assert!(!ok("web: attribute drift or service down"));
    }

    #[test]
    fn missing_or_mismatched_solution_fails() {
        let t = truth(None, None);
        assert!(!score(TaskType::Detection, None, &t, &[]));
        assert!(!score(TaskType::Detection, Some(&sol(TaskType::Localization, "no")), &t, &[]));
    }
}
