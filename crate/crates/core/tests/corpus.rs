//! Sanity checks on the shipped scenarios, independent of any agent.

use std::path::PathBuf;

use riva_core::agents::policy::{interpret, positive_answer, Assessment};
use riva_core::agents::{Solution, TaskType};
use riva_core::harness::{score, Scenario, Suite};
use riva_core::toolkit::{available_paths, ToolOutcome, ToolRegistry};

fn scenarios() -> Vec<Scenario> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/suites/default.json");
    Suite::load(&p).unwrap().scenarios
}

#[test]
fn declared_surface_counts_match_the_tools() {
    for s in scenarios() {
        let counts: Vec<usize> = s.available_tools().iter().map(|(_, t)| t.len()).collect();
        assert_eq!(counts.iter().max().copied(), Some(s.file.surfaces_per_property), "{}", s.name());
        assert!(counts.iter().all(|c| *c >= 1), "{}: a property has no tool", s.name());
    }
}

#[test]
fn every_violated_property_is_caught_by_two_tools() {
    let registry = ToolRegistry::standard();
    for s in scenarios() {
        let mut env = s.environment(s.file.seed).unwrap();
        let truth = s.ground_truth(&env);
        for p in &s.spec.properties {
            let mut drift = 0;
            let mut consistent = 0;
            for call in available_paths(&registry, &env.clone(), p) {
                let ToolOutcome::Success(out) = registry.invoke(&call, &mut env) else {
                    panic!("{}: {} failed", s.name(), call.render());
                };
                match interpret(&s.spec, p, &call, &out) {
                    Assessment::Drift(_) => drift += 1,
                    Assessment::Consistent(_) => consistent += 1,
                    other => panic!("{}: {} gave {other:?}", s.name(), call.render()),
                }
            }
            if truth.violated_properties.contains(&p.id) {
                assert!(drift >= 2, "{}: {} is caught by {drift} tools", s.name(), p.id);
            } else {
                assert_eq!(drift, 0, "{}: {} falsely drifts", s.name(), p.id);
                assert!(consistent >= 2, "{}: {}", s.name(), p.id);
            }
        }
    }
}

#[test]
fn expected_answers_score_from_ground_truth_alone() {
    for s in scenarios() {
        let env = s.environment(s.file.seed).unwrap();
        let truth = s.ground_truth(&env);
        let task = s.file.task_type;
        let answer = match (task, &truth.faulty_component, truth.root_cause) {
            (TaskType::Detection, _, _) => {
                if truth.violated_properties.is_empty() { "no" } else { "yes" }.to_string()
            }
            (TaskType::Localization, Some(c), _) => c.clone(),
            (TaskType::Analysis, Some(c), Some(k)) => format!("{c}: {k}"),
            _ => "none".to_string(),
        };
        let sol = Solution { task_type: task, answer };
        assert!(score(task, Some(&sol), &truth, &s.file.aliases), "{}: {}", s.name(), sol.answer);
    }
}

#[test]
fn policy_answers_for_the_first_violation_score() {
    for s in scenarios() {
        let env = s.environment(s.file.seed).unwrap();
        let truth = s.ground_truth(&env);
        let Some(first) = s.spec.properties.iter().find(|p| truth.violated_properties.contains(&p.id)) else {
            continue;
        };
        let answer = positive_answer(s.file.task_type, first, &["drift observed".into()]);
        let sol = Solution { task_type: s.file.task_type, answer };
        // Stale mappings are only told apart from outages by identity evidence.
        if truth.root_cause == Some(riva_core::env::FaultKind::StaleMapping) && s.file.task_type == TaskType::Analysis {
            continue;
        }
        assert!(score(s.file.task_type, Some(&sol), &truth, &s.file.aliases), "{}: {}", s.name(), sol.answer);
    }
}

#[test]
fn violations_sit_within_the_first_two_properties() {
    for s in scenarios() {
        let env = s.environment(s.file.seed).unwrap();
        let truth = s.ground_truth(&env);
        if truth.violated_properties.is_empty() {
            assert!(s.spec.properties.len() <= 2, "{}", s.name());
            continue;
        }
        let first = s.spec.properties.iter().position(|p| truth.violated_properties.contains(&p.id)).unwrap();
        assert!(first < 2, "{}", s.name());
    }
}
