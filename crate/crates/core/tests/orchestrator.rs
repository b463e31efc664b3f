use std::path::PathBuf;

use riva_core::agents::{run_react, run_riva, Actor, ConfigError, OrchestratorConfig, StepKind, Termination};
use riva_core::harness::{replay_backend, Scenario};
use riva_core::llm::{ChatBackend, ReplayBackend, ScriptDefault, ScriptRule, ScriptedBackend};
use riva_core::spec::{PropertyId, VerdictValue};
use riva_core::toolkit::ToolRegistry;

fn scenario(name: &str) -> Scenario {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/scenarios").join(name);
    Scenario::load(&p).unwrap()
}

fn rules(json: &str) -> ScriptedBackend {
    ScriptedBackend::from_json(json).unwrap()
}

fn riva(s: &Scenario, backend: &dyn ChatBackend, config: &OrchestratorConfig) -> riva_core::agents::RunOutcome {
    let mut env = s.environment(s.file.seed).unwrap();
    run_riva(&s.agent_task(), &mut env, &ToolRegistry::standard(), backend, config).unwrap()
}

#[test]
fn policy_run_concludes_with_k_records_and_submits() {
    let s = scenario("s1_stale_mapping.json");
    let out = riva(&s, &ScriptedBackend::policy(), &OrchestratorConfig::default());
    assert_eq!(out.trajectory.terminated_by, Termination::Submit);
    assert_eq!(out.solution.unwrap().answer, "node1");
    let v = &out.verdicts[&PropertyId::new("node1-reachable")];
    assert_eq!(v.value, VerdictValue::Violated);
    assert_eq!(v.evidence.len(), 2);
    assert!(out.history.unwrap().check_invariants().is_ok());
}

#[test]
fn premature_conclusion_is_rejected_and_the_run_recovers() {
    let s = scenario("s1_stale_mapping.json");
    let backend = rules(
        r#"{"rules": [{"when": {"agent": "verifier", "turn": 1},
            "reply": "```json\n{\"action\": \"conclude\", \"property\": \"node1-reachable\", \"verdict\": \"violated\", \"evidence\": [], \"rationale\": \"ping looked odd\"}\n```"}]}"#,
    );
    let out = riva(&s, &backend, &OrchestratorConfig::default());
    let feedback: Vec<&str> = out
        .trajectory
        .steps
        .iter()
        .filter(|st| st.kind == StepKind::Feedback)
        .map(|st| st.payload.as_str())
        .collect();
    assert!(feedback.iter().any(|f| f.contains("has 0 of 2 records")), "{feedback:?}");
    assert_eq!(out.trajectory.terminated_by, Termination::Submit);
    assert_eq!(out.verdicts[&PropertyId::new("node1-reachable")].evidence.len(), 2);
}

#[test]
fn unparseable_verifier_gets_one_reprompt_then_wastes_the_step() {
    let s = scenario("s6_healthy_shop.json");
    let backend = rules(r#"{"rules": [{"when": {"agent": "verifier"}, "reply": "Still thinking."}]}"#);
    let config = OrchestratorConfig { max_steps: 6, ..OrchestratorConfig::default() };
    let out = riva(&s, &backend, &config);
    assert_eq!(out.trajectory.terminated_by, Termination::StepCapReached);
    assert_eq!(out.trajectory.counted_steps(), 6);
    let wasted = out.trajectory.steps.iter().filter(|st| st.payload.starts_with("protocol violation")).count();
    assert_eq!(wasted, 3);
    assert!(out.solution.is_none());
}

#[test]
fn a_generator_repeating_itself_starves_the_request() {
    let s = scenario("s1_stale_mapping.json");
    let backend = rules(
        r#"{"rules": [{"when": {"agent": "toolgen", "contains": "\"phase\": \"generate\""},
            "reply": "```json\n{\"action\": \"call\", \"tool\": \"ping_node\", \"args\": {\"id\": \"1\"}}\n```"}]}"#,
    );
    let config = OrchestratorConfig { max_steps: 20, ..OrchestratorConfig::default() };
    let out = riva(&s, &backend, &config);
    let steps = &out.trajectory.steps;
    assert!(steps.iter().any(|st| st.payload.contains("already used")));
    assert!(steps.iter().any(|st| st.payload.contains("starved")));
    let h = out.history.unwrap();
    assert!(h.check_invariants().is_ok());
    assert!(h.goals().all(|(_, g)| g.records.len() <= 1));
    assert_eq!(h.conclusive_count(), 0);
}

#[test]
fn backend_failure_ends_the_run_with_the_error() {
    let s = scenario("s3_checkout_errors.json");
    let out = riva(&s, &ReplayBackend::new(Vec::<String>::new()), &OrchestratorConfig::default());
    assert_eq!(out.trajectory.terminated_by, Termination::BackendFailure);
    assert!(out.trajectory.error.as_deref().unwrap().contains("replay exhausted"));
    assert_eq!(out.trajectory.counted_steps(), 0);
}

#[test]
fn invalid_configuration_is_refused() {
    let s = scenario("s3_checkout_errors.json");
    let mut env = s.environment(1).unwrap();
    let config = OrchestratorConfig { k: 0, ..OrchestratorConfig::default() };
    let err = run_riva(&s.agent_task(), &mut env, &ToolRegistry::standard(), &ScriptedBackend::policy(), &config)
        .unwrap_err();
    assert_eq!(err, ConfigError::InvalidK);
}

#[test]
fn a_recorded_trajectory_replays_identically() {
    for name in ["s1_stale_mapping.json", "s5_payments_down.json"] {
        let s = scenario(name);
        let first = riva(&s, &ScriptedBackend::policy(), &OrchestratorConfig::default());
        let again = riva(&s, &replay_backend(&first.trajectory), &OrchestratorConfig::default());
        assert_eq!(again.trajectory.to_json(), first.trajectory.to_json());
        assert_eq!(again.history.unwrap().to_json(), first.history.unwrap().to_json());
    }
}

#[test]
fn snapshots_only_ever_grow() {
    let s = scenario("s6_healthy_shop.json");
    let config = OrchestratorConfig { snapshot_history: true, ..OrchestratorConfig::default() };
    let out = riva(&s, &ScriptedBackend::policy(), &config);
    assert!(out.history_snapshots.len() >= 4);
    for w in out.history_snapshots.windows(2) {
        assert!(w[1].extends(&w[0]));
    }
}

#[test]
fn prompt_tokens_never_shrink_within_a_conversation() {
    let s = scenario("s7_orders_errors.json");
    let out = riva(&s, &ScriptedBackend::policy(), &OrchestratorConfig::default());
    let mut last: std::collections::BTreeMap<usize, u64> = Default::default();
    for st in out.trajectory.steps.iter().filter(|st| st.counted) {
        let conv = st.conversation.unwrap();
        let prompt = st.token_usage.unwrap().prompt_tokens;
        if let Some(prev) = last.insert(conv, prompt) {
            assert!(prompt >= prev, "conversation {conv}: {prev} -> {prompt}");
        }
    }
    assert!(out.trajectory.steps.iter().any(|st| st.actor == Actor::Toolgen));
}

#[test]
fn react_trusts_an_empty_log_read() {
    let s = scenario("s3_checkout_errors.json");
    let mut registry = ToolRegistry::standard();
    registry.apply_fault(riva_core::toolkit::ToolFaultConfig::of(["get_logs"])).unwrap();
    let mut env = s.environment(s.file.seed).unwrap();
    let out = run_react(&s.agent_task(), &mut env, &registry, &ScriptedBackend::policy(), 45).unwrap();
    assert_eq!(out.trajectory.terminated_by, Termination::Submit);
    assert!(out.history.is_none());
    assert!(out.solution.unwrap().answer.starts_with("no"));
}

#[test]
fn react_respects_the_step_cap() {
    let s = scenario("s6_healthy_shop.json");
    let backend = ScriptedBackend::new(
        vec![ScriptRule {
            when: Default::default(),
            reply: "```json\n{\"action\": \"call\", \"tool\": \"get_logs\", \"args\": {\"service\": \"web\"}}\n```".into(),
        }],
        ScriptDefault::Policy,
    )
    .unwrap();
    let mut env = s.environment(1).unwrap();
    let out = run_react(&s.agent_task(), &mut env, &ToolRegistry::standard(), &backend, 7).unwrap();
    assert_eq!(out.trajectory.terminated_by, Termination::StepCapReached);
    assert_eq!(out.trajectory.counted_steps(), 7);
}
