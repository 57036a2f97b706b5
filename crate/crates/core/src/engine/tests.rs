use std::sync::Arc;

use super::*;
use crate::corpus::{showcases, Showcase};
use crate::facts::FactKey;
use crate::sim::Scenario;

fn models() -> Arc<Models> {
    Arc::new(Models::builtin())
}

fn showcase(name: &str) -> Showcase {
    showcases().into_iter().find(|s| s.name == name).expect("showcase")
}

/// Steps a session to the given tick.
fn step_to(ss: &mut ScenarioSession, tick: u64) {
    while ss.session().last_tick().unwrap_or(0) < tick && !ss.finished() {
        ss.step(1).unwrap();
    }
}

#[test]
fn showcases_ground_to_their_gold_plans() {
    let m = models();
    for s in showcases() {
        let out = run_scenario(&s.scenario, m.clone(), EngineConfig::default()).unwrap();
        let gold = s.scenario.gold.clone().unwrap();
        let want = PlanSummary {
            action: gold.action,
            targets: gold.targets,
        };
        assert_eq!(out.summary.as_ref(), Some(&want), "{}", s.name);
        assert!(out.utterances.iter().all(|u| u.error.is_none()), "{}", s.name);
    }
}

#[test]
fn future_fact_resolves_once_the_event_is_seen() {
    let s = showcase("future-tense-pending-fact");
    let mut ss = ScenarioSession::new(s.scenario.clone(), models(), EngineConfig::default()).unwrap();
    step_to(&mut ss, 2);
    let r = ss.ground("The box I will put down is my snack.").unwrap();
    assert!(r.updates.is_empty());
    let pending = r.pending.expect("pending fact");
    assert_eq!(pending.action, HumanAction::PutDown);
    assert!(pending.resolved.is_none());
    let key = FactKey::new("Snack", "box2");
    assert!((ss.session().beliefs().query(&key) - 0.5).abs() < 1e-12);

    step_to(&mut ss, 29);
    let p = &ss.session().pending()[0];
    let res = p.resolved.as_ref().expect("resolved");
    assert_eq!(res.entity, "box2");
    assert!(res.tick > 10, "resolved at {}", res.tick);
    assert!((ss.session().beliefs().query(&key) - 0.9).abs() < 1e-9);
    assert!(ss.session().beliefs().query(&FactKey::new("Snack", "box1")) <= 0.5);
}

#[test]
fn conjunction_fact_updates_every_member() {
    let s = showcase("conjunction-pack-up");
    let mut ss = ScenarioSession::new(s.scenario.clone(), models(), EngineConfig::default()).unwrap();
    step_to(&mut ss, 3);
    let r = ss.ground("The can and the box are my snack.").unwrap();
    let keys: Vec<_> = r.updates.iter().map(|u| u.key.entity.as_str()).collect();
    assert_eq!(keys, ["can1", "box1"]);
    for u in &r.updates {
        assert!((u.posterior - 0.9).abs() < 1e-9);
    }
    assert!(r.plan.is_none());
}

#[test]
fn future_tense_inside_a_command_is_rejected() {
    let s = showcase("event-disambiguated-lift");
    let mut ss = ScenarioSession::new(s.scenario, models(), EngineConfig::default()).unwrap();
    let e = ss.ground("Pick up the box I will put down.").unwrap_err();
    assert!(matches!(e, EngineError::FutureInCommand), "{e}");
}

#[test]
fn missing_referent_and_parse_errors() {
    let s = showcase("event-disambiguated-lift");
    let mut ss = ScenarioSession::new(s.scenario, models(), EngineConfig::default()).unwrap();
    let e = ss.ground("Pick up the cup.").unwrap_err();
    assert!(matches!(e, EngineError::NoReferent { .. }), "{e}");
    let e = ss.ground("box the up the").unwrap_err();
    assert!(e.is_parse(), "{e}");
    let e = ss.ground("Pick up it.").unwrap_err();
    assert!(matches!(e, EngineError::NoReferent { .. } | EngineError::Parse(_)), "{e}");
}

#[test]
fn frames_must_arrive_in_tick_order() {
    let s = showcase("event-disambiguated-lift");
    let frames = crate::sim::simulate(&s.scenario).unwrap();
    let mut session = Session::new(s.scenario.world_model().unwrap(), models(), EngineConfig::default());
    session.observe(frames[3].detections.clone()).unwrap();
    let e = session.observe(frames[1].detections.clone()).unwrap_err();
    assert!(matches!(e, EngineError::OutOfOrder { last: 3, got: 1 }), "{e}");
}

#[test]
fn pronoun_reuses_the_last_binding() {
    let s = showcase("snack-fact-then-pick");
    let mut ss = ScenarioSession::new(s.scenario, models(), EngineConfig::default()).unwrap();
    step_to(&mut ss, 8);
    let a = ss.ground("Pick up the red box.").unwrap();
    assert_eq!(a.summary().unwrap().to_string(), "PickUp{box1}");
    let b = ss.ground("Point at it.").unwrap();
    assert_eq!(b.summary().unwrap().to_string(), "PointAt{box1}");
}

/// Same belief snapshot and detections give a byte-identical result, no
/// matter what utterance history produced the snapshot.
#[test]
fn grounding_depends_only_on_beliefs_and_detections() {
    let s = showcase("two-fact-fusion-point");
    let m = models();
    let mut a = ScenarioSession::new(s.scenario.clone(), m.clone(), EngineConfig::default()).unwrap();
    step_to(&mut a, 9);
    a.ground("The fruit on the table is mine.").unwrap();
    a.ground("Point at the red fruit.").unwrap();
    a.ground("The small fruit is mine.").unwrap();
    let snapshot = a.session().beliefs().snapshot();

    let mut b = ScenarioSession::new(s.scenario.clone(), m, EngineConfig::default()).unwrap();
    step_to(&mut b, 9);
    b.session_mut().restore_beliefs(&snapshot).unwrap();
    let ra = a.ground("Point at my fruit.").unwrap();
    let rb = b.ground("Point at my fruit.").unwrap();
    assert_eq!(ra.to_json(), rb.to_json());
    assert_eq!(ra.summary().unwrap().to_string(), "PointAt{fruit2}");
}

#[test]
fn trace_rebuilds_every_grounding_result() {
    let s = showcase("future-tense-pending-fact");
    let mut ss = ScenarioSession::new(s.scenario.clone(), models(), EngineConfig::default()).unwrap();
    let mut results = Vec::new();
    step_to(&mut ss, 2);
    results.push(ss.ground("The box I will put down is my snack.").unwrap());
    assert!(ss.ground("the the the").is_err());
    step_to(&mut ss, 30);
    results.push(ss.ground("Pick up my snack.").unwrap());

    let mut buf = Vec::new();
    write_trace(&mut buf, ss.session().trace()).unwrap();
    let events = read_trace(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(events, ss.session().trace());
    assert_eq!(reconstruct(&events), results);
    assert!(events.iter().any(|e| e.kind == TraceKind::StateUpdate
        && e.payload.get("source").and_then(|v| v.as_str()) == Some("pending")));
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, i as u64);
    }
}

#[test]
fn plan_summary_comes_from_the_graph_values() {
    let s = showcase("conjunction-pack-up");
    let mut ss = ScenarioSession::new(s.scenario, models(), EngineConfig::default()).unwrap();
    step_to(&mut ss, 5);
    ss.ground("The can and the box are my snack.").unwrap();
    let (graph, _) = graph_for(ss.session_mut(), "Pack up my snack.").unwrap();
    let r = ss.ground("Pack up my snack.").unwrap();
    let values: Vec<bool> = r.imperative.factors.iter().map(|f| f.value).collect();
    assert_eq!(summarize(&graph, &values).as_ref(), r.summary());
    assert_eq!(r.plan.unwrap().steps.len(), 8);
}

#[test]
fn idle_scenario_runs_without_utterances() {
    let mut s: Scenario = showcase("snack-fact-then-pick").scenario;
    s.utterances.clear();
    let out = run_scenario(&s, models(), EngineConfig::default()).unwrap();
    assert!(out.utterances.is_empty());
    assert!(out.summary.is_none());
}
