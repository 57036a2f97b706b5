use std::sync::Arc;

use tgg_core::corpus::{generate, showcases, CorpusConfig};
use tgg_core::engine::{run_scenario, EngineConfig, Models, ScenarioSession};
use tgg_core::facts::FactualBeliefState;
use tgg_core::sim::Scenario;

fn models() -> Arc<Models> {
    Arc::new(Models::builtin())
}

#[test]
fn showcases_reach_their_gold_plans() {
    let m = models();
    for s in showcases() {
        let out = run_scenario(&s.scenario, m.clone(), EngineConfig::default()).unwrap();
        let gold = s.scenario.gold.as_ref().unwrap();
        let got = out.summary.unwrap_or_else(|| panic!("{}: no plan", s.name));
        assert_eq!((got.action, &got.targets), (gold.action, &gold.targets), "{}", s.name);
        assert!(out.utterances.iter().all(|u| u.error.is_none()), "{}", s.name);
    }
}

#[test]
fn corpus_scenarios_round_trip_through_json() {
    let items = generate(&CorpusConfig {
        scenarios: 8,
        seed: 3,
        ..CorpusConfig::default()
    });
    assert_eq!(items.len(), 8);
    for item in items {
        item.scenario.validate().unwrap();
        assert_eq!(Scenario::from_json(&item.scenario.to_json()).unwrap(), item.scenario, "{}", item.id);
    }
}

#[test]
fn belief_snapshots_restore_exactly() {
    let s = showcases().into_iter().find(|s| s.name == "two-fact-fusion-point").unwrap();
    let mut run = ScenarioSession::new(s.scenario, models(), EngineConfig::default()).unwrap();
    run.run().unwrap();
    let beliefs = run.session().beliefs();
    assert!(!beliefs.is_empty());
    let back = FactualBeliefState::restore(&beliefs.snapshot()).unwrap();
    assert_eq!(back.entries(), beliefs.entries());
}

#[test]
fn rejected_input_leaves_the_session_untouched() {
    let s = showcases().into_iter().find(|s| s.name == "snack-fact-then-pick").unwrap();
    let mut run = ScenarioSession::new(s.scenario, models(), EngineConfig::default()).unwrap();
    run.step(3).unwrap();
    run.ground("The box is my snack.").unwrap();
    let before = run.session().beliefs().entries();
    let err = run.ground("Pick up the the the.").unwrap_err();
    assert!(err.is_parse(), "{err}");
    assert_eq!(run.session().beliefs().entries(), before);
}
