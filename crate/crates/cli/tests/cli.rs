use std::path::{Path, PathBuf};

use tgg_cli::cli::{dispatch, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};
use tgg_core::corpus::showcases;
use tgg_core::engine::{read_trace, Models, TraceKind};
use tgg_core::sim::Scenario;

fn tgg(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tgg").chain(args.iter().copied());
    let code = dispatch(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn run_trace_ends_with_the_snack_pick() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let scenario = scenarios_dir().join("snack-fact-then-pick.json");
    let (code, out, err) = tgg(&["run", "--scenario", path(&scenario), "--seed", "41", "--trace", path(&trace)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.lines().count(), 2);
    let events = read_trace(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    let plan = events.iter().rev().find(|e| e.kind == TraceKind::Plan).unwrap();
    assert_eq!(plan.payload["summary"]["action"], "PickUp");
    assert_eq!(plan.payload["summary"]["targets"], serde_json::json!(["box1"]));
}

#[test]
fn run_accepts_explicit_model_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = Models::builtin();
    let (w, h) = (dir.path().join("w.json"), dir.path().join("h.json"));
    std::fs::write(&w, m.weights.to_json()).unwrap();
    std::fs::write(&h, m.hmms.to_json()).unwrap();
    let (code, a, _) = tgg(&["run", "--scenario", "conjunction-pack-up", "--weights", path(&w), "--hmms", path(&h)]);
    assert_eq!(code, EXIT_OK);
    let (_, b, _) = tgg(&["run", "--scenario", "conjunction-pack-up"]);
    assert_eq!(a, b);
    std::fs::write(&w, "{").unwrap();
    let (code, _, err) = tgg(&["run", "--scenario", "conjunction-pack-up", "--weights", path(&w)]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("w.json"), "{err}");
}

#[test]
fn failed_utterances_exit_with_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = showcases().remove(0).scenario;
    s.utterances[1].text = "Pick up the cup.".into();
    let f = dir.path().join("s.json");
    std::fs::write(&f, s.to_json()).unwrap();
    let (code, out, err) = tgg(&["run", "--scenario", path(&f)]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(out.lines().last().unwrap().contains("\"error\""));
    assert!(err.contains("Pick up the cup."));
}

#[test]
fn usage_errors_exit_2_with_usage_text() {
    let (code, _, err) = tgg(&["run", "--frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage:"), "{err}");
    let (code, _, err) = tgg(&["launch"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage:"));
    let (code, out, _) = tgg(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("gen-corpus"));
    let (code, _, _) = tgg(&["train", "svm"]);
    assert_eq!(code, EXIT_USAGE);
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn gen_corpus_is_deterministic_and_evaluates() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    for d in [&a, &b] {
        let (code, _, err) = tgg(&["gen-corpus", "--n", "10", "--seed", "1", "--out", path(d)]);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    let la = listing(&a);
    assert_eq!(la.len(), 11);
    assert_eq!(la, listing(&b));

    let report = root.path().join("eval.json");
    let (code, out, err) = tgg(&["eval", "--corpus-dir", path(&a), "--baseline-trials", "200", "--json", path(&report)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("accuracy "), "{out}");
    assert!(out.contains("random baseline"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["report"]["all"]["total"], 10);

    let (code, _, _) = tgg(&["eval", "--corpus-dir", path(&root.path().join("missing"))]);
    assert_eq!(code, EXIT_DOMAIN);
}

#[test]
fn training_subcommands_write_loadable_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let (code, out, err) = tgg(&["train", "hmm", "--n", "6", "--iterations", "2", "--out", d]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("objective"), "{out}");
    let hmms = dir.path().join("hmms.json");
    let (code, _, err) = tgg(&["train", "dcg", "--n", "3", "--synthetic", "10", "--hmms", path(&hmms), "--out", d]);
    assert_eq!(code, EXIT_OK, "{err}");
    let weights = dir.path().join("weights.json");
    tgg_cli::load_models(Some(&weights), Some(&hmms)).unwrap();
}

#[test]
fn bench_prints_a_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("bench.json");
    let (code, out, err) = tgg(&["bench", "--len", "6", "--repeats", "1", "--json", path(&json)]);
    assert_eq!(code, EXIT_OK, "{err}");
    for s in ["NoState", "FactualOnly", "FullState", "growth"] {
        assert!(out.contains(s), "{out}");
    }
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 18);
}

/// The files under `scenarios/` are the built-in showcases. Set
/// `TGG_WRITE_SCENARIOS=1` to regenerate them.
#[test]
fn shipped_scenarios_match_showcases() {
    let dir = scenarios_dir();
    for s in showcases() {
        let f = dir.join(format!("{}.json", s.name));
        if std::env::var_os("TGG_WRITE_SCENARIOS").is_some() {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&f, serde_json::to_string_pretty(&s.scenario).unwrap() + "\n").unwrap();
        }
        let text = std::fs::read_to_string(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert_eq!(Scenario::from_json(&text).unwrap(), s.scenario, "{}", s.name);
    }
}
