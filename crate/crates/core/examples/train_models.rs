//! Regenerates the shipped model tables under `models/` and reports
//! evaluation accuracy with them.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use tgg_core::corpus::{evaluate, generate, train_models, write_models, CorpusConfig, TrainingConfig};
use tgg_core::engine::EngineConfig;

fn main() {
    let t = Instant::now();
    let (models, outcome) = train_models(&TrainingConfig::default()).expect("training succeeds");
    println!(
        "trained in {:.1}s: em objective {:?}, dcg {} examples, {} iterations",
        t.elapsed().as_secs_f64(),
        outcome.em.objective.last(),
        outcome.examples,
        outcome.dcg.iterations
    );
    write_models(&models, &Path::new(env!("CARGO_MANIFEST_DIR")).join("models")).expect("write models");
    let items = generate(&CorpusConfig::default());
    let t = Instant::now();
    let report = evaluate(&items, Arc::new(models), EngineConfig::default());
    println!(
        "accuracy {:.3} (single {:.3}, multi {:.3}) in {:.1}s",
        report.accuracy(),
        report.single.accuracy(),
        report.multi.accuracy(),
        t.elapsed().as_secs_f64()
    );
    for f in report.failures.iter().take(20) {
        println!("  {} expected {} got {:?} {:?}", f.id, f.expected, f.got, f.error);
    }
}
