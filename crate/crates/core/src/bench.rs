//! State-keeping strategies measured on a growing interaction stream.
//!
//! `FactualOnly` is the engine as shipped: only factual beliefs survive
//! between utterances. `NoState` keeps nothing and re-grounds the whole
//! history jointly at every step, enumerating every combination of earlier
//! fact bindings. `FullState` additionally stores a score for every
//! perceptual grounding symbol at every frame.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{random_world, Layout};
use crate::engine::{EngineConfig, EngineError, Models, PlanSummary, Session};
use crate::facts::{FactualBeliefState, Polarity};
use crate::model::{grounding_space_over, EntitySymbol, GroundingSymbol, KindFilter, PredicateKind, WorldModel};
use crate::sim::{simulate, Detection, DetectionFrame, NoiseConfig, Scenario};
use crate::tracker::{symbol, Constraints, FeatureConfig, HmmSet};

/// Longest history `NoState` is asked to re-ground.
pub const NO_STATE_CAP: usize = 8;
/// Normalized successive-ratio margin above which growth is superlinear.
pub const GROWTH_DELTA: f64 = 0.2;
/// Fewest points `fit_growth` accepts.
pub const MIN_GROWTH_POINTS: usize = 6;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("growth fit needs at least {MIN_GROWTH_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("t values must be strictly increasing")]
    Unordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    NoState,
    FactualOnly,
    FullState,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::NoState, Strategy::FactualOnly, Strategy::FullState];
}

/// An interaction stream: one new frame before each utterance, after an
/// initial frame that seeds the tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub scenario: Scenario,
    pub utterances: Vec<String>,
}

impl Workload {
    pub fn is_fact(text: &str) -> bool {
        text.starts_with("The ")
    }
}

const AMBIGUOUS_FACTS: [&str; 4] = [
    "The cup is mine.",
    "The fruit is my snack.",
    "The box is my favourite.",
    "The cup is my oldest.",
];
const DETERMINED_FACTS: [&str; 4] = [
    "The red cup is mine.",
    "The green fruit is my snack.",
    "The red box is my favourite.",
    "The yellow cup is my oldest.",
];
const COMMANDS: [&str; 4] = [
    "Point at my cup.",
    "Pick up my snack.",
    "Pack up my favourite.",
    "Lift my oldest.",
];

/// Three facts then a command, repeated. Ambiguous facts name a class with
/// several members, so each one leaves a choice for joint re-grounding.
pub fn workload(len: usize, seed: u64, ambiguous: bool) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = random_world(Layout::Evaluation, &mut rng);
    let facts = if ambiguous { AMBIGUOUS_FACTS } else { DETERMINED_FACTS };
    let utterances = (0..len)
        .map(|i| {
            if i % 4 == 3 {
                COMMANDS[(i / 4) % 4].to_string()
            } else {
                facts[(i - i / 4) % 4].to_string()
            }
        })
        .collect();
    Workload {
        scenario: Scenario {
            world,
            scripts: vec![],
            utterances: vec![],
            gold: None,
            noise: NoiseConfig::default(),
            seed,
            horizon: Some(len as u64 + 1),
        },
        utterances,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub strategy: Strategy,
    /// Utterances grounded so far, including this one.
    pub t: usize,
    /// Wall time for this utterance, best of the repeats.
    pub micros: f64,
    pub state_entries: usize,
    pub retained_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PlanSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthClass {
    Constant,
    Linear,
    Superlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub class: GrowthClass,
    /// Successive ratios `(y[i+1]/y[i]) / (t[i+1]/t[i])`.
    pub ratios: Vec<f64>,
    /// Geometric mean of the later half of `ratios`.
    pub tail_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyFit {
    pub strategy: Strategy,
    pub fit: GrowthFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub growth: Vec<StrategyFit>,
}

impl BenchReport {
    pub fn series(&self, strategy: Strategy) -> Vec<&BenchRow> {
        self.rows.iter().filter(|r| r.strategy == strategy).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// A table laid out like a complexity comparison: one row per strategy,
    /// then per-t series.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<12} {:>4} {:>12} {:>10} {:>12}\n", "strategy", "t", "time(us)", "entries", "bytes"));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<12} {:>4} {:>12.1} {:>10} {:>12}\n",
                format!("{:?}", r.strategy),
                r.t,
                r.micros,
                r.state_entries,
                r.retained_bytes
            ));
        }
        out.push('\n');
        for g in &self.growth {
            out.push_str(&format!(
                "{:<12} growth {:?} (tail ratio {:.3})\n",
                format!("{:?}", g.strategy),
                g.fit.class,
                g.fit.tail_ratio
            ));
        }
        out
    }
}

/// Classifies per-utterance cost growth by a ratio test normalized against
/// linear growth, so a linear series has ratios near one.
pub fn fit_growth(points: &[(f64, f64)]) -> Result<GrowthFit, BenchError> {
    if points.len() < MIN_GROWTH_POINTS {
        return Err(BenchError::TooFewPoints(points.len()));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(BenchError::Unordered);
    }
    let floor = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).max(1e-12);
    let y = |v: f64| v.max(floor);
    let ratios: Vec<f64> = points
        .windows(2)
        .map(|w| (y(w[1].1) / y(w[0].1)) / (w[1].0 / w[0].0))
        .collect();
    let tail = &ratios[ratios.len() / 2..];
    let tail_ratio = (tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp();
    let (first, last) = (points[0], points[points.len() - 1]);
    let class = if tail_ratio > 1.0 + GROWTH_DELTA {
        GrowthClass::Superlinear
    } else if y(last.1) / y(first.1) < (last.0 / first.0).sqrt() {
        GrowthClass::Constant
    } else {
        GrowthClass::Linear
    };
    Ok(GrowthFit {
        class,
        ratios,
        tail_ratio,
    })
}

/// Stored entries after `t` frames over `n` objects with `b` binary and `u`
/// unary perceptual predicates.
pub fn full_state_entries(n: usize, b: usize, u: usize, t: usize) -> usize {
    b * n * n.saturating_sub(1) * t + u * n * t
}

/// The perceptual grounding symbols `FullState` scores each frame.
pub fn perceptual_symbols(world: &WorldModel, models: &Models) -> Vec<GroundingSymbol> {
    let objects: Vec<EntitySymbol> = world.objects().cloned().collect();
    let preds: Vec<_> = models.vocab.predicates().cloned().collect();
    let kinds = KindFilter::new([PredicateKind::ObjectClass, PredicateKind::Region, PredicateKind::Modifier]);
    grounding_space_over(&objects, &preds, &kinds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PerceptualEntry {
    tick: u64,
    symbol: usize,
    score: f64,
}

fn best_detection<'a>(frame: &'a DetectionFrame, c: &Constraints) -> Option<&'a Detection> {
    frame
        .detections
        .iter()
        .max_by(|a, b| c.score(a).total_cmp(&c.score(b)))
}

/// One frame's score for a perceptual symbol from the best-matching
/// detections of its roles.
fn frame_score(
    sym: &GroundingSymbol,
    dets: &[Option<&Detection>],
    hmms: &HmmSet,
    features: &FeatureConfig,
) -> f64 {
    let Some(a) = dets[0] else { return f64::NEG_INFINITY };
    let tag = sym.predicate.name.to_lowercase();
    match (sym.predicate.kind, dets.get(1).copied().flatten()) {
        (PredicateKind::ObjectClass, _) => a.class_score(&tag).max(1e-12).ln(),
        (PredicateKind::Region, Some(b)) => match hmms.get(&sym.predicate.name) {
            Some(h) => {
                let o = symbol(h.alphabet, features, &[None, None], &[a.center, b.center], &[None, None]);
                h.log_emission[0][o]
            }
            None => f64::NEG_INFINITY,
        },
        _ => a
            .attr_scores
            .values()
            .filter_map(|m| m.get(&tag))
            .fold(0.0f64, |x, &y| x.max(y))
            .max(1e-12)
            .ln(),
    }
}

struct FullStateStore {
    symbols: Vec<GroundingSymbol>,
    constraints: Vec<(String, Constraints)>,
    entries: Vec<PerceptualEntry>,
    bytes: usize,
}

impl FullStateStore {
    fn new(world: &WorldModel, models: &Models) -> Self {
        let symbols = perceptual_symbols(world, models);
        let constraints = world
            .objects()
            .filter_map(|e| Some((e.id.clone(), Constraints::for_entity(world, &e.id)?)))
            .collect();
        Self {
            symbols,
            constraints,
            entries: Vec::new(),
            bytes: 0,
        }
    }

    fn materialize(&mut self, frame: &DetectionFrame, hmms: &HmmSet, features: &FeatureConfig) {
        let best: Vec<(&str, Option<&Detection>)> = self
            .constraints
            .iter()
            .map(|(id, c)| (id.as_str(), best_detection(frame, c)))
            .collect();
        let lookup = |id: &str| best.iter().find(|(e, _)| *e == id).and_then(|(_, d)| *d);
        for (i, sym) in self.symbols.iter().enumerate() {
            let dets: Vec<Option<&Detection>> = sym.roles.iter().map(|r| lookup(&r.id)).collect();
            let e = PerceptualEntry {
                tick: frame.tick,
                symbol: i,
                score: frame_score(sym, &dets, hmms, features),
            };
            self.bytes += serde_json::to_vec(&e).map(|v| v.len()).unwrap_or(0);
            self.entries.push(e);
        }
    }
}

fn session(w: &Workload, models: &Arc<Models>, cfg: EngineConfig) -> Result<(Session, Vec<DetectionFrame>), EngineError> {
    let world = w.scenario.world_model()?;
    let frames: Vec<DetectionFrame> = simulate(&w.scenario)?.into_iter().map(|f| f.detections).collect();
    let mut s = Session::new(world, models.clone(), cfg);
    s.observe(frames[0].clone())?;
    Ok((s, frames))
}

/// Candidate bindings of a fact sentence grounded on its own, with their
/// normalized weights.
fn fact_choices(s: &mut Session, text: &str) -> Result<Vec<(crate::facts::FactKey, f64)>, EngineError> {
    s.set_beliefs(FactualBeliefState::default());
    let r = s.ground_utterance(text)?;
    let total: f64 = r.updates.iter().map(|u| u.weight).sum();
    Ok(r.updates
        .into_iter()
        .filter(|u| u.polarity == Polarity::Affirm && u.weight > 0.0)
        .map(|u| (u.key, u.weight / total))
        .collect())
}

/// Grounds `text` under every joint choice of earlier fact bindings and
/// returns the best-scoring plan summary.
fn joint_ground(s: &mut Session, history: &[String], text: &str, models: &Models) -> Result<Option<PlanSummary>, EngineError> {
    let mut choices = Vec::new();
    for h in history.iter().filter(|h| Workload::is_fact(h)) {
        let c = fact_choices(s, h)?;
        if !c.is_empty() {
            choices.push(c);
        }
    }
    let radices: Vec<usize> = choices.iter().map(Vec::len).collect();
    let total: usize = radices.iter().product();
    let mut best: Option<(f64, Option<PlanSummary>)> = None;
    let mut digit = vec![0usize; radices.len()];
    for _ in 0..total {
        let mut k = FactualBeliefState::default();
        let mut score = 0.0;
        for (c, &d) in choices.iter().zip(&digit) {
            let (key, w) = &c[d];
            k.assert_update(&models.vocab, key, Polarity::Affirm, 1.0)?;
            score += w.ln();
        }
        s.set_beliefs(k);
        let r = s.ground_utterance(text)?;
        score += r.imperative.log_prob;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, r.summary().cloned()));
        }
        for (d, &r) in digit.iter_mut().zip(&radices).rev() {
            *d += 1;
            if *d < r {
                break;
            }
            *d = 0;
        }
    }
    Ok(best.and_then(|(_, p)| p))
}

fn run_once(strategy: Strategy, w: &Workload, models: &Arc<Models>, cfg: EngineConfig) -> Result<Vec<BenchRow>, EngineError> {
    let (mut s, frames) = session(w, models, cfg)?;
    let mut store = (strategy == Strategy::FullState).then(|| FullStateStore::new(s.world(), models));
    let limit = match strategy {
        Strategy::NoState => w.utterances.len().min(NO_STATE_CAP),
        _ => w.utterances.len(),
    };
    let mut rows = Vec::with_capacity(limit);
    let mut history_bytes = 0;
    for (i, text) in w.utterances.iter().take(limit).enumerate() {
        s.observe(frames[i + 1].clone())?;
        let start = Instant::now();
        let summary = match strategy {
            Strategy::NoState => joint_ground(&mut s, &w.utterances[..i], text, models)?,
            Strategy::FactualOnly => s.ground_utterance(text)?.summary().cloned(),
            Strategy::FullState => {
                let st = store.as_mut().expect("full-state store");
                st.materialize(&frames[i + 1], &models.hmms, &cfg.tracker.features);
                s.ground_utterance(text)?.summary().cloned()
            }
        };
        let micros = start.elapsed().as_secs_f64() * 1e6;
        history_bytes += text.len();
        let (state_entries, retained_bytes) = match strategy {
            Strategy::NoState => (0, history_bytes),
            Strategy::FactualOnly => (s.beliefs().len(), s.beliefs().snapshot().len()),
            Strategy::FullState => {
                let st = store.as_ref().expect("full-state store");
                (st.entries.len(), st.bytes + s.beliefs().snapshot().len())
            }
        };
        rows.push(BenchRow {
            strategy,
            t: i + 1,
            micros,
            state_entries,
            retained_bytes,
            summary,
        });
    }
    Ok(rows)
}

/// Runs one strategy `repeats` times and keeps the fastest time per step.
pub fn run_strategy(strategy: Strategy, w: &Workload, models: &Arc<Models>, cfg: EngineConfig, repeats: usize) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = run_once(strategy, w, models, cfg)?;
    for _ in 1..repeats {
        for (r, again) in rows.iter_mut().zip(run_once(strategy, w, models, cfg)?) {
            r.micros = r.micros.min(again.micros);
        }
    }
    Ok(rows)
}

pub fn run_bench(w: &Workload, models: &Arc<Models>, cfg: EngineConfig, repeats: usize) -> Result<BenchReport, BenchError> {
    let mut rows = Vec::new();
    let mut growth = Vec::new();
    for strategy in Strategy::ALL {
        let r = run_strategy(strategy, w, models, cfg, repeats)?;
        let points: Vec<(f64, f64)> = r.iter().map(|r| (r.t as f64, r.micros)).collect();
        if points.len() >= MIN_GROWTH_POINTS {
            growth.push(StrategyFit {
                strategy,
                fit: fit_growth(&points)?,
            });
        }
        rows.extend(r);
    }
    Ok(BenchReport { rows, growth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (1..=8).map(|t| (t as f64, f(t as f64))).collect()
    }

    #[test]
    fn known_series_classify() {
        assert_eq!(fit_growth(&pts(|t| 2f64.powf(t))).unwrap().class, GrowthClass::Superlinear);
        assert_eq!(fit_growth(&pts(|_| 5.0)).unwrap().class, GrowthClass::Constant);
        assert_eq!(fit_growth(&pts(|t| 3.0 * t)).unwrap().class, GrowthClass::Linear);
        assert!(matches!(fit_growth(&pts(|t| t)[..5]), Err(BenchError::TooFewPoints(5))));
        let mut bad = pts(|t| t);
        bad.swap(2, 3);
        assert!(matches!(fit_growth(&bad), Err(BenchError::Unordered)));
    }

    #[test]
    fn workload_is_deterministic_and_patterned() {
        let a = workload(16, 3, true);
        assert_eq!(a, workload(16, 3, true));
        assert_eq!(a.utterances.len(), 16);
        assert_eq!(a.utterances.iter().filter(|u| Workload::is_fact(u)).count(), 12);
        assert!(!Workload::is_fact(&a.utterances[3]));
        assert_eq!(a.scenario.horizon(), 17);
    }

    #[test]
    fn perceptual_symbol_count_matches_closed_form() {
        let models = Models::initial();
        let w = workload(4, 1, true);
        let world = w.scenario.world_model().unwrap();
        let syms = perceptual_symbols(&world, &models);
        let b = syms.iter().filter(|s| s.roles.len() == 2).map(|s| &s.predicate).collect::<std::collections::BTreeSet<_>>().len();
        let u = syms.iter().filter(|s| s.roles.len() == 1).map(|s| &s.predicate).collect::<std::collections::BTreeSet<_>>().len();
        let n = world.objects().count();
        assert_eq!(syms.len(), full_state_entries(n, b, u, 1));
        assert_eq!(full_state_entries(3, 2, 1, 1), 15);
    }

    fn builtin() -> Arc<Models> {
        Arc::new(Models::builtin())
    }

    #[test]
    fn factual_only_keeps_one_entry_per_fact_key() {
        let m = builtin();
        let w = workload(3, 5, false);
        let rows = run_strategy(Strategy::FactualOnly, &w, &m, EngineConfig::default(), 1).unwrap();
        let entries: Vec<usize> = rows.iter().map(|r| r.state_entries).collect();
        assert_eq!(entries, [1, 2, 3]);
        let none = Workload {
            utterances: vec!["Point at the red cup.".into()],
            ..workload(1, 5, false)
        };
        let rows = run_strategy(Strategy::FactualOnly, &none, &m, EngineConfig::default(), 1).unwrap();
        assert_eq!(rows[0].state_entries, 0);
    }

    #[test]
    fn full_state_stores_every_symbol_every_frame() {
        let m = builtin();
        let w = workload(4, 6, true);
        let rows = run_strategy(Strategy::FullState, &w, &m, EngineConfig::default(), 1).unwrap();
        let per_frame = perceptual_symbols(&w.scenario.world_model().unwrap(), &m).len();
        for r in &rows {
            assert_eq!(r.state_entries, per_frame * r.t);
        }
    }

    #[test]
    fn strategies_agree_when_facts_are_determined() {
        let m = builtin();
        let w = workload(8, 7, false);
        let cfg = EngineConfig::default();
        let a = run_strategy(Strategy::NoState, &w, &m, cfg, 1).unwrap();
        let b = run_strategy(Strategy::FactualOnly, &w, &m, cfg, 1).unwrap();
        let c = run_strategy(Strategy::FullState, &w, &m, cfg, 1).unwrap();
        for ((x, y), z) in a.iter().zip(&b).zip(&c) {
            assert_eq!(x.summary, y.summary, "t={}", x.t);
            assert_eq!(y.summary, z.summary, "t={}", x.t);
        }
        assert!(b[3].summary.is_some());
        assert!(a.iter().all(|r| r.state_entries == 0));
    }

    #[test]
    fn no_state_matches_factual_only_on_the_first_utterance() {
        let m = builtin();
        let w = Workload {
            utterances: vec!["Point at the cup.".into()],
            ..workload(1, 8, true)
        };
        let cfg = EngineConfig::default();
        let a = run_strategy(Strategy::NoState, &w, &m, cfg, 1);
        let b = run_strategy(Strategy::FactualOnly, &w, &m, cfg, 1);
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(a[0].summary, b[0].summary),
            (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
            (a, b) => panic!("{a:?} vs {b:?}"),
        }
    }
}
