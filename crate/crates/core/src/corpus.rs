//! Synthetic evaluation corpus: scripted tabletop clips that end in one
//! event-referring command, plus the training sets for the HMMs and the
//! correspondence graph and the scripted qualitative scenarios.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcg::{self, gold_assignment, TrainConfig, TrainReport, TrainingExample};
use crate::engine::{graph_for, run_scenario, EngineConfig, EngineError, Models, ScenarioSession};
use crate::model::Pose;
use crate::sim::{
    simulate, ActionScript, EntitySpec, Gold, HumanAction, HAND_TRAVEL, TABLE_Y, NoiseConfig, RobotAction, Scenario, Utterance, WorldSpec,
};
use crate::tracker::{em_train, Clip, Constraints, EmReport, EventQuery, HmmSet, Participant, PredicateUse, TrackerConfig, BACKGROUND};

pub const SEGMENT_TICKS: u64 = 30;
/// Shortest idle stretch used as a background training clip.
const BACKGROUND_MIN_TICKS: u64 = 3;
pub const HUMAN: &str = "human";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Three fruit, three cups and two boxes.
    Evaluation,
    /// The evaluation layout plus a can: nine objects.
    Baseline,
}

impl Layout {
    fn objects(self) -> Vec<(&'static str, &'static str)> {
        let mut v = vec![
            ("fruit", "red"),
            ("fruit", "green"),
            ("fruit", "yellow"),
            ("cup", "red"),
            ("cup", "green"),
            ("cup", "yellow"),
            ("box", "red"),
            ("box", "green"),
        ];
        if self == Layout::Baseline {
            v.push(("can", "red"));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub scenarios: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    pub layout: Layout,
    pub max_segments: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            scenarios: 255,
            seed: 2024,
            noise: NoiseConfig::default(),
            layout: Layout::Evaluation,
            max_segments: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub segments: usize,
    pub scenario: Scenario,
}

impl CorpusItem {
    pub fn multi_segment(&self) -> bool {
        self.segments > 1
    }

    pub fn gold(&self) -> &Gold {
        self.scenario.gold.as_ref().expect("corpus items carry gold")
    }
}

pub fn past_phrase(a: HumanAction) -> &'static str {
    match a {
        HumanAction::PickUp => "picked up",
        HumanAction::PutDown => "put down",
        HumanAction::Slide => "slid",
        HumanAction::MoveToward => "moved toward",
        HumanAction::MoveAwayFrom => "moved away from",
    }
}

pub fn command_phrases(a: RobotAction) -> &'static [&'static str] {
    match a {
        RobotAction::PickUp => &["pick up", "lift", "grab"],
        RobotAction::PackUp => &["pack up", "pack"],
        RobotAction::PointAt => &["point at", "point to"],
    }
}

/// Spaced so that a hand resting on or lifting one object stays outside
/// the mid distance band of its neighbours.
const SLOTS: [(f64, f64); 9] = [
    (0.05, 0.0),
    (0.5, 0.0),
    (0.95, 0.0),
    (0.05, 0.4),
    (0.5, 0.4),
    (0.95, 0.4),
    (0.05, 0.8),
    (0.5, 0.8),
    (0.95, 0.8),
];
const SLIDE: f64 = 0.15;

fn human() -> EntitySpec {
    EntitySpec {
        id: HUMAN.into(),
        class: "human".into(),
        color: None,
        size: None,
        pose: Pose::new(0.5, 1.2, 0.4),
        kind: None,
    }
}

pub fn object(id: &str, class: &str, color: &str, pose: Pose) -> EntitySpec {
    EntitySpec {
        id: id.into(),
        class: class.into(),
        color: Some(color.into()),
        size: Some("small".into()),
        pose,
        kind: None,
    }
}

/// Objects on shuffled table slots, ids numbered per class.
pub fn random_world(layout: Layout, rng: &mut impl Rng) -> WorldSpec {
    let mut slots = SLOTS.to_vec();
    slots.shuffle(rng);
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    let mut entities: Vec<EntitySpec> = layout
        .objects()
        .into_iter()
        .zip(slots)
        .map(|((class, color), (x, y))| {
            let n = counts.entry(class).or_default();
            *n += 1;
            object(&format!("{class}{n}"), class, color, Pose::new(x, y, 0.0))
        })
        .collect();
    entities.push(human());
    WorldSpec { entities }
}

fn script(action: HumanAction, patient: &EntitySpec, start: u64, end: u64, rng: &mut impl Rng) -> ActionScript {
    ActionScript {
        action,
        actor: HUMAN.into(),
        patient: patient.id.clone(),
        start_tick: start,
        end_tick: end,
        offset: (action == HumanAction::Slide).then(|| {
            // slide along y, staying on the table
            let y = patient.pose.y;
            let up = if y - SLIDE < TABLE_Y.0 {
                true
            } else if y + SLIDE > TABLE_Y.1 {
                false
            } else {
                rng.random_bool(0.5)
            };
            (0.0, if up { SLIDE } else { -SLIDE })
        }),
    }
}

/// Reaching toward an object and withdrawing from it look alike once the
/// hand travels to and from rest, so both count as one family when
/// checking that a target is uniquely described.
fn reach_family(a: HumanAction) -> HumanAction {
    match a {
        HumanAction::MoveAwayFrom => HumanAction::MoveToward,
        a => a,
    }
}

/// One scenario, or `None` when the drawn target is not uniquely described
/// by its class and event.
fn draw(layout: Layout, noise: NoiseConfig, segments: usize, seed: u64, rng: &mut impl Rng) -> Option<Scenario> {
    let world = random_world(layout, rng);
    let objects: Vec<&EntitySpec> = world.entities.iter().filter(|e| e.id != HUMAN).collect();
    let mut patients: Vec<&EntitySpec> = objects.clone();
    patients.shuffle(rng);
    patients.truncate(segments);
    let mut scripts = Vec::new();
    for (k, p) in patients.iter().enumerate() {
        let start = SEGMENT_TICKS * k as u64 + rng.random_range(HAND_TRAVEL + 1..HAND_TRAVEL + 6);
        let end = start + rng.random_range(10..=15);
        let a = *HumanAction::ALL.choose(rng).expect("actions");
        scripts.push(script(a, p, start, end, rng));
    }
    let k = rng.random_range(0..segments);
    let target = patients[k].clone();
    let event = scripts[k].action;
    let same = scripts
        .iter()
        .filter(|s| reach_family(s.action) == reach_family(event))
        .filter(|s| objects.iter().any(|o| o.id == s.patient && o.class == target.class))
        .count();
    if same != 1 {
        return None;
    }
    let action = *RobotAction::ALL.choose(rng).expect("actions");
    let verb = command_phrases(action).choose(rng).expect("phrases");
    let horizon = SEGMENT_TICKS * segments as u64 + 3;
    let text = format!("{verb} the {} that I {}", target.class, past_phrase(event));
    Some(Scenario {
        world,
        scripts,
        utterances: vec![Utterance {
            tick: horizon - 1,
            text,
        }],
        gold: Some(Gold {
            action,
            targets: BTreeSet::from([target.id.clone()]),
        }),
        noise,
        seed,
        horizon: Some(horizon),
    })
}

/// Deterministic corpus; segment counts cycle so every count is equally
/// represented.
pub fn generate(cfg: &CorpusConfig) -> Vec<CorpusItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.scenarios)
        .map(|i| {
            let segments = 1 + i % cfg.max_segments.max(1);
            loop {
                let seed = rng.random();
                if let Some(scenario) = draw(cfg.layout, cfg.noise, segments, seed, &mut rng) {
                    break CorpusItem {
                        id: format!("s{i:04}"),
                        segments,
                        scenario,
                    };
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Subset {
    pub total: usize,
    pub correct: usize,
}

impl Subset {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub expected: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub got: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub all: Subset,
    pub single: Subset,
    pub multi: Subset,
    pub failures: Vec<Failure>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.all.accuracy()
    }
}

/// Action + target-set accuracy of the final plan of every item.
pub fn evaluate(items: &[CorpusItem], models: Arc<Models>, cfg: EngineConfig) -> EvalReport {
    let results: Vec<(bool, bool, Option<Failure>)> = items
        .par_iter()
        .map(|item| {
            let gold = item.gold();
            let expected = crate::engine::PlanSummary {
                action: gold.action,
                targets: gold.targets.clone(),
            };
            let outcome = run_scenario(&item.scenario, models.clone(), cfg);
            let (got, error) = match outcome {
                Ok(o) => (o.summary, o.utterances.iter().find_map(|u| u.error.clone())),
                Err(e) => (None, Some(e.to_string())),
            };
            let ok = got.as_ref() == Some(&expected);
            let failure = (!ok).then(|| Failure {
                id: item.id.clone(),
                expected: expected.to_string(),
                got: got.map(|g| g.to_string()),
                error,
            });
            (item.multi_segment(), ok, failure)
        })
        .collect();
    let mut report = EvalReport {
        all: Subset::default(),
        single: Subset::default(),
        multi: Subset::default(),
        failures: Vec::new(),
    };
    for (multi, ok, failure) in results {
        for s in [&mut report.all, if multi { &mut report.multi } else { &mut report.single }] {
            s.total += 1;
            s.correct += ok as usize;
        }
        report.failures.extend(failure);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub trials: usize,
    pub accuracy: f64,
    pub std_error: f64,
}

/// Uniformly random action and single object per trial.
pub fn random_baseline(items: &[CorpusItem], trials: usize, seed: u64) -> BaselineReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = 0usize;
    for _ in 0..trials {
        let item = items.choose(&mut rng).expect("non-empty corpus");
        let objects: Vec<&EntitySpec> = item.scenario.world.entities.iter().filter(|e| e.id != HUMAN).collect();
        let action = *RobotAction::ALL.choose(&mut rng).expect("actions");
        let target = objects.choose(&mut rng).expect("objects");
        let gold = item.gold();
        if action == gold.action && gold.targets.len() == 1 && gold.targets.contains(&target.id) {
            correct += 1;
        }
    }
    let p = correct as f64 / trials as f64;
    BaselineReport {
        trials,
        accuracy: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
    }
}

fn pair_query(scenario: &Scenario, hmm: &str, patient: &str, window: Option<(u64, u64)>) -> EventQuery {
    let world = scenario.world_model().expect("valid world");
    EventQuery {
        participants: vec![
            Participant::tracked("agent", Constraints::for_entity(&world, HUMAN).unwrap_or_default()),
            Participant::tracked("patient", Constraints::for_entity(&world, patient).unwrap_or_default()),
        ],
        predicates: vec![PredicateUse {
            hmm: hmm.into(),
            args: vec![0, 1],
        }],
        window,
    }
}

/// One clip per scripted event (exactly its ticks) and a background clip
/// for every stretch of at least `BACKGROUND_MIN_TICKS` in which an object
/// is not scripted.
pub fn em_clips(items: &[CorpusItem]) -> Vec<Clip> {
    items
        .par_iter()
        .flat_map_iter(|item| {
            let s = &item.scenario;
            let frames: Vec<_> = simulate(s).expect("corpus scenario runs").into_iter().map(|f| f.detections).collect();
            let mut clips = Vec::new();
            for sc in &s.scripts {
                let window = (sc.start_tick, sc.end_tick.min(frames.len() as u64 - 1));
                clips.push(Clip {
                    frames: frames.clone(),
                    query: pair_query(s, sc.action.predicate_name(), &sc.patient, Some(window)),
                });
            }
            // every stretch outside an object's own scripts is background
            let last = frames.len() as u64 - 1;
            for e in s.world.entities.iter().filter(|e| e.id != HUMAN) {
                let mut busy: Vec<(u64, u64)> = s
                    .scripts
                    .iter()
                    .filter(|x| x.patient == e.id)
                    .map(|x| (x.start_tick, x.end_tick))
                    .collect();
                busy.sort_unstable();
                let mut from = 0;
                for (a, b) in busy.into_iter().chain([(last + 1, last + 1)]) {
                    if a >= from + BACKGROUND_MIN_TICKS {
                        clips.push(Clip {
                            frames: frames.clone(),
                            query: pair_query(s, BACKGROUND, &e.id, Some((from, a - 1))),
                        });
                    }
                    from = from.max(b + 1);
                }
            }
            clips
        })
        .collect()
}

/// Graphs of every corpus command with gold values.
pub fn corpus_dcg_examples(items: &[CorpusItem], models: Arc<Models>, cfg: EngineConfig) -> Vec<TrainingExample> {
    items
        .par_iter()
        .filter_map(|item| {
            let mut ss = ScenarioSession::new(item.scenario.clone(), models.clone(), cfg).ok()?;
            let u = item.scenario.utterances.last()?;
            while ss.session().last_tick()? < u.tick && !ss.finished() {
                ss.step(1).ok()?;
            }
            let (graph, evidence) = graph_for(ss.session_mut(), &u.text).ok()?;
            let gold = item.gold();
            let values = gold_assignment(&graph, &evidence, Some(gold.action), &gold.targets);
            Some(TrainingExample { graph, gold: values })
        })
        .collect()
}

struct Episode {
    facts: Vec<String>,
    command: String,
    action: RobotAction,
    targets: BTreeSet<String>,
}

fn pick<'a, T>(v: &'a [T], rng: &mut impl Rng) -> &'a T {
    v.choose(rng).expect("non-empty")
}

/// Static-scene episodes covering attribute references, conjunctions,
/// asserted facts, belief fusion, possessives and pronouns.
fn episode(world: &WorldSpec, rng: &mut impl Rng) -> Episode {
    let objects: Vec<&EntitySpec> = world.entities.iter().filter(|e| e.id != HUMAN).collect();
    let action = *pick(&RobotAction::ALL, rng);
    let verb = pick(command_phrases(action), rng).to_string();
    let desc = |e: &EntitySpec| format!("the {} {}", e.color.as_deref().unwrap_or(""), e.class);
    let fact = *pick(&["snack", "favourite", "oldest"], rng);
    let a = *pick(&objects, rng);
    let b = loop {
        let b = *pick(&objects, rng);
        if b.id != a.id {
            break b;
        }
    };
    let single = |e: &EntitySpec| BTreeSet::from([e.id.clone()]);
    match rng.random_range(0..7) {
        0 => Episode {
            facts: vec![],
            command: format!("{verb} {}", desc(a)),
            action,
            targets: single(a),
        },
        1 => Episode {
            facts: vec![],
            command: format!("{verb} {} and {}", desc(a), desc(b)),
            action,
            targets: BTreeSet::from([a.id.clone(), b.id.clone()]),
        },
        2 => Episode {
            facts: vec![format!("{} is my {fact}", desc(a))],
            command: format!("{verb} my {fact}"),
            action,
            targets: single(a),
        },
        3 => Episode {
            facts: vec![format!("{} and {} are my {fact}", desc(a), desc(b))],
            command: format!("{verb} my {fact}"),
            action,
            targets: BTreeSet::from([a.id.clone(), b.id.clone()]),
        },
        4 => {
            // class-wide assertion fused with a colour-wide one
            let color = a.color.clone().unwrap_or_default();
            Episode {
                facts: vec![format!("the {} is mine", a.class), format!("the {color} one is mine")],
                command: format!("{verb} my {}", a.class),
                action,
                targets: single(a),
            }
        }
        5 => Episode {
            facts: vec![format!("{} is mine", desc(a))],
            command: format!("{verb} my {}", a.class),
            action,
            targets: single(a),
        },
        _ => Episode {
            facts: vec![format!("{} is my {fact}", desc(a))],
            command: format!("{verb} it"),
            action,
            targets: single(a),
        },
    }
}

fn static_scenario(world: WorldSpec, noise: NoiseConfig, seed: u64) -> Scenario {
    Scenario {
        world,
        scripts: vec![],
        utterances: vec![],
        gold: None,
        noise,
        seed,
        horizon: Some(12),
    }
}

/// Examples from static-scene episodes. Fact sentences are grounded with
/// `models` and contribute their own assertion examples.
pub fn synthetic_dcg_examples(n: usize, seed: u64, models: Arc<Models>, cfg: EngineConfig) -> Vec<TrainingExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs: Vec<(WorldSpec, Episode, u64)> = (0..n)
        .map(|_| {
            let world = random_world(Layout::Evaluation, &mut rng);
            let ep = episode(&world, &mut rng);
            (world, ep, rng.random())
        })
        .collect();
    jobs.into_par_iter()
        .flat_map_iter(|(world, ep, s)| {
            let mut out = Vec::new();
            let Ok(mut ss) = ScenarioSession::new(static_scenario(world, NoiseConfig::default(), s), models.clone(), cfg)
            else {
                return out;
            };
            let _ = ss.step(11);
            for f in &ep.facts {
                let Ok((graph, evidence)) = graph_for(ss.session_mut(), f) else { return out };
                let gold = gold_assignment(&graph, &evidence, None, &BTreeSet::new());
                out.push(TrainingExample { graph, gold });
                if ss.ground(f).is_err() {
                    return out;
                }
            }
            if ep.command.ends_with(" it") {
                // the pronoun refers to the entity the fact sentence bound
                if ss.session().last_binding().is_none() {
                    return out;
                }
            }
            if let Ok((graph, evidence)) = graph_for(ss.session_mut(), &ep.command) {
                let gold = gold_assignment(&graph, &evidence, Some(ep.action), &ep.targets);
                out.push(TrainingExample { graph, gold });
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub corpus: CorpusConfig,
    pub em_iterations: usize,
    /// Lets training tracks skip frames that have candidates. Off by
    /// default, since hard EM otherwise learns to skip whatever its current
    /// emissions dislike.
    pub em_skips: bool,
    pub synthetic: usize,
    pub dcg: TrainConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusConfig {
                scenarios: 90,
                seed: 7,
                ..CorpusConfig::default()
            },
            em_iterations: 10,
            em_skips: false,
            synthetic: 400,
            dcg: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub em: EmReport,
    pub dcg: TrainReport,
    pub examples: usize,
}

/// Trains HMMs by hard EM on the training corpus.
pub fn train_hmms(cfg: &TrainingConfig) -> Result<(HmmSet, EmReport), EngineError> {
    let items = generate(&cfg.corpus);
    let tracker = TrackerConfig {
        allow_skip: cfg.em_skips,
        ..EngineConfig::default().tracker
    };
    Ok(em_train(&HmmSet::initial(), &em_clips(&items), cfg.em_iterations, &tracker)?)
}

/// Trains graph weights on corpus and synthetic episodes grounded with the
/// given HMMs.
pub fn train_weights(cfg: &TrainingConfig, hmms: HmmSet) -> Result<(Models, TrainReport, usize), EngineError> {
    let items = generate(&cfg.corpus);
    let engine = EngineConfig::default();
    let staged = Arc::new(Models {
        hmms,
        ..Models::initial()
    });
    let mut examples = corpus_dcg_examples(&items, staged.clone(), engine);
    examples.extend(synthetic_dcg_examples(cfg.synthetic, cfg.corpus.seed ^ 0x5eed, staged.clone(), engine));
    let (weights, report) = dcg::train(&examples, &cfg.dcg)?;
    let models = Models {
        weights,
        ..(*staged).clone()
    };
    Ok((models, report, examples.len()))
}

/// Trains HMMs, then the graph weights on top of them.
pub fn train_models(cfg: &TrainingConfig) -> Result<(Models, TrainingOutcome), EngineError> {
    let (hmms, em) = train_hmms(cfg)?;
    let (models, dcg, examples) = train_weights(cfg, hmms)?;
    Ok((models, TrainingOutcome { em, dcg, examples }))
}

pub fn write_models(models: &Models, dir: &std::path::Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("hmms.json"), models.hmms.to_json())?;
    std::fs::write(dir.join("weights.json"), models.weights.to_json())
}

/// One scripted qualitative scenario and the plan summary it must produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Showcase {
    pub name: String,
    pub scenario: Scenario,
}

fn showcase(name: &str, entities: Vec<EntitySpec>, scripts: Vec<ActionScript>, utterances: &[(u64, &str)], gold: (RobotAction, &[&str]), seed: u64) -> Showcase {
    let mut entities = entities;
    entities.push(human());
    let horizon = utterances.iter().map(|u| u.0 + 1).max().unwrap_or(1);
    Showcase {
        name: name.into(),
        scenario: Scenario {
            world: WorldSpec { entities },
            scripts,
            utterances: utterances
                .iter()
                .map(|(t, s)| Utterance {
                    tick: *t,
                    text: s.to_string(),
                })
                .collect(),
            gold: Some(Gold {
                action: gold.0,
                targets: gold.1.iter().map(|s| s.to_string()).collect(),
            }),
            noise: NoiseConfig::default(),
            seed,
            horizon: Some(horizon),
        },
    }
}

fn scripted(action: HumanAction, patient: &str, start: u64, end: u64) -> ActionScript {
    ActionScript {
        action,
        actor: HUMAN.into(),
        patient: patient.into(),
        start_tick: start,
        end_tick: end,
        offset: None,
    }
}

/// The five qualitative scenarios: a fact then a command, an event-resolved
/// reference, a conjunction pack-up, a future-tense fact and belief fusion.
pub fn showcases() -> Vec<Showcase> {
    let p = Pose::new;
    vec![
        showcase(
            "snack-fact-then-pick",
            vec![
                object("box1", "box", "red", p(0.3, 0.3, 0.0)),
                object("box2", "box", "green", p(0.7, 0.5, 0.25)),
                object("can1", "can", "red", p(0.5, 0.6, 0.0)),
            ],
            vec![],
            &[(6, "The cracker box on the table is my snack."), (8, "Pick up my snack.")],
            (RobotAction::PickUp, &["box1"]),
            41,
        ),
        showcase(
            "event-disambiguated-lift",
            vec![
                object("box1", "box", "red", p(0.3, 0.3, 0.0)),
                object("box2", "box", "green", p(0.7, 0.3, 0.0)),
            ],
            vec![scripted(HumanAction::PutDown, "box2", 10, 22)],
            &[(28, "Lift the box that I put down.")],
            (RobotAction::PickUp, &["box2"]),
            42,
        ),
        showcase(
            "conjunction-pack-up",
            vec![
                object("can1", "can", "red", p(0.3, 0.3, 0.0)),
                object("box1", "box", "green", p(0.6, 0.3, 0.0)),
                object("cup1", "cup", "yellow", p(0.5, 0.6, 0.0)),
            ],
            vec![],
            &[(3, "The can and the box are my snack."), (5, "Pack up my snack.")],
            (RobotAction::PackUp, &["box1", "can1"]),
            43,
        ),
        showcase(
            "future-tense-pending-fact",
            vec![
                object("box1", "box", "red", p(0.3, 0.3, 0.0)),
                object("box2", "box", "green", p(0.7, 0.3, 0.0)),
                object("cup1", "cup", "yellow", p(0.5, 0.6, 0.0)),
            ],
            vec![scripted(HumanAction::PutDown, "box2", 10, 22)],
            &[(2, "The box I will put down is my snack."), (30, "Pick up my snack.")],
            (RobotAction::PickUp, &["box2"]),
            44,
        ),
        showcase(
            "two-fact-fusion-point",
            vec![
                EntitySpec {
                    size: Some("large".into()),
                    ..object("fruit1", "fruit", "red", p(0.3, 0.3, 0.0))
                },
                object("fruit2", "fruit", "green", p(0.6, 0.3, 0.0)),
                object("fruit3", "fruit", "yellow", p(0.8, 0.6, 0.25)),
            ],
            vec![],
            &[
                (6, "The fruit on the table is mine."),
                (7, "The small fruit is mine."),
                (9, "Point at my fruit."),
            ],
            (RobotAction::PointAt, &["fruit2"]),
            45,
        ),
    ]
}
