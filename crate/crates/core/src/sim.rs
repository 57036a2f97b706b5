//! Scripted 2.5-D tabletop simulation and the synthetic noisy detector.
//!
//! Agents are a single hand point. Every action script teleports the actor's
//! hand to the script's start pose on its first tick (a cut between stitched
//! clips), then interpolates linearly to the end pose.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EntityKind, EntityMeta, EntitySymbol, ModelError, Pose, WorldModel};

/// Height gained by a picked-up object.
pub const LIFT_HEIGHT: f64 = 0.20;
/// Hand-to-object distance at the near end of MoveToward / MoveAwayFrom.
pub const NEAR_REACH: f64 = 0.05;
/// Hand-to-object distance at the far end of MoveToward / MoveAwayFrom.
pub const FAR_REACH: f64 = 0.60;
/// Ticks a free hand lingers after a script before returning to rest.
pub const HAND_DWELL: u64 = 5;
/// Ticks the hand spends travelling to a script's start pose, or back to rest.
pub const HAND_TRAVEL: u64 = 8;
/// Peak extra height of the hand's arc while travelling between poses.
pub const TRAVEL_ARC: f64 = 0.4;
/// Table extent used for false-positive placement.
pub const TABLE_X: (f64, f64) = (0.0, 1.0);
pub const TABLE_Y: (f64, f64) = (0.0, 0.8);
/// Detection class emitted for an agent's hand point.
pub const HAND_CLASS: &str = "hand";
pub const DEFAULT_COLORS: [&str; 3] = ["green", "red", "yellow"];
pub const DEFAULT_SIZES: [&str; 2] = ["large", "small"];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("script {index} has start tick {start} >= end tick {end}")]
    EmptyScript { index: usize, start: u64, end: u64 },
    #[error("scripts {first} and {second} for actor `{actor}` overlap")]
    OverlappingScripts {
        actor: String,
        first: usize,
        second: usize,
    },
    #[error("script {index}: `{id}` is not a known {role}")]
    BadRole {
        index: usize,
        id: String,
        role: &'static str,
    },
    #[error("slide script {0} needs an offset")]
    MissingOffset(usize),
    #[error("utterance at tick {tick} is beyond the horizon {horizon}")]
    UtteranceAfterHorizon { tick: u64, horizon: u64 },
    #[error("noise parameter `{0}` out of range")]
    BadNoise(&'static str),
    #[error("expected tick {expected}, got {got}")]
    TickOrder { expected: u64, got: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("scenario json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HumanAction {
    PickUp,
    PutDown,
    Slide,
    MoveToward,
    MoveAwayFrom,
}

impl HumanAction {
    pub const ALL: [HumanAction; 5] = [
        HumanAction::PickUp,
        HumanAction::PutDown,
        HumanAction::Slide,
        HumanAction::MoveToward,
        HumanAction::MoveAwayFrom,
    ];

    /// Name of the matching human-action predicate.
    pub fn predicate_name(self) -> &'static str {
        match self {
            HumanAction::PickUp => "PickUp",
            HumanAction::PutDown => "PutDown",
            HumanAction::Slide => "Slide",
            HumanAction::MoveToward => "MoveToward",
            HumanAction::MoveAwayFrom => "MoveAwayFrom",
        }
    }

    pub fn from_predicate_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.predicate_name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionScript {
    pub action: HumanAction,
    pub actor: String,
    pub patient: String,
    pub start_tick: u64,
    pub end_tick: u64,
    /// Horizontal translation for Slide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_pos: f64,
    pub p_miss: f64,
    pub lambda_fp: f64,
    pub attr_confusion: f64,
}

impl NoiseConfig {
    pub const ZERO: NoiseConfig = NoiseConfig {
        sigma_pos: 0.0,
        p_miss: 0.0,
        lambda_fp: 0.0,
        attr_confusion: 0.0,
    };

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma_pos >= 0.0 && self.sigma_pos.is_finite()) {
            return Err(SimError::BadNoise("sigma_pos"));
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(SimError::BadNoise("p_miss"));
        }
        if !(self.lambda_fp >= 0.0 && self.lambda_fp.is_finite()) {
            return Err(SimError::BadNoise("lambda_fp"));
        }
        if !(0.0..=1.0).contains(&self.attr_confusion) {
            return Err(SimError::BadNoise("attr_confusion"));
        }
        Ok(())
    }
}

impl Default for NoiseConfig {
    /// The default evaluation noise.
    fn default() -> Self {
        Self {
            sigma_pos: 0.02,
            p_miss: 0.05,
            lambda_fp: 0.1,
            attr_confusion: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub id: String,
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<String>,
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<EntityKind>,
}

impl EntitySpec {
    pub fn kind(&self) -> EntityKind {
        self.kind.unwrap_or(match self.class.as_str() {
            "robot" => EntityKind::Robot,
            "human" | "person" => EntityKind::Agent,
            "table" => EntityKind::RegionAnchor,
            _ => EntityKind::Object,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub entities: Vec<EntitySpec>,
}

impl WorldSpec {
    /// Builds the world model, adding a robot and a table anchor when absent.
    pub fn world_model(&self) -> Result<WorldModel, ModelError> {
        let mut entries: Vec<(EntitySymbol, EntityMeta)> = self
            .entities
            .iter()
            .map(|e| {
                (
                    EntitySymbol::new(e.id.clone(), e.kind()),
                    EntityMeta {
                        class: e.class.clone(),
                        color: e.color.clone(),
                        size: e.size.clone(),
                        pose: e.pose,
                    },
                )
            })
            .collect();
        let has = |kind: EntityKind, entries: &[(EntitySymbol, EntityMeta)]| {
            entries.iter().any(|(e, _)| e.kind == kind)
        };
        if !has(EntityKind::Robot, &entries) {
            entries.push((
                EntitySymbol::new("robot", EntityKind::Robot),
                EntityMeta {
                    class: "robot".into(),
                    color: None,
                    size: None,
                    pose: Pose::new(0.5, -0.3, 0.0),
                },
            ));
        }
        if !entries
            .iter()
            .any(|(e, m)| e.kind == EntityKind::RegionAnchor && m.class == "table")
        {
            entries.push((
                EntitySymbol::new("table", EntityKind::RegionAnchor),
                EntityMeta {
                    class: "table".into(),
                    color: None,
                    size: None,
                    pose: Pose::new(0.5, 0.4, 0.0),
                },
            ));
        }
        WorldModel::new(entries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub tick: u64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RobotAction {
    PickUp,
    PackUp,
    PointAt,
}

impl RobotAction {
    pub const ALL: [RobotAction; 3] = [RobotAction::PickUp, RobotAction::PackUp, RobotAction::PointAt];

    pub fn name(self) -> &'static str {
        match self {
            RobotAction::PickUp => "PickUp",
            RobotAction::PackUp => "PackUp",
            RobotAction::PointAt => "PointAt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gold {
    pub action: RobotAction,
    pub targets: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub world: WorldSpec,
    #[serde(default)]
    pub scripts: Vec<ActionScript>,
    #[serde(default)]
    pub utterances: Vec<Utterance>,
    #[serde(default)]
    pub gold: Option<Gold>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub seed: u64,
    /// Number of frames simulated (ticks `0..horizon`). Derived when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn horizon(&self) -> u64 {
        self.horizon.unwrap_or_else(|| {
            let last_script = self.scripts.iter().map(|s| s.end_tick + 1).max().unwrap_or(1);
            let last_utt = self.utterances.iter().map(|u| u.tick + 1).max().unwrap_or(1);
            last_script.max(last_utt)
        })
    }

    pub fn world_model(&self) -> Result<WorldModel, SimError> {
        Ok(self.world.world_model()?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.noise.validate()?;
        let world = self.world_model()?;
        for (i, s) in self.scripts.iter().enumerate() {
            if s.start_tick >= s.end_tick {
                return Err(SimError::EmptyScript {
                    index: i,
                    start: s.start_tick,
                    end: s.end_tick,
                });
            }
            if world.get(&s.actor).map(|e| e.kind) != Some(EntityKind::Agent) {
                return Err(SimError::BadRole {
                    index: i,
                    id: s.actor.clone(),
                    role: "agent",
                });
            }
            if world.get(&s.patient).map(|e| e.kind) != Some(EntityKind::Object) {
                return Err(SimError::BadRole {
                    index: i,
                    id: s.patient.clone(),
                    role: "object",
                });
            }
            if s.action == HumanAction::Slide && s.offset.is_none() {
                return Err(SimError::MissingOffset(i));
            }
        }
        for (i, a) in self.scripts.iter().enumerate() {
            for (j, b) in self.scripts.iter().enumerate().skip(i + 1) {
                if a.actor == b.actor && a.start_tick < b.end_tick && b.start_tick < a.end_tick {
                    return Err(SimError::OverlappingScripts {
                        actor: a.actor.clone(),
                        first: i,
                        second: j,
                    });
                }
            }
        }
        let horizon = self.horizon();
        for u in &self.utterances {
            if u.tick >= horizon {
                return Err(SimError::UtteranceAfterHorizon {
                    tick: u.tick,
                    horizon,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub entity: EntitySymbol,
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct ScriptStart {
    patient: Pose,
    hand: Pose,
    patient_end: Pose,
    hand_end: Pose,
}

/// Simulation state at one tick. Agents are stored by their hand point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub tick: u64,
    pub objects: BTreeMap<String, ObjectState>,
    rest_z: BTreeMap<String, f64>,
    started: BTreeMap<usize, ScriptStart>,
    approach: BTreeMap<usize, (u64, Pose)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub id: String,
    pub kind: EntityKind,
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<String>,
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_by: Option<String>,
}

/// Simulator ground truth for one tick; agents appear as hand points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub tick: u64,
    pub objects: Vec<TruthObject>,
}

impl GroundTruthFrame {
    pub fn get(&self, id: &str) -> Option<&TruthObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

impl SimState {
    /// State at tick 0, with any scripts starting at tick 0 applied.
    pub fn initial(scenario: &Scenario) -> Result<Self, SimError> {
        let world = scenario.world_model()?;
        let mut objects = BTreeMap::new();
        let mut rest_z = BTreeMap::new();
        for e in world.entities() {
            if matches!(e.kind, EntityKind::Object | EntityKind::Agent) {
                let meta = world.meta(&e.id).expect("entity metadata");
                objects.insert(
                    e.id.clone(),
                    ObjectState {
                        entity: e.clone(),
                        pose: meta.pose,
                        held_by: None,
                    },
                );
                if e.kind == EntityKind::Object {
                    rest_z.insert(e.id.clone(), meta.pose.z);
                }
            }
        }
        let mut state = SimState {
            tick: 0,
            objects,
            rest_z,
            started: BTreeMap::new(),
            approach: BTreeMap::new(),
        };
        state.apply(scenario, 0);
        Ok(state)
    }

    pub fn truth(&self, scenario: &Scenario) -> GroundTruthFrame {
        let meta: BTreeMap<&str, &EntitySpec> = scenario
            .world
            .entities
            .iter()
            .map(|e| (e.id.as_str(), e))
            .collect();
        let objects = self
            .objects
            .values()
            .map(|o| {
                let spec = meta.get(o.entity.id.as_str());
                TruthObject {
                    id: o.entity.id.clone(),
                    kind: o.entity.kind,
                    class: spec.map(|s| s.class.clone()).unwrap_or_default(),
                    color: spec.and_then(|s| s.color.clone()),
                    size: spec.and_then(|s| s.size.clone()),
                    pose: o.pose,
                    held_by: o.held_by.clone(),
                }
            })
            .collect();
        GroundTruthFrame {
            tick: self.tick,
            objects,
        }
    }

    fn pose(&self, id: &str) -> Pose {
        self.objects.get(id).map(|o| o.pose).unwrap_or_default()
    }

    fn set_pose(&mut self, id: &str, pose: Pose) {
        if let Some(o) = self.objects.get_mut(id) {
            o.pose = pose;
        }
    }

    fn release_others(&mut self, actor: &str, keep: &str) {
        let held: Vec<String> = self
            .objects
            .values()
            .filter(|o| o.held_by.as_deref() == Some(actor) && o.entity.id != keep)
            .map(|o| o.entity.id.clone())
            .collect();
        for id in held {
            let z = self.rest_z.get(&id).copied().unwrap_or(0.0);
            if let Some(o) = self.objects.get_mut(&id) {
                o.pose.z = z;
                o.held_by = None;
            }
        }
    }

    fn capture(&mut self, script: &ActionScript) -> ScriptStart {
        self.release_others(&script.actor, &script.patient);
        let patient = self.pose(&script.patient);
        let held_by_actor = self
            .objects
            .get(&script.patient)
            .and_then(|o| o.held_by.as_deref())
            == Some(script.actor.as_str());
        match script.action {
            HumanAction::PickUp => {
                if !held_by_actor {
                    self.rest_z.insert(script.patient.clone(), patient.z);
                }
                if let Some(o) = self.objects.get_mut(&script.patient) {
                    o.held_by = Some(script.actor.clone());
                }
                let end = Pose::new(patient.x, patient.y, patient.z + LIFT_HEIGHT);
                ScriptStart {
                    patient,
                    hand: patient,
                    patient_end: end,
                    hand_end: end,
                }
            }
            HumanAction::PutDown => {
                let rest = self.rest_z.get(&script.patient).copied().unwrap_or(0.0);
                let mut start = patient;
                if !held_by_actor {
                    // clip starts with the object already in hand
                    start.z = rest + LIFT_HEIGHT;
                    if let Some(o) = self.objects.get_mut(&script.patient) {
                        o.held_by = Some(script.actor.clone());
                    }
                }
                let end = Pose::new(start.x, start.y, rest);
                ScriptStart {
                    patient: start,
                    hand: start,
                    patient_end: end,
                    hand_end: end,
                }
            }
            HumanAction::Slide => {
                let (dx, dy) = script.offset.unwrap_or((0.0, 0.0));
                let end = Pose::new(patient.x + dx, patient.y + dy, patient.z);
                ScriptStart {
                    patient,
                    hand: patient,
                    patient_end: end,
                    hand_end: end,
                }
            }
            HumanAction::MoveToward | HumanAction::MoveAwayFrom => {
                // reach straight down onto the object, clear of its neighbours
                let at = |r: f64| Pose::new(patient.x, patient.y, patient.z + r);
                let (from, to) = if script.action == HumanAction::MoveToward {
                    (at(FAR_REACH), at(NEAR_REACH))
                } else {
                    (at(NEAR_REACH), at(FAR_REACH))
                };
                ScriptStart {
                    patient,
                    hand: from,
                    patient_end: patient,
                    hand_end: to,
                }
            }
        }
    }

    fn apply(&mut self, scenario: &Scenario, tick: u64) {
        let mut order: Vec<usize> = (0..scenario.scripts.len()).collect();
        order.sort_by_key(|&i| (scenario.scripts[i].start_tick, i));
        let body_of = |actor: &str| {
            scenario
                .world
                .entities
                .iter()
                .find(|e| e.id == actor)
                .map(|e| e.pose)
                .unwrap_or_default()
        };
        // a free hand drifts back to rest after a short dwell
        for (i, script) in scenario.scripts.iter().enumerate() {
            let from = script.end_tick + HAND_DWELL;
            if tick <= from || tick > from + HAND_TRAVEL {
                continue;
            }
            let busy = scenario
                .scripts
                .iter()
                .any(|s| s.actor == script.actor && s.start_tick <= tick && tick <= s.end_tick);
            let holding = self.objects.values().any(|o| o.held_by.as_deref() == Some(script.actor.as_str()));
            let Some(start) = self.started.get(&i) else { continue };
            if !busy && !holding {
                let f = (tick - from) as f64 / HAND_TRAVEL as f64;
                let hand = arc(start.hand_end, body_of(&script.actor), f);
                self.set_pose(&script.actor, hand);
            }
        }
        // and travels to the start pose of its next script beforehand
        for &i in &order {
            let script = &scenario.scripts[i];
            let prev_end = scenario
                .scripts
                .iter()
                .filter(|s| s.actor == script.actor && s.end_tick < script.start_tick)
                .map(|s| s.end_tick + 1)
                .max()
                .unwrap_or(0);
            let t0 = script.start_tick.saturating_sub(HAND_TRAVEL).max(prev_end);
            if tick < t0 || tick >= script.start_tick {
                continue;
            }
            if !self.approach.contains_key(&i) {
                self.release_others(&script.actor, &script.patient);
                self.approach.insert(i, (t0, self.pose(&script.actor)));
            }
            let (t0, origin) = self.approach[&i];
            let target = self.clone().capture(script).hand;
            let f = (tick - t0 + 1) as f64 / (script.start_tick - t0 + 1) as f64;
            self.set_pose(&script.actor, arc(origin, target, f));
        }
        for &i in &order {
            let script = &scenario.scripts[i];
            if tick < script.start_tick || tick > script.end_tick {
                continue;
            }
            if !self.started.contains_key(&i) {
                let start = self.capture(script);
                self.started.insert(i, start);
            }
            let start = self.started[&i].clone();
            let f = (tick - script.start_tick) as f64 / (script.end_tick - script.start_tick) as f64;
            let (patient, hand) = if f >= 1.0 {
                (start.patient_end, start.hand_end)
            } else {
                (
                    start.patient.lerp(&start.patient_end, f),
                    start.hand.lerp(&start.hand_end, f),
                )
            };
            self.set_pose(&script.patient, patient);
            self.set_pose(&script.actor, hand);
            if f >= 1.0 && script.action == HumanAction::PutDown {
                if let Some(o) = self.objects.get_mut(&script.patient) {
                    o.held_by = None;
                }
            }
        }
    }
}

/// Travel path between two hand poses, lifted into an arc above the table.
fn arc(from: Pose, to: Pose, f: f64) -> Pose {
    let mut p = from.lerp(&to, f);
    p.z += TRAVEL_ARC * 4.0 * f * (1.0 - f);
    p
}

/// Advances the simulation by one tick.
pub fn step(
    scenario: &Scenario,
    state: &SimState,
    tick: u64,
) -> Result<(SimState, GroundTruthFrame), SimError> {
    if tick != state.tick + 1 {
        return Err(SimError::TickOrder {
            expected: state.tick + 1,
            got: tick,
        });
    }
    let mut next = state.clone();
    next.tick = tick;
    next.apply(scenario, tick);
    let truth = next.truth(scenario);
    Ok((next, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub center: Pose,
    pub class_scores: BTreeMap<String, f64>,
    /// Keyed by attribute (`color`, `size`), each a distribution over tags.
    pub attr_scores: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Detection {
    pub fn class_score(&self, class: &str) -> f64 {
        self.class_scores.get(class).copied().unwrap_or(0.0)
    }

    pub fn attr_score(&self, attr: &str, tag: &str) -> f64 {
        self.attr_scores
            .get(attr)
            .and_then(|m| m.get(tag))
            .copied()
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub tick: u64,
    pub detections: Vec<Detection>,
}

/// Tag alphabets the detector scores over.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorAlphabet {
    pub classes: Vec<String>,
    pub colors: Vec<String>,
    pub sizes: Vec<String>,
}

impl DetectorAlphabet {
    pub fn for_world(world: &WorldModel) -> Self {
        let mut classes = world.object_classes();
        if world.agents().next().is_some() {
            classes.insert(HAND_CLASS.to_string());
        }
        let mut colors: BTreeSet<String> = DEFAULT_COLORS.iter().map(|s| s.to_string()).collect();
        let mut sizes: BTreeSet<String> = DEFAULT_SIZES.iter().map(|s| s.to_string()).collect();
        for e in world.objects() {
            if let Some(m) = world.meta(&e.id) {
                colors.extend(m.color.clone());
                sizes.extend(m.size.clone());
            }
        }
        Self {
            classes: classes.into_iter().collect(),
            colors: colors.into_iter().collect(),
            sizes: sizes.into_iter().collect(),
        }
    }
}

/// Deterministic per-tick detector stream.
pub fn detector_rng(seed: u64, tick: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tick);
    rng
}

fn confused(alphabet: &[String], truth: Option<&str>, confusion: f64) -> BTreeMap<String, f64> {
    let n = alphabet.len();
    let mut out = BTreeMap::new();
    match truth.filter(|t| alphabet.iter().any(|a| a == t)) {
        Some(t) if n > 1 => {
            let rest = confusion / (n - 1) as f64;
            for a in alphabet {
                out.insert(a.clone(), if a == t { 1.0 - confusion } else { rest });
            }
        }
        Some(t) => {
            out.insert(t.to_string(), 1.0);
        }
        None => {
            for a in alphabet {
                out.insert(a.clone(), 1.0 / n as f64);
            }
        }
    }
    out
}

fn attrs(
    alphabet: &DetectorAlphabet,
    color: Option<&str>,
    size: Option<&str>,
    confusion: f64,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    m.insert("color".into(), confused(&alphabet.colors, color, confusion));
    m.insert("size".into(), confused(&alphabet.sizes, size, confusion));
    m
}

/// Synthesizes the noisy detections for one ground-truth frame.
pub fn detect(
    frame: &GroundTruthFrame,
    alphabet: &DetectorAlphabet,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> DetectionFrame {
    let jitter = Normal::new(0.0, noise.sigma_pos.max(0.0)).expect("finite sigma");
    let mut detections = Vec::new();
    for obj in &frame.objects {
        let (class, color, size) = match obj.kind {
            EntityKind::Object => (obj.class.as_str(), obj.color.as_deref(), obj.size.as_deref()),
            EntityKind::Agent => (HAND_CLASS, None, None),
            _ => continue,
        };
        if noise.p_miss > 0.0 && rng.random::<f64>() < noise.p_miss {
            continue;
        }
        let mut center = obj.pose;
        if noise.sigma_pos > 0.0 {
            center.x += jitter.sample(rng);
            center.y += jitter.sample(rng);
            center.z += jitter.sample(rng);
        }
        detections.push(Detection {
            center,
            class_scores: confused(&alphabet.classes, Some(class), noise.attr_confusion),
            attr_scores: attrs(alphabet, color, size, noise.attr_confusion),
        });
    }
    if noise.lambda_fp > 0.0 {
        let count = Poisson::new(noise.lambda_fp)
            .expect("positive rate")
            .sample(rng) as usize;
        for _ in 0..count {
            let center = Pose::new(
                rng.random_range(TABLE_X.0..TABLE_X.1),
                rng.random_range(TABLE_Y.0..TABLE_Y.1),
                0.0,
            );
            detections.push(Detection {
                center,
                class_scores: confused(&alphabet.classes, None, 0.0),
                attr_scores: attrs(alphabet, None, None, 0.0),
            });
        }
    }
    DetectionFrame {
        tick: frame.tick,
        detections,
    }
}

/// One simulated tick: ground truth plus the detector's view of it.
#[derive(Debug, Clone)]
pub struct SimFrame {
    pub truth: GroundTruthFrame,
    pub detections: DetectionFrame,
}

/// Steps a scenario from tick 0 through its horizon.
pub struct SimRun<'a> {
    scenario: &'a Scenario,
    alphabet: DetectorAlphabet,
    state: Option<SimState>,
    horizon: u64,
}

impl<'a> SimRun<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let world = scenario.world_model()?;
        Ok(Self {
            scenario,
            alphabet: DetectorAlphabet::for_world(&world),
            state: None,
            horizon: scenario.horizon(),
        })
    }

    pub fn state(&self) -> Option<&SimState> {
        self.state.as_ref()
    }

    fn next_frame(&mut self) -> Result<Option<SimFrame>, SimError> {
        let (state, truth) = match &self.state {
            None => {
                let s = SimState::initial(self.scenario)?;
                let t = s.truth(self.scenario);
                (s, t)
            }
            Some(prev) if prev.tick + 1 < self.horizon => step(self.scenario, prev, prev.tick + 1)?,
            Some(_) => return Ok(None),
        };
        let mut rng = detector_rng(self.scenario.seed, truth.tick);
        let detections = detect(&truth, &self.alphabet, &self.scenario.noise, &mut rng);
        self.state = Some(state);
        Ok(Some(SimFrame { truth, detections }))
    }
}

impl Iterator for SimRun<'_> {
    type Item = Result<SimFrame, SimError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Runs a scenario to its horizon.
pub fn simulate(scenario: &Scenario) -> Result<Vec<SimFrame>, SimError> {
    SimRun::new(scenario)?.collect()
}

/// Writes detections as JSON lines, one frame per line.
pub fn write_detection_stream<W: Write>(out: &mut W, frames: &[DetectionFrame]) -> io::Result<()> {
    for f in frames {
        serde_json::to_writer(&mut *out, f)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_detection_stream(text: &str) -> Result<Vec<DetectionFrame>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
