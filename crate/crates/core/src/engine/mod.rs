//! The grounding session: accrued detections, the factual belief state,
//! pending future-tense facts and the per-utterance pipeline
//! (parse → partition → declarative → imperative → plan → state update).

mod plan;
mod runner;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use plan::{plan, ActionPlan, PlanStep, PlanSummary, PACK_REGION};
pub use runner::{run_scenario, ScenarioOutcome, ScenarioSession, UtteranceOutcome};
pub use trace::{read_trace, reconstruct, write_trace, TraceEvent, TraceKind};

use crate::dcg::{
    self, bucket, ConstituentEvidence, DcgError, DeclarativeEvidence, EntityEvidence, FactorGraph, GroupEvidence,
    ImperativeSymbol, Weights,
};
use crate::facts::{BeliefEntry, FactError, FactKey, FactualBeliefState, Polarity};
use crate::model::{EntityKind, ModelError, Pose, PredicateKind, Vocabulary, WorldModel};
use crate::parser::{
    extract_unknown_attribute, parse, partition, Lexicon, ParseError, ParseTree, Partition, Role, SentenceKind,
    SymbolRef, Tense,
};
use crate::sim::{DetectionFrame, HumanAction};
use crate::tracker::{
    joint_viterbi, Constraints, EventQuery, HmmSet, Participant, PredicateUse, TrackerConfig, TrackerError,
    BACKGROUND, ON_TABLE,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("no referent for `{phrase}` among [{}]", candidates.join(", "))]
    NoReferent { phrase: String, candidates: Vec<String> },
    #[error("ambiguous command: {}", candidates.iter().map(|(s, p)| format!("{s} ({p:.3})")).collect::<Vec<_>>().join(" vs "))]
    Ambiguous { candidates: Vec<(String, f64)> },
    #[error("unknown fact `{0}`")]
    UnknownFact(String),
    #[error("the world has no agent to perform `{0}`")]
    NoAgent(String),
    #[error("future-tense clauses are only supported in fact sentences")]
    FutureInCommand,
    #[error("frame tick {got} does not follow tick {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Dcg(#[from] DcgError),
    #[error(transparent)]
    Fact(#[from] FactError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

impl EngineError {
    /// Whether a client sent something the grammar rejects.
    pub fn is_parse(&self) -> bool {
        matches!(self, EngineError::Parse(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub tracker: TrackerConfig,
    pub pending_window: u64,
    /// Event log-likelihood ratio a pending clause must exceed.
    pub pending_threshold: f64,
    pub region_window: usize,
    /// Mean per-frame log-likelihood ratio a region relation must exceed.
    pub region_threshold: f64,
    pub event_temperature: f64,
    pub ambiguity_margin: f64,
    pub beam_width: usize,
    /// Bindings below this weight are not asserted.
    pub min_assert_binding: f64,
    /// Per-frame probabilities of an event starting, and of it ending once
    /// its final state is reached, when scored inside a longer history.
    pub event_enter: f64,
    pub event_exit: f64,
    /// Score events against the other actions as well as the background.
    pub event_rivals: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            pending_window: 40,
            pending_threshold: -1.0,
            region_window: 10,
            region_threshold: -1.2,
            event_temperature: 1.0,
            ambiguity_margin: 0.1,
            beam_width: dcg::DEFAULT_BEAM,
            min_assert_binding: 0.05,
            event_enter: 0.05,
            event_exit: 0.05,
            event_rivals: false,
        }
    }
}

/// Everything read-only a session grounds with.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub vocab: Vocabulary,
    pub lexicon: Lexicon,
    pub hmms: HmmSet,
    pub weights: Weights,
}

impl Models {
    /// Untrained tables: hand-initialized HMMs and zero weights.
    pub fn initial() -> Self {
        Self {
            vocab: Vocabulary::default_table(),
            lexicon: Lexicon::default(),
            hmms: HmmSet::initial(),
            weights: Weights::default(),
        }
    }

    /// The trained models shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            hmms: HmmSet::from_json(include_str!("../../models/hmms.json")).expect("shipped hmms parse"),
            weights: Weights::from_json(include_str!("../../models/weights.json")).expect("shipped weights parse"),
            ..Self::initial()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub constituent: usize,
    pub kind: PredicateKind,
    pub predicate: String,
    pub roles: Vec<String>,
    pub score: f64,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstituentBinding {
    pub constituent: usize,
    pub candidates: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImperativeFactor {
    pub constituent: usize,
    pub symbol: ImperativeSymbol,
    pub value: bool,
    pub p_true: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImperativeResult {
    pub factors: Vec<ImperativeFactor>,
    pub log_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PlanSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefUpdate {
    pub key: FactKey,
    pub polarity: Polarity,
    pub weight: f64,
    pub posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub entity: String,
    pub tick: u64,
    pub llr: f64,
}

/// A future-tense fact waiting for its event to be observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingFact {
    pub action: HumanAction,
    pub agent: String,
    pub candidates: Vec<String>,
    pub fact: String,
    pub polarity: Polarity,
    pub created_tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<Resolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<u64>,
    pub utterance: String,
    pub tree: ParseTree,
    pub partition: Partition,
    pub declarative: Vec<Correspondence>,
    pub bindings: Vec<ConstituentBinding>,
    pub imperative: ImperativeResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ActionPlan>,
    pub updates: Vec<BeliefUpdate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending: Option<PendingFact>,
    /// Belief state after this utterance.
    pub beliefs: Vec<BeliefEntry>,
}

impl GroundingResult {
    pub fn summary(&self) -> Option<&PlanSummary> {
        self.plan.as_ref().map(|p| &p.summary)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("result serializes")
    }
}

struct NpEval {
    evidence: ConstituentEvidence,
    correspondences: Vec<Correspondence>,
    future: Option<(HumanAction, String)>,
}

pub struct Session {
    world: WorldModel,
    models: Arc<Models>,
    events: HmmSet,
    vocab: Vocabulary,
    lexicon: Lexicon,
    cfg: EngineConfig,
    detections: Vec<DetectionFrame>,
    beliefs: FactualBeliefState,
    pending: Vec<PendingFact>,
    last_binding: Option<String>,
    last_plan: Option<ActionPlan>,
    trace: Vec<TraceEvent>,
}

impl Session {
    pub fn new(world: WorldModel, models: Arc<Models>, cfg: EngineConfig) -> Self {
        let names: Vec<&str> = HumanAction::ALL.iter().map(|a| a.predicate_name()).collect();
        let events = models
            .hmms
            .embedded(&names, cfg.event_enter, cfg.event_exit)
            .unwrap_or_else(|_| models.hmms.clone());
        Self {
            events,
            vocab: models.vocab.clone(),
            lexicon: models.lexicon.clone(),
            world,
            models,
            cfg,
            detections: Vec::new(),
            beliefs: FactualBeliefState::default(),
            pending: Vec::new(),
            last_binding: None,
            last_plan: None,
            trace: Vec::new(),
        }
    }

    /// Replaces the belief state with a snapshot, registering its facts.
    pub fn restore_beliefs(&mut self, snapshot: &[u8]) -> Result<(), EngineError> {
        let k = FactualBeliefState::restore_with(snapshot, self.beliefs.obs_model())?;
        for (key, _) in k.iter() {
            if !self.vocab.is_factual(&key.predicate) {
                let p = self.vocab.register_fact_predicate(&key.predicate)?;
                self.lexicon.add_fact(&p.name.to_lowercase(), &p.name);
            }
        }
        self.beliefs = k;
        Ok(())
    }

    /// Replaces the belief state wholesale; its facts must already be known.
    pub fn set_beliefs(&mut self, beliefs: FactualBeliefState) {
        self.beliefs = beliefs;
    }

    pub fn world(&self) -> &WorldModel {
        &self.world
    }

    pub fn beliefs(&self) -> &FactualBeliefState {
        &self.beliefs
    }

    pub fn pending(&self) -> &[PendingFact] {
        &self.pending
    }

    pub fn detections(&self) -> &[DetectionFrame] {
        &self.detections
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn last_plan(&self) -> Option<&ActionPlan> {
        self.last_plan.as_ref()
    }

    pub fn last_binding(&self) -> Option<&str> {
        self.last_binding.as_deref()
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.detections.last().map(|f| f.tick)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    fn log(&mut self, kind: TraceKind, payload: serde_json::Value) {
        let seq = self.trace.len() as u64;
        let tick = self.last_tick();
        self.trace.push(TraceEvent {
            seq,
            tick,
            kind,
            payload,
        });
    }

    /// Appends a frame and tries to resolve pending facts against the
    /// trailing window.
    pub fn observe(&mut self, frame: DetectionFrame) -> Result<Vec<BeliefUpdate>, EngineError> {
        if let Some(last) = self.last_tick() {
            if frame.tick <= last {
                return Err(EngineError::OutOfOrder { last, got: frame.tick });
            }
        }
        let tick = frame.tick;
        let n = frame.detections.len();
        self.detections.push(frame);
        self.log(TraceKind::Observe, json!({ "tick": tick, "detections": n }));
        let mut updates = Vec::new();
        for i in 0..self.pending.len() {
            if self.pending[i].resolved.is_some() {
                continue;
            }
            let p = self.pending[i].clone();
            let lo = p.created_tick.max((tick + 1).saturating_sub(self.cfg.pending_window));
            if tick < lo + 2 {
                continue;
            }
            let mut best: Option<(String, f64)> = None;
            for e in &p.candidates {
                let llr = self.event_llr(p.action, &p.agent, e, Some((lo, tick)))?;
                if best.as_ref().is_none_or(|(_, b)| llr > *b) {
                    best = Some((e.clone(), llr));
                }
            }
            let Some((entity, llr)) = best else { continue };
            if llr <= self.cfg.pending_threshold {
                continue;
            }
            let key = FactKey::new(p.fact.clone(), entity.clone());
            let posterior = self.beliefs.assert_update(&self.vocab, &key, p.polarity, 1.0)?;
            let update = BeliefUpdate {
                key,
                polarity: p.polarity,
                weight: 1.0,
                posterior,
            };
            self.pending[i].resolved = Some(Resolution {
                entity: entity.clone(),
                tick,
                llr,
            });
            self.last_binding = Some(entity);
            self.log(
                TraceKind::StateUpdate,
                json!({
                    "source": "pending",
                    "pending": self.pending[i],
                    "updates": [update],
                    "beliefs": self.beliefs.entries(),
                }),
            );
            updates.push(update);
        }
        Ok(updates)
    }

    fn agent(&self, phrase: &str) -> Result<String, EngineError> {
        self.world
            .agents()
            .next()
            .map(|a| a.id.clone())
            .ok_or_else(|| EngineError::NoAgent(phrase.to_string()))
    }

    fn joint(&self, q: &EventQuery) -> Result<f64, TrackerError> {
        Ok(joint_viterbi(q, &self.detections, &self.models.hmms, &self.cfg.tracker)?.score)
    }

    fn joint_event(&self, q: &EventQuery) -> Result<f64, TrackerError> {
        Ok(joint_viterbi(q, &self.detections, &self.events, &self.cfg.tracker)?.score)
    }

    fn constraints(&self, id: &str) -> Constraints {
        Constraints::for_entity(&self.world, id).unwrap_or_default()
    }

    /// Log-likelihood ratio of an event against the best competing
    /// explanation: any other action, or no action at all.
    fn event_llr(
        &self,
        action: HumanAction,
        agent: &str,
        patient: &str,
        window: Option<(u64, u64)>,
    ) -> Result<f64, EngineError> {
        let participants = vec![
            Participant::tracked("agent", self.constraints(agent)),
            Participant::tracked("patient", self.constraints(patient)),
        ];
        let q = |hmm: &str| EventQuery {
            participants: participants.clone(),
            predicates: vec![PredicateUse {
                hmm: hmm.to_string(),
                args: vec![0, 1],
            }],
            window,
        };
        let own = self.joint_event(&q(action.predicate_name()))?;
        let mut rival = f64::NEG_INFINITY;
        let names = HumanAction::ALL
            .iter()
            .filter(|a| self.cfg.event_rivals && **a != action)
            .map(|a| a.predicate_name());
        for name in names.chain([BACKGROUND]) {
            if self.events.get(name).is_some() {
                rival = rival.max(self.joint_event(&q(name))?);
            }
        }
        Ok(own - rival)
    }

    /// Mean per-frame log-likelihood ratio of a region relation over the
    /// trailing window.
    fn region_score(&self, hmm: &str, participants: Vec<Participant>) -> Result<f64, EngineError> {
        let n = self.detections.len();
        if n == 0 {
            return Err(TrackerError::EmptyWindow.into());
        }
        let first = self.detections[n.saturating_sub(self.cfg.region_window)].tick;
        let last = self.detections[n - 1].tick;
        let args = (0..participants.len()).collect();
        let q = EventQuery {
            participants,
            predicates: vec![PredicateUse {
                hmm: hmm.to_string(),
                args,
            }],
            window: Some((first, last)),
        };
        let frames = q.frames(&self.detections).len() as f64;
        Ok((self.joint(&q)? - self.joint(&q.without_predicates())?) / frames)
    }

    fn table_pose(&self) -> Pose {
        self.world
            .entities()
            .iter()
            .find(|e| e.kind == EntityKind::RegionAnchor)
            .and_then(|e| self.world.meta(&e.id))
            .map(|m| m.pose)
            .unwrap_or_default()
    }

    fn phrase(tree: &ParseTree, id: usize) -> String {
        let (a, b) = tree.node(id).span;
        tree.tokens[a..b].join(" ")
    }

    fn resolve_np(&self, tree: &ParseTree, id: usize) -> Result<NpEval, EngineError> {
        let node = tree.node(id);
        if node.role == Role::Pronoun {
            let e = self.last_binding.clone().ok_or_else(|| EngineError::NoReferent {
                phrase: node.head.clone(),
                candidates: vec![],
            })?;
            return Ok(NpEval {
                evidence: ConstituentEvidence {
                    candidates: vec![EntityEvidence {
                        entity: e,
                        binding: 1.0,
                        top: true,
                        class_match: None,
                        color_match: None,
                        size_match: None,
                        belief: None,
                    }],
                    groups: vec![],
                },
                correspondences: vec![],
                future: None,
            });
        }
        let mut class = None;
        let mut facts: Vec<String> = Vec::new();
        let (mut color, mut size) = (None, None);
        let mut possessive = false;
        let mut region = None;
        let mut event = None;
        match &node.symbol {
            Some(SymbolRef::Class(c)) => class = c.clone(),
            Some(SymbolRef::Fact(f)) => facts.push(f.clone()),
            _ => {}
        }
        for &c in &node.children {
            let child = tree.node(c);
            match (child.role, &child.symbol) {
                (Role::Possessive, _) => possessive = true,
                (Role::Modifier, Some(SymbolRef::Color(x))) => color = Some(x.clone()),
                (Role::Modifier, Some(SymbolRef::Size(x))) => size = Some(x.clone()),
                (Role::Modifier, Some(SymbolRef::Fact(f))) => facts.push(f.clone()),
                (Role::Preposition, Some(SymbolRef::Region(r))) => region = Some((r.clone(), child.children[0])),
                (Role::RelativeClause, _) => {
                    let verb = tree.children_with_role(c, Role::Verb).next().expect("clause verb");
                    let agent = tree.children_with_role(c, Role::Agent).next().expect("clause agent");
                    if let Some(SymbolRef::Event(a)) = verb.symbol {
                        event = Some((a, self.agent(&agent.head)?, verb.tense.unwrap_or(Tense::Past)));
                    }
                }
                _ => {}
            }
        }
        if possessive && facts.is_empty() {
            facts.push("Mine".into());
        }
        for f in &facts {
            if !self.vocab.is_factual(f) {
                return Err(EngineError::UnknownFact(f.clone()));
            }
        }
        let phrase = Self::phrase(tree, id);
        let all: Vec<String> = self
            .world
            .objects()
            .filter(|e| {
                class
                    .as_ref()
                    .is_none_or(|c| self.world.meta(&e.id).is_some_and(|m| &m.class == c))
            })
            .map(|e| e.id.clone())
            .collect();
        let belief_of = |e: &str| -> Option<f64> {
            facts
                .iter()
                .map(|f| self.beliefs.query(&FactKey::new(f.clone(), e)))
                .reduce(f64::min)
        };
        let candidates: Vec<String> = all
            .iter()
            .filter(|e| belief_of(e).is_none_or(|b| b > 0.5))
            .cloned()
            .collect();
        if candidates.is_empty() {
            return Err(EngineError::NoReferent { phrase, candidates: all });
        }
        let mut corr = Vec::new();
        let mut logw: Vec<f64> = Vec::with_capacity(candidates.len());
        let mut region_target = None;
        if let Some((r, obj)) = &region {
            let on_table = tree.node(*obj).symbol == Some(SymbolRef::Class(Some("table".into())));
            region_target = Some(if on_table {
                None
            } else {
                let inner = self.resolve_np(tree, *obj)?;
                let top = inner.evidence.top().map(|t| t.entity.clone()).ok_or_else(|| EngineError::NoReferent {
                    phrase: Self::phrase(tree, *obj),
                    candidates: inner.evidence.candidates.iter().map(|c| c.entity.clone()).collect(),
                })?;
                corr.extend(inner.correspondences);
                Some(top)
            });
            let _ = r;
        }
        let mut ev_out = Vec::with_capacity(candidates.len());
        for e in &candidates {
            let meta = self.world.meta(e).expect("object metadata");
            let color_match = color.as_ref().map(|c| meta.color.as_ref() == Some(c));
            let size_match = size.as_ref().map(|s| meta.size.as_ref() == Some(s));
            let mut lw = if color_match == Some(false) || size_match == Some(false) {
                f64::NEG_INFINITY
            } else {
                0.0
            };
            for f in &facts {
                let p = self.beliefs.query(&FactKey::new(f.clone(), e.clone()));
                corr.push(Correspondence {
                    constituent: id,
                    kind: PredicateKind::Factual,
                    predicate: f.clone(),
                    roles: vec![e.clone()],
                    score: p,
                    value: p > 0.5,
                });
                lw += (p / (1.0 - p)).ln();
            }
            if let (Some((r, _)), Some(target)) = (&region, &region_target) {
                if lw.is_finite() {
                    let (hmm, parts, other) = match (r.as_str(), target) {
                        ("On", None) => (
                            ON_TABLE.to_string(),
                            vec![Participant::tracked("x", self.constraints(e))],
                            "table".to_string(),
                        ),
                        (_, None) => (
                            r.clone(),
                            vec![
                                Participant::tracked("x", self.constraints(e)),
                                Participant::anchored("table", self.table_pose()),
                            ],
                            "table".to_string(),
                        ),
                        (_, Some(t)) => (
                            r.clone(),
                            vec![
                                Participant::tracked("x", self.constraints(e)),
                                Participant::tracked("y", self.constraints(t)),
                            ],
                            t.clone(),
                        ),
                    };
                    let score = if Some(e) == target.as_ref() {
                        f64::NEG_INFINITY
                    } else {
                        self.region_score(&hmm, parts)?
                    };
                    let sat = score > self.cfg.region_threshold;
                    corr.push(Correspondence {
                        constituent: id,
                        kind: PredicateKind::Region,
                        predicate: r.clone(),
                        roles: vec![e.clone(), other],
                        score,
                        value: sat,
                    });
                    if !sat {
                        lw = f64::NEG_INFINITY;
                    }
                }
            }
            if let Some((a, agent, Tense::Past)) = &event {
                if lw.is_finite() {
                    let llr = self.event_llr(*a, agent, e, None)?;
                    corr.push(Correspondence {
                        constituent: id,
                        kind: PredicateKind::HumanAction,
                        predicate: a.predicate_name().into(),
                        roles: vec![agent.clone(), e.clone()],
                        score: llr,
                        value: false,
                    });
                    lw += llr / self.cfg.event_temperature;
                }
            }
            logw.push(lw);
            ev_out.push(EntityEvidence {
                entity: e.clone(),
                binding: 0.0,
                top: false,
                class_match: class.as_ref().map(|_| true),
                color_match,
                size_match,
                belief: belief_of(e),
            });
        }
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(EngineError::NoReferent { phrase, candidates });
        }
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        for (ev, wi) in ev_out.iter_mut().zip(&w) {
            ev.binding = wi / z;
        }
        let bmax = ev_out.iter().map(|e| e.binding).fold(0.0, f64::max);
        let at_max: Vec<usize> = (0..ev_out.len()).filter(|&i| ev_out[i].binding >= bmax - 1e-12).collect();
        if at_max.len() == 1 {
            ev_out[at_max[0]].top = true;
        }
        let top = ev_out.iter().find(|e| e.top).map(|e| e.entity.clone());
        for c in corr.iter_mut() {
            if c.kind == PredicateKind::HumanAction && c.constituent == id {
                c.value = top.as_deref() == c.roles.get(1).map(String::as_str);
            }
        }
        let mut groups = Vec::new();
        if !facts.is_empty() {
            let members: Vec<&EntityEvidence> = ev_out.iter().filter(|e| e.binding > 0.0).collect();
            if members.len() >= 2 {
                let beliefs: Vec<f64> = members.iter().filter_map(|m| m.belief).collect();
                let first = bucket(beliefs[0]);
                groups.push(GroupEvidence {
                    members: members.iter().map(|m| m.entity.clone()).collect(),
                    min_belief: beliefs.iter().cloned().fold(1.0, f64::min),
                    uniform: beliefs.iter().all(|b| bucket(*b) == first),
                });
            }
        }
        let future = match event {
            Some((a, agent, Tense::Future)) => Some((a, agent)),
            _ => None,
        };
        Ok(NpEval {
            evidence: ConstituentEvidence {
                candidates: ev_out,
                groups,
            },
            correspondences: corr,
            future,
        })
    }

    fn binding_of(id: usize, ev: &ConstituentEvidence) -> ConstituentBinding {
        ConstituentBinding {
            constituent: id,
            candidates: ev.candidates.iter().map(|c| (c.entity.clone(), c.binding)).collect(),
            map: ev.top().map(|t| t.entity.clone()),
        }
    }

    /// Grounds one utterance against everything observed so far.
    pub fn ground_utterance(&mut self, text: &str) -> Result<GroundingResult, EngineError> {
        let tree = match parse(text, &self.lexicon) {
            Ok(t) => t,
            Err(e) => {
                self.log(TraceKind::Parse, json!({ "utterance": text, "error": e }));
                return Err(e.into());
            }
        };
        let part = partition(&tree);
        self.log(
            TraceKind::Parse,
            json!({ "utterance": text, "tree": tree, "partition": part }),
        );
        let (declarative, bindings, evidence, pending) = self.declarative(&tree, &part)?;
        self.log(
            TraceKind::Declarative,
            json!({ "declarative": declarative, "bindings": bindings }),
        );
        let graph = FactorGraph::build(&tree, &part, &evidence)?;
        let ranked = dcg::infer_beam(&graph, &self.models.weights, self.cfg.beam_width);
        let best = &ranked[0];
        let factors: Vec<ImperativeFactor> = graph
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| ImperativeFactor {
                constituent: n.constituent_id,
                symbol: n.symbol.clone(),
                value: best.values[i],
                p_true: dcg::factor_prob(&graph, i, true, &best.values, &self.models.weights),
            })
            .collect();
        let mut imperative = ImperativeResult {
            factors,
            log_prob: best.log_prob,
            summary: None,
        };
        let mut updates = Vec::new();
        let mut plan_out = None;
        match tree.kind {
            SentenceKind::Command => {
                let chosen = self.choose(&graph, &ranked, &tree);
                match chosen {
                    Ok((summary, values, lp)) => {
                        imperative.factors.iter_mut().zip(&values).enumerate().for_each(|(i, (f, v))| {
                            f.value = *v;
                            f.p_true = dcg::factor_prob(&graph, i, true, &values, &self.models.weights);
                        });
                        imperative.log_prob = lp;
                        imperative.summary = Some(summary.clone());
                        self.log(TraceKind::Imperative, serde_json::to_value(&imperative).expect("json"));
                        let p = plan(&summary);
                        self.log(TraceKind::Plan, serde_json::to_value(&p).expect("json"));
                        self.last_binding = summary.targets.iter().next().cloned();
                        self.last_plan = Some(p.clone());
                        plan_out = Some(p);
                    }
                    Err(e) => {
                        self.log(TraceKind::Imperative, serde_json::to_value(&imperative).expect("json"));
                        return Err(e);
                    }
                }
            }
            SentenceKind::Fact => {
                self.log(TraceKind::Imperative, serde_json::to_value(&imperative).expect("json"));
                self.log(TraceKind::Plan, serde_json::Value::Null);
                let target = part.assert_target.as_ref().expect("fact sentences carry an assert target");
                let p_true = imperative.factors[0].p_true;
                let conf = (p_true / (1.0 - p_true)).min(1.0);
                let fact = self.fact_name(&tree)?;
                for (id, ev) in &evidence.constituents {
                    if pending.as_ref().is_some_and(|(pid, _)| pid == id) {
                        continue;
                    }
                    for c in &ev.candidates {
                        if c.binding < self.cfg.min_assert_binding {
                            continue;
                        }
                        let weight = (conf * c.binding).min(1.0);
                        if weight <= 0.0 {
                            continue;
                        }
                        let key = FactKey::new(fact.clone(), c.entity.clone());
                        let posterior = self.beliefs.assert_update(&self.vocab, &key, target.polarity, weight)?;
                        updates.push(BeliefUpdate {
                            key,
                            polarity: target.polarity,
                            weight,
                            posterior,
                        });
                    }
                    if let Some(t) = ev.top() {
                        self.last_binding = Some(t.entity.clone());
                    }
                }
            }
        }
        let pending_fact = pending.map(|(_, p)| p);
        if let Some(p) = &pending_fact {
            self.pending.push(p.clone());
        }
        let result = GroundingResult {
            tick: self.last_tick(),
            utterance: text.to_string(),
            tree,
            partition: part,
            declarative,
            bindings,
            imperative,
            plan: plan_out,
            updates,
            pending: pending_fact,
            beliefs: self.beliefs.entries(),
        };
        self.log(
            TraceKind::StateUpdate,
            json!({
                "source": "utterance",
                "updates": result.updates,
                "pending": result.pending,
                "beliefs": result.beliefs,
            }),
        );
        Ok(result)
    }

    /// Fact predicate of a copula sentence, registering unknown attributes.
    fn fact_name(&mut self, tree: &ParseTree) -> Result<String, EngineError> {
        let attr = tree.attribute().expect("fact sentence attribute");
        if let Some(SymbolRef::Fact(f)) = &attr.symbol {
            return Ok(f.clone());
        }
        match extract_unknown_attribute(tree, &self.lexicon) {
            Some(word) => {
                let p = self.vocab.register_fact_predicate(&word)?;
                self.lexicon.add_fact(&word, &p.name);
                Ok(p.name)
            }
            None => Err(EngineError::UnknownFact(attr.head.clone())),
        }
    }

    #[allow(clippy::type_complexity)]
    fn declarative(
        &mut self,
        tree: &ParseTree,
        part: &Partition,
    ) -> Result<
        (
            Vec<Correspondence>,
            Vec<ConstituentBinding>,
            DeclarativeEvidence,
            Option<(usize, PendingFact)>,
        ),
        EngineError,
    > {
        let mut declarative = Vec::new();
        let mut bindings = Vec::new();
        let mut evidence = DeclarativeEvidence::default();
        let mut pending = None;
        let arg = tree.argument().ok_or(DcgError::NoCommand)?;
        if tree.kind == SentenceKind::Command && part.pending_future {
            return Err(EngineError::FutureInCommand);
        }
        let fact = if tree.kind == SentenceKind::Fact {
            Some(self.fact_name(tree)?)
        } else {
            None
        };
        for c in tree.conjuncts(arg.id) {
            let eval = self.resolve_np(tree, c)?;
            declarative.extend(eval.correspondences);
            bindings.push(Self::binding_of(c, &eval.evidence));
            if let (Some((action, agent)), Some(f)) = (eval.future, &fact) {
                let target = part.assert_target.as_ref().expect("assert target");
                pending = Some((
                    c,
                    PendingFact {
                        action,
                        agent,
                        candidates: eval
                            .evidence
                            .candidates
                            .iter()
                            .filter(|e| e.binding > 0.0)
                            .map(|e| e.entity.clone())
                            .collect(),
                        fact: f.clone(),
                        polarity: target.polarity,
                        created_tick: self.last_tick().unwrap_or(0),
                        resolved: None,
                    },
                ));
                continue;
            }
            evidence.constituents.insert(c, eval.evidence);
        }
        if let Some(f) = &fact {
            let keys: BTreeSet<FactKey> = evidence
                .constituents
                .values()
                .flat_map(|ev| ev.candidates.iter())
                .filter(|c| c.binding >= self.cfg.min_assert_binding)
                .map(|c| FactKey::new(f.clone(), c.entity.clone()))
                .collect();
            evidence.assert_keys = Some(keys);
        }
        Ok((declarative, bindings, evidence, pending))
    }

    /// Best assignment with a well-formed summary, refusing near ties.
    fn choose(
        &self,
        graph: &FactorGraph,
        ranked: &[dcg::Assignment],
        tree: &ParseTree,
    ) -> Result<(PlanSummary, Vec<bool>, f64), EngineError> {
        let mut valid = ranked.iter().filter_map(|a| summarize(graph, &a.values).map(|s| (s, a)));
        let Some((first, a)) = valid.next() else {
            let arg = tree.argument().map(|a| Self::phrase(tree, a.id)).unwrap_or_default();
            let candidates: BTreeSet<String> = graph
                .nodes
                .iter()
                .filter_map(|n| n.symbol.contact_target().map(String::from))
                .collect();
            return Err(EngineError::NoReferent {
                phrase: arg,
                candidates: candidates.into_iter().collect(),
            });
        };
        if let Some((second, b)) = valid.find(|(s, _)| *s != first) {
            if a.log_prob - b.log_prob < self.cfg.ambiguity_margin {
                return Err(EngineError::Ambiguous {
                    candidates: vec![(first.to_string(), a.log_prob), (second.to_string(), b.log_prob)],
                });
            }
        }
        Ok((first, a.values.clone(), a.log_prob))
    }
}

/// Action and target set of an assignment, if it names exactly one action
/// and at least one target.
pub fn summarize(graph: &FactorGraph, values: &[bool]) -> Option<PlanSummary> {
    let mut action = None;
    let mut targets = BTreeSet::new();
    for (n, &v) in graph.nodes.iter().zip(values) {
        if !v {
            continue;
        }
        match &n.symbol {
            ImperativeSymbol::ActionGoal(a) => {
                if action.replace(*a).is_some() {
                    return None;
                }
            }
            ImperativeSymbol::Aggregate(m) => targets.extend(m.iter().cloned()),
            s => targets.extend(s.contact_target().map(String::from)),
        }
    }
    let action = action?;
    (!targets.is_empty()).then_some(PlanSummary { action, targets })
}

/// Graph and evidence for an utterance without mutating the session, for
/// building training data.
pub fn graph_for(session: &mut Session, text: &str) -> Result<(FactorGraph, DeclarativeEvidence), EngineError> {
    let tree = parse(text, &session.lexicon)?;
    let part = partition(&tree);
    let (_, _, evidence, _) = session.declarative(&tree, &part)?;
    Ok((FactorGraph::build(&tree, &part, &evidence)?, evidence))
}

pub type BindingMap = BTreeMap<usize, ConstituentBinding>;

#[cfg(test)]
mod tests;
