//! Sentence tracker: joint Viterbi over object tracks and predicate HMM
//! state paths against a detection stream.
//!
//! The lattice state at tick t is the tuple of per-participant detection
//! choices (a detection within the candidate beam, or a skip) together with
//! the tuple of per-predicate HMM states. Emissions read the current and
//! previous choices, so they are scored on lattice edges.

mod em;
mod hmm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use em::{em_train, Clip, EmReport};
pub use hmm::{ActionSymbol, Alphabet, HmmSet, PredicateHmm, BACKGROUND, ON_TABLE};

use crate::model::{EntityKind, Pose, WorldModel};
use crate::sim::{DetectionFrame, HAND_CLASS};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("query window holds no frames")]
    EmptyWindow,
    #[error("no HMM named `{0}`")]
    UnknownHmm(String),
    #[error("predicate `{name}` takes {expected} participants, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("participant index {0} out of range")]
    BadParticipant(usize),
    #[error("HMM `{name}`: {detail}")]
    BadTable { name: String, detail: String },
    #[error("hmm json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Binning thresholds for HMM observations, in metres and metres per tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub far: f64,
    pub near: f64,
    pub vz: f64,
    pub table_z: f64,
    pub high_z: f64,
    pub displaced: f64,
    pub support_xy: f64,
    pub support_dz: f64,
    pub region_margin: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            far: 0.40,
            near: 0.15,
            vz: 0.005,
            table_z: 0.05,
            high_z: 0.15,
            displaced: 0.10,
            support_xy: 0.05,
            support_dz: 0.07,
            region_margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub features: FeatureConfig,
    /// Motion penalty weight, per square metre.
    pub alpha: f64,
    pub skip_penalty: f64,
    /// Candidate beam per participant per frame.
    pub k_trk: usize,
    /// Detections scoring below this under the constraints are not candidates.
    pub min_candidate_score: f64,
    pub score_floor: f64,
    /// Whether a participant may skip a frame that has candidates.
    pub allow_skip: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            alpha: 50.0,
            skip_penalty: 5.0,
            k_trk: 10,
            min_candidate_score: 0.05,
            score_floor: 1e-6,
            allow_skip: true,
        }
    }
}

/// Class and attribute constraints on a tracked participant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Constraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<String>,
    /// Known resting pose, for the displacement feature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<Pose>,
}

impl Constraints {
    pub fn class(class: &str) -> Self {
        Self {
            class: Some(class.to_string()),
            ..Self::default()
        }
    }

    /// Constraints pinning a track to one entity's metadata.
    pub fn for_entity(world: &WorldModel, id: &str) -> Option<Self> {
        let e = world.get(id)?;
        let meta = world.meta(id)?;
        Some(match e.kind {
            EntityKind::Agent => Self::class(HAND_CLASS),
            _ => Self {
                class: Some(meta.class.clone()),
                color: meta.color.clone(),
                size: meta.size.clone(),
                home: Some(meta.pose),
            },
        })
    }

    pub fn score(&self, det: &crate::sim::Detection) -> f64 {
        let mut s = 1.0;
        if let Some(c) = &self.class {
            s *= det.class_score(c);
        }
        if let Some(c) = &self.color {
            s *= det.attr_score("color", c);
        }
        if let Some(z) = &self.size {
            s *= det.attr_score("size", z);
        }
        s
    }

    pub fn log_score(&self, det: &crate::sim::Detection, floor: f64) -> f64 {
        self.score(det).max(floor).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub var: String,
    #[serde(default)]
    pub constraints: Constraints,
    /// Fixed position instead of a track (region anchors).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Pose>,
}

impl Participant {
    pub fn tracked(var: &str, constraints: Constraints) -> Self {
        Self {
            var: var.to_string(),
            constraints,
            anchor: None,
        }
    }

    pub fn anchored(var: &str, pose: Pose) -> Self {
        Self {
            var: var.to_string(),
            constraints: Constraints::default(),
            anchor: Some(pose),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateUse {
    pub hmm: String,
    pub args: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventQuery {
    pub participants: Vec<Participant>,
    pub predicates: Vec<PredicateUse>,
    /// Inclusive tick range; `None` uses every frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(u64, u64)>,
}

impl EventQuery {
    pub fn without_predicates(&self) -> Self {
        Self {
            predicates: Vec::new(),
            ..self.clone()
        }
    }

    fn validate<'a>(&self, hmms: &'a HmmSet) -> Result<Vec<&'a PredicateHmm>, TrackerError> {
        self.predicates
            .iter()
            .map(|p| {
                let h = hmms.get(&p.hmm).ok_or_else(|| TrackerError::UnknownHmm(p.hmm.clone()))?;
                if p.args.len() != h.alphabet.arity() {
                    return Err(TrackerError::ArityMismatch {
                        name: p.hmm.clone(),
                        expected: h.alphabet.arity(),
                        got: p.args.len(),
                    });
                }
                if let Some(&bad) = p.args.iter().find(|&&a| a >= self.participants.len()) {
                    return Err(TrackerError::BadParticipant(bad));
                }
                Ok(h)
            })
            .collect()
    }

    pub fn frames<'f>(&self, frames: &'f [DetectionFrame]) -> &'f [DetectionFrame] {
        match self.window {
            None => frames,
            Some((lo, hi)) => {
                let a = frames.partition_point(|f| f.tick < lo);
                let b = frames.partition_point(|f| f.tick <= hi);
                &frames[a..b.max(a)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub var: String,
    /// Per-frame detection index; `None` is a skip (or an anchor).
    pub assignment: Vec<Option<usize>>,
    pub score: f64,
    #[serde(default)]
    pub anchored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViterbiResult {
    pub ticks: Vec<u64>,
    pub tracks: Vec<Track>,
    pub state_paths: Vec<Vec<usize>>,
    /// Joint log-score; `-inf` when no path reaches accepting states.
    pub score: f64,
}

/// Observation symbol for one predicate from its arguments' positions.
pub fn symbol(
    alphabet: Alphabet,
    cfg: &FeatureConfig,
    prev: &[Option<Pose>],
    cur: &[Pose],
    homes: &[Option<Pose>],
) -> usize {
    let height = |z: f64| {
        if z < cfg.table_z {
            0
        } else if z > cfg.high_z {
            2
        } else {
            1
        }
    };
    match alphabet {
        Alphabet::Action => {
            let (a, p) = (cur[0], cur[1]);
            let d = a.dist(&p);
            let dist = if d > cfg.far {
                0
            } else if d < cfg.near {
                2
            } else {
                1
            };
            let vz = match prev[1] {
                Some(q) if p.z - q.z > cfg.vz => 2,
                Some(q) if p.z - q.z < -cfg.vz => 0,
                _ => 1,
            };
            let displaced = match homes[1] {
                Some(h) if h.horizontal_dist(&p) > cfg.displaced => 1,
                _ => 0,
            };
            ActionSymbol {
                dist,
                height: height(p.z),
                vz,
                displaced,
            }
            .index()
        }
        Alphabet::Height => height(cur[0].z),
        Alphabet::OnSurface => usize::from(cur[0].z < cfg.table_z),
        Alphabet::Support => {
            let dz = cur[0].z - cur[1].z;
            usize::from(cur[0].horizontal_dist(&cur[1]) < cfg.support_xy && dz > 0.0 && dz <= cfg.support_dz)
        }
        Alphabet::LeftOf => usize::from(cur[0].x < cur[1].x - cfg.region_margin),
        Alphabet::InFrontOf => usize::from(cur[0].y < cur[1].y - cfg.region_margin),
    }
}

/// Log-likelihood of one track: per-frame constraint score or skip penalty,
/// plus the motion penalty between consecutive assigned frames.
pub fn track_score(
    assignment: &[Option<usize>],
    frames: &[DetectionFrame],
    constraints: &Constraints,
    cfg: &TrackerConfig,
) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<Pose> = None;
    for (a, f) in assignment.iter().zip(frames) {
        match a {
            Some(i) => {
                let d = &f.detections[*i];
                total += constraints.log_score(d, cfg.score_floor);
                if let Some(p) = prev {
                    total -= cfg.alpha * p.dist_sq(&d.center);
                }
                prev = Some(d.center);
            }
            None => {
                total -= cfg.skip_penalty;
                prev = None;
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Choice {
    Det(usize),
    Skip,
    Anchor(Pose),
}

impl Choice {
    fn pos(self, frame: &DetectionFrame) -> Option<Pose> {
        match self {
            Choice::Det(i) => Some(frame.detections[i].center),
            Choice::Anchor(p) => Some(p),
            Choice::Skip => None,
        }
    }
}

fn candidates(p: &Participant, frame: &DetectionFrame, cfg: &TrackerConfig) -> Vec<Choice> {
    if let Some(a) = p.anchor {
        return vec![Choice::Anchor(a)];
    }
    let mut scored: Vec<(usize, f64)> = frame
        .detections
        .iter()
        .enumerate()
        .map(|(i, d)| (i, p.constraints.score(d)))
        .filter(|(_, s)| *s >= cfg.min_candidate_score)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(cfg.k_trk);
    let mut idx: Vec<usize> = scored.into_iter().map(|(i, _)| i).collect();
    idx.sort_unstable();
    let mut out: Vec<Choice> = idx.into_iter().map(Choice::Det).collect();
    if cfg.allow_skip || out.is_empty() {
        out.push(Choice::Skip);
    }
    out
}

/// Mixed-radix decode, first digit most significant.
fn digits(mut j: usize, radices: &[usize], out: &mut [usize]) {
    for k in (0..radices.len()).rev() {
        out[k] = j % radices[k];
        j /= radices[k];
    }
}

struct Layer {
    combos: Vec<Vec<Choice>>,
    positions: Vec<Vec<Option<Pose>>>,
    unary: Vec<f64>,
}

fn layer(query: &EventQuery, frame: &DetectionFrame, cfg: &TrackerConfig) -> Layer {
    let choices: Vec<Vec<Choice>> = query
        .participants
        .iter()
        .map(|p| candidates(p, frame, cfg))
        .collect();
    let radices: Vec<usize> = choices.iter().map(Vec::len).collect();
    let n: usize = radices.iter().product();
    let mut d = vec![0; radices.len()];
    let mut combos = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut unary = Vec::with_capacity(n);
    for j in 0..n {
        digits(j, &radices, &mut d);
        let combo: Vec<Choice> = d.iter().enumerate().map(|(p, &k)| choices[p][k]).collect();
        let u = combo
            .iter()
            .zip(&query.participants)
            .map(|(c, p)| match c {
                Choice::Det(i) => p.constraints.log_score(&frame.detections[*i], cfg.score_floor),
                Choice::Skip => -cfg.skip_penalty,
                Choice::Anchor(_) => 0.0,
            })
            .sum();
        positions.push(combo.iter().map(|c| c.pos(frame)).collect());
        combos.push(combo);
        unary.push(u);
    }
    Layer {
        combos,
        positions,
        unary,
    }
}

fn motion(prev: &[Choice], cur: &[Choice], pf: &DetectionFrame, cf: &DetectionFrame, alpha: f64) -> f64 {
    prev.iter()
        .zip(cur)
        .map(|(a, b)| match (a, b) {
            (Choice::Det(i), Choice::Det(j)) => -alpha * pf.detections[*i].center.dist_sq(&cf.detections[*j].center),
            _ => 0.0,
        })
        .sum()
}

fn edge_symbols(
    query: &EventQuery,
    hmms: &[&PredicateHmm],
    prev: Option<&[Option<Pose>]>,
    cur: &[Option<Pose>],
    homes: &[Option<Pose>],
    cfg: &FeatureConfig,
) -> Vec<Option<usize>> {
    query
        .predicates
        .iter()
        .zip(hmms)
        .map(|(p, h)| {
            let cur_args: Option<Vec<Pose>> = p.args.iter().map(|&a| cur[a]).collect();
            let cur_args = cur_args?;
            let prev_args: Vec<Option<Pose>> = p.args.iter().map(|&a| prev.and_then(|pr| pr[a])).collect();
            let home_args: Vec<Option<Pose>> = p.args.iter().map(|&a| homes[a]).collect();
            Some(symbol(h.alphabet, cfg, &prev_args, &cur_args, &home_args))
        })
        .collect()
}

/// Exact maximization over the factorial lattice within the candidate beam.
/// Ties resolve to the lowest joint index.
pub fn joint_viterbi(
    query: &EventQuery,
    frames: &[DetectionFrame],
    hmms: &HmmSet,
    cfg: &TrackerConfig,
) -> Result<ViterbiResult, TrackerError> {
    let models = query.validate(hmms)?;
    let frames = query.frames(frames);
    if frames.is_empty() {
        return Err(TrackerError::EmptyWindow);
    }
    let homes: Vec<Option<Pose>> = query.participants.iter().map(|p| p.constraints.home).collect();
    let radices: Vec<usize> = models.iter().map(|h| h.n_states()).collect();
    let sc: usize = radices.iter().product();
    let states: Vec<Vec<usize>> = (0..sc)
        .map(|j| {
            let mut d = vec![0; radices.len()];
            digits(j, &radices, &mut d);
            d
        })
        .collect();
    let trans: Vec<Vec<f64>> = states
        .iter()
        .map(|from| {
            states
                .iter()
                .map(|to| models.iter().enumerate().map(|(h, m)| m.log_transition[from[h]][to[h]]).sum())
                .collect()
        })
        .collect();
    let prior: Vec<f64> = states
        .iter()
        .map(|s| models.iter().enumerate().map(|(h, m)| m.log_prior[s[h]]).sum())
        .collect();
    let emit = |s: &[usize], syms: &[Option<usize>]| -> f64 {
        models
            .iter()
            .enumerate()
            .filter_map(|(h, m)| syms[h].map(|y| m.log_emission[s[h]][y]))
            .sum()
    };

    let layers: Vec<Layer> = frames.iter().map(|f| layer(query, f, cfg)).collect();
    let first = &layers[0];
    let mut score = vec![f64::NEG_INFINITY; first.combos.len() * sc];
    for (cc, pos) in first.positions.iter().enumerate() {
        let syms = edge_symbols(query, &models, None, pos, &homes, &cfg.features);
        for (s, st) in states.iter().enumerate() {
            score[cc * sc + s] = first.unary[cc] + prior[s] + emit(st, &syms);
        }
    }
    let mut back: Vec<Vec<u32>> = Vec::with_capacity(frames.len());
    back.push(Vec::new());
    for t in 1..frames.len() {
        let (pl, cl) = (&layers[t - 1], &layers[t]);
        let mut next = vec![f64::NEG_INFINITY; cl.combos.len() * sc];
        let mut bp = vec![0u32; cl.combos.len() * sc];
        for (cc, cur) in cl.combos.iter().enumerate() {
            for (pc, prev) in pl.combos.iter().enumerate() {
                let base = cl.unary[cc] + motion(prev, cur, &frames[t - 1], &frames[t], cfg.alpha);
                let syms = edge_symbols(
                    query,
                    &models,
                    Some(&pl.positions[pc]),
                    &cl.positions[cc],
                    &homes,
                    &cfg.features,
                );
                for (s, st) in states.iter().enumerate() {
                    let e = base + emit(st, &syms);
                    let slot = cc * sc + s;
                    for ps in 0..sc {
                        let v = score[pc * sc + ps] + trans[ps][s] + e;
                        if v > next[slot] {
                            next[slot] = v;
                            bp[slot] = (pc * sc + ps) as u32;
                        }
                    }
                }
            }
        }
        score = next;
        back.push(bp);
    }

    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in score.iter().enumerate() {
        let s = &states[j % sc];
        if !models.iter().enumerate().all(|(h, m)| m.is_accepting(s[h])) {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    let (mut j, total) = best.expect("lattice has at least one state");
    let n = frames.len();
    let mut path = vec![0usize; n];
    for t in (0..n).rev() {
        path[t] = j;
        if t > 0 {
            j = back[t][j] as usize;
        }
    }
    let mut tracks: Vec<Track> = query
        .participants
        .iter()
        .map(|p| Track {
            var: p.var.clone(),
            assignment: Vec::with_capacity(n),
            score: 0.0,
            anchored: p.anchor.is_some(),
        })
        .collect();
    let mut state_paths = vec![Vec::with_capacity(n); models.len()];
    for (t, &j) in path.iter().enumerate() {
        let combo = &layers[t].combos[j / sc];
        for (tr, c) in tracks.iter_mut().zip(combo) {
            tr.assignment.push(match c {
                Choice::Det(i) => Some(*i),
                _ => None,
            });
        }
        for (h, &s) in states[j % sc].iter().enumerate() {
            state_paths[h].push(s);
        }
    }
    for (tr, p) in tracks.iter_mut().zip(&query.participants) {
        if !tr.anchored {
            tr.score = track_score(&tr.assignment, frames, &p.constraints, cfg);
        }
    }
    Ok(ViterbiResult {
        ticks: frames.iter().map(|f| f.tick).collect(),
        tracks,
        state_paths,
        score: total,
    })
}

/// Observation symbols along a decoded result for predicate `h`.
pub fn path_symbols(
    query: &EventQuery,
    result: &ViterbiResult,
    frames: &[DetectionFrame],
    h: usize,
    cfg: &FeatureConfig,
    hmms: &HmmSet,
) -> Result<Vec<Option<usize>>, TrackerError> {
    let models = query.validate(hmms)?;
    let frames = query.frames(frames);
    let homes: Vec<Option<Pose>> = query.participants.iter().map(|p| p.constraints.home).collect();
    let positions: Vec<Vec<Option<Pose>>> = frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            query
                .participants
                .iter()
                .zip(&result.tracks)
                .map(|(p, tr)| match (p.anchor, tr.assignment[t]) {
                    (Some(a), _) => Some(a),
                    (None, Some(i)) => Some(f.detections[i].center),
                    (None, None) => None,
                })
                .collect()
        })
        .collect();
    Ok((0..frames.len())
        .map(|t| {
            let prev = (t > 0).then(|| positions[t - 1].as_slice());
            edge_symbols(query, &models, prev, &positions[t], &homes, cfg)[h]
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub entity: String,
    pub weight: f64,
    /// Every compatible entity with its posterior weight, by id.
    pub candidates: Vec<(String, f64)>,
}

/// Matches each tracked participant to the world entity whose metadata best
/// explains its detections (mean per-frame log score), with softmax weights.
pub fn best_participant_binding(
    query: &EventQuery,
    result: &ViterbiResult,
    frames: &[DetectionFrame],
    world: &WorldModel,
    cfg: &TrackerConfig,
) -> BTreeMap<String, Binding> {
    let frames = query.frames(frames);
    let mut out = BTreeMap::new();
    let entities: Vec<(String, Constraints)> = world
        .entities()
        .iter()
        .filter(|e| matches!(e.kind, EntityKind::Object | EntityKind::Agent))
        .filter_map(|e| Some((e.id.clone(), Constraints::for_entity(world, &e.id)?)))
        .collect();
    for (p, tr) in query.participants.iter().zip(&result.tracks) {
        if tr.anchored || entities.is_empty() {
            continue;
        }
        let scores: Vec<f64> = entities
            .iter()
            .map(|(_, c)| {
                let (sum, n) = tr
                    .assignment
                    .iter()
                    .zip(frames)
                    .filter_map(|(a, f)| a.map(|i| c.log_score(&f.detections[i], cfg.score_floor)))
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if n == 0 {
                    0.0
                } else {
                    sum / n as f64
                }
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = w.iter().sum();
        let candidates: Vec<(String, f64)> = entities
            .iter()
            .zip(&w)
            .map(|((id, _), w)| (id.clone(), w / z))
            .collect();
        let (entity, weight) = candidates
            .iter()
            .fold(None::<&(String, f64)>, |best, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            })
            .cloned()
            .expect("non-empty candidates");
        out.insert(
            p.var.clone(),
            Binding {
                entity,
                weight,
                candidates,
            },
        );
    }
    out
}

#[cfg(test)]
mod tests;
