//! Imperative grounding: a log-linear factor graph over binary
//! correspondences between imperative constituents and imperative symbols,
//! conditioned on declarative evidence, solved by beam search.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::facts::FactKey;
use crate::parser::{ParseTree, Partition, Role, SentenceKind, SymbolRef};
use crate::sim::RobotAction;

pub const DEFAULT_BEAM: usize = 32;

#[derive(Debug, Error)]
pub enum DcgError {
    #[error("no command present")]
    NoCommand,
    #[error("non-finite training objective at iteration {0}")]
    NonFinite(usize),
    #[error("gold assignment length {got} does not match graph size {expected}")]
    GoldLength { expected: usize, got: usize },
    #[error("weights json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Contact,
    SpatialRelation,
    Intersect,
}

/// Robot end-effector role in constraint symbols.
pub const END_EFFECTOR: &str = "end-effector";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImperativeSymbol {
    ActionGoal(RobotAction),
    Constraint {
        kind: ConstraintKind,
        roles: Vec<String>,
    },
    Aggregate(BTreeSet<String>),
    Assert(BTreeSet<FactKey>),
}

impl ImperativeSymbol {
    pub fn contact(entity: &str) -> Self {
        ImperativeSymbol::Constraint {
            kind: ConstraintKind::Contact,
            roles: vec![END_EFFECTOR.to_string(), entity.to_string()],
        }
    }

    fn tag(&self) -> String {
        match self {
            ImperativeSymbol::ActionGoal(a) => format!("goal:{}", a.name()),
            ImperativeSymbol::Constraint { kind, .. } => format!("{kind:?}").to_lowercase(),
            ImperativeSymbol::Aggregate(_) => "aggregate".into(),
            ImperativeSymbol::Assert(_) => "assert".into(),
        }
    }

    /// The entity a contact constraint touches.
    pub fn contact_target(&self) -> Option<&str> {
        match self {
            ImperativeSymbol::Constraint {
                kind: ConstraintKind::Contact,
                roles,
            } => roles.get(1).map(String::as_str),
            _ => None,
        }
    }
}

/// Evidence the declarative stage gathered for one candidate entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityEvidence {
    pub entity: String,
    /// Normalized binding weight in [0, 1].
    pub binding: f64,
    /// Unique maximum of the binding weights.
    pub top: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_match: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_match: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_match: Option<bool>,
    /// Belief of the referenced fact, for fact-bearing phrases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<f64>,
}

/// An entity set a fact-bearing phrase may denote as a whole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEvidence {
    pub members: BTreeSet<String>,
    pub min_belief: f64,
    /// All members fall in the same belief bucket.
    pub uniform: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstituentEvidence {
    pub candidates: Vec<EntityEvidence>,
    #[serde(default)]
    pub groups: Vec<GroupEvidence>,
}

impl ConstituentEvidence {
    pub fn top(&self) -> Option<&EntityEvidence> {
        self.candidates.iter().find(|c| c.top)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeclarativeEvidence {
    pub constituents: BTreeMap<usize, ConstituentEvidence>,
    /// Keys the copula assertion targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assert_keys: Option<BTreeSet<FactKey>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorNode {
    pub constituent_id: usize,
    pub symbol: ImperativeSymbol,
    pub children: Vec<usize>,
    /// Indicators that do not depend on child values.
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FactorGraph {
    pub nodes: Vec<FactorNode>,
}

pub fn bucket(p: f64) -> &'static str {
    if p < 0.5 {
        "lo"
    } else if p <= 0.8 {
        "mid"
    } else {
        "hi"
    }
}

fn flag(name: &str, v: Option<bool>) -> Option<String> {
    v.map(|m| format!("meta:{name}:{}", if m { "match" } else { "mismatch" }))
}

impl FactorGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, constituent_id: usize, symbol: ImperativeSymbol, children: Vec<usize>, features: Vec<String>) -> usize {
        let mut features = features;
        let tag = symbol.tag();
        features.push(format!("bias:{tag}"));
        self.nodes.push(FactorNode {
            constituent_id,
            symbol,
            children,
            features,
        });
        self.nodes.len() - 1
    }

    fn noun_phrase(&mut self, tree: &ParseTree, id: usize, ev: &ConstituentEvidence) -> Vec<usize> {
        let c = tree.node(id);
        let head_kind = match &c.symbol {
            Some(SymbolRef::Fact(_)) => "fact",
            Some(SymbolRef::Class(None)) => "generic",
            Some(SymbolRef::Class(Some(_))) => "class",
            _ => "other",
        };
        let role = format!("{:?}", c.role).to_lowercase();
        let mut out = Vec::new();
        for cand in &ev.candidates {
            let mut f = vec![
                format!("role:{role}|contact"),
                format!("headkind:{head_kind}|contact"),
                format!("bind:{}|contact", bucket(cand.binding)),
            ];
            if cand.top {
                f.push("bind:top|contact".into());
            }
            f.extend(flag("class", cand.class_match));
            f.extend(flag("color", cand.color_match));
            f.extend(flag("size", cand.size_match));
            match cand.belief {
                Some(b) => f.push(format!("belief:{}|contact", bucket(b))),
                None => f.push("belief:none|contact".into()),
            }
            out.push(self.push(id, ImperativeSymbol::contact(&cand.entity), vec![], f));
        }
        for g in &ev.groups {
            let f = vec![
                format!("headkind:{head_kind}|aggregate"),
                format!("belief:{}|aggregate", bucket(g.min_belief)),
                format!("uniform:{}|aggregate", g.uniform),
            ];
            out.push(self.push(id, ImperativeSymbol::Aggregate(g.members.clone()), vec![], f));
        }
        out
    }

    /// One factor per (imperative constituent, candidate symbol).
    pub fn build(tree: &ParseTree, partition: &Partition, evidence: &DeclarativeEvidence) -> Result<Self, DcgError> {
        if partition.imperative.is_empty() {
            return Err(DcgError::NoCommand);
        }
        let mut g = FactorGraph::default();
        match tree.kind {
            SentenceKind::Fact => {
                let target = partition.assert_target.as_ref().ok_or(DcgError::NoCommand)?;
                let attr = tree.node(target.attribute);
                let keys = evidence.assert_keys.clone().unwrap_or_default();
                g.push(
                    attr.id,
                    ImperativeSymbol::Assert(keys),
                    vec![],
                    vec![format!("head:{}|assert", attr.head), "role:copula-attribute|assert".into()],
                );
            }
            SentenceKind::Command => {
                let verb = tree.root_node();
                let arg = tree.argument().ok_or(DcgError::NoCommand)?;
                let empty = ConstituentEvidence::default();
                let arg_nodes = if arg.role == Role::Conjunction {
                    let mut conj_children = Vec::new();
                    let mut members = BTreeSet::new();
                    for c in tree.conjuncts(arg.id) {
                        let ev = evidence.constituents.get(&c).unwrap_or(&empty);
                        conj_children.extend(g.noun_phrase(tree, c, ev));
                        if let Some(t) = ev.top() {
                            members.insert(t.entity.clone());
                        }
                    }
                    if members.len() >= 2 {
                        let n = tree.conjuncts(arg.id).len();
                        let f = vec![
                            "role:conjunction|aggregate".into(),
                            format!("complete:{}|aggregate", members.len() == n),
                        ];
                        vec![g.push(arg.id, ImperativeSymbol::Aggregate(members), conj_children, f)]
                    } else {
                        conj_children
                    }
                } else {
                    let ev = evidence.constituents.get(&arg.id).unwrap_or(&empty);
                    g.noun_phrase(tree, arg.id, ev)
                };
                for a in RobotAction::ALL {
                    let f = vec![format!("head:{}|goal:{}", verb.head, a.name())];
                    g.push(verb.id, ImperativeSymbol::ActionGoal(a), arg_nodes.clone(), f);
                }
            }
        }
        Ok(g)
    }

    /// Full feature list of node `i` given the child values in `assignment`.
    pub fn features(&self, i: usize, assignment: &[bool]) -> Vec<String> {
        let node = &self.nodes[i];
        let mut f = node.features.clone();
        if node.children.is_empty() {
            return f;
        }
        let tag = node.symbol.tag();
        let mut any = false;
        for &c in &node.children {
            if assignment[c] {
                any = true;
                f.push(format!("child:{tag}|{}", self.nodes[c].symbol.tag()));
            }
        }
        if !any {
            f.push(format!("nochild:{tag}"));
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weights(pub BTreeMap<String, f64>);

impl Weights {
    pub fn dot(&self, features: &[String]) -> f64 {
        features.iter().filter_map(|f| self.0.get(f)).sum()
    }

    pub fn from_json(text: &str) -> Result<Self, DcgError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log σ(x), stable for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// P(φ_i = value | child assignment). The two values share one logistic, so
/// they sum to one.
pub fn factor_prob(graph: &FactorGraph, i: usize, value: bool, assignment: &[bool], weights: &Weights) -> f64 {
    let p = sigmoid(weights.dot(&graph.features(i, assignment)));
    if value {
        p
    } else {
        1.0 - p
    }
}

fn factor_log_prob(graph: &FactorGraph, i: usize, value: bool, assignment: &[bool], weights: &Weights) -> f64 {
    let s = weights.dot(&graph.features(i, assignment));
    if value {
        log_sigmoid(s)
    } else {
        log_sigmoid(-s)
    }
}

/// Joint log-probability of a full assignment.
pub fn joint_log_prob(graph: &FactorGraph, assignment: &[bool], weights: &Weights) -> f64 {
    (0..graph.len())
        .map(|i| factor_log_prob(graph, i, assignment[i], assignment, weights))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<bool>,
    pub log_prob: f64,
}

fn rank(a: &Assignment, b: &Assignment) -> Ordering {
    b.log_prob.total_cmp(&a.log_prob).then_with(|| a.values.cmp(&b.values))
}

/// Beam search in node order (children precede parents). Returns up to
/// `beam_width` complete assignments, best first; equal scores fall back to
/// lexicographic order of the value vectors.
pub fn infer_beam(graph: &FactorGraph, weights: &Weights, beam_width: usize) -> Vec<Assignment> {
    let width = beam_width.max(1);
    let mut beam = vec![Assignment {
        values: Vec::with_capacity(graph.len()),
        log_prob: 0.0,
    }];
    for i in 0..graph.len() {
        let mut next = Vec::with_capacity(beam.len() * 2);
        for partial in &beam {
            let s = weights.dot(&graph.features(i, &partial.values));
            for value in [false, true] {
                let mut values = partial.values.clone();
                values.push(value);
                let lp = if value { log_sigmoid(s) } else { log_sigmoid(-s) };
                next.push(Assignment {
                    values,
                    log_prob: partial.log_prob + lp,
                });
            }
        }
        next.sort_by(rank);
        next.truncate(width);
        beam = next;
    }
    beam
}

/// Exhaustive argmax, for small graphs.
pub fn exhaustive_map(graph: &FactorGraph, weights: &Weights) -> Assignment {
    let n = graph.len();
    assert!(n <= 20, "exhaustive search over {n} variables");
    let mut best: Option<Assignment> = None;
    for code in 0..(1u64 << n) {
        let values: Vec<bool> = (0..n).map(|i| (code >> (n - 1 - i)) & 1 == 1).collect();
        let cand = Assignment {
            log_prob: joint_log_prob(graph, &values, weights),
            values,
        };
        if best.as_ref().is_none_or(|b| rank(&cand, b) == Ordering::Less) {
            best = Some(cand);
        }
    }
    best.expect("at least the empty assignment")
}

/// Gold values for a graph from the intended action and target set.
pub fn gold_assignment(
    graph: &FactorGraph,
    evidence: &DeclarativeEvidence,
    action: Option<RobotAction>,
    targets: &BTreeSet<String>,
) -> Vec<bool> {
    let conjunct_parent: BTreeSet<usize> = graph
        .nodes
        .iter()
        .filter(|n| matches!(n.symbol, ImperativeSymbol::Aggregate(_)) && !n.children.is_empty())
        .flat_map(|n| n.children.iter().copied())
        .collect();
    graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| match &n.symbol {
            ImperativeSymbol::ActionGoal(a) => Some(*a) == action,
            ImperativeSymbol::Aggregate(m) => m == targets,
            ImperativeSymbol::Assert(_) => true,
            sym => {
                let e = sym.contact_target().unwrap_or_default();
                if conjunct_parent.contains(&i) {
                    let top = evidence
                        .constituents
                        .get(&n.constituent_id)
                        .and_then(|c| c.top())
                        .map(|t| t.entity.as_str());
                    targets.contains(e) && top == Some(e)
                } else {
                    targets.len() == 1 && targets.contains(e)
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub graph: FactorGraph,
    pub gold: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 0.1,
            max_iterations: 500,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Objective after each accepted step, starting from the initial point.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_inf_norm: f64,
    pub features: usize,
}

/// Training rows with features interned: (feature ids, gold label).
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    rows: Vec<(Vec<usize>, bool)>,
}

impl Design {
    pub fn new(examples: &[TrainingExample]) -> Result<Self, DcgError> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut rows = Vec::new();
        for ex in examples {
            if ex.gold.len() != ex.graph.len() {
                return Err(DcgError::GoldLength {
                    expected: ex.graph.len(),
                    got: ex.gold.len(),
                });
            }
            for i in 0..ex.graph.len() {
                let ids = ex
                    .graph
                    .features(i, &ex.gold)
                    .into_iter()
                    .map(|f| {
                        *index.entry(f.clone()).or_insert_with(|| {
                            names.push(f);
                            names.len() - 1
                        })
                    })
                    .collect();
                rows.push((ids, ex.gold[i]));
            }
        }
        Ok(Self { names, rows })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Σ log P(gold) − λ/2 ‖w‖².
    pub fn objective(&self, w: &[f64], l2: f64) -> f64 {
        let ll: f64 = self
            .rows
            .iter()
            .map(|(ids, y)| {
                let s: f64 = ids.iter().map(|&k| w[k]).sum();
                if *y {
                    log_sigmoid(s)
                } else {
                    log_sigmoid(-s)
                }
            })
            .sum();
        ll - 0.5 * l2 * w.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64], l2: f64) -> Vec<f64> {
        let mut g: Vec<f64> = w.iter().map(|x| -l2 * x).collect();
        for (ids, y) in &self.rows {
            let s: f64 = ids.iter().map(|&k| w[k]).sum();
            let r = f64::from(u8::from(*y)) - sigmoid(s);
            for &k in ids {
                g[k] += r;
            }
        }
        g
    }

    pub fn weights(&self, w: &[f64]) -> Weights {
        Weights(self.names.iter().cloned().zip(w.iter().copied()).collect())
    }
}

/// L2-regularized maximum likelihood by gradient ascent with backtracking.
pub fn train(examples: &[TrainingExample], cfg: &TrainConfig) -> Result<(Weights, TrainReport), DcgError> {
    let design = Design::new(examples)?;
    let mut w = vec![0.0; design.dim()];
    let mut obj = design.objective(&w, cfg.l2);
    if !obj.is_finite() {
        return Err(DcgError::NonFinite(0));
    }
    let mut trace = vec![obj];
    let mut step = 1.0;
    let mut converged = false;
    let mut it = 0;
    let mut gnorm = f64::INFINITY;
    while it < cfg.max_iterations {
        let g = design.gradient(&w, cfg.l2);
        gnorm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gnorm < cfg.tolerance {
            converged = true;
            break;
        }
        let g2: f64 = g.iter().map(|x| x * x).sum();
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x + step * d).collect();
            let v = design.objective(&cand, cfg.l2);
            if !v.is_finite() {
                return Err(DcgError::NonFinite(it));
            }
            if v >= obj + 1e-4 * step * g2 {
                w = cand;
                obj = v;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        it += 1;
        if !accepted {
            break;
        }
        trace.push(obj);
    }
    let report = TrainReport {
        objective: trace,
        iterations: it,
        converged,
        grad_inf_norm: gnorm,
        features: design.dim(),
    };
    Ok((design.weights(&w), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut impl Rng, n: usize) -> FactorGraph {
        let mut g = FactorGraph::default();
        for i in 0..n {
            let children: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.3)).collect();
            let features = (0..rng.random_range(1..4)).map(|_| format!("f{}", rng.random_range(0..6))).collect();
            g.push(
                i,
                ImperativeSymbol::contact(&format!("e{i}")),
                children,
                features,
            );
        }
        g
    }

    fn random_weights(rng: &mut impl Rng) -> Weights {
        let mut w = BTreeMap::new();
        for k in 0..6 {
            w.insert(format!("f{k}"), rng.random_range(-2.0..2.0));
        }
        w.insert("bias:contact".into(), rng.random_range(-1.0..1.0));
        w.insert("child:contact|contact".into(), rng.random_range(-2.0..2.0));
        w.insert("nochild:contact".into(), rng.random_range(-2.0..2.0));
        Weights(w)
    }

    #[test]
    fn zero_weights_give_even_odds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(&mut rng, 3);
        let a = vec![true, false, true];
        assert_eq!(factor_prob(&g, 2, true, &a, &Weights::default()), 0.5);
    }

    #[test]
    fn factor_prob_is_logistic_of_dot_product() {
        let mut g = FactorGraph::default();
        g.push(0, ImperativeSymbol::contact("a"), vec![], vec!["x".into(), "y".into(), "x".into()]);
        let w = Weights(BTreeMap::from([
            ("x".to_string(), 0.5),
            ("y".to_string(), -0.25),
            ("bias:contact".to_string(), 0.1),
        ]));
        let by_hand = 1.0 / (1.0 + (-(0.5 + 0.5 - 0.25 + 0.1f64)).exp());
        assert!((factor_prob(&g, 0, true, &[], &w) - by_hand).abs() < 1e-15);
    }

    #[test]
    fn complement_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let g = random_graph(&mut rng, 5);
            let w = random_weights(&mut rng);
            let a: Vec<bool> = (0..5).map(|_| rng.random_bool(0.5)).collect();
            for i in 0..5 {
                let t = factor_prob(&g, i, true, &a, &w);
                let f = factor_prob(&g, i, false, &a, &w);
                assert_eq!(t + f, 1.0);
            }
        }
    }

    #[test]
    fn beam_matches_exhaustive_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(1..=8);
            let g = random_graph(&mut rng, n);
            let w = random_weights(&mut rng);
            let beam = infer_beam(&g, &w, 1 << n);
            assert_eq!(beam[0], exhaustive_map(&g, &w));
        }
    }

    #[test]
    fn single_variable_ranks_by_factor_prob() {
        let mut g = FactorGraph::default();
        g.push(0, ImperativeSymbol::contact("a"), vec![], vec!["x".into()]);
        let w = Weights(BTreeMap::from([("x".to_string(), 1.0)]));
        let r = infer_beam(&g, &w, DEFAULT_BEAM);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].values, vec![true]);
        assert!((r[0].log_prob.exp() - sigmoid(1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let examples: Vec<TrainingExample> = (0..10)
            .map(|_| {
                let g = random_graph(&mut rng, 5);
                let gold = (0..5).map(|_| rng.random_bool(0.5)).collect();
                TrainingExample { graph: g, gold }
            })
            .collect();
        let d = Design::new(&examples).unwrap();
        for _ in 0..5 {
            let w: Vec<f64> = (0..d.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = d.gradient(&w, 0.1);
            let h = 1e-5;
            let fd: Vec<f64> = (0..d.dim())
                .map(|k| {
                    let mut a = w.clone();
                    let mut b = w.clone();
                    a[k] += h;
                    b[k] -= h;
                    (d.objective(&a, 0.1) - d.objective(&b, 0.1)) / (2.0 * h)
                })
                .collect();
            let diff: f64 = g.iter().zip(&fd).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-6, "relative error {}", diff / norm);
        }
    }

    #[test]
    fn separable_corpus_trains_to_full_accuracy() {
        let examples: Vec<TrainingExample> = (0..20)
            .map(|i| {
                let mut g = FactorGraph::default();
                let label = i % 2 == 0;
                g.push(0, ImperativeSymbol::contact("a"), vec![], vec![if label { "pos".into() } else { "neg".into() }]);
                TrainingExample { graph: g, gold: vec![label] }
            })
            .collect();
        let (w, report) = train(&examples, &TrainConfig::default()).unwrap();
        for w2 in report.objective.windows(2) {
            assert!(w2[1] >= w2[0]);
        }
        for ex in &examples {
            assert_eq!(infer_beam(&ex.graph, &w, DEFAULT_BEAM)[0].values, ex.gold);
        }
    }

    #[test]
    fn weights_round_trip() {
        let w = Weights(BTreeMap::from([("a".to_string(), 0.1 + 0.2), ("b".to_string(), -3.5)]));
        assert_eq!(Weights::from_json(&w.to_json()).unwrap(), w);
    }
}
