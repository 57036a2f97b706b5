//! The propagated knowledge state: independent Bernoulli beliefs over
//! factual groundings, each updated by its own Bayes filter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Vocabulary;

pub const MIN_BELIEF: f64 = 1e-6;
pub const MAX_BELIEF: f64 = 1.0 - 1e-6;
pub const PRIOR: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FactError {
    #[error("`{0}` is not a factual predicate")]
    NotFactual(String),
    #[error("update weight {0} outside (0, 1]")]
    BadWeight(f64),
    #[error("belief state json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("stored belief {0} outside (0, 1)")]
    BadBelief(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FactKey {
    pub predicate: String,
    pub entity: String,
}

impl FactKey {
    pub fn new(predicate: impl Into<String>, entity: impl Into<String>) -> Self {
        Self {
            predicate: predicate.into(),
            entity: entity.into(),
        }
    }
}

impl std::fmt::Display for FactKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({})", self.predicate, self.entity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Affirm,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub p_true_given_assert: f64,
    pub p_true_given_deny: f64,
}

impl ObservationModel {
    fn log_ratio(&self, polarity: Polarity) -> f64 {
        let r = (self.p_true_given_assert / self.p_true_given_deny).ln();
        match polarity {
            Polarity::Affirm => r,
            Polarity::Deny => -r,
        }
    }
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            p_true_given_assert: 0.9,
            p_true_given_deny: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefEntry {
    pub predicate: String,
    pub entity: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactualBeliefState {
    beliefs: BTreeMap<FactKey, f64>,
    obs_model: ObservationModel,
}

fn clamp(p: f64) -> f64 {
    p.clamp(MIN_BELIEF, MAX_BELIEF)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl FactualBeliefState {
    pub fn new(obs_model: ObservationModel) -> Self {
        Self {
            beliefs: BTreeMap::new(),
            obs_model,
        }
    }

    pub fn obs_model(&self) -> ObservationModel {
        self.obs_model
    }

    /// Stored belief, or the uniform prior for keys never asserted.
    pub fn query(&self, key: &FactKey) -> f64 {
        self.beliefs.get(key).copied().unwrap_or(PRIOR)
    }

    /// Posterior odds = prior odds × ratio^weight.
    pub fn assert_update(
        &mut self,
        vocab: &Vocabulary,
        key: &FactKey,
        polarity: Polarity,
        weight: f64,
    ) -> Result<f64, FactError> {
        if !vocab.is_factual(&key.predicate) {
            return Err(FactError::NotFactual(key.predicate.clone()));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(FactError::BadWeight(weight));
        }
        let prior = self.query(key);
        let post = clamp(sigmoid(logit(prior) + weight * self.obs_model.log_ratio(polarity)));
        self.beliefs.insert(key.clone(), post);
        Ok(post)
    }

    /// log P(assignment) under independent beliefs; unassigned keys are ignored.
    pub fn joint_log_likelihood(&self, assignment: &BTreeMap<FactKey, bool>) -> f64 {
        assignment
            .iter()
            .map(|(k, &v)| {
                let p = self.query(k);
                if v {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum()
    }

    /// Number of stored keys.
    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FactKey, f64)> {
        self.beliefs.iter().map(|(k, &p)| (k, p))
    }

    /// Entities whose belief for `predicate` exceeds `threshold`.
    pub fn holders(&self, predicate: &str, threshold: f64) -> Vec<(String, f64)> {
        self.beliefs
            .iter()
            .filter(|(k, &p)| k.predicate == predicate && p > threshold)
            .map(|(k, &p)| (k.entity.clone(), p))
            .collect()
    }

    pub fn entries(&self) -> Vec<BeliefEntry> {
        self.beliefs
            .iter()
            .map(|(k, &p)| BeliefEntry {
                predicate: k.predicate.clone(),
                entity: k.entity.clone(),
                p,
            })
            .collect()
    }

    /// Canonical JSON: a key-sorted `[{predicate, entity, p}]` array.
    pub fn snapshot(&self) -> Vec<u8> {
        serde_json::to_vec(&self.entries()).expect("beliefs serialize")
    }

    pub fn restore(bytes: &[u8]) -> Result<Self, FactError> {
        Self::restore_with(bytes, ObservationModel::default())
    }

    pub fn restore_with(bytes: &[u8], obs_model: ObservationModel) -> Result<Self, FactError> {
        let entries: Vec<BeliefEntry> = serde_json::from_slice(bytes)?;
        let mut beliefs = BTreeMap::new();
        for e in entries {
            if !(e.p > 0.0 && e.p < 1.0) {
                return Err(FactError::BadBelief(e.p));
            }
            beliefs.insert(FactKey::new(e.predicate, e.entity), e.p);
        }
        Ok(Self { beliefs, obs_model })
    }
}
