use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{joint_viterbi, path_symbols, EventQuery, HmmSet, PredicateHmm, TrackerConfig, TrackerError};
use crate::sim::DetectionFrame;

/// Pseudo-count added to every allowed table entry in the M-step.
pub const SMOOTHING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub frames: Vec<DetectionFrame>,
    pub query: EventQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmReport {
    /// Smoothed corpus Viterbi objective at the parameters entering each
    /// iteration, followed by the final value.
    pub objective: Vec<f64>,
    pub trained: Vec<String>,
}

#[derive(Debug, Clone)]
struct Counts {
    prior: Vec<f64>,
    trans: Vec<Vec<f64>>,
    emit: Vec<Vec<f64>>,
}

impl Counts {
    fn zeros(h: &PredicateHmm) -> Self {
        let n = h.n_states();
        Self {
            prior: vec![0.0; n],
            trans: vec![vec![0.0; n]; n],
            emit: vec![vec![0.0; h.alphabet.size()]; n],
        }
    }
}

fn penalty(set: &HmmSet, names: &BTreeSet<String>) -> f64 {
    let row = |r: &[f64]| r.iter().filter(|x| x.is_finite()).sum::<f64>();
    names
        .iter()
        .filter_map(|n| set.get(n))
        .map(|h| {
            row(&h.log_prior)
                + h.log_transition.iter().map(|r| row(r)).sum::<f64>()
                + h.log_emission.iter().map(|r| row(r)).sum::<f64>()
        })
        .sum::<f64>()
        * SMOOTHING
}

fn reestimate(row: &[f64], counts: &[f64]) -> Vec<f64> {
    let z: f64 = row
        .iter()
        .zip(counts)
        .filter(|(l, _)| l.is_finite())
        .map(|(_, c)| c + SMOOTHING)
        .sum();
    row.iter()
        .zip(counts)
        .map(|(l, c)| {
            if l.is_finite() {
                ((c + SMOOTHING) / z).ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

type ClipCounts = (f64, Vec<(String, Vec<usize>, Vec<Option<usize>>)>);

fn e_step(clip: &Clip, set: &HmmSet, cfg: &TrackerConfig) -> Result<ClipCounts, TrackerError> {
    let r = joint_viterbi(&clip.query, &clip.frames, set, cfg)?;
    let mut out = Vec::new();
    for (h, p) in clip.query.predicates.iter().enumerate() {
        let syms = path_symbols(&clip.query, &r, &clip.frames, h, &cfg.features, set)?;
        out.push((p.hmm.clone(), r.state_paths[h].clone(), syms));
    }
    Ok((r.score, out))
}

/// Hard EM: Viterbi state paths, then smoothed count re-estimation.
/// Predicates absent from every clip keep their parameters.
pub fn em_train(
    hmms: &HmmSet,
    clips: &[Clip],
    iterations: usize,
    cfg: &TrackerConfig,
) -> Result<(HmmSet, EmReport), TrackerError> {
    let trained: BTreeSet<String> = clips
        .iter()
        .flat_map(|c| c.query.predicates.iter().map(|p| p.hmm.clone()))
        .collect();
    for n in &trained {
        if hmms.get(n).is_none() {
            return Err(TrackerError::UnknownHmm(n.clone()));
        }
    }
    let mut set = hmms.clone();
    let mut objective = Vec::with_capacity(iterations + 1);
    for it in 0..=iterations {
        let results: Vec<ClipCounts> = clips
            .par_iter()
            .map(|c| e_step(c, &set, cfg))
            .collect::<Result<_, _>>()?;
        let score: f64 = results.iter().map(|(s, _)| *s).sum();
        objective.push(score + penalty(&set, &trained));
        if it == iterations {
            break;
        }
        let mut counts: BTreeMap<String, Counts> = trained
            .iter()
            .map(|n| (n.clone(), Counts::zeros(set.get(n).expect("checked above"))))
            .collect();
        for (_, uses) in &results {
            for (name, states, syms) in uses {
                let c = counts.get_mut(name).expect("trained name");
                c.prior[states[0]] += 1.0;
                for w in states.windows(2) {
                    c.trans[w[0]][w[1]] += 1.0;
                }
                for (s, y) in states.iter().zip(syms) {
                    if let Some(y) = y {
                        c.emit[*s][*y] += 1.0;
                    }
                }
            }
        }
        for (name, c) in counts {
            let h = set.hmms.get_mut(&name).expect("trained name");
            h.log_prior = reestimate(&h.log_prior, &c.prior);
            for (row, cnt) in h.log_transition.iter_mut().zip(&c.trans) {
                *row = reestimate(row, cnt);
            }
            for (row, cnt) in h.log_emission.iter_mut().zip(&c.emit) {
                *row = reestimate(row, cnt);
            }
        }
    }
    Ok((
        set,
        EmReport {
            objective,
            trained: trained.into_iter().collect(),
        },
    ))
}
