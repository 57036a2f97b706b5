use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrackerError;
use crate::model::{Predicate, PredicateKind};

/// Discrete observation alphabet a predicate HMM emits over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alphabet {
    /// (agent, patient): distance × patient height × patient vertical
    /// velocity × patient displaced from home. 54 symbols.
    Action,
    /// One participant's height bin.
    Height,
    /// One participant resting on the table surface.
    OnSurface,
    /// First participant resting on top of the second.
    Support,
    LeftOf,
    InFrontOf,
}

impl Alphabet {
    pub fn size(self) -> usize {
        match self {
            Alphabet::Action => 54,
            Alphabet::Height => 3,
            _ => 2,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Alphabet::Height | Alphabet::OnSurface => 1,
            _ => 2,
        }
    }
}

/// Decoded action-alphabet symbol. Bins are ordered: distance far/mid/near,
/// height table/mid/high, velocity down/still/up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSymbol {
    pub dist: usize,
    pub height: usize,
    pub vz: usize,
    pub displaced: usize,
}

impl ActionSymbol {
    pub const NEAR: usize = 2;

    pub fn index(self) -> usize {
        ((self.dist * 3 + self.height) * 3 + self.vz) * 2 + self.displaced
    }

    pub fn decode(i: usize) -> Self {
        Self {
            displaced: i % 2,
            vz: (i / 2) % 3,
            height: (i / 6) % 3,
            dist: i / 18,
        }
    }
}

/// Serializes log tables with `null` standing for structural zeros.
mod log_table {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    fn enc(v: f64) -> Option<f64> {
        v.is_finite().then_some(v)
    }

    fn dec(v: Option<f64>) -> f64 {
        v.unwrap_or(f64::NEG_INFINITY)
    }

    pub mod row {
        use super::*;
        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| enc(x)).collect::<Vec<_>>().serialize(s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(dec).collect())
        }
    }

    pub mod matrix {
        use super::*;
        pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            v.iter()
                .map(|r| r.iter().map(|&x| enc(x)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
                .serialize(s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            Ok(Vec::<Vec<Option<f64>>>::deserialize(d)?
                .into_iter()
                .map(|r| r.into_iter().map(dec).collect())
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateHmm {
    pub predicate: Predicate,
    pub alphabet: Alphabet,
    #[serde(with = "log_table::row")]
    pub log_prior: Vec<f64>,
    #[serde(with = "log_table::matrix")]
    pub log_transition: Vec<Vec<f64>>,
    #[serde(with = "log_table::matrix")]
    pub log_emission: Vec<Vec<f64>>,
    /// States a path may end in; empty means any.
    #[serde(default)]
    pub accepting: Vec<usize>,
}

fn logsum(row: &[f64]) -> f64 {
    row.iter().map(|x| x.exp()).sum()
}

impl PredicateHmm {
    /// Builds from probability tables (zeros are structural).
    pub fn from_probs(
        predicate: Predicate,
        alphabet: Alphabet,
        prior: &[f64],
        transition: &[Vec<f64>],
        emission: &[Vec<f64>],
        accepting: Vec<usize>,
    ) -> Result<Self, TrackerError> {
        let ln = |r: &[f64]| r.iter().map(|p| p.ln()).collect::<Vec<_>>();
        let hmm = Self {
            predicate,
            alphabet,
            log_prior: ln(prior),
            log_transition: transition.iter().map(|r| ln(r)).collect(),
            log_emission: emission.iter().map(|r| ln(r)).collect(),
            accepting,
        };
        hmm.validate()?;
        Ok(hmm)
    }

    pub fn n_states(&self) -> usize {
        self.log_prior.len()
    }

    pub fn is_accepting(&self, s: usize) -> bool {
        self.accepting.is_empty() || self.accepting.contains(&s)
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let name = &self.predicate.name;
        let bad = |detail: String| TrackerError::BadTable {
            name: name.clone(),
            detail,
        };
        let n = self.n_states();
        if n == 0 {
            return Err(bad("no states".into()));
        }
        if self.log_transition.len() != n || self.log_emission.len() != n {
            return Err(bad("table shapes disagree with state count".into()));
        }
        let mut rows: Vec<(&str, &[f64])> = vec![("prior", &self.log_prior)];
        for r in &self.log_transition {
            if r.len() != n {
                return Err(bad("transition row length".into()));
            }
            rows.push(("transition", r));
        }
        for r in &self.log_emission {
            if r.len() != self.alphabet.size() {
                return Err(bad("emission row length".into()));
            }
            rows.push(("emission", r));
        }
        for (what, r) in rows {
            if r.iter().any(|x| x.is_nan() || *x > 0.0) {
                return Err(bad(format!("{what} holds a non-probability")));
            }
            let s = logsum(r);
            if (s - 1.0).abs() > 1e-9 {
                return Err(bad(format!("{what} row sums to {s}")));
            }
        }
        if self.accepting.iter().any(|&s| s >= n) {
            return Err(bad("accepting state out of range".into()));
        }
        Ok(())
    }

    /// The same event with a background state before it and one after it,
    /// so a path may start and finish the event anywhere in a longer clip.
    /// `enter` is the per-frame probability of leaving the leading padding,
    /// `exit` that of leaving an accepting core state for the trailing one.
    pub fn embedded(&self, background: &PredicateHmm, enter: f64, exit: f64) -> Result<Self, TrackerError> {
        if background.alphabet != self.alphabet || background.n_states() != 1 {
            return Err(TrackerError::BadTable {
                name: self.predicate.name.clone(),
                detail: "padding needs a one-state background over the same alphabet".into(),
            });
        }
        let n = self.n_states();
        let (wait, start) = ((1.0 - enter).ln(), enter.ln());
        let (stay, go) = ((1.0 - exit).ln(), exit.ln());
        let bg = background.log_emission[0].clone();
        let mut prior = vec![(0.5f64).ln()];
        prior.extend(self.log_prior.iter().map(|p| p + (0.5f64).ln()));
        prior.push(f64::NEG_INFINITY);
        let mut trans = Vec::with_capacity(n + 2);
        let mut pre = vec![wait];
        pre.extend(self.log_prior.iter().map(|p| p + start));
        pre.push(f64::NEG_INFINITY);
        trans.push(pre);
        for (s, row) in self.log_transition.iter().enumerate() {
            let acc = self.is_accepting(s);
            let mut r = vec![f64::NEG_INFINITY];
            r.extend(row.iter().map(|p| if acc { p + stay } else { *p }));
            r.push(if acc { go } else { f64::NEG_INFINITY });
            trans.push(r);
        }
        let mut post = vec![f64::NEG_INFINITY; n + 1];
        post.push(0.0);
        trans.push(post);
        let mut emission = vec![bg.clone()];
        emission.extend(self.log_emission.iter().cloned());
        emission.push(bg);
        let mut accepting: Vec<usize> = (0..n).filter(|&s| self.is_accepting(s)).map(|s| s + 1).collect();
        accepting.push(n + 1);
        let hmm = Self {
            predicate: self.predicate.clone(),
            alphabet: self.alphabet,
            log_prior: prior,
            log_transition: trans,
            log_emission: emission,
            accepting,
        };
        hmm.validate()?;
        Ok(hmm)
    }

    /// Probability mass state `s` puts on symbols matching `keep`.
    pub fn emission_mass(&self, s: usize, keep: impl Fn(usize) -> bool) -> f64 {
        self.log_emission[s]
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, l)| l.exp())
            .sum()
    }
}

/// Predicate HMMs keyed by name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HmmSet {
    pub hmms: BTreeMap<String, PredicateHmm>,
}

pub const BACKGROUND: &str = "Background";
/// `On` with the table surface as the second argument.
pub const ON_TABLE: &str = "OnTable";

impl HmmSet {
    pub fn get(&self, name: &str) -> Option<&PredicateHmm> {
        self.hmms.get(name)
    }

    /// A copy with the named models embedded between background padding.
    pub fn embedded(&self, names: &[&str], enter: f64, exit: f64) -> Result<Self, TrackerError> {
        let bg = self.get(BACKGROUND).ok_or_else(|| TrackerError::UnknownHmm(BACKGROUND.into()))?;
        let mut out = self.clone();
        for name in names {
            if let Some(h) = self.get(name) {
                out.insert(*name, h.embedded(bg, enter, exit)?);
            }
        }
        Ok(out)
    }

    pub fn insert(&mut self, name: impl Into<String>, hmm: PredicateHmm) {
        self.hmms.insert(name.into(), hmm);
    }

    pub fn from_json(text: &str) -> Result<Self, TrackerError> {
        let set: HmmSet = serde_json::from_str(text)?;
        for h in set.hmms.values() {
            h.validate()?;
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hmm set serializes")
    }

    /// Hand-initialized models; training refines them.
    pub fn initial() -> Self {
        let mut set = HmmSet::default();
        let actions: [(&str, [Template; 3]); 5] = [
            (
                "PickUp",
                [
                    t([U, U, U], TABLE, STILL, [0.8, 0.2]),
                    t([0.1, 0.2, 0.7], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6], HALF),
                    t([0.15, 0.15, 0.7], [0.1, 0.1, 0.8], STILL, HALF),
                ],
            ),
            (
                "PutDown",
                [
                    t([U, U, U], [0.5, 0.1, 0.4], STILL, [0.8, 0.2]),
                    t([0.1, 0.2, 0.7], [0.2, 0.6, 0.2], [0.6, 0.3, 0.1], HALF),
                    t([0.2, 0.2, 0.6], TABLE, STILL, HALF),
                ],
            ),
            (
                "Slide",
                [
                    t([U, U, U], TABLE, STILL, [0.9, 0.1]),
                    t([0.1, 0.2, 0.7], TABLE, STILL, HALF),
                    t([U, U, U], TABLE, STILL, [0.1, 0.9]),
                ],
            ),
            (
                "MoveToward",
                [
                    t([0.7, 0.2, 0.1], TABLE, STILL, [0.8, 0.2]),
                    t([0.2, 0.7, 0.1], TABLE, STILL, [0.8, 0.2]),
                    t([0.1, 0.2, 0.7], TABLE, STILL, [0.8, 0.2]),
                ],
            ),
            (
                "MoveAwayFrom",
                [
                    t([0.1, 0.2, 0.7], TABLE, STILL, [0.8, 0.2]),
                    t([0.2, 0.7, 0.1], TABLE, STILL, [0.8, 0.2]),
                    t([0.7, 0.2, 0.1], TABLE, STILL, [0.8, 0.2]),
                ],
            ),
        ];
        let transition = vec![
            vec![0.9, 0.1, 0.0],
            vec![0.0, 0.8, 0.2],
            vec![0.0, 0.0, 1.0],
        ];
        for (name, states) in actions {
            let emission: Vec<Vec<f64>> = states.iter().map(Template::table).collect();
            let hmm = PredicateHmm::from_probs(
                Predicate::new(name, 2, PredicateKind::HumanAction),
                Alphabet::Action,
                &[1.0, 0.0, 0.0],
                &transition,
                &emission,
                vec![2],
            )
            .expect("initial action tables are normalized");
            set.insert(name, hmm);
        }
        let bg = t([U, U, U], [0.8, 0.1, 0.1], STILL, [0.7, 0.3]).table();
        set.insert(
            BACKGROUND,
            PredicateHmm::from_probs(
                Predicate::new(BACKGROUND, 2, PredicateKind::HumanAction),
                Alphabet::Action,
                &[1.0],
                &[vec![1.0]],
                &[bg],
                vec![],
            )
            .expect("background table is normalized"),
        );
        for (name, pred, alphabet) in [
            ("On", "On", Alphabet::Support),
            (ON_TABLE, "On", Alphabet::OnSurface),
            ("LeftOf", "LeftOf", Alphabet::LeftOf),
            ("InFrontOf", "InFrontOf", Alphabet::InFrontOf),
        ] {
            let hmm = PredicateHmm::from_probs(
                Predicate::new(pred, alphabet.arity() as u8, PredicateKind::Region),
                alphabet,
                &[1.0],
                &[vec![1.0]],
                &[vec![0.1, 0.9]],
                vec![],
            )
            .expect("region tables are normalized");
            set.insert(name, hmm);
        }
        set
    }
}

const U: f64 = 1.0 / 3.0;
const TABLE: [f64; 3] = [0.9, 0.05, 0.05];
const STILL: [f64; 3] = [0.15, 0.7, 0.15];
const HALF: [f64; 2] = [0.5, 0.5];

/// Independent per-factor emission template for the action alphabet.
struct Template {
    dist: [f64; 3],
    height: [f64; 3],
    vz: [f64; 3],
    displaced: [f64; 2],
}

fn t(dist: [f64; 3], height: [f64; 3], vz: [f64; 3], displaced: [f64; 2]) -> Template {
    Template {
        dist,
        height,
        vz,
        displaced,
    }
}

impl Template {
    fn table(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..Alphabet::Action.size())
            .map(|i| {
                let s = ActionSymbol::decode(i);
                self.dist[s.dist] * self.height[s.height] * self.vz[s.vz] * self.displaced[s.displaced]
            })
            .collect();
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= z);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_symbols_round_trip() {
        for i in 0..54 {
            assert_eq!(ActionSymbol::decode(i).index(), i);
        }
    }

    #[test]
    fn initial_set_is_normalized_and_serializes() {
        let set = HmmSet::initial();
        for h in set.hmms.values() {
            h.validate().unwrap();
        }
        let back = HmmSet::from_json(&set.to_json()).unwrap();
        assert_eq!(back, set);
        assert!(set.get("PickUp").unwrap().log_transition[2][0].is_infinite());
    }

    #[test]
    fn unnormalized_rows_are_rejected() {
        let err = PredicateHmm::from_probs(
            Predicate::new("X", 1, PredicateKind::Region),
            Alphabet::OnSurface,
            &[1.0],
            &[vec![1.0]],
            &[vec![0.5, 0.6]],
            vec![],
        );
        assert!(matches!(err, Err(TrackerError::BadTable { .. })));
    }

    fn best_path(h: &PredicateHmm, syms: &[usize]) -> f64 {
        let n = h.n_states();
        let mut v: Vec<f64> = (0..n).map(|s| h.log_prior[s] + h.log_emission[s][syms[0]]).collect();
        for &o in &syms[1..] {
            v = (0..n)
                .map(|j| {
                    let best = (0..n).map(|i| v[i] + h.log_transition[i][j]).fold(f64::NEG_INFINITY, f64::max);
                    best + h.log_emission[j][o]
                })
                .collect();
        }
        h.accepting.iter().map(|&s| v[s]).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn embedding_pads_an_event_with_background() {
        let one = |name: &str, e: Vec<f64>| {
            PredicateHmm::from_probs(
                Predicate::new(name, 1, PredicateKind::Region),
                Alphabet::OnSurface,
                &[1.0],
                &[vec![1.0]],
                &[e],
                vec![0],
            )
            .unwrap()
        };
        let core = one("X", vec![0.1, 0.9]);
        let bg = one(BACKGROUND, vec![0.8, 0.2]);
        let (enter, exit) = (0.1, 0.2);
        let h = core.embedded(&bg, enter, exit).unwrap();
        assert_eq!(h.n_states(), 3);
        assert_eq!(h.accepting, vec![1, 2]);
        let ln = f64::ln;
        // pre, pre, core, core, core, post
        let want = ln(0.5)
            + ln(0.8)
            + ln(1.0 - enter)
            + ln(0.8)
            + ln(enter)
            + ln(0.9)
            + 2.0 * (ln(1.0 - exit) + ln(0.9))
            + ln(exit)
            + ln(0.8);
        assert!((best_path(&h, &[0, 0, 1, 1, 1, 0]) - want).abs() < 1e-12);
        // a clip that is exactly the event loses only the padding priors
        let clip = best_path(&h, &[1, 1]);
        assert!((clip - (ln(0.5) + 2.0 * ln(0.9) + ln(1.0 - exit))).abs() < 1e-12);
        let wrong = one("Y", vec![0.5, 0.5]);
        let err = PredicateHmm { alphabet: Alphabet::Height, ..wrong }.embedded(&bg, enter, exit);
        assert!(err.is_err());
    }

    #[test]
    fn set_embedding_needs_background() {
        let set = HmmSet::initial();
        let e = set.embedded(&["PickUp", "Nope"], 0.05, 0.05).unwrap();
        assert_eq!(e.get("PickUp").unwrap().n_states(), set.get("PickUp").unwrap().n_states() + 2);
        assert_eq!(e.get("On"), set.get("On"));
        let mut bare = set.clone();
        bare.hmms.remove(BACKGROUND);
        assert!(matches!(bare.embedded(&["PickUp"], 0.05, 0.05), Err(TrackerError::UnknownHmm(_))));
    }
}
