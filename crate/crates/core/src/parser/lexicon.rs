use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::{HumanAction, RobotAction};

/// Lexical category of a phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LexRole {
    Determiner,
    Possessive,
    /// Command verb addressed to the robot.
    Verb,
    /// Human action verb, past tense.
    EventPast,
    /// Human action verb, base form (after the future auxiliary).
    EventBase,
    Noun,
    Modifier,
    /// Factual concept; usable as attribute, noun head or modifier.
    Fact,
    Agent,
    Pronoun,
    Relative,
    Auxiliary,
    Copula,
    Negation,
    Conjunction,
    Preposition,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolRef {
    Action(RobotAction),
    Event(HumanAction),
    /// Object class; `None` for generic heads like "object".
    Class(Option<String>),
    Color(String),
    Size(String),
    Fact(String),
    Region(String),
    /// Known word with no grounding of its own.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexEntry {
    pub phrase: String,
    pub role: LexRole,
    pub symbol: SymbolRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LexiconFile {
    entries: Vec<LexEntry>,
}

/// Phrase table for the controlled grammar. Phrases may span several tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<LexEntry>>,
    max_len: usize,
}

impl Lexicon {
    pub fn new(entries: impl IntoIterator<Item = LexEntry>) -> Self {
        let mut lex = Self {
            entries: BTreeMap::new(),
            max_len: 1,
        };
        for e in entries {
            lex.insert(e);
        }
        lex
    }

    pub fn insert(&mut self, entry: LexEntry) {
        let len = entry.phrase.split_whitespace().count();
        self.max_len = self.max_len.max(len);
        let slot = self.entries.entry(entry.phrase.clone()).or_default();
        if !slot.contains(&entry) {
            slot.push(entry);
        }
    }

    /// Adds a factual concept word (idempotent).
    pub fn add_fact(&mut self, word: &str, predicate: &str) {
        self.insert(LexEntry {
            phrase: word.to_lowercase(),
            role: LexRole::Fact,
            symbol: SymbolRef::Fact(predicate.to_string()),
        });
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn lookup(&self, phrase: &str, role: LexRole) -> Option<&LexEntry> {
        self.entries.get(phrase)?.iter().find(|e| e.role == role)
    }

    /// Longest phrase of `role` starting at `pos`; returns (entry, token count).
    pub fn longest(&self, tokens: &[String], pos: usize, role: LexRole) -> Option<(&LexEntry, usize)> {
        let max = self.max_len.min(tokens.len().saturating_sub(pos));
        (1..=max).rev().find_map(|len| {
            let phrase = tokens[pos..pos + len].join(" ");
            self.lookup(&phrase, role).map(|e| (e, len))
        })
    }

    /// Multi-word verbs whose first word matches, for split particles
    /// ("pick it up").
    pub fn split_verbs(&self, first: &str) -> Vec<&LexEntry> {
        self.entries
            .values()
            .flatten()
            .filter(|e| e.role == LexRole::Verb)
            .filter(|e| {
                let mut words = e.phrase.split_whitespace();
                words.next() == Some(first) && words.count() == 1
            })
            .collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexEntry> {
        self.entries.values().flatten()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: LexiconFile = serde_json::from_str(text)?;
        Ok(Self::new(file.entries))
    }

    pub fn to_json(&self) -> String {
        let file = LexiconFile {
            entries: self.entries().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("lexicon serializes")
    }
}

fn e(phrase: &str, role: LexRole, symbol: SymbolRef) -> LexEntry {
    LexEntry {
        phrase: phrase.to_string(),
        role,
        symbol,
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        use LexRole::*;
        use SymbolRef::*;
        let mut v = Vec::new();
        for d in ["the", "a", "an"] {
            v.push(e(d, Determiner, Plain));
        }
        v.push(e("my", Possessive, Plain));
        for (p, a) in [
            ("pick up", RobotAction::PickUp),
            ("lift", RobotAction::PickUp),
            ("grab", RobotAction::PickUp),
            ("pack up", RobotAction::PackUp),
            ("pack", RobotAction::PackUp),
            ("point at", RobotAction::PointAt),
            ("point to", RobotAction::PointAt),
        ] {
            v.push(e(p, Verb, Action(a)));
        }
        for (past, base, a) in [
            ("picked up", "pick up", HumanAction::PickUp),
            ("lifted", "lift", HumanAction::PickUp),
            ("put down", "put down", HumanAction::PutDown),
            ("slid", "slide", HumanAction::Slide),
            ("moved toward", "move toward", HumanAction::MoveToward),
            ("moved towards", "move towards", HumanAction::MoveToward),
            ("approached", "approach", HumanAction::MoveToward),
            ("moved away from", "move away from", HumanAction::MoveAwayFrom),
        ] {
            v.push(e(past, EventPast, Event(a)));
            v.push(e(base, EventBase, Event(a)));
        }
        for n in ["block", "box", "can", "cup", "fruit", "table"] {
            v.push(e(n, Noun, Class(Some(n.to_string()))));
        }
        for n in ["object", "thing", "one"] {
            v.push(e(n, Noun, Class(None)));
        }
        for c in ["red", "green", "yellow"] {
            v.push(e(c, Modifier, Color(c.to_string())));
        }
        v.push(e("small", Modifier, Size("small".into())));
        v.push(e("little", Modifier, Size("small".into())));
        v.push(e("large", Modifier, Size("large".into())));
        v.push(e("big", Modifier, Size("large".into())));
        v.push(e("cracker", Modifier, Plain));
        for (w, f) in [
            ("mine", "Mine"),
            ("snack", "Snack"),
            ("favourite", "Favourite"),
            ("favorite", "Favourite"),
            ("forbidden", "Forbidden"),
            ("oldest", "Oldest"),
        ] {
            v.push(e(w, LexRole::Fact, SymbolRef::Fact(f.to_string())));
        }
        for a in ["i", "the person", "the human"] {
            v.push(e(a, Agent, Plain));
        }
        v.push(e("it", Pronoun, Plain));
        for r in ["that", "which"] {
            v.push(e(r, Relative, Plain));
        }
        v.push(e("will", Auxiliary, Plain));
        v.push(e("is", Copula, Plain));
        v.push(e("are", Copula, Plain));
        v.push(e("not", Negation, Plain));
        v.push(e("and", Conjunction, Plain));
        for (p, r) in [
            ("on", "On"),
            ("on top of", "On"),
            ("left of", "LeftOf"),
            ("to the left of", "LeftOf"),
            ("in front of", "InFrontOf"),
        ] {
            v.push(e(p, Preposition, Region(r.to_string())));
        }
        Self::new(v)
    }
}
