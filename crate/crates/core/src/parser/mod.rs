//! Controlled-grammar parsing into constituent trees, and the split of a
//! tree into imperative and declarative constituents.
//!
//! ```text
//! S     → CMD | FACT
//! CMD   → VERB NPS PARTICLE?          particle only for split verbs ("pick it up")
//! FACT  → NPS COP NEG? ATTR
//! NPS   → NP ("and" NP)*
//! NP    → PRON | (DET | POSS)? MOD* NOUN PP? RC?
//! PP    → PREP NP
//! RC    → REL? AGENT (V-PAST | "will" V-BASE)
//! ATTR  → (DET | POSS)? (FACT | UNKNOWN)
//! ```
//!
//! The vocabulary is closed except for the attribute slot: an unknown single
//! word there is a candidate new fact.

mod lexicon;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexicon::{LexEntry, LexRole, Lexicon, SymbolRef};

use crate::facts::Polarity;

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("parse error at token {index} (`{token}`): expected {expected}")]
pub struct ParseError {
    pub index: usize,
    pub token: String,
    pub expected: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Verb,
    Noun,
    Modifier,
    RelativeClause,
    Pronoun,
    Possessive,
    CopulaAttribute,
    Conjunction,
    Preposition,
    Copula,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tense {
    Past,
    Future,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceKind {
    Command,
    Fact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub id: usize,
    /// Half-open token range.
    pub span: (usize, usize),
    pub head: String,
    pub role: Role,
    pub children: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tense: Option<Tense>,
    /// False for an attribute word missing from the lexicon.
    pub known: bool,
}

/// Constituents are stored children-first, so id order is a topological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseTree {
    pub tokens: Vec<String>,
    pub nodes: Vec<Constituent>,
    pub root: usize,
    pub kind: SentenceKind,
    pub negated: bool,
}

impl ParseTree {
    pub fn node(&self, id: usize) -> &Constituent {
        &self.nodes[id]
    }

    pub fn root_node(&self) -> &Constituent {
        &self.nodes[self.root]
    }

    /// `id` and everything below it, children first.
    pub fn subtree(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect(id, &mut out);
        out
    }

    fn collect(&self, id: usize, out: &mut Vec<usize>) {
        for &c in &self.nodes[id].children {
            self.collect(c, out);
        }
        out.push(id);
    }

    pub fn children_with_role(&self, id: usize, role: Role) -> impl Iterator<Item = &Constituent> {
        self.nodes[id]
            .children
            .iter()
            .map(|&c| &self.nodes[c])
            .filter(move |c| c.role == role)
    }

    /// Reconstructs the token sequence from the constituent spans.
    pub fn render(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.render_node(self.root, &mut out);
        out
    }

    fn render_node(&self, id: usize, out: &mut Vec<String>) {
        let node = &self.nodes[id];
        let mut pos = node.span.0;
        for &c in &node.children {
            let child = &self.nodes[c];
            out.extend(self.tokens[pos..child.span.0].iter().cloned());
            self.render_node(c, out);
            pos = child.span.1;
        }
        out.extend(self.tokens[pos..node.span.1].iter().cloned());
    }

    /// The command-verb constituent, for command sentences.
    pub fn verb(&self) -> Option<&Constituent> {
        (self.kind == SentenceKind::Command).then(|| self.root_node())
    }

    /// Argument (command) or subject (fact) constituent.
    pub fn argument(&self) -> Option<&Constituent> {
        let root = self.root_node();
        root.children
            .iter()
            .map(|&c| &self.nodes[c])
            .find(|c| matches!(c.role, Role::Noun | Role::Pronoun | Role::Conjunction))
    }

    pub fn attribute(&self) -> Option<&Constituent> {
        self.children_with_role(self.root, Role::CopulaAttribute).next()
    }

    /// Noun phrases directly referenced by an argument: the argument itself,
    /// or each conjunct.
    pub fn conjuncts(&self, id: usize) -> Vec<usize> {
        let n = &self.nodes[id];
        if n.role == Role::Conjunction {
            n.children.clone()
        } else {
            vec![id]
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(String::from)
        .collect()
}

struct Parser<'a> {
    tokens: Vec<String>,
    pos: usize,
    lex: &'a Lexicon,
    nodes: Vec<Constituent>,
}

impl<'a> Parser<'a> {
    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            index: self.pos,
            token: self.tokens.get(self.pos).cloned().unwrap_or_else(|| "<end>".into()),
            expected: expected.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn take(&mut self, role: LexRole) -> Option<(LexEntry, usize)> {
        let (entry, len) = self.lex.longest(&self.tokens, self.pos, role)?;
        let entry = entry.clone();
        let start = self.pos;
        self.pos += len;
        Some((entry, start))
    }

    fn peek_is(&self, role: LexRole) -> bool {
        self.lex.longest(&self.tokens, self.pos, role).is_some()
    }

    fn peek_at_is(&self, pos: usize, role: LexRole) -> bool {
        self.lex.longest(&self.tokens, pos, role).is_some()
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        span: (usize, usize),
        head: String,
        role: Role,
        children: Vec<usize>,
        symbol: Option<SymbolRef>,
        tense: Option<Tense>,
        known: bool,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Constituent {
            id,
            span,
            head,
            role,
            children,
            symbol,
            tense,
            known,
        });
        id
    }

    fn sentence(&mut self) -> Result<(usize, SentenceKind, bool), ParseError> {
        if self.tokens.is_empty() {
            return Err(self.error("a sentence"));
        }
        if let Some((verb, _)) = self.take(LexRole::Verb) {
            let args = self.np_list()?;
            self.expect_end()?;
            let head = verb.phrase.replace(' ', "-");
            let id = self.push(
                (0, self.pos),
                head,
                Role::Verb,
                vec![args],
                Some(verb.symbol),
                None,
                true,
            );
            return Ok((id, SentenceKind::Command, false));
        }
        let first = self.tokens[0].clone();
        let split: Vec<LexEntry> = self.lex.split_verbs(&first).into_iter().cloned().collect();
        if !split.is_empty() {
            self.pos = 1;
            let args = self.np_list()?;
            let particle = self.peek().map(String::from);
            let verb = split
                .iter()
                .find(|v| v.phrase.split_whitespace().nth(1) == particle.as_deref())
                .ok_or_else(|| self.error("a verb particle"))?
                .clone();
            self.pos += 1;
            self.expect_end()?;
            let id = self.push(
                (0, self.pos),
                verb.phrase.replace(' ', "-"),
                Role::Verb,
                vec![args],
                Some(verb.symbol),
                None,
                true,
            );
            return Ok((id, SentenceKind::Command, false));
        }
        if !(self.peek_is(LexRole::Determiner)
            || self.peek_is(LexRole::Possessive)
            || self.peek_is(LexRole::Modifier)
            || self.peek_is(LexRole::Noun)
            || self.peek_is(LexRole::Fact)
            || self.peek_is(LexRole::Pronoun))
        {
            return Err(self.error("a command verb or a noun phrase"));
        }
        let subject = self.np_list()?;
        let (cop, _) = self.take(LexRole::Copula).ok_or_else(|| self.error("`is` or `are`"))?;
        let negated = self.take(LexRole::Negation).is_some();
        let attr = self.attribute()?;
        self.expect_end()?;
        let id = self.push(
            (0, self.pos),
            cop.phrase,
            Role::Copula,
            vec![subject, attr],
            None,
            None,
            true,
        );
        Ok((id, SentenceKind::Fact, negated))
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("end of sentence"))
        }
    }

    fn np_list(&mut self) -> Result<usize, ParseError> {
        let start = self.pos;
        let mut items = vec![self.np()?];
        while self.peek_is(LexRole::Conjunction) {
            self.pos += 1;
            items.push(self.np()?);
        }
        if items.len() == 1 {
            return Ok(items[0]);
        }
        Ok(self.push(
            (start, self.pos),
            "and".into(),
            Role::Conjunction,
            items,
            None,
            None,
            true,
        ))
    }

    fn np(&mut self) -> Result<usize, ParseError> {
        let start = self.pos;
        if let Some((p, s)) = self.take(LexRole::Pronoun) {
            return Ok(self.push((s, self.pos), p.phrase, Role::Pronoun, vec![], None, None, true));
        }
        let mut children = Vec::new();
        if let Some((p, s)) = self.take(LexRole::Possessive) {
            children.push(self.push((s, self.pos), p.phrase, Role::Possessive, vec![], None, None, true));
        } else {
            self.take(LexRole::Determiner);
        }
        loop {
            if let Some((m, s)) = self.take(LexRole::Modifier) {
                children.push(self.push((s, self.pos), m.phrase, Role::Modifier, vec![], Some(m.symbol), None, true));
                continue;
            }
            // a fact word is a modifier only when a head still follows
            if let Some((_, len)) = self.lex.longest(&self.tokens, self.pos, LexRole::Fact) {
                let next = self.pos + len;
                if self.peek_at_is(next, LexRole::Noun)
                    || self.peek_at_is(next, LexRole::Modifier)
                    || self.peek_at_is(next, LexRole::Fact)
                {
                    let (f, s) = self.take(LexRole::Fact).expect("fact present");
                    children.push(self.push((s, self.pos), f.phrase, Role::Modifier, vec![], Some(f.symbol), None, true));
                    continue;
                }
            }
            break;
        }
        let (head, symbol) = if let Some((n, _)) = self.take(LexRole::Noun) {
            (n.phrase, n.symbol)
        } else if let Some((f, _)) = self.take(LexRole::Fact) {
            (f.phrase, f.symbol)
        } else {
            return Err(self.error("a noun"));
        };
        if let Some((prep, s)) = self.take(LexRole::Preposition) {
            let object = self.np()?;
            children.push(self.push((s, self.pos), prep.phrase, Role::Preposition, vec![object], Some(prep.symbol), None, true));
        }
        if self.peek_is(LexRole::Relative) || self.peek_is(LexRole::Agent) {
            children.push(self.relative_clause()?);
        }
        Ok(self.push((start, self.pos), head, Role::Noun, children, Some(symbol), None, true))
    }

    fn relative_clause(&mut self) -> Result<usize, ParseError> {
        let start = self.pos;
        self.take(LexRole::Relative);
        let (agent, s) = self.take(LexRole::Agent).ok_or_else(|| self.error("an agent"))?;
        let agent_id = self.push((s, self.pos), agent.phrase, Role::Agent, vec![], None, None, true);
        let verb_start = self.pos;
        let (verb, tense) = if self.take(LexRole::Auxiliary).is_some() {
            let (v, _) = self
                .take(LexRole::EventBase)
                .ok_or_else(|| self.error("an action verb"))?;
            (v, Tense::Future)
        } else {
            let (v, _) = self
                .take(LexRole::EventPast)
                .ok_or_else(|| self.error("a past-tense action verb"))?;
            (v, Tense::Past)
        };
        let head = verb.phrase.replace(' ', "-");
        let verb_id = self.push(
            (verb_start, self.pos),
            head.clone(),
            Role::Verb,
            vec![],
            Some(verb.symbol),
            Some(tense),
            true,
        );
        Ok(self.push(
            (start, self.pos),
            head,
            Role::RelativeClause,
            vec![agent_id, verb_id],
            None,
            Some(tense),
            true,
        ))
    }

    fn attribute(&mut self) -> Result<usize, ParseError> {
        let start = self.pos;
        if self.take(LexRole::Possessive).is_none() {
            self.take(LexRole::Determiner);
        }
        if let Some((f, _)) = self.take(LexRole::Fact) {
            return Ok(self.push((start, self.pos), f.phrase, Role::CopulaAttribute, vec![], Some(f.symbol), None, true));
        }
        match self.peek() {
            Some(w) if !self.lex.contains_word(w) && self.pos + 1 == self.tokens.len() => {
                let w = w.to_string();
                self.pos += 1;
                Ok(self.push((start, self.pos), w, Role::CopulaAttribute, vec![], None, None, false))
            }
            _ => Err(self.error("a factual attribute")),
        }
    }
}

/// Parses one utterance. Deterministic for a given lexicon.
pub fn parse(text: &str, lexicon: &Lexicon) -> Result<ParseTree, ParseError> {
    let mut p = Parser {
        tokens: tokenize(text),
        pos: 0,
        lex: lexicon,
        nodes: Vec::new(),
    };
    let (root, kind, negated) = p.sentence()?;
    Ok(ParseTree {
        tokens: p.tokens,
        nodes: p.nodes,
        root,
        kind,
        negated,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertTarget {
    /// Fact predicate name, or the raw word for an unknown attribute.
    pub fact: String,
    /// Subject constituent (noun phrase or conjunction).
    pub constituent: usize,
    pub polarity: Polarity,
    /// The attribute constituent carrying the assertion.
    pub attribute: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub imperative: BTreeSet<usize>,
    pub declarative: BTreeSet<usize>,
    pub assert_target: Option<AssertTarget>,
    pub pending_future: bool,
}

pub fn partition(tree: &ParseTree) -> Partition {
    let mut imperative = BTreeSet::new();
    let mut declarative = BTreeSet::new();
    let arg = tree.argument().map(|c| c.id);
    let pending_future = tree
        .nodes
        .iter()
        .any(|n| n.role == Role::RelativeClause && n.tense == Some(Tense::Future));
    let mut assert_target = None;
    if let Some(arg) = arg {
        declarative.extend(tree.subtree(arg));
    }
    match tree.kind {
        SentenceKind::Command => {
            imperative.insert(tree.root);
            if let Some(arg) = arg {
                imperative.insert(arg);
                imperative.extend(tree.conjuncts(arg));
            }
        }
        SentenceKind::Fact => {
            if let (Some(attr), Some(arg)) = (tree.attribute(), arg) {
                imperative.insert(attr.id);
                let fact = match &attr.symbol {
                    Some(SymbolRef::Fact(f)) => f.clone(),
                    _ => attr.head.clone(),
                };
                assert_target = Some(AssertTarget {
                    fact,
                    constituent: arg,
                    polarity: if tree.negated {
                        Polarity::Deny
                    } else {
                        Polarity::Affirm
                    },
                    attribute: attr.id,
                });
            }
        }
    }
    Partition {
        imperative,
        declarative,
        assert_target,
        pending_future,
    }
}

/// The unknown attribute word of a single-entity copula sentence.
pub fn extract_unknown_attribute(tree: &ParseTree, lexicon: &Lexicon) -> Option<String> {
    if tree.kind != SentenceKind::Fact {
        return None;
    }
    let attr = tree.attribute()?;
    let subject = tree.argument()?;
    if subject.role == Role::Conjunction || attr.known || lexicon.contains_word(&attr.head) {
        return None;
    }
    Some(attr.head.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> Lexicon {
        Lexicon::default()
    }

    fn roles(tree: &ParseTree, id: usize) -> Vec<(Role, String)> {
        tree.node(id)
            .children
            .iter()
            .map(|&c| (tree.node(c).role, tree.node(c).head.clone()))
            .collect()
    }

    #[test]
    fn command_with_modifier() {
        let t = parse("pick up the red block", &lex()).unwrap();
        assert_eq!(t.kind, SentenceKind::Command);
        let root = t.root_node();
        assert_eq!((root.role, root.head.as_str()), (Role::Verb, "pick-up"));
        let np = t.argument().unwrap();
        assert_eq!((np.role, np.head.as_str()), (Role::Noun, "block"));
        assert_eq!(roles(&t, np.id), vec![(Role::Modifier, "red".to_string())]);
    }

    #[test]
    fn copula_with_relative_clause() {
        let t = parse("the box I put down is mine", &lex()).unwrap();
        assert_eq!(t.kind, SentenceKind::Fact);
        let np = t.argument().unwrap();
        assert_eq!(np.head, "box");
        let rc = t.children_with_role(np.id, Role::RelativeClause).next().unwrap();
        assert_eq!(rc.head, "put-down");
        assert_eq!(rc.tense, Some(Tense::Past));
        assert_eq!(roles(&t, rc.id)[0], (Role::Agent, "i".to_string()));
        let attr = t.attribute().unwrap();
        assert_eq!(attr.symbol, Some(SymbolRef::Fact("Mine".into())));
    }

    #[test]
    fn unknown_verb_fails_at_first_token() {
        let err = parse("blorp the table", &lex()).unwrap_err();
        assert_eq!(err.index, 0);
        assert_eq!(err.token, "blorp");
    }

    #[test]
    fn split_particle_and_pronoun() {
        let t = parse("Pick it up.", &lex()).unwrap();
        assert_eq!(t.root_node().head, "pick-up");
        assert_eq!(t.argument().unwrap().role, Role::Pronoun);
    }

    #[test]
    fn possessive_fact_reference_partition() {
        let t = parse("pack up my snack", &lex()).unwrap();
        let p = partition(&t);
        assert!(p.imperative.contains(&t.root));
        let np = t.argument().unwrap();
        assert_eq!(np.symbol, Some(SymbolRef::Fact("Snack".into())));
        assert!(p.declarative.contains(&np.id));
        assert_eq!(roles(&t, np.id), vec![(Role::Possessive, "my".to_string())]);
        assert!(p.assert_target.is_none());
    }

    #[test]
    fn conjunction_fact_sentence() {
        let t = parse("the can and the box are my snack", &lex()).unwrap();
        let p = partition(&t);
        let target = p.assert_target.unwrap();
        assert_eq!(target.fact, "Snack");
        assert_eq!(t.node(target.constituent).role, Role::Conjunction);
        assert_eq!(p.imperative, BTreeSet::from([target.attribute]));
        assert_eq!(t.conjuncts(target.constituent).len(), 2);
    }

    #[test]
    fn future_relative_clause_is_pending() {
        let t = parse("the box I will put down is my snack", &lex()).unwrap();
        assert!(partition(&t).pending_future);
        let t = parse("lift the box that I put down", &lex()).unwrap();
        assert!(!partition(&t).pending_future);
    }

    #[test]
    fn region_and_agent_phrases() {
        let t = parse("The cracker box on the table is my snack.", &lex()).unwrap();
        let np = t.argument().unwrap();
        let pp = t.children_with_role(np.id, Role::Preposition).next().unwrap();
        assert_eq!(pp.symbol, Some(SymbolRef::Region("On".into())));
        let t = parse("pick up the red object the person put down", &lex()).unwrap();
        let np = t.argument().unwrap();
        assert_eq!(np.symbol, Some(SymbolRef::Class(None)));
        assert!(t.children_with_role(np.id, Role::RelativeClause).next().is_some());
    }

    #[test]
    fn unknown_attribute_extraction() {
        let l = lex();
        assert_eq!(
            extract_unknown_attribute(&parse("the cup is frobby", &l).unwrap(), &l),
            Some("frobby".into())
        );
        assert!(parse("frobby the cup quickly", &l).is_err());
        assert_eq!(extract_unknown_attribute(&parse("the cup is mine", &l).unwrap(), &l), None);
        assert_eq!(
            extract_unknown_attribute(&parse("the cup and the box are frobby", &l).unwrap(), &l),
            None
        );
    }

    #[test]
    fn fact_modifier_and_negation() {
        let l = lex();
        let t = parse("point at the oldest object", &l).unwrap();
        let np = t.argument().unwrap();
        assert_eq!(roles(&t, np.id), vec![(Role::Modifier, "oldest".to_string())]);
        let t = parse("the green object is not the oldest", &l).unwrap();
        assert_eq!(partition(&t).assert_target.unwrap().polarity, Polarity::Deny);
    }

    #[test]
    fn every_copula_yields_assert_and_every_command_an_imperative() {
        let l = lex();
        for s in [
            "the cup is mine",
            "the fruit on the table is mine",
            "the box and the can are my snack",
            "the red cup the person slid is my favourite",
        ] {
            let p = partition(&parse(s, &l).unwrap());
            assert!(p.assert_target.is_some(), "{s}");
            assert!(!p.imperative.is_empty());
        }
        for s in ["point at my fruit", "lift the box that i put down", "pick up the can and the box"] {
            let t = parse(s, &l).unwrap();
            let p = partition(&t);
            assert!(p.imperative.contains(&t.root), "{s}");
        }
    }

    fn sentences() -> impl Strategy<Value = String> {
        let np = prop_oneof![
            Just("the red cup".to_string()),
            Just("my snack".to_string()),
            Just("the box i put down".to_string()),
            Just("the big green fruit on the table".to_string()),
            Just("the can that the person will slide".to_string()),
            Just("it".to_string()),
        ];
        let verb = prop_oneof![Just("pick up"), Just("point at"), Just("pack up")];
        let attr = prop_oneof![Just("mine"), Just("my snack"), Just("the oldest"), Just("zorpy")];
        prop_oneof![
            (verb, proptest::collection::vec(np.clone(), 1..3))
                .prop_map(|(v, nps)| format!("{v} {}", nps.join(" and "))),
            (proptest::collection::vec(np, 1..3), attr)
                .prop_map(|(nps, a)| format!("{} is {a}", nps.join(" and "))),
        ]
    }

    proptest! {
        #[test]
        fn parse_is_deterministic_and_spans_round_trip(s in sentences()) {
            let l = lex();
            let a = parse(&s, &l).unwrap();
            prop_assert_eq!(&a, &parse(&s, &l).unwrap());
            prop_assert_eq!(a.render(), a.tokens.clone());
            prop_assert_eq!(a.root_node().span, (0, a.tokens.len()));
            for n in &a.nodes {
                let mut prev = n.span.0;
                for &c in &n.children {
                    let cs = a.node(c).span;
                    prop_assert!(c < n.id);
                    prop_assert!(cs.0 >= prev && cs.1 <= n.span.1);
                    prev = cs.1;
                }
            }
        }
    }
}
