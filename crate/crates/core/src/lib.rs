//! Grounding natural-language facts and commands against a simulated
//! tabletop: accrued detections, a Bayes-filtered factual belief state, a
//! sentence tracker for events and a log-linear correspondence graph for
//! commands.

pub mod bench;
pub mod corpus;
pub mod dcg;
pub mod engine;
pub mod facts;
pub mod model;
pub mod parser;
pub mod sim;
pub mod tracker;
