use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BeliefUpdate, EngineConfig, EngineError, GroundingResult, Models, PlanSummary, Session};
use crate::sim::{simulate, Scenario, SimFrame};

/// A session fed by a simulated scenario, one frame per step.
pub struct ScenarioSession {
    scenario: Scenario,
    frames: Vec<SimFrame>,
    cursor: usize,
    session: Session,
}

impl ScenarioSession {
    /// Simulates the scenario and observes its first frame.
    pub fn new(scenario: Scenario, models: Arc<Models>, cfg: EngineConfig) -> Result<Self, EngineError> {
        let world = scenario.world_model()?;
        let frames = simulate(&scenario)?;
        let mut s = Self {
            scenario,
            frames,
            cursor: 0,
            session: Session::new(world, models, cfg),
        };
        s.step(1)?;
        Ok(s)
    }

    /// Observes up to `n` further frames.
    pub fn step(&mut self, n: usize) -> Result<Vec<BeliefUpdate>, EngineError> {
        let mut updates = Vec::new();
        for _ in 0..n {
            let Some(f) = self.frames.get(self.cursor) else { break };
            updates.extend(self.session.observe(f.detections.clone())?);
            self.cursor += 1;
        }
        Ok(updates)
    }

    pub fn finished(&self) -> bool {
        self.cursor >= self.frames.len()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn frames(&self) -> &[SimFrame] {
        &self.frames
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn session_mut(&mut self) -> &mut Session {
        &mut self.session
    }

    pub fn ground(&mut self, text: &str) -> Result<GroundingResult, EngineError> {
        self.session.ground_utterance(text)
    }

    /// Steps to the horizon, grounding each scripted utterance right after
    /// the frame of its tick and handing every result to `f`.
    pub fn run_each(&mut self, mut f: impl FnMut(u64, &str, &Result<GroundingResult, EngineError>)) -> Result<(), EngineError> {
        let mut utterances: Vec<_> = self.scenario.utterances.clone();
        utterances.sort_by_key(|u| u.tick);
        let mut next = 0;
        loop {
            let tick = self.session.last_tick().unwrap_or(0);
            while next < utterances.len() && utterances[next].tick <= tick {
                let u = &utterances[next];
                let r = self.session.ground_utterance(&u.text);
                f(tick, &u.text, &r);
                next += 1;
            }
            if self.finished() {
                return Ok(());
            }
            self.step(1)?;
        }
    }

    pub fn run(&mut self) -> Result<ScenarioOutcome, EngineError> {
        let mut out = Vec::new();
        self.run_each(|tick, text, r| {
            out.push(UtteranceOutcome {
                tick,
                text: text.to_string(),
                summary: r.as_ref().ok().and_then(|r| r.summary().cloned()),
                error: r.as_ref().err().map(|e| e.to_string()),
            })
        })?;
        let summary = out.iter().rev().find_map(|u| u.summary.clone());
        Ok(ScenarioOutcome {
            utterances: out,
            summary,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceOutcome {
    pub tick: u64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PlanSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub utterances: Vec<UtteranceOutcome>,
    /// Plan summary of the last command that grounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PlanSummary>,
}

pub fn run_scenario(scenario: &Scenario, models: Arc<Models>, cfg: EngineConfig) -> Result<ScenarioOutcome, EngineError> {
    ScenarioSession::new(scenario.clone(), models, cfg)?.run()
}
