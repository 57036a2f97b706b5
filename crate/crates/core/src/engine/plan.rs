use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::sim::RobotAction;

/// Where packed objects are placed.
pub const PACK_REGION: &str = "pack-region";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "op", content = "target")]
pub enum PlanStep {
    MoveTo(String),
    Grasp(String),
    Lift(String),
    PlaceAt(String),
    PointAt(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanSummary {
    pub action: RobotAction,
    pub targets: BTreeSet<String>,
}

impl std::fmt::Display for PlanSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t: Vec<&str> = self.targets.iter().map(String::as_str).collect();
        write!(f, "{}{{{}}}", self.action.name(), t.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub steps: Vec<PlanStep>,
    pub summary: PlanSummary,
}

/// Deterministic expansion of an action over its targets, in id order.
pub fn plan(summary: &PlanSummary) -> ActionPlan {
    let mut steps = Vec::new();
    for t in &summary.targets {
        let t = t.clone();
        match summary.action {
            RobotAction::PickUp => {
                steps.extend([PlanStep::MoveTo(t.clone()), PlanStep::Grasp(t.clone()), PlanStep::Lift(t)]);
            }
            RobotAction::PackUp => steps.extend([
                PlanStep::MoveTo(t.clone()),
                PlanStep::Grasp(t.clone()),
                PlanStep::Lift(t),
                PlanStep::PlaceAt(PACK_REGION.into()),
            ]),
            RobotAction::PointAt => steps.push(PlanStep::MoveTo(t)),
        }
    }
    ActionPlan {
        steps,
        summary: summary.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(action: RobotAction, targets: &[&str]) -> PlanSummary {
        PlanSummary {
            action,
            targets: targets.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn pick_up_is_three_steps() {
        let p = plan(&summary(RobotAction::PickUp, &["box1"]));
        assert_eq!(
            p.steps,
            vec![
                PlanStep::MoveTo("box1".into()),
                PlanStep::Grasp("box1".into()),
                PlanStep::Lift("box1".into())
            ]
        );
    }

    #[test]
    fn pack_up_two_members_in_id_order() {
        let p = plan(&summary(RobotAction::PackUp, &["can1", "box1"]));
        assert_eq!(p.steps.len(), 8);
        assert_eq!(p.steps[0], PlanStep::MoveTo("box1".into()));
        assert_eq!(p.steps[4], PlanStep::MoveTo("can1".into()));
        assert_eq!(p.steps[7], PlanStep::PlaceAt(PACK_REGION.into()));
    }

    #[test]
    fn grasp_always_follows_move_to_same_entity() {
        for a in RobotAction::ALL {
            let p = plan(&summary(a, &["a", "b", "c"]));
            for (i, s) in p.steps.iter().enumerate() {
                if let PlanStep::Grasp(e) = s {
                    assert_eq!(p.steps[i - 1], PlanStep::MoveTo(e.clone()));
                }
            }
        }
        assert_eq!(plan(&summary(RobotAction::PointAt, &["a"])).steps.len(), 1);
        assert_eq!(summary(RobotAction::PackUp, &["b", "a"]).to_string(), "PackUp{a,b}");
    }
}
