use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::TemplateId;
use crate::error::{Error, Result};
use crate::sim::protocol::{CommandMessage, HumanCommand};
use crate::sim::world::{Completion, WorldState};

/// Trust dynamics and command propensities of the simulated operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorParams {
    /// Status-query rate per robot per tick at zero trust.
    pub r0: f64,
    /// Conflicting-instruction rate per robot per tick at zero trust.
    pub r1: f64,
    /// Trust sensitivity of both rates.
    pub c: f64,
    pub u_explain: f64,
    pub u_refuse: f64,
    pub u_obey: f64,
    pub u_success: f64,
    /// Multiplier on `r1` giving the instruction rate toward a robot whose
    /// task the operator cannot account for (it is handling a leak the
    /// operator has not been told about). Trust does not damp this rate.
    pub suspicion: f64,
    pub initial_trust: f64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self {
            r0: 0.05,
            r1: 0.02,
            c: 2.0,
            u_explain: 0.05,
            u_refuse: 0.1,
            u_obey: 0.02,
            u_success: 0.05,
            suspicion: 8.0,
            initial_trust: 0.5,
        }
    }
}

impl OperatorParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r0,
            self.r1,
            self.c,
            self.u_explain,
            self.u_refuse,
            self.u_obey,
            self.u_success,
            self.suspicion,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("operator parameters must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.initial_trust) {
            return Err(Error::invalid("initial_trust must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn query_rate(&self, beta: f64) -> f64 {
        self.r0 * (-self.c * beta).exp()
    }

    pub fn instruct_rate(&self, beta: f64) -> f64 {
        self.r1 * (-self.c * beta).exp()
    }
}

/// Closed-loop stand-in for a human participant.
#[derive(Debug, Clone)]
pub struct SyntheticOperator {
    params: OperatorParams,
    trust: Vec<f64>,
    knows_leak: bool,
    rng: ChaCha8Rng,
}

impl SyntheticOperator {
    pub fn new(params: OperatorParams, n_robots: usize, seed: u64) -> Result<Self> {
        params.validate()?;
        let trust = vec![params.initial_trust; n_robots];
        Ok(Self {
            params,
            trust,
            knows_leak: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Starts from the trust left over by an earlier session.
    pub fn with_trust(mut self, trust: Vec<f64>) -> Result<Self> {
        if trust.len() != self.trust.len() || trust.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::invalid("one trust value in [0, 1] per robot required"));
        }
        self.trust = trust;
        Ok(self)
    }

    pub fn params(&self) -> &OperatorParams {
        &self.params
    }

    /// Latent trust toward robot `r` (1-based).
    pub fn trust(&self, robot: usize) -> f64 {
        self.trust[robot - 1]
    }

    pub fn trust_all(&self) -> &[f64] {
        &self.trust
    }

    pub fn knows_leak(&self) -> bool {
        self.knows_leak
    }

    /// Self-report on a ten-point scale, mapped to [0, 1] by value / 10.
    pub fn reported_trust(&self, robot: usize) -> f64 {
        (self.trust(robot) * 10.0).round() / 10.0
    }

    fn bump(&mut self, robot: usize, delta: f64) {
        let b = &mut self.trust[robot - 1];
        *b = (*b + delta).clamp(0.0, 1.0);
    }

    /// Commands issued this tick. The generator is advanced by the same
    /// amount whatever the outcome, so paired runs stay aligned.
    pub fn commands(&mut self, world: &WorldState) -> Vec<HumanCommand> {
        let mut out = Vec::new();
        for robot in world.robots() {
            let r = robot.id;
            let beta = self.trust(r);
            let u_query: f64 = self.rng.random();
            let u_instr: f64 = self.rng.random();
            if u_query < 1.0 - (-self.params.query_rate(beta)).exp() {
                out.push(HumanCommand::StatusQuery { robot: r });
            }
            let target = robot.current_subtask.map(|t| t.building);
            let on_leak = robot
                .current_subtask
                .is_some_and(|t| world.building(t.building).is_some_and(|b| b.gas_leak))
                && world.leak_detected;
            let rate = match (on_leak, self.knows_leak) {
                (true, true) => 0.0,
                (true, false) => self.params.r1 * self.params.suspicion,
                _ => self.params.instruct_rate(beta),
            };
            if u_instr < 1.0 - (-rate).exp() {
                if let Some(b) = preferred_building(world, robot.cell, target) {
                    out.push(HumanCommand::InstructGoto { robot: r, building: b });
                }
            }
        }
        out
    }

    /// Reads the robot's answer to one command.
    pub fn observe_reply(&mut self, robot: usize, replies: &[CommandMessage]) {
        if replies.iter().any(|m| m.discloses_hazard) {
            self.knows_leak = true;
        }
        let refused = replies
            .iter()
            .any(|m| matches!(m.template, TemplateId::RefuseReply | TemplateId::RefuseReplyCarry));
        let obeyed = replies.iter().any(|m| m.template == TemplateId::ObeyReply);
        let repaired = replies.len() > 1;
        if refused {
            let d = if repaired {
                self.params.u_explain
            } else {
                -self.params.u_refuse
            };
            self.bump(robot, d);
        } else if obeyed {
            self.bump(robot, self.params.u_obey);
        }
    }

    /// Unprompted robot messages.
    pub fn observe_messages(&mut self, messages: &[CommandMessage]) {
        if messages.iter().any(|m| m.discloses_hazard) {
            self.knows_leak = true;
        }
    }

    /// Visible progress by the robots raises trust in the robot responsible.
    pub fn observe_completions(&mut self, world: &WorldState, done: &[Completion]) {
        for c in done {
            let a = c.agent();
            if a == 0 || a > self.trust.len() {
                continue;
            }
            let visible = match c {
                Completion::Searched { .. } | Completion::Extinguished { .. } | Completion::Evacuated { .. } => true,
                Completion::GasShut { .. } => self.knows_leak,
                Completion::Treated { .. } | Completion::PickedUp { .. } => false,
            };
            if visible && !world.exploded {
                self.bump(a, self.params.u_success);
            }
        }
    }
}

/// Where the operator would rather send a robot: the nearest building with
/// a visible need, other than where the robot is already going.
pub fn preferred_building(world: &WorldState, from: crate::sim::Cell, current: Option<usize>) -> Option<usize> {
    world
        .buildings
        .iter()
        .filter(|b| Some(b.id) != current)
        .filter(|b| b.fire_blocked || !b.searched || b.victims.iter().any(|v| v.awaiting_carry()))
        .min_by_key(|b| (b.cell.manhattan(from), b.id))
        .map(|b| b.id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_trust_suppresses_commands() {
        let p = OperatorParams {
            c: 20.0,
            ..OperatorParams::default()
        };
        assert!(p.query_rate(1.0) < 1e-9);
        assert!(p.instruct_rate(1.0) < 1e-9);
        assert_eq!(p.query_rate(0.0), 0.05);
    }

    #[test]
    fn bare_refusal_costs_trust() {
        let mut op = SyntheticOperator::new(OperatorParams::default(), 2, 0).unwrap();
        let refuse = CommandMessage {
            tick: 0,
            sender: 1,
            receiver: 0,
            template: TemplateId::RefuseReply,
            building: Some(2),
            probability: None,
            text: String::new(),
            discloses_hazard: false,
        };
        op.observe_reply(1, std::slice::from_ref(&refuse));
        assert!((op.trust(1) - 0.4).abs() < 1e-12);
        let mut explain = refuse.clone();
        explain.template = TemplateId::ExplainDecision;
        explain.discloses_hazard = true;
        op.observe_reply(1, &[refuse, explain]);
        assert!((op.trust(1) - 0.45).abs() < 1e-12);
        assert!(op.knows_leak());
        assert_eq!(op.reported_trust(2), 0.5);
    }
}
