//! Trust-to-autonomy coordination, punctuated-equilibrium phases, trust
//! repair and conflict resolution for one robot at a time.

mod autonomy;
mod repair;
mod templates;

use serde::{Deserialize, Serialize};

pub use autonomy::{
    coordinate_autonomy, decide_compliance, detect_inflection, AutonomyState, Compliance,
    ComplianceDecision, ControllerConfig, Phase, PhaseDecision, ViolationCause,
};
pub use repair::{select_repair, RepairContext, RepairKind, RepairStrategy};
pub use templates::{slots, Slots, TemplateId, TemplateSet};

use crate::error::Result;

/// Controller telemetry line, one per robot per window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerTelemetry {
    pub robot: usize,
    pub k: usize,
    pub phase: Phase,
    #[serde(rename = "L_alpha")]
    pub l_alpha: f64,
    pub cause: Option<ViolationCause>,
    pub repair_kind: Option<RepairKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AutonomyPolicy {
    /// Constant autonomy level, no phases and no repair.
    Fixed { l_alpha: f64 },
    /// Autonomy follows inferred trust.
    TrustPreserved,
}

/// Per-robot controller driven once per observation window.
#[derive(Debug, Clone)]
pub struct RobotController {
    robot: usize,
    policy: AutonomyPolicy,
    config: ControllerConfig,
    state: AutonomyState,
    series: Vec<f64>,
    pending_repair: Option<RepairKind>,
}

impl RobotController {
    pub fn fixed(robot: usize, l_alpha: f64) -> Result<Self> {
        Ok(Self {
            robot,
            policy: AutonomyPolicy::Fixed { l_alpha },
            config: ControllerConfig::default(),
            state: AutonomyState::new(l_alpha)?,
            series: Vec::new(),
            pending_repair: None,
        })
    }

    /// Starts in the revolutionary phase: a fresh team is at an inflection point.
    pub fn trust_preserved(robot: usize, config: ControllerConfig, initial_l_beta: f64) -> Result<Self> {
        config.validate()?;
        let mut state = AutonomyState::new(coordinate_autonomy(initial_l_beta, Phase::Revolutionary, &config))?;
        state.phase = Phase::Revolutionary;
        state.last_violation_cause = Some(ViolationCause::TeamingOnset);
        Ok(Self {
            robot,
            policy: AutonomyPolicy::TrustPreserved,
            config,
            state,
            series: Vec::new(),
            pending_repair: None,
        })
    }

    pub fn new(robot: usize, policy: AutonomyPolicy, config: ControllerConfig, initial_l_beta: f64) -> Result<Self> {
        match policy {
            AutonomyPolicy::Fixed { l_alpha } => Self::fixed(robot, l_alpha),
            AutonomyPolicy::TrustPreserved => Self::trust_preserved(robot, config, initial_l_beta),
        }
    }

    pub fn robot(&self) -> usize {
        self.robot
    }

    pub fn state(&self) -> &AutonomyState {
        &self.state
    }

    pub fn l_alpha(&self) -> f64 {
        self.state.l_alpha()
    }

    pub fn policy(&self) -> AutonomyPolicy {
        self.policy
    }

    /// Refusals carry repair only under the adaptive policy while revolutionary.
    pub fn repairing(&self) -> bool {
        self.policy == AutonomyPolicy::TrustPreserved && self.state.phase == Phase::Revolutionary
    }

    pub fn current_cause(&self) -> Option<ViolationCause> {
        self.state.last_violation_cause
    }

    /// Notes that a repair message was sent during the current window.
    pub fn record_repair(&mut self, kind: RepairKind) {
        self.pending_repair.get_or_insert(kind);
    }

    /// Consumes the window's L_beta. `critical` says whether the robot is on a
    /// safety-critical task, which makes a trust breach read as the operator
    /// perceiving the robot's action as wrong rather than a plain disagreement.
    pub fn on_window(&mut self, l_beta: f64, critical: bool) -> Result<ControllerTelemetry> {
        let k = self.series.len();
        self.series.push(l_beta);
        let mut cause = None;
        if self.policy == AutonomyPolicy::TrustPreserved {
            let d = detect_inflection(&self.series, &self.state, &self.config)?;
            cause = d.cause.map(|c| match c {
                ViolationCause::CounterCommand if critical => ViolationCause::PerceivedUnethical,
                c => c,
            });
            self.state.phase = d.phase;
            self.state.phase_entered_at = d.entered_at;
            if cause.is_some() {
                self.state.last_violation_cause = cause;
            }
            self.state
                .set_l_alpha(coordinate_autonomy(l_beta, self.state.phase, &self.config))?;
        }
        Ok(ControllerTelemetry {
            robot: self.robot,
            k,
            phase: self.state.phase,
            l_alpha: self.state.l_alpha(),
            cause,
            repair_kind: self.pending_repair.take(),
        })
    }
}
