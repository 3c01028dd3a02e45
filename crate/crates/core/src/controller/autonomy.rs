use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::templates::TemplateId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Drop in L_beta across the last two windows that counts as a violation.
    pub drop_threshold: f64,
    pub trust_floor: f64,
    pub revolutionary_min_windows: usize,
    /// Upper bound on L_alpha while revolutionary.
    pub revolutionary_cap: f64,
    pub map_gain: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            drop_threshold: 0.15,
            trust_floor: 0.3,
            revolutionary_min_windows: 3,
            revolutionary_cap: 0.5,
            map_gain: 1.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.drop_threshold > 0.0 && self.drop_threshold < 1.0) {
            return Err(Error::invalid("drop_threshold must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.trust_floor) {
            return Err(Error::invalid("trust_floor must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.revolutionary_cap) {
            return Err(Error::invalid("revolutionary_cap must lie in [0, 1]"));
        }
        if !(self.map_gain >= 0.0) || !self.map_gain.is_finite() {
            return Err(Error::invalid("map_gain must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Evolutionary,
    Revolutionary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCause {
    CounterCommand,
    PerceivedUnethical,
    TeamingOnset,
}

impl ViolationCause {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCause::CounterCommand => "counter_command",
            ViolationCause::PerceivedUnethical => "perceived_unethical",
            ViolationCause::TeamingOnset => "teaming_onset",
        }
    }
}

impl fmt::Display for ViolationCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViolationCause {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ViolationCause::CounterCommand,
            ViolationCause::PerceivedUnethical,
            ViolationCause::TeamingOnset,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| Error::invalid(format!("unknown violation cause {s:?}")))
    }
}

/// Autonomy of one robot. `alpha` is always derived from `l_alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutonomyState {
    l_alpha: f64,
    pub phase: Phase,
    pub phase_entered_at: usize,
    pub last_violation_cause: Option<ViolationCause>,
}

impl AutonomyState {
    pub fn new(l_alpha: f64) -> Result<Self> {
        let mut s = Self {
            l_alpha: 0.0,
            phase: Phase::Evolutionary,
            phase_entered_at: 0,
            last_violation_cause: None,
        };
        s.set_l_alpha(l_alpha)?;
        Ok(s)
    }

    pub fn l_alpha(&self) -> f64 {
        self.l_alpha
    }

    /// Probability of obeying a conflicting instruction.
    pub fn alpha(&self) -> f64 {
        1.0 - self.l_alpha
    }

    pub fn set_l_alpha(&mut self, l_alpha: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&l_alpha) {
            return Err(Error::invalid(format!("autonomy level {l_alpha} outside [0, 1]")));
        }
        self.l_alpha = l_alpha;
        Ok(())
    }
}

/// Autonomy level proportional to trust, capped while revolutionary.
pub fn coordinate_autonomy(l_beta: f64, phase: Phase, config: &ControllerConfig) -> f64 {
    let l = (config.map_gain * l_beta).clamp(0.0, 1.0);
    match phase {
        Phase::Evolutionary => l,
        Phase::Revolutionary => l.min(config.revolutionary_cap),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDecision {
    pub phase: Phase,
    /// Set when a violation fired at this window.
    pub cause: Option<ViolationCause>,
    pub entered_at: usize,
}

/// Phase transition after observing `series`, one L_beta per window since
/// teaming began; the last entry is the current window.
pub fn detect_inflection(series: &[f64], state: &AutonomyState, config: &ControllerConfig) -> Result<PhaseDecision> {
    let Some(&current) = series.last() else {
        return Err(Error::invalid("empty trust series"));
    };
    let index = series.len() - 1;
    let m = config.revolutionary_min_windows;
    let trigger = if index < m {
        Some(ViolationCause::TeamingOnset)
    } else {
        let n = series.len();
        let recent_peak = series[n.saturating_sub(3)..n - 1]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if recent_peak - current > config.drop_threshold || current < config.trust_floor {
            Some(ViolationCause::CounterCommand)
        } else {
            None
        }
    };
    if let Some(cause) = trigger {
        let entered_at = if state.phase == Phase::Revolutionary && state.last_violation_cause == Some(cause) {
            state.phase_entered_at
        } else {
            index
        };
        return Ok(PhaseDecision {
            phase: Phase::Revolutionary,
            cause: Some(cause),
            entered_at,
        });
    }
    if state.phase == Phase::Revolutionary {
        let settled = index >= state.phase_entered_at + m
            && series.len() > m
            && series[series.len() - 1 - m..].windows(2).all(|w| w[1] >= w[0]);
        if !settled {
            return Ok(PhaseDecision {
                phase: Phase::Revolutionary,
                cause: None,
                entered_at: state.phase_entered_at,
            });
        }
    } else {
        return Ok(PhaseDecision {
            phase: Phase::Evolutionary,
            cause: None,
            entered_at: state.phase_entered_at,
        });
    }
    Ok(PhaseDecision {
        phase: Phase::Evolutionary,
        cause: None,
        entered_at: index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compliance {
    Obey,
    Refuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceDecision {
    pub outcome: Compliance,
    pub template: TemplateId,
}

/// Resolves a genuine conflict: obey with probability 1 - L_alpha, using a
/// generator seeded only by `seed`.
pub fn decide_compliance(l_alpha: f64, seed: u64) -> Result<ComplianceDecision> {
    if !(0.0..=1.0).contains(&l_alpha) {
        return Err(Error::invalid(format!("autonomy level {l_alpha} outside [0, 1]")));
    }
    let u: f64 = ChaCha8Rng::seed_from_u64(seed).random();
    Ok(if u < 1.0 - l_alpha {
        ComplianceDecision {
            outcome: Compliance::Obey,
            template: TemplateId::ObeyReply,
        }
    } else {
        ComplianceDecision {
            outcome: Compliance::Refuse,
            template: TemplateId::RefuseReply,
        }
    })
}
