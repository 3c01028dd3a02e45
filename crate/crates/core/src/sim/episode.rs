use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::rem::{EventHistory, RateModel, StatisticSpec, TypeSet};
use crate::sim::log::{EpisodeMetrics, LogRecord};
use crate::sim::operator::SyntheticOperator;
use crate::sim::protocol::{INSTRUCT, STATUS_QUERY};
use crate::sim::scenario::ScenarioConfig;
use crate::sim::session::{Session, IS_HUMAN};
use crate::trust::InferenceConfig;

fn default_baseline_l_alpha() -> f64 {
    0.9
}

/// Study condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    /// Every robot keeps a fixed autonomy level.
    BaselineSa {
        #[serde(default = "default_baseline_l_alpha")]
        l_alpha: f64,
    },
    /// Autonomy follows inferred trust, with phases and repair.
    TrustPreservedSa,
}

impl Condition {
    pub fn baseline() -> Self {
        Condition::BaselineSa {
            l_alpha: default_baseline_l_alpha(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Condition::BaselineSa { .. } => "baseline_sa",
            Condition::TrustPreservedSa => "trust_preserved_sa",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Condition::BaselineSa { l_alpha } if !(0.0..=1.0).contains(&l_alpha) => {
                Err(Error::invalid(format!("fixed L_alpha {l_alpha} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// When trust-preserving robots tell the human about the gas leak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShareOptions {
    /// Explain a refusal that protects the leak response.
    pub on_refusal: bool,
    /// Report the leak unprompted once the danger estimate reaches this
    /// value; `None` disables unprompted reports.
    pub threshold: Option<f64>,
}

impl Default for ShareOptions {
    fn default() -> Self {
        Self {
            on_refusal: true,
            threshold: Some(0.0),
        }
    }
}

/// Statistics of the operator-facing rate model: a common intercept, a
/// human-sender effect and the trust gate, both on queries and instructions.
pub fn default_specs() -> Vec<StatisticSpec> {
    let human_types = TypeSet::new([STATUS_QUERY.0, INSTRUCT.0]).expect("nonempty");
    vec![
        StatisticSpec::Intercept,
        StatisticSpec::SenderAttr {
            name: IS_HUMAN.to_string(),
            types: Some(human_types.clone()),
        },
        StatisticSpec::trust_gate(human_types),
    ]
}

/// Everything an episode needs besides the scenario, condition and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub model: RateModel,
    pub inference: InferenceConfig,
    pub controller: ControllerConfig,
    pub share: ShareOptions,
    /// Reported trust per robot, in [0, 1].
    pub priors: Vec<f64>,
}

impl Default for EpisodeSetup {
    fn default() -> Self {
        Self {
            model: RateModel::new(default_specs(), vec![-4.0, 1.0, -2.0], 1.0).expect("valid default model"),
            inference: InferenceConfig::default(),
            controller: ControllerConfig::default(),
            share: ShareOptions::default(),
            priors: vec![0.5; 2],
        }
    }
}

impl EpisodeSetup {
    pub fn validate(&self, n_robots: usize) -> Result<()> {
        self.inference.validate()?;
        self.controller.validate()?;
        if self.priors.len() != n_robots {
            return Err(Error::invalid(format!(
                "{} trust priors for {n_robots} robots",
                self.priors.len()
            )));
        }
        if self.priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("trust priors must lie in [0, 1]"));
        }
        if let Some(t) = self.share.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid("share threshold must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub log: Vec<LogRecord>,
    pub history: EventHistory,
    /// Operator's latent trust toward each robot when each event happened.
    pub event_trust: Vec<Vec<f64>>,
    pub metrics: EpisodeMetrics,
    pub final_trust: Vec<f64>,
}

/// Runs one episode against a synthetic operator until success, explosion
/// or the tick limit. The operator keeps its trust for later episodes.
pub fn run_episode(
    scenario: &ScenarioConfig,
    condition: Condition,
    setup: &EpisodeSetup,
    operator: &mut SyntheticOperator,
    seed: u64,
) -> Result<EpisodeOutcome> {
    let mut s = Session::new(scenario.clone(), condition, setup.clone(), seed)?;
    let mut event_trust = Vec::new();
    let note = |s: &Session, op: &SyntheticOperator, acc: &mut Vec<Vec<f64>>| {
        while acc.len() < s.history().len() {
            acc.push(op.trust_all().to_vec());
        }
    };
    loop {
        for cmd in operator.commands(s.world()) {
            let replies = s.submit(cmd)?;
            note(&s, operator, &mut event_trust);
            operator.observe_reply(cmd.robot(), &replies);
        }
        let shared = s.share_critical_states()?;
        note(&s, operator, &mut event_trust);
        operator.observe_messages(&shared);
        let before = s.windows_closed();
        let out = s.tick(None)?;
        for k in before..s.windows_closed() {
            s.push_record(LogRecord::Operator {
                k,
                trust: operator.trust_all().to_vec(),
                knows_leak: operator.knows_leak(),
            });
        }
        operator.observe_completions(s.world(), &out.completions);
        if out.finished {
            break;
        }
    }
    let metrics = s.metrics();
    let history = s.history().clone();
    Ok(EpisodeOutcome {
        log: s.into_log(),
        history,
        event_trust,
        metrics,
        final_trust: operator.trust_all().to_vec(),
    })
}
