//! Offline re-derivation of the trust telemetry recorded in an episode log.

use crate::error::{Error, Result};
use crate::rem::{ActorId, Dyad, EventHistory};
use crate::sim::log::{config_hash, LogHeader, LogRecord};
use crate::sim::protocol::EVENT_TYPES;
use crate::sim::session::base_attributes;
use crate::sim::world::HUMAN;
use crate::sim::Condition;
use crate::trust::{human_robot_dyads, infer_offline, InferenceConfig, TrustTelemetry};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub logged: Vec<TrustTelemetry>,
    pub replayed: Vec<TrustTelemetry>,
}

impl ReplayReport {
    /// Bitwise equality of every logged and replayed field.
    pub fn identical(&self) -> bool {
        let bits = |t: &TrustTelemetry| {
            let mut v = vec![t.mean, t.var, t.var_gamma, t.cvar_gamma, t.l_beta, t.t_end];
            v.extend(&t.posterior);
            (t.k, t.dyad, v.into_iter().map(f64::to_bits).collect::<Vec<_>>())
        };
        self.logged.len() == self.replayed.len()
            && self.logged.iter().zip(&self.replayed).all(|(a, b)| bits(a) == bits(b))
    }
}

/// Re-runs inference over the logged messages. `inference`, when given,
/// must hash to the same configuration as the log.
pub fn replay(records: &[LogRecord], inference: Option<&InferenceConfig>) -> Result<ReplayReport> {
    let Some(LogRecord::Header(header)) = records.first() else {
        return Err(Error::parse(1, "log must start with a header record"));
    };
    let header: &LogHeader = header;
    if !matches!(records.last(), Some(LogRecord::Metrics(_))) {
        return Err(Error::parse(records.len() + 1, "log truncated: no metrics record"));
    }
    let recorded = config_hash(&header.model, &header.inference)?;
    if recorded != header.config_hash {
        return Err(Error::Incompatible("header hash does not match its own settings".into()));
    }
    let inference = match inference {
        Some(cfg) => {
            let h = config_hash(&header.model, cfg)?;
            if h != header.config_hash {
                return Err(Error::Incompatible(format!(
                    "inference settings hash {h} differ from the logged {}",
                    header.config_hash
                )));
            }
            cfg.clone()
        }
        None => header.inference.clone(),
    };
    let n = header.scenario.n_robots;
    let mut history = EventHistory::new(n + 1, EVENT_TYPES.len())?;
    let mut logged = Vec::new();
    for r in records {
        match r {
            LogRecord::Message(m) => history.push(m.event(header.scenario.dt))?,
            LogRecord::Trust(t) => logged.push(t.clone()),
            _ => {}
        }
    }
    if header.condition != Condition::TrustPreservedSa {
        return Ok(ReplayReport {
            logged,
            replayed: Vec::new(),
        });
    }
    let robots: Vec<ActorId> = (1..=n).map(ActorId).collect();
    let dyads = human_robot_dyads(ActorId(HUMAN), &robots)?;
    let priors: Vec<(Dyad, Option<f64>)> = dyads.iter().zip(&header.priors).map(|(d, p)| (*d, Some(*p))).collect();
    let t_final = logged.iter().map(|t| t.t_end).fold(0.0, f64::max);
    let replayed = if logged.is_empty() {
        Vec::new()
    } else {
        infer_offline(inference, header.model.clone(), &priors, &history, &base_attributes(n)?, 0.0, t_final)?
    };
    Ok(ReplayReport { logged, replayed })
}
