//! Practice-phase grounding: fixed-autonomy episodes produce the event
//! history the rate coefficients are fitted on, and the operator's trust
//! after practice stands in for the self-reported prior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_mle, FitResult};
use crate::harness::config::HarnessConfig;
use crate::rem::{ActorId, AttributeSet, Dyad, EventHistory, RateModel};
use crate::sim::session::{base_attributes, compliance_seed};
use crate::sim::world::HUMAN;
use crate::sim::{generate_scenario, run_episode, Condition, EpisodeSetup, SyntheticOperator};

/// Salt separating practice scenarios from the evaluated ones.
const PRACTICE_SALT: u64 = 0x7072_6163_7469_6365;
const GROUNDING_SALT: u64 = 0x6772_6f75_6e64_696e;

/// Pooled practice data: events with the operator's trust at each event.
#[derive(Debug, Clone)]
pub struct PracticeData {
    pub history: EventHistory,
    pub attrs: Vec<AttributeSet>,
    /// End of the last appended episode on the pooled clock.
    pub end: f64,
}

impl PracticeData {
    pub fn new(n_robots: usize, n_types: usize) -> Result<Self> {
        Ok(Self {
            history: EventHistory::new(n_robots + 1, n_types)?,
            attrs: Vec::new(),
            end: 0.0,
        })
    }

    /// Appends an episode after the current end of the history.
    pub fn append(&mut self, history: &EventHistory, event_trust: &[Vec<f64>], duration: f64) -> Result<()> {
        let offset = self.end;
        let base = base_attributes(self.history.n_actors() - 1)?;
        for (e, trust) in history.events().iter().zip(event_trust) {
            let mut e = *e;
            e.time += offset;
            self.history.push(e)?;
            let mut a = base.clone();
            for (r, b) in trust.iter().enumerate() {
                a.set_trust(Dyad::new(ActorId(HUMAN), ActorId(r + 1))?, *b)?;
            }
            self.attrs.push(a);
        }
        self.end = offset + duration;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grounding {
    pub model: RateModel,
    /// Present when the coefficients were fitted rather than configured.
    pub fit: Option<FitResult>,
    pub n_events: usize,
}

/// Seeds of practice episode `i` of a trial (or of the grounding run).
pub fn practice_seed(seed: u64, i: usize) -> u64 {
    compliance_seed(seed ^ PRACTICE_SALT, 0, i)
}

/// Runs the fixed-level practice episodes against `operator`, which keeps
/// the trust it ends with.
pub fn practice(
    cfg: &HarnessConfig,
    operator: &mut SyntheticOperator,
    seed: u64,
    data: Option<&mut PracticeData>,
) -> Result<()> {
    let setup = setup_from(cfg, None);
    let mut data = data;
    for (i, &level) in cfg.experiment.practice_levels.iter().enumerate() {
        let s = practice_seed(seed, i);
        let scenario = generate_scenario(s, &cfg.scenario)?;
        let out = run_episode(&scenario, Condition::BaselineSa { l_alpha: level }, &setup, operator, s)?;
        if let Some(d) = data.as_deref_mut() {
            d.append(&out.history, &out.event_trust, out.metrics.duration)?;
        }
    }
    Ok(())
}

/// Episode settings for a trial given grounded coefficients.
pub fn setup_from(cfg: &HarnessConfig, model: Option<&RateModel>) -> EpisodeSetup {
    EpisodeSetup {
        model: match model {
            Some(m) => m.clone(),
            None => cfg.model.model().expect("validated model section"),
        },
        inference: cfg.inference.clone(),
        controller: cfg.controller.clone(),
        share: cfg.experiment.share.clone(),
        priors: vec![cfg.operator.initial_trust; cfg.scenario.n_robots],
    }
}

/// Fits the coefficients on pooled practice sessions, unless the config fixes them.
pub fn grounding_run(cfg: &HarnessConfig) -> Result<Grounding> {
    if cfg.model.theta.is_some() {
        return Ok(Grounding {
            model: cfg.model.model()?,
            fit: None,
            n_events: 0,
        });
    }
    let n = cfg.scenario.n_robots;
    let mut data = PracticeData::new(n, crate::sim::protocol::EVENT_TYPES.len())?;
    // one fresh operator per practice pair, like separate participants
    for e in 0..cfg.experiment.grounding_sessions {
        let seed = compliance_seed(cfg.experiment.seed ^ GROUNDING_SALT, 0, e);
        let mut operator = SyntheticOperator::new(cfg.operator.clone(), n, seed)?;
        practice(cfg, &mut operator, seed, Some(&mut data))?;
    }
    if data.history.is_empty() {
        return Err(Error::invalid("insufficient events: grounding produced no events"));
    }
    let fit = fit_mle(&data.history, &data.attrs, &cfg.model.specs, &cfg.experiment.fit)?;
    // the fit is done at unit baseline; the intercept carries the scale
    let model = RateModel::new(cfg.model.specs.clone(), fit.theta_star.clone(), 1.0)?;
    Ok(Grounding {
        model,
        n_events: data.history.len(),
        fit: Some(fit),
    })
}
