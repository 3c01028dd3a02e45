use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rem::{
    window_log_likelihood, ActorId, AttributeSet, Dyad, EventHistory, LikelihoodMode, RateModel,
    RelationalEvent,
};
use crate::trust::posterior::{init_prior, TrustGrid, TrustPosterior};
use crate::trust::summary::{summarize, RiskMode, TrustSummary};

/// One receding-horizon interval (t_start, t_end].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub k: usize,
    pub t_start: f64,
    pub t_end: f64,
}

impl ObservationWindow {
    pub fn new(k: usize, t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_start < t_end) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::invalid(format!("window ({t_start}, {t_end}] is empty")));
        }
        Ok(Self { k, t_start, t_end })
    }

    pub fn events<'a>(&self, history: &'a EventHistory) -> &'a [RelationalEvent] {
        let lo = history.partition_after(self.t_start);
        let hi = history.partition_after(self.t_end);
        &history.events()[lo..hi]
    }
}

/// Window log-likelihood at each grid value of the dyad's trust, every other
/// attribute held at `attrs`.
pub fn grid_log_likelihoods(
    grid: &TrustGrid,
    window: &ObservationWindow,
    model: &RateModel,
    history: &EventHistory,
    attrs: &AttributeSet,
    dyad: Dyad,
    mode: LikelihoodMode,
) -> Result<Vec<f64>> {
    let mut a = attrs.clone();
    grid.points()
        .iter()
        .map(|&b| {
            a.set_trust(dyad, b)?;
            window_log_likelihood(model, history, &a, window.t_start, window.t_end, mode)
        })
        .collect()
}

/// One Bayes step of the receding-horizon filter for a single dyad.
pub fn update_posterior(
    prior: &TrustPosterior,
    window: &ObservationWindow,
    model: &RateModel,
    history: &EventHistory,
    attrs: &AttributeSet,
    dyad: Dyad,
    mode: LikelihoodMode,
) -> Result<TrustPosterior> {
    if !model.depends_on_trust() {
        return Ok(prior.clone());
    }
    if mode == LikelihoodMode::Ordinal && window.events(history).is_empty() {
        return Ok(prior.clone());
    }
    let ll = grid_log_likelihoods(prior.grid(), window, model, history, attrs, dyad, mode)?;
    prior.absorb(&ll)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub grid_points: usize,
    /// Pseudo-count of the prior built from a reported trust value.
    pub prior_kappa: f64,
    /// Window length in seconds.
    pub window: f64,
    pub mode: LikelihoodMode,
    pub risk: RiskMode,
    /// Tail level reported in telemetry.
    pub telemetry_gamma: f64,
    /// Tempering applied to the posterior before each window; 0 disables.
    pub forgetting: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            grid_points: crate::trust::DEFAULT_GRID_POINTS,
            prior_kappa: 5.0,
            window: 30.0,
            mode: LikelihoodMode::Temporal,
            risk: RiskMode::Expectation,
            telemetry_gamma: 0.2,
            forgetting: 0.0,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        TrustGrid::uniform(self.grid_points)?;
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err(Error::invalid("window length must be positive"));
        }
        if !(self.prior_kappa >= 0.0) || !self.prior_kappa.is_finite() {
            return Err(Error::invalid("prior_kappa must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.forgetting) {
            return Err(Error::invalid("forgetting must lie in [0, 1]"));
        }
        self.risk.validate()?;
        RiskMode::Cvar {
            gamma: self.telemetry_gamma,
        }
        .validate()
    }

    pub fn grid(&self) -> Result<TrustGrid> {
        TrustGrid::uniform(self.grid_points)
    }
}

/// Per-window telemetry line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustTelemetry {
    pub k: usize,
    pub dyad: (usize, usize),
    pub t_end: f64,
    pub mean: f64,
    pub var: f64,
    pub var_gamma: f64,
    pub cvar_gamma: f64,
    #[serde(rename = "L_beta")]
    pub l_beta: f64,
    pub posterior: Vec<f64>,
}

impl TrustTelemetry {
    fn new(k: usize, dyad: Dyad, t_end: f64, s: &TrustSummary, post: &TrustPosterior) -> Self {
        Self {
            k,
            dyad: (dyad.sender.0, dyad.receiver.0),
            t_end,
            mean: s.mean,
            var: s.var,
            var_gamma: s.value_at_risk,
            cvar_gamma: s.cvar,
            l_beta: s.level,
            posterior: post.probs(),
        }
    }
}

/// Independent trust posteriors for a set of dyads, advanced one window at a time.
#[derive(Debug, Clone)]
pub struct TrustTracker {
    config: InferenceConfig,
    model: RateModel,
    dyads: Vec<Dyad>,
    posteriors: Vec<TrustPosterior>,
    levels: Vec<f64>,
    k: usize,
    t_last: f64,
}

impl TrustTracker {
    /// `priors` pairs each tracked dyad with its reported trust, if any.
    pub fn new(
        config: InferenceConfig,
        model: RateModel,
        priors: &[(Dyad, Option<f64>)],
        t0: f64,
    ) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let mut dyads = Vec::with_capacity(priors.len());
        let mut posteriors = Vec::with_capacity(priors.len());
        let mut levels = Vec::with_capacity(priors.len());
        for &(d, r) in priors {
            if dyads.contains(&d) {
                return Err(Error::invalid(format!("dyad {d} tracked twice")));
            }
            let p = init_prior(r, &grid, config.prior_kappa)?;
            levels.push(summarize(&p, config.risk, config.telemetry_gamma)?.level);
            dyads.push(d);
            posteriors.push(p);
        }
        Ok(Self {
            config,
            model,
            dyads,
            posteriors,
            levels,
            k: 0,
            t_last: t0,
        })
    }

    pub fn config(&self) -> &InferenceConfig {
        &self.config
    }

    pub fn dyads(&self) -> &[Dyad] {
        &self.dyads
    }

    pub fn posterior(&self, dyad: Dyad) -> Option<&TrustPosterior> {
        self.index(dyad).map(|i| &self.posteriors[i])
    }

    /// Current L_beta for a tracked dyad.
    pub fn level(&self, dyad: Dyad) -> Option<f64> {
        self.index(dyad).map(|i| self.levels[i])
    }

    pub fn windows_done(&self) -> usize {
        self.k
    }

    pub fn last_window_end(&self) -> f64 {
        self.t_last
    }

    fn index(&self, dyad: Dyad) -> Option<usize> {
        self.dyads.iter().position(|d| *d == dyad)
    }

    /// Absorbs the window (last end, t_end]. Trust of dyads other than the one
    /// being updated is set to their level from the previous window.
    pub fn advance(
        &mut self,
        history: &EventHistory,
        attrs: &AttributeSet,
        t_end: f64,
    ) -> Result<Vec<TrustTelemetry>> {
        let window = ObservationWindow::new(self.k, self.t_last, t_end)?;
        let mut base = attrs.clone();
        for (d, l) in self.dyads.iter().zip(&self.levels) {
            base.set_trust(*d, *l)?;
        }
        let mut out = Vec::with_capacity(self.dyads.len());
        let mut next = Vec::with_capacity(self.dyads.len());
        for (d, prior) in self.dyads.iter().zip(&self.posteriors) {
            let prior = prior.tempered(self.config.forgetting)?;
            let post = update_posterior(&prior, &window, &self.model, history, &base, *d, self.config.mode)?;
            let s = summarize(&post, self.config.risk, self.config.telemetry_gamma)?;
            out.push(TrustTelemetry::new(window.k, *d, t_end, &s, &post));
            next.push((post, s.level));
        }
        for (i, (post, level)) in next.into_iter().enumerate() {
            self.posteriors[i] = post;
            self.levels[i] = level;
        }
        self.k += 1;
        self.t_last = t_end;
        Ok(out)
    }
}

/// Runs the tracker over a finished history in fixed windows from `t0` to `t_final`.
pub fn infer_offline(
    config: InferenceConfig,
    model: RateModel,
    priors: &[(Dyad, Option<f64>)],
    history: &EventHistory,
    attrs: &AttributeSet,
    t0: f64,
    t_final: f64,
) -> Result<Vec<TrustTelemetry>> {
    let step = config.window;
    let mut tracker = TrustTracker::new(config, model, priors, t0)?;
    let mut out = Vec::new();
    let mut t = t0;
    while t < t_final {
        t = (t + step).min(t_final);
        out.extend(tracker.advance(history, attrs, t)?);
    }
    Ok(out)
}

/// Convenience for the common human-to-robot layout.
pub fn human_robot_dyads(human: ActorId, robots: &[ActorId]) -> Result<Vec<Dyad>> {
    robots.iter().map(|r| Dyad::new(human, *r)).collect()
}
