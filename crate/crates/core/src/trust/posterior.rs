use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rem::likelihood::log_sum_exp;

pub const DEFAULT_GRID_POINTS: usize = 51;

/// Support points for the trust value, strictly increasing within [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TrustGrid(Vec<f64>);

impl TrustGrid {
    /// `n` equispaced points from 0 to 1 inclusive.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("a trust grid needs at least two points"));
        }
        let last = (n - 1) as f64;
        Ok(Self((0..n).map(|i| i as f64 / last).collect()))
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("empty trust grid"));
        }
        if points.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("trust grid points must lie in [0, 1]"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("trust grid points must be strictly increasing"));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for TrustGrid {
    fn default() -> Self {
        Self::uniform(DEFAULT_GRID_POINTS).expect("default grid")
    }
}

impl TryFrom<Vec<f64>> for TrustGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_points(v)
    }
}

impl From<TrustGrid> for Vec<f64> {
    fn from(g: TrustGrid) -> Self {
        g.0
    }
}

/// Log-probabilities over a trust grid, kept normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustPosterior {
    grid: TrustGrid,
    log_post: Vec<f64>,
}

impl TrustPosterior {
    pub fn uniform(grid: TrustGrid) -> Self {
        let lp = -(grid.len() as f64).ln();
        let log_post = vec![lp; grid.len()];
        Self { grid, log_post }
    }

    /// Builds a posterior from unnormalized log weights.
    pub fn from_log_weights(grid: TrustGrid, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() != grid.len() {
            return Err(Error::invalid("log weights do not match the grid"));
        }
        let mut p = Self {
            grid,
            log_post: log_weights,
        };
        p.normalize()?;
        Ok(p)
    }

    pub fn grid(&self) -> &TrustGrid {
        &self.grid
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_post
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_post.iter().map(|l| l.exp()).collect()
    }

    fn normalize(&mut self) -> Result<()> {
        if self.log_post.iter().any(|l| l.is_nan()) {
            return Err(Error::InvalidState("trust posterior contains NaN".into()));
        }
        let z = log_sum_exp(&self.log_post);
        if !z.is_finite() {
            return Err(Error::InvalidState("trust posterior has no mass".into()));
        }
        for l in &mut self.log_post {
            *l -= z;
        }
        Ok(())
    }

    /// Bayes step: adds one log-likelihood per grid point and renormalizes.
    /// Likelihoods that are constant across the grid leave the posterior
    /// untouched bit for bit.
    pub fn absorb(&self, log_likelihoods: &[f64]) -> Result<Self> {
        if log_likelihoods.len() != self.grid.len() {
            return Err(Error::invalid("one log-likelihood per grid point required"));
        }
        if log_likelihoods.iter().any(|l| l.is_nan()) {
            return Err(Error::invalid("NaN window likelihood"));
        }
        let top = log_likelihoods
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::InvalidState("window has zero likelihood everywhere".into()));
        }
        if log_likelihoods.iter().all(|l| *l == top) {
            return Ok(self.clone());
        }
        let log_post = self
            .log_post
            .iter()
            .zip(log_likelihoods)
            .map(|(p, l)| p + (l - top))
            .collect();
        let mut next = Self {
            grid: self.grid.clone(),
            log_post,
        };
        next.normalize()?;
        Ok(next)
    }

    /// Power-tempers toward uniform: pi^(1 - forgetting), renormalized.
    pub fn tempered(&self, forgetting: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&forgetting) {
            return Err(Error::invalid("forgetting factor must lie in [0, 1]"));
        }
        if forgetting == 0.0 {
            return Ok(self.clone());
        }
        if forgetting == 1.0 {
            return Ok(Self::uniform(self.grid.clone()));
        }
        let keep = 1.0 - forgetting;
        let log_post = self
            .log_post
            .iter()
            .map(|l| if l.is_finite() { l * keep } else { *l })
            .collect();
        Self::from_log_weights(self.grid.clone(), log_post)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs().iter().sum()
    }
}

/// Prior over trust. Without a report the prior is uniform; otherwise a
/// Beta(1 + kappa r, 1 + kappa (1 - r)) shape (mode at r) evaluated on the grid.
pub fn init_prior(reported: Option<f64>, grid: &TrustGrid, kappa: f64) -> Result<TrustPosterior> {
    let Some(r) = reported else {
        return Ok(TrustPosterior::uniform(grid.clone()));
    };
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("reported trust {r} outside [0, 1]")));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::invalid("prior pseudo-count must be finite and >= 0"));
    }
    let a = kappa * r;
    let b = kappa * (1.0 - r);
    let term = |exponent: f64, x: f64| {
        if exponent == 0.0 {
            0.0
        } else {
            exponent * x.ln()
        }
    };
    let log_weights = grid
        .points()
        .iter()
        .map(|&x| term(a, x) + term(b, 1.0 - x))
        .collect();
    TrustPosterior::from_log_weights(grid.clone(), log_weights)
}
