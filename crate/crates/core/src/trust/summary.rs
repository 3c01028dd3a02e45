use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trust::posterior::TrustPosterior;

/// How a posterior is collapsed to a single trust level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskMode {
    #[default]
    Expectation,
    Var { gamma: f64 },
    Cvar { gamma: f64 },
    MeanVariance { rho: f64 },
}

impl RiskMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskMode::Expectation => Ok(()),
            RiskMode::Var { gamma } | RiskMode::Cvar { gamma } => {
                if gamma > 0.0 && gamma <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("risk level {gamma} outside (0, 1]")))
                }
            }
            RiskMode::MeanVariance { rho } => {
                if rho.is_finite() && rho >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("mean-variance weight must be finite and >= 0"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustSummary {
    pub mean: f64,
    pub var: f64,
    /// Lower-tail value at risk at the telemetry level.
    pub value_at_risk: f64,
    pub cvar: f64,
    pub level: f64,
}

// Mass below this is treated as already covered when walking the CDF.
const CDF_SLACK: f64 = 1e-12;

fn moments(points: &[f64], probs: &[f64]) -> (f64, f64) {
    let mean: f64 = points.iter().zip(probs).map(|(b, p)| b * p).sum();
    let var: f64 = points
        .iter()
        .zip(probs)
        .map(|(b, p)| p * (b - mean) * (b - mean))
        .sum();
    (mean, var.max(0.0))
}

/// Lower gamma-quantile: the smallest support point whose CDF reaches gamma.
fn lower_quantile(points: &[f64], probs: &[f64], gamma: f64) -> f64 {
    let mut cdf = 0.0;
    for (b, p) in points.iter().zip(probs) {
        cdf += p;
        if cdf >= gamma - CDF_SLACK {
            return *b;
        }
    }
    *points.last().expect("nonempty grid")
}

/// Mean of the worst `gamma` probability mass, splitting the boundary atom.
fn lower_tail_mean(points: &[f64], probs: &[f64], gamma: f64, mean: f64) -> f64 {
    if gamma >= 1.0 {
        return mean;
    }
    let mut left = gamma;
    let mut acc = 0.0;
    for (b, p) in points.iter().zip(probs) {
        let take = p.min(left);
        acc += take * b;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    acc / (gamma - left.max(0.0))
}

fn check(points: &[f64], probs: &[f64]) -> Result<()> {
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) || points.len() != probs.len() || points.is_empty() {
        return Err(Error::InvalidState("degenerate trust posterior".into()));
    }
    Ok(())
}

/// Summary of a discrete distribution on [0, 1]. `tail_gamma` sets the level
/// reported in the VaR/CVaR fields; `mode` picks the level returned as L_beta.
pub fn summarize_distribution(
    points: &[f64],
    probs: &[f64],
    mode: RiskMode,
    tail_gamma: f64,
) -> Result<TrustSummary> {
    check(points, probs)?;
    mode.validate()?;
    RiskMode::Cvar { gamma: tail_gamma }.validate()?;
    let (mean, var) = moments(points, probs);
    let value_at_risk = lower_quantile(points, probs, tail_gamma);
    let cvar = lower_tail_mean(points, probs, tail_gamma, mean);
    let level = match mode {
        RiskMode::Expectation => mean,
        RiskMode::Var { gamma } => lower_quantile(points, probs, gamma),
        RiskMode::Cvar { gamma } => lower_tail_mean(points, probs, gamma, mean),
        RiskMode::MeanVariance { rho } => mean - rho * var,
    };
    Ok(TrustSummary {
        mean,
        var,
        value_at_risk,
        cvar,
        level: level.clamp(0.0, 1.0),
    })
}

pub fn summarize(posterior: &TrustPosterior, mode: RiskMode, tail_gamma: f64) -> Result<TrustSummary> {
    summarize_distribution(posterior.grid().points(), &posterior.probs(), mode, tail_gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust::posterior::{init_prior, TrustGrid};

    #[test]
    fn point_mass_expectation() {
        let s = summarize_distribution(&[0.3, 0.7, 0.9], &[0.0, 1.0, 0.0], RiskMode::Expectation, 0.2)
            .unwrap();
        assert_eq!(s.level, 0.7);
        assert_eq!(s.var, 0.0);
        assert!((s.cvar - 0.7).abs() < 1e-12);
    }

    #[test]
    fn symmetric_three_points() {
        let third = 1.0 / 3.0;
        let s = summarize_distribution(&[0.0, 0.5, 1.0], &[third; 3], RiskMode::Expectation, 0.2)
            .unwrap();
        assert!((s.level - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cvar_of_worst_forty_percent() {
        let pts = [0.2, 0.4, 0.6, 0.8, 1.0];
        let s = summarize_distribution(&pts, &[0.2; 5], RiskMode::Cvar { gamma: 0.4 }, 0.4).unwrap();
        assert!((s.level - 0.3).abs() < 1e-12);
        assert_eq!(s.value_at_risk, 0.4);
        // boundary atom split: 0.3 of mass is 0.2 at 0.2 plus 0.1 at 0.4
        let s = summarize_distribution(&pts, &[0.2; 5], RiskMode::Cvar { gamma: 0.3 }, 0.3).unwrap();
        assert!((s.level - (0.2 * 0.2 + 0.1 * 0.4) / 0.3).abs() < 1e-12);
    }

    #[test]
    fn uniform_prior_has_mean_one_half() {
        let p = init_prior(None, &TrustGrid::default(), 5.0).unwrap();
        let s = summarize(&p, RiskMode::Expectation, 0.2).unwrap();
        assert!((s.mean - 0.5).abs() < 1e-12);
        let full = summarize(&p, RiskMode::Cvar { gamma: 1.0 }, 1.0).unwrap();
        assert_eq!(full.cvar, full.mean);
    }

    #[test]
    fn mean_variance_penalizes_spread() {
        let s = summarize_distribution(&[0.0, 1.0], &[0.5, 0.5], RiskMode::MeanVariance { rho: 1.0 }, 0.2)
            .unwrap();
        assert!((s.level - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(summarize_distribution(&[0.0, 1.0], &[0.0, 0.0], RiskMode::Expectation, 0.2).is_err());
        assert!(summarize_distribution(&[0.0, 1.0], &[0.5, 0.5], RiskMode::Var { gamma: 0.0 }, 0.2).is_err());
        assert!(summarize_distribution(&[0.0, 1.0], &[0.5, 0.5], RiskMode::Expectation, 1.5).is_err());
    }
}
