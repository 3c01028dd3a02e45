//! Offline maximum-likelihood grounding of the rate coefficients.
//!
//! The objective is the penalized log-likelihood `l(theta) - ridge/2 |theta|^2`.
//! Gradient and Hessian come from central finite differences against the
//! compiled likelihood kernel, so there is a single source of truth for the
//! model. Newton steps are backtracked until the objective improves; when the
//! Hessian is not negative definite a gradient-ascent step is used instead.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rem::{AttributeTimeline, CompiledEvents, EventHistory, LikelihoodMode, RateModel, StatisticSpec};

/// Relative finite-difference step used by the optimizer.
pub const FD_STEP: f64 = 1e-5;
/// Coarser step of the independent gradient check.
pub const CHECK_STEP: f64 = 1e-3;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub mode: LikelihoodMode,
    pub ridge: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub step_shrink: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: LikelihoodMode::Ordinal,
            ridge: 1e-3,
            grad_tol: 1e-8,
            max_iters: 100,
            step_shrink: 0.5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0) {
            return Err(Error::invalid("ridge must be >= 0"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid("grad_tol must be > 0"));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::invalid("step_shrink must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_star: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub std_errors: Option<Vec<f64>>,
    pub log_lik: f64,
    /// Penalized objective after each accepted iteration, starting at theta = 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

/// Penalized log-likelihood over a compiled history.
#[derive(Debug, Clone)]
pub struct Objective {
    compiled: CompiledEvents,
    mode: LikelihoodMode,
    ridge: f64,
}

impl Objective {
    pub fn new(
        history: &EventHistory,
        attrs: &(impl AttributeTimeline + ?Sized),
        specs: &[StatisticSpec],
        mode: LikelihoodMode,
        ridge: f64,
    ) -> Result<Self> {
        RateModel::uniform(specs.to_vec())?.validate_for(history)?;
        let start = history.events().first().map_or(0.0, |e| e.time.min(0.0));
        let compiled = CompiledEvents::compile(specs, history, attrs, 0..history.len(), start, None)?;
        Ok(Self {
            compiled,
            mode,
            ridge,
        })
    }

    pub fn dim(&self) -> usize {
        self.compiled.n_stats()
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.compiled.log_likelihood(theta, 1.0, self.mode)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let penalty: f64 = theta.iter().map(|t| t * t).sum::<f64>() * self.ridge / 2.0;
        self.log_likelihood(theta) - penalty
    }

    /// True when some candidate's predictor reaches the clamp at `theta`.
    pub fn clamped(&self, theta: &[f64]) -> bool {
        self.compiled.max_abs_predictor(theta) >= crate::rem::ETA_CLAMP
    }

    /// Central-difference gradient with step `rel * max(1, |theta_p|)`.
    pub fn gradient(&self, theta: &[f64], rel: f64) -> Vec<f64> {
        let mut x = theta.to_vec();
        (0..theta.len())
            .map(|p| {
                let h = rel * theta[p].abs().max(1.0);
                x[p] = theta[p] + h;
                let up = self.value(&x);
                x[p] = theta[p] - h;
                let down = self.value(&x);
                x[p] = theta[p];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Central-difference Hessian.
    pub fn hessian(&self, theta: &[f64], rel: f64) -> DMatrix<f64> {
        let n = theta.len();
        let steps: Vec<f64> = theta.iter().map(|t| rel * t.abs().max(1.0)).collect();
        let center = self.value(theta);
        let mut x = theta.to_vec();
        let mut h = DMatrix::zeros(n, n);
        for p in 0..n {
            x[p] = theta[p] + steps[p];
            let up = self.value(&x);
            x[p] = theta[p] - steps[p];
            let down = self.value(&x);
            x[p] = theta[p];
            h[(p, p)] = (up - 2.0 * center + down) / (steps[p] * steps[p]);
            for q in 0..p {
                let mut f = |dp: f64, dq: f64| {
                    x[p] = theta[p] + dp * steps[p];
                    x[q] = theta[q] + dq * steps[q];
                    let v = self.value(&x);
                    x[p] = theta[p];
                    x[q] = theta[q];
                    v
                };
                let v = (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0))
                    / (4.0 * steps[p] * steps[q]);
                h[(p, q)] = v;
                h[(q, p)] = v;
            }
        }
        h
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton-Raphson maximization of the penalized log-likelihood from theta = 0.
pub fn fit_mle(
    history: &EventHistory,
    attrs: &(impl AttributeTimeline + ?Sized),
    specs: &[StatisticSpec],
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    if history.len() < specs.len() || history.is_empty() {
        return Err(Error::invalid(format!(
            "insufficient events: {} events for {} statistics",
            history.len(),
            specs.len()
        )));
    }
    let objective = Objective::new(history, attrs, specs, config.mode, config.ridge)?;
    fit_objective(&objective, config)
}

pub fn fit_objective(objective: &Objective, config: &FitConfig) -> Result<FitResult> {
    let dim = objective.dim();
    let mut theta = vec![0.0; dim];
    let mut value = objective.value(&theta);
    if !value.is_finite() {
        return Err(Error::invalid("objective is not finite at theta = 0"));
    }
    let mut trace = vec![value];
    let mut grad = objective.gradient(&theta, FD_STEP);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        // Relative tolerance: the finite-difference noise floor scales with |objective|.
        if inf_norm(&grad) <= config.grad_tol * value.abs().max(1.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let hess = objective.hessian(&theta, FD_STEP);
        let g = DVector::from_column_slice(&grad);
        let direction = match (-hess).cholesky() {
            Some(chol) => chol.solve(&g),
            None => g.clone() / g.norm().max(1.0),
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(direction.iter())
                .map(|(t, d)| t + step * d)
                .collect();
            let v = objective.value(&candidate);
            if v.is_finite() && v > value {
                accepted = Some((candidate, v));
                break;
            }
            step *= config.step_shrink;
        }
        match accepted {
            Some((t, v)) => {
                theta = t;
                value = v;
                trace.push(v);
                grad = objective.gradient(&theta, FD_STEP);
            }
            None => {
                // no ascent left along the step
                converged = inf_norm(&grad) <= config.grad_tol * value.abs().max(1.0);
                break;
            }
        }
    }
    if !converged && iterations < config.max_iters {
        converged = inf_norm(&grad) <= config.grad_tol * value.abs().max(1.0);
    }

    let hess = objective.hessian(&theta, FD_STEP);
    let std_errors = (-hess)
        .try_inverse()
        .map(|cov| (0..dim).map(|p| cov[(p, p)]).collect::<Vec<_>>())
        .filter(|d| d.iter().all(|v| v.is_finite() && *v > 0.0))
        .map(|d| d.into_iter().map(f64::sqrt).collect());

    Ok(FitResult {
        final_grad_norm: inf_norm(&grad),
        log_lik: objective.log_likelihood(&theta),
        theta_star: theta,
        converged,
        iterations,
        std_errors,
        trace,
    })
}

/// Outcome of comparing the optimizer's gradient with an independent one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_abs_discrepancy: f64,
    /// False when the predictor clamp is active near theta; the likelihood is
    /// not smooth there and the discrepancy is informational only.
    pub trusted: bool,
}

/// Compares the optimizer's central-difference gradient with a second
/// central difference at a coarser step.
pub fn check_gradient(objective: &Objective, theta: &[f64]) -> Result<GradientCheck> {
    if theta.len() != objective.dim() || theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("theta must be finite with one entry per statistic"));
    }
    let fine = objective.gradient(theta, FD_STEP);
    let coarse = objective.gradient(theta, CHECK_STEP);
    let max_abs_discrepancy = fine
        .iter()
        .zip(&coarse)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let widened: Vec<f64> = theta.iter().map(|t| t + CHECK_STEP * t.abs().max(1.0)).collect();
    let trusted = !objective.clamped(theta) && !objective.clamped(&widened);
    Ok(GradientCheck {
        max_abs_discrepancy,
        trusted,
    })
}
