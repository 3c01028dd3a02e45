use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::estimation::FitConfig;
use crate::rem::{LikelihoodMode, RateModel, StatisticSpec};
use crate::sim::{default_specs, Condition, OperatorParams, ScenarioParams, ShareOptions};
use crate::trust::InferenceConfig;

/// Rate model statistics and, optionally, fixed coefficients. Without
/// coefficients they are fitted from a grounding run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub specs: Vec<StatisticSpec>,
    pub theta: Option<Vec<f64>>,
    pub baseline: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            specs: default_specs(),
            theta: None,
            baseline: 1.0,
        }
    }
}

impl ModelSection {
    /// The configured model, with zero coefficients when none are given.
    pub fn model(&self) -> Result<RateModel> {
        let theta = self.theta.clone().unwrap_or_else(|| vec![0.0; self.specs.len()]);
        RateModel::new(self.specs.clone(), theta, self.baseline)
    }
}

fn default_fit() -> FitConfig {
    FitConfig {
        mode: LikelihoodMode::Temporal,
        ..FitConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n_trials: usize,
    /// Seed of the first trial; trial i uses `seed + i` unless `seeds` is set.
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub conditions: Vec<Condition>,
    /// Practice sessions (one per fixed level each) pooled for the grounding fit.
    pub grounding_sessions: usize,
    /// Fixed autonomy levels of the per-trial practice episodes.
    pub practice_levels: Vec<f64>,
    pub fit: FitConfig,
    pub share: ShareOptions,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_trials: 200,
            seed: 0,
            seeds: None,
            conditions: vec![Condition::baseline(), Condition::TrustPreservedSa],
            grounding_sessions: 20,
            practice_levels: vec![0.9, 0.1],
            fit: default_fit(),
            share: ShareOptions::default(),
            workers: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn trial_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.n_trials as u64).map(|i| self.seed.wrapping_add(i)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trial_seeds().is_empty() {
            return Err(Error::invalid("an experiment needs at least one trial"));
        }
        if self.conditions.is_empty() {
            return Err(Error::invalid("an experiment needs at least one condition"));
        }
        for c in &self.conditions {
            c.validate()?;
        }
        if self.practice_levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::invalid("practice levels must lie in [0, 1]"));
        }
        self.fit.validate()
    }
}

/// Whole-pipeline configuration, one TOML document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub model: ModelSection,
    pub inference: InferenceConfig,
    pub controller: ControllerConfig,
    pub scenario: ScenarioParams,
    pub operator: OperatorParams,
    pub experiment: ExperimentSpec,
}

impl HarnessConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| {
            let line = e
                .span()
                .map_or(1, |s| src[..s.start.min(src.len())].matches('\n').count() + 1);
            Error::parse(line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.model()?;
        self.inference.validate()?;
        self.controller.validate()?;
        self.scenario.validate()?;
        self.operator.validate()?;
        self.experiment.validate()
    }
}
