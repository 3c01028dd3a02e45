//! Paired-seed A/B experiments: every trial runs the same scenario and the
//! same practiced operator under each condition.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::HarnessConfig;
use crate::harness::grounding::{practice, setup_from, Grounding};
use crate::harness::stats::{mean_std, sign_test, SignTest};
use crate::rem::RateModel;
use crate::sim::{generate_scenario, run_episode, Condition, EpisodeOutcome, LogRecord, SyntheticOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub condition: String,
    pub success: bool,
    pub exploded: bool,
    pub duration: f64,
    pub n_commands: usize,
    pub conflicts: usize,
    pub refusals: usize,
    pub repairs: usize,
    /// Self-reported trust after practice, per robot.
    pub reported_trust: Vec<f64>,
    pub final_trust: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub n_trials: usize,
    pub success_rate: f64,
    /// Over successful trials only.
    pub duration_mean: Option<f64>,
    pub duration_std: Option<f64>,
    pub commands_mean: f64,
    pub commands_std: f64,
}

/// Sign test of `a` against `b`; `positive` counts pairs where `a` is larger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub metric: String,
    pub a: String,
    pub b: String,
    #[serde(flatten)]
    pub test: SignTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingSummary {
    pub theta: Vec<f64>,
    pub converged: Option<bool>,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub grounding: GroundingSummary,
    pub summaries: Vec<ConditionSummary>,
    pub comparisons: Vec<PairedComparison>,
    pub rows: Vec<TrialRow>,
}

#[derive(Debug, Clone)]
pub struct TrialLog {
    pub seed: u64,
    pub condition: Condition,
    pub records: Vec<LogRecord>,
}

#[derive(Debug, Clone)]
pub struct CompareRun {
    pub table: MetricsTable,
    pub logs: Vec<TrialLog>,
}

/// One trial: practice with a fresh operator, then each condition against
/// a copy of the practiced operator.
pub fn run_trial(cfg: &HarnessConfig, model: &RateModel, seed: u64) -> Result<Vec<(Condition, Vec<f64>, EpisodeOutcome)>> {
    let n = cfg.scenario.n_robots;
    let mut operator = SyntheticOperator::new(cfg.operator.clone(), n, seed)?;
    practice(cfg, &mut operator, seed, None)?;
    let reported: Vec<f64> = (1..=n).map(|r| operator.reported_trust(r)).collect();
    let scenario = generate_scenario(seed, &cfg.scenario)?;
    let setup = crate::sim::EpisodeSetup {
        priors: reported.clone(),
        ..setup_from(cfg, Some(model))
    };
    cfg.experiment
        .conditions
        .iter()
        .map(|&c| {
            let mut op = operator.clone();
            run_episode(&scenario, c, &setup, &mut op, seed).map(|o| (c, reported.clone(), o))
        })
        .collect()
}

fn workers(cfg: &HarnessConfig, n: usize) -> usize {
    let w = match cfg.experiment.workers {
        0 => std::thread::available_parallelism().map_or(1, |p| p.get()),
        w => w,
    };
    w.clamp(1, n.max(1))
}

/// Runs every trial, in parallel, and merges the results in seed order.
pub fn run_compare(cfg: &HarnessConfig, grounding: &Grounding, keep_logs: bool) -> Result<CompareRun> {
    cfg.validate()?;
    let seeds = cfg.experiment.trial_seeds();
    let w = workers(cfg, seeds.len());
    let mut slots: Vec<Option<Result<Vec<(Condition, Vec<f64>, EpisodeOutcome)>>>> = Vec::new();
    slots.resize_with(seeds.len(), || None);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..w)
            .map(|k| {
                let seeds = &seeds;
                let model = &grounding.model;
                scope.spawn(move || {
                    (k..seeds.len())
                        .step_by(w)
                        .map(|i| (i, run_trial(cfg, model, seeds[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("trial worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for (seed, slot) in seeds.iter().zip(slots) {
        for (condition, reported, out) in slot.expect("every trial ran")? {
            let m = &out.metrics;
            rows.push(TrialRow {
                seed: *seed,
                condition: condition.name().to_string(),
                success: m.success,
                exploded: m.exploded,
                duration: m.duration,
                n_commands: m.n_commands,
                conflicts: m.conflicts,
                refusals: m.refusals,
                repairs: m.repairs,
                reported_trust: reported,
                final_trust: out.final_trust.clone(),
            });
            if keep_logs {
                logs.push(TrialLog {
                    seed: *seed,
                    condition,
                    records: out.log,
                });
            }
        }
    }
    let table = tabulate(cfg, grounding, rows)?;
    Ok(CompareRun { table, logs })
}

fn tabulate(cfg: &HarnessConfig, grounding: &Grounding, rows: Vec<TrialRow>) -> Result<MetricsTable> {
    let conditions = &cfg.experiment.conditions;
    let names: Vec<&str> = conditions.iter().map(|c| c.name()).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::invalid(format!("condition {n} listed twice")));
        }
    }
    let rows_ref = &rows;
    let of = |name: &'static str| rows_ref.iter().filter(move |r| r.condition == name);
    let summaries = conditions
        .iter()
        .map(|&c| {
            let rs: Vec<&TrialRow> = of(c.name()).collect();
            let n = rs.len();
            let successes = rs.iter().filter(|r| r.success).count();
            let durations: Vec<f64> = rs.iter().filter(|r| r.success).map(|r| r.duration).collect();
            let commands: Vec<f64> = rs.iter().map(|r| r.n_commands as f64).collect();
            let (cm, cs) = mean_std(&commands).unwrap_or((0.0, 0.0));
            let d = mean_std(&durations);
            ConditionSummary {
                condition: c,
                n_trials: n,
                success_rate: successes as f64 / n.max(1) as f64,
                duration_mean: d.map(|x| x.0),
                duration_std: d.map(|x| x.1),
                commands_mean: cm,
                commands_std: cs,
            }
        })
        .collect();
    let mut comparisons = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let a: Vec<&TrialRow> = of(names[i]).collect();
            let b: Vec<&TrialRow> = of(names[j]).collect();
            let pairs = || a.iter().zip(&b);
            let mut push = |metric: &str, test: SignTest| {
                comparisons.push(PairedComparison {
                    metric: metric.to_string(),
                    a: names[i].to_string(),
                    b: names[j].to_string(),
                    test,
                })
            };
            push("success", sign_test(pairs().map(|(x, y)| (x.success as u8 as f64, y.success as u8 as f64))));
            push("n_commands", sign_test(pairs().map(|(x, y)| (x.n_commands as f64, y.n_commands as f64))));
            push(
                "duration",
                sign_test(pairs().filter(|(x, y)| x.success && y.success).map(|(x, y)| (x.duration, y.duration))),
            );
        }
    }
    Ok(MetricsTable {
        grounding: GroundingSummary {
            theta: grounding.model.theta.clone(),
            converged: grounding.fit.as_ref().map(|f| f.converged),
            n_events: grounding.n_events,
        },
        summaries,
        comparisons,
        rows,
    })
}

impl MetricsTable {
    pub fn summary(&self, condition: &str) -> Option<&ConditionSummary> {
        self.summaries.iter().find(|s| s.condition.name() == condition)
    }

    pub fn comparison(&self, metric: &str, a: &str, b: &str) -> Option<&PairedComparison> {
        self.comparisons
            .iter()
            .find(|c| c.metric == metric && ((c.a == a && c.b == b) || (c.a == b && c.b == a)))
    }

    /// Per-trial rows as comma-separated text.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "seed,condition,success,exploded,duration,n_commands,conflicts,refusals,repairs,reported_trust,final_trust\n",
        );
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.condition,
                r.success,
                r.exploded,
                r.duration,
                r.n_commands,
                r.conflicts,
                r.refusals,
                r.repairs,
                join(&r.reported_trust),
                join(&r.final_trust)
            );
        }
        s
    }

    /// Aggregates as comma-separated text, one line per condition.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("condition,n_trials,success_rate,duration_mean,duration_std,commands_mean,commands_std\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for c in &self.summaries {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                c.condition.name(),
                c.n_trials,
                c.success_rate,
                opt(c.duration_mean),
                opt(c.duration_std),
                c.commands_mean,
                c.commands_std
            );
        }
        s
    }
}
