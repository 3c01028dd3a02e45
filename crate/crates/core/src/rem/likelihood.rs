//! Temporal and ordinal relational event likelihoods.
//!
//! Both variants share one compiled form: for every contributing event the
//! statistic vectors of all candidates are evaluated once against the history
//! strictly before the event time. Evaluating the likelihood for a new theta
//! is then a pass over that table, which is what the optimizer and the trust
//! filter call repeatedly.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rem::attrs::AttributeTimeline;
use crate::rem::event::{candidate_index, candidates, Candidate, EventHistory};
use crate::rem::ledger::StatLedger;
use crate::rem::model::{linear_predictor, RateModel, StatisticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodMode {
    Temporal,
    #[default]
    Ordinal,
}

/// Statistic tensor for a run of events, independent of theta.
#[derive(Debug, Clone)]
pub struct CompiledEvents {
    n_stats: usize,
    n_candidates: usize,
    /// Gap since the previous event (or the span start).
    gaps: Vec<f64>,
    observed: Vec<usize>,
    /// rows * candidates * stats, row-major.
    stats: Vec<f64>,
    /// Trailing survival gap and its statistic block, when the span has an end.
    trailing: Option<(f64, Vec<f64>)>,
}

impl CompiledEvents {
    /// Compiles the events with indices in `range`. Earlier events only feed the
    /// statistics. `start` is the time the first gap is measured from; `end`, when
    /// given, adds a survival term over (last event, end].
    pub fn compile(
        specs: &[StatisticSpec],
        history: &EventHistory,
        attrs: &(impl AttributeTimeline + ?Sized),
        range: Range<usize>,
        start: f64,
        end: Option<f64>,
    ) -> Result<Self> {
        let events = history.events();
        if range.end > events.len() || range.start > range.end {
            return Err(Error::invalid("event range outside the history"));
        }
        if let Some(first) = events[range.clone()].first() {
            if first.time < start {
                return Err(Error::NonMonotoneTime {
                    index: range.start,
                    time: first.time,
                    previous: start,
                });
            }
        }
        if let Some(e) = end {
            let last = events[range.clone()].last().map_or(start, |ev| ev.time);
            if e < last || e < start {
                return Err(Error::invalid(format!("span end {e} precedes its events")));
            }
        }

        let n_actors = history.n_actors();
        let n_types = history.n_types();
        let n_candidates = history.n_candidates();
        let n_stats = specs.len();
        let block = n_candidates * n_stats;
        let cands: Vec<Candidate> = candidates(n_actors, n_types).collect();

        let mut ledger = StatLedger::new(specs, n_actors, n_types);
        let mut absorbed = 0;
        let absorb_before = |ledger: &mut StatLedger, t: f64, absorbed: &mut usize| {
            while *absorbed < events.len() && events[*absorbed].time < t {
                ledger.absorb(&events[*absorbed]);
                *absorbed += 1;
            }
        };

        let rows = range.len();
        let mut gaps = Vec::with_capacity(rows);
        let mut observed = Vec::with_capacity(rows);
        let mut stats = vec![0.0; rows * block];
        let mut prev = start;
        for (row, idx) in range.clone().enumerate() {
            let e = &events[idx];
            absorb_before(&mut ledger, e.time, &mut absorbed);
            let a = attrs.attrs_at(idx);
            let out = &mut stats[row * block..(row + 1) * block];
            for (ci, c) in cands.iter().enumerate() {
                ledger.fill_stats(specs, a, *c, e.time, &mut out[ci * n_stats..(ci + 1) * n_stats]);
            }
            gaps.push(e.time - prev);
            observed.push(candidate_index(
                n_actors,
                n_types,
                Candidate {
                    dyad: e.dyad(),
                    event_type: e.event_type,
                },
            ));
            prev = e.time;
        }

        let trailing = match end {
            Some(t_end) if t_end > prev => {
                absorb_before(&mut ledger, t_end, &mut absorbed);
                let a = attrs.attrs_at(range.end);
                let mut out = vec![0.0; block];
                for (ci, c) in cands.iter().enumerate() {
                    ledger.fill_stats(specs, a, *c, t_end, &mut out[ci * n_stats..(ci + 1) * n_stats]);
                }
                Some((t_end - prev, out))
            }
            _ => None,
        };

        Ok(Self {
            n_stats,
            n_candidates,
            gaps,
            observed,
            stats,
            trailing,
        })
    }

    pub fn n_events(&self) -> usize {
        self.gaps.len()
    }

    pub fn n_stats(&self) -> usize {
        self.n_stats
    }

    fn block(&self, row: usize) -> &[f64] {
        let b = self.n_candidates * self.n_stats;
        &self.stats[row * b..(row + 1) * b]
    }

    fn etas(&self, block: &[f64], theta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            block
                .chunks_exact(self.n_stats)
                .map(|s| linear_predictor(theta, s)),
        );
    }

    /// Largest |theta . S| before clamping; values at or beyond the clamp
    /// mean the likelihood is locally flat in theta.
    pub fn max_abs_predictor(&self, theta: &[f64]) -> f64 {
        let raw = |s: &[f64]| theta.iter().zip(s).map(|(t, v)| t * v).sum::<f64>().abs();
        let mut m = self
            .stats
            .chunks_exact(self.n_stats)
            .map(raw)
            .fold(0.0, f64::max);
        if let Some((_, b)) = &self.trailing {
            m = b.chunks_exact(self.n_stats).map(raw).fold(m, f64::max);
        }
        m
    }

    pub fn log_likelihood(&self, theta: &[f64], baseline: f64, mode: LikelihoodMode) -> f64 {
        assert_eq!(theta.len(), self.n_stats, "theta length");
        let log_base = baseline.ln();
        let mut etas = Vec::with_capacity(self.n_candidates);
        let mut total = 0.0;
        for row in 0..self.n_events() {
            self.etas(self.block(row), theta, &mut etas);
            let eta_obs = etas[self.observed[row]];
            total += match mode {
                LikelihoodMode::Temporal => {
                    let gap = self.gaps[row];
                    let survival = if gap > 0.0 {
                        gap * baseline * etas.iter().map(|e| e.exp()).sum::<f64>()
                    } else {
                        0.0
                    };
                    log_base + eta_obs - survival
                }
                LikelihoodMode::Ordinal => eta_obs - log_sum_exp(&etas),
            };
        }
        if let (LikelihoodMode::Temporal, Some((gap, block))) = (mode, &self.trailing) {
            self.etas(block, theta, &mut etas);
            total -= gap * baseline * etas.iter().map(|e| e.exp()).sum::<f64>();
        }
        total
    }

    /// Per-event multinomial over the candidate set (ordinal kernel).
    pub fn event_probabilities(&self, row: usize, theta: &[f64]) -> Vec<f64> {
        let mut etas = Vec::new();
        self.etas(self.block(row), theta, &mut etas);
        softmax(&etas)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

fn full_history(
    model: &RateModel,
    history: &EventHistory,
    attrs: &(impl AttributeTimeline + ?Sized),
    start: f64,
) -> Result<CompiledEvents> {
    model.validate_for(history)?;
    if history.is_empty() {
        return Err(Error::invalid("likelihood of an empty history"));
    }
    CompiledEvents::compile(&model.specs, history, attrs, 0..history.len(), start, None)
}

/// Log of the full temporal likelihood: per-event rate times survival of
/// every candidate over the preceding gap. `start` is t_0.
pub fn temporal_log_likelihood(
    model: &RateModel,
    history: &EventHistory,
    attrs: &(impl AttributeTimeline + ?Sized),
    start: f64,
) -> Result<f64> {
    let compiled = full_history(model, history, attrs, start)?;
    Ok(compiled.log_likelihood(&model.theta, model.baseline, LikelihoodMode::Temporal))
}

/// Log of the product of per-event multinomial probabilities.
pub fn ordinal_log_likelihood(
    model: &RateModel,
    history: &EventHistory,
    attrs: &(impl AttributeTimeline + ?Sized),
) -> Result<f64> {
    let start = history.events().first().map_or(0.0, |e| e.time);
    let compiled = full_history(model, history, attrs, start)?;
    Ok(compiled.log_likelihood(&model.theta, model.baseline, LikelihoodMode::Ordinal))
}

/// Log-likelihood of the events in (t_start, t_end], conditioned on everything
/// before. In temporal mode the survival term covers the whole window, so an
/// empty window still contributes.
pub fn window_log_likelihood(
    model: &RateModel,
    history: &EventHistory,
    attrs: &(impl AttributeTimeline + ?Sized),
    t_start: f64,
    t_end: f64,
    mode: LikelihoodMode,
) -> Result<f64> {
    model.validate_for(history)?;
    if !(t_start < t_end) {
        return Err(Error::invalid(format!("window ({t_start}, {t_end}] is empty")));
    }
    let range = history.partition_after(t_start)..history.partition_after(t_end);
    let compiled =
        CompiledEvents::compile(&model.specs, history, attrs, range, t_start, Some(t_end))?;
    Ok(compiled.log_likelihood(&model.theta, model.baseline, mode))
}

/// Normalized next-event probabilities at time `t`, plus the total rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDistribution {
    pub candidates: Vec<(Candidate, f64)>,
    pub total_rate: f64,
}

impl EventDistribution {
    pub fn probability(&self, c: Candidate) -> f64 {
        self.candidates
            .iter()
            .find(|(x, _)| *x == c)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// Probabilities proportional to lambda_ijk(t), using history strictly before `t`.
pub fn next_event_distribution(
    model: &RateModel,
    history: &EventHistory,
    attrs: &crate::rem::AttributeSet,
    t: f64,
) -> Result<EventDistribution> {
    model.validate_for(history)?;
    let mut ledger = StatLedger::new(&model.specs, history.n_actors(), history.n_types());
    for e in history.events().iter().take_while(|e| e.time < t) {
        ledger.absorb(e);
    }
    let cands: Vec<Candidate> = candidates(history.n_actors(), history.n_types()).collect();
    let mut s = vec![0.0; model.n_stats()];
    let etas: Vec<f64> = cands
        .iter()
        .map(|c| {
            ledger.fill_stats(&model.specs, attrs, *c, t, &mut s);
            model.linear_predictor(&s)
        })
        .collect();
    let total_rate = model.baseline * etas.iter().map(|e| e.exp()).sum::<f64>();
    Ok(EventDistribution {
        candidates: cands.into_iter().zip(softmax(&etas)).collect(),
        total_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rem::{ActorId, AttributeSet, Dyad, EventType, RelationalEvent, TypeSet};

    fn ev(i: usize, j: usize, k: usize, t: f64) -> RelationalEvent {
        RelationalEvent::new(ActorId(i), ActorId(j), EventType(k), t)
    }

    fn flat() -> RateModel {
        RateModel::uniform(vec![StatisticSpec::Intercept]).unwrap()
    }

    #[test]
    fn temporal_single_event_two_dyads() {
        let h = EventHistory::from_events(2, 1, [ev(0, 1, 0, 2.0)]).unwrap();
        let ll = temporal_log_likelihood(&flat(), &h, &AttributeSet::new(), 0.0).unwrap();
        assert!((ll - -4.0).abs() < 1e-15);
    }

    #[test]
    fn temporal_constant_total_rate() {
        let h = EventHistory::from_events(2, 1, [ev(0, 1, 0, 1.0), ev(1, 0, 0, 1.5)]).unwrap();
        let ll = temporal_log_likelihood(&flat(), &h, &AttributeSet::new(), 0.0).unwrap();
        assert!((ll - -3.0).abs() < 1e-15);
    }

    #[test]
    fn ordinal_uniform_multinomial() {
        let h = EventHistory::from_events(2, 2, [ev(0, 1, 0, 1.0), ev(1, 0, 1, 2.0)]).unwrap();
        let ll = ordinal_log_likelihood(&flat(), &h, &AttributeSet::new()).unwrap();
        assert!((ll - (1.0f64 / 16.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn ordinal_ignores_baseline() {
        let h = EventHistory::from_events(3, 2, [ev(0, 1, 0, 1.0), ev(1, 0, 1, 2.0), ev(0, 1, 0, 3.0)]).unwrap();
        let m = RateModel::new(
            vec![StatisticSpec::Intercept, StatisticSpec::inertia(), StatisticSpec::reciprocity()],
            vec![0.3, 0.7, -0.2],
            1.0,
        )
        .unwrap();
        let scaled = RateModel::new(m.specs.clone(), m.theta.clone(), 10.0).unwrap();
        let a = ordinal_log_likelihood(&m, &h, &AttributeSet::new()).unwrap();
        let b = ordinal_log_likelihood(&scaled, &h, &AttributeSet::new()).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn empty_history_and_bad_start_are_rejected() {
        let empty = EventHistory::new(2, 1).unwrap();
        assert!(temporal_log_likelihood(&flat(), &empty, &AttributeSet::new(), 0.0).is_err());
        let h = EventHistory::from_events(2, 1, [ev(0, 1, 0, 1.0)]).unwrap();
        assert!(matches!(
            temporal_log_likelihood(&flat(), &h, &AttributeSet::new(), 2.0),
            Err(Error::NonMonotoneTime { .. })
        ));
    }

    #[test]
    fn empty_window_keeps_survival_term() {
        let h = EventHistory::from_events(2, 1, [ev(0, 1, 0, 1.0)]).unwrap();
        let attrs = AttributeSet::new();
        let t = window_log_likelihood(&flat(), &h, &attrs, 5.0, 8.0, LikelihoodMode::Temporal).unwrap();
        assert!((t - -6.0).abs() < 1e-15);
        let o = window_log_likelihood(&flat(), &h, &attrs, 5.0, 8.0, LikelihoodMode::Ordinal).unwrap();
        assert_eq!(o, 0.0);
    }

    #[test]
    fn window_boundary_belongs_to_earlier_window() {
        let h = EventHistory::from_events(2, 1, [ev(0, 1, 0, 1.0), ev(0, 1, 0, 2.0)]).unwrap();
        let attrs = AttributeSet::new();
        let m = flat();
        let first = window_log_likelihood(&m, &h, &attrs, 0.0, 2.0, LikelihoodMode::Ordinal).unwrap();
        let second = window_log_likelihood(&m, &h, &attrs, 2.0, 4.0, LikelihoodMode::Ordinal).unwrap();
        assert!((first - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(second, 0.0);
    }

    #[test]
    fn distribution_examples() {
        let h = EventHistory::new(2, 2).unwrap();
        let d = next_event_distribution(&flat(), &h, &AttributeSet::new(), 0.0).unwrap();
        assert_eq!(d.candidates.len(), 4);
        assert!(d.candidates.iter().all(|(_, p)| (p - 0.25).abs() < 1e-15));
        assert!((d.total_rate - 4.0).abs() < 1e-15);

        // one of two candidates boosted by ln 3 through the trust gate
        let h = EventHistory::new(2, 1).unwrap();
        let fwd = Dyad::new(ActorId(0), ActorId(1)).unwrap();
        let attrs = AttributeSet::new().with_trust(fwd, 1.0).unwrap();
        let m = RateModel::new(
            vec![StatisticSpec::Intercept, StatisticSpec::trust_gate(TypeSet::single(0))],
            vec![0.0, 3f64.ln()],
            1.0,
        )
        .unwrap();
        let d = next_event_distribution(&m, &h, &attrs, 0.0).unwrap();
        let p = d.probability(Candidate { dyad: fwd, event_type: EventType(0) });
        assert!((p - 0.75).abs() < 1e-15);
        assert!((d.probability(Candidate { dyad: fwd.reversed(), event_type: EventType(0) }) - 0.25).abs() < 1e-15);
    }
}
