use rand::Rng;

use crate::error::Result;
use crate::rem::attrs::AttributeSet;
use crate::rem::event::{candidates, Candidate, EventHistory, RelationalEvent};
use crate::rem::ledger::StatLedger;
use crate::rem::model::{RateModel, ETA_CLAMP};

/// Draws events from a rate model by thinning.
///
/// Between events decayed statistics relax toward zero, so the rate of each
/// candidate is bounded by its value with every decaying term at the more
/// favourable of its current value and zero. Proposals are drawn from that
/// bound and accepted with probability lambda(t) / bound, which makes the
/// generated sequence an exact sample of the intensity model.
#[derive(Debug, Clone)]
pub struct EventSampler {
    model: RateModel,
    history: EventHistory,
    ledger: StatLedger,
    cands: Vec<Candidate>,
    now: f64,
}

impl EventSampler {
    pub fn new(model: RateModel, history: EventHistory, start: f64) -> Result<Self> {
        model.validate_for(&history)?;
        let mut ledger = StatLedger::new(&model.specs, history.n_actors(), history.n_types());
        for e in history.events() {
            ledger.absorb(e);
        }
        let now = history.events().last().map_or(start, |e| e.time.max(start));
        let cands = candidates(history.n_actors(), history.n_types()).collect();
        Ok(Self {
            model,
            history,
            ledger,
            cands,
            now,
        })
    }

    pub fn history(&self) -> &EventHistory {
        &self.history
    }

    pub fn into_history(self) -> EventHistory {
        self.history
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Samples the next event under `attrs`, or `None` if it would fall after
    /// `horizon`; in that case the clock advances to `horizon`.
    pub fn next_event<R: Rng + ?Sized>(
        &mut self,
        attrs: &AttributeSet,
        horizon: f64,
        rng: &mut R,
    ) -> Option<RelationalEvent> {
        let p = self.model.n_stats();
        let mut s = vec![0.0; p];
        let mut bounds = Vec::with_capacity(self.cands.len());
        let mut t = self.now;
        loop {
            bounds.clear();
            for c in &self.cands {
                self.ledger.fill_stats(&self.model.specs, attrs, *c, t, &mut s);
                let ub = self.ledger.predictor_bound(&self.model.specs, &self.model.theta, &s);
                bounds.push(self.model.baseline * ub.clamp(-ETA_CLAMP, ETA_CLAMP).exp());
            }
            let total: f64 = bounds.iter().sum();
            let u: f64 = rng.random();
            t -= (1.0 - u).ln() / total;
            if t > horizon {
                self.now = horizon;
                return None;
            }
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = self.cands.len() - 1;
            for (idx, b) in bounds.iter().enumerate() {
                if pick < *b {
                    chosen = idx;
                    break;
                }
                pick -= b;
            }
            let c = self.cands[chosen];
            self.ledger.fill_stats(&self.model.specs, attrs, c, t, &mut s);
            let rate = self.model.baseline * self.model.linear_predictor(&s).exp();
            if rng.random::<f64>() * bounds[chosen] <= rate {
                let event = RelationalEvent::new(c.dyad.sender, c.dyad.receiver, c.event_type, t);
                self.history
                    .push(event)
                    .expect("sampled events are valid and ordered");
                self.ledger.absorb(&event);
                self.now = t;
                return Some(event);
            }
        }
    }

    /// Appends `n` events under fixed attributes.
    pub fn sample_n<R: Rng + ?Sized>(&mut self, attrs: &AttributeSet, n: usize, rng: &mut R) {
        for _ in 0..n {
            self.next_event(attrs, f64::INFINITY, rng);
        }
    }

    /// Appends every event up to `horizon` under fixed attributes.
    pub fn sample_until<R: Rng + ?Sized>(&mut self, attrs: &AttributeSet, horizon: f64, rng: &mut R) {
        while self.next_event(attrs, horizon, rng).is_some() {}
    }
}
