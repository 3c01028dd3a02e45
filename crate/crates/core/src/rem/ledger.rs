//! Incremental past-weight tables.
//!
//! A ledger absorbs events in time order and answers the same queries as
//! [`past_weight`](crate::rem::past_weight) without rescanning the history.
//! Each distinct half-life gets its own table of per-(i, j, k) accumulators
//! stored as a decayed sum plus the time it was last brought up to date.

use crate::rem::attrs::AttributeSet;
use crate::rem::event::{Candidate, RelationalEvent};
use crate::rem::model::{decay, StatisticSpec, TypeSet};

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    sum: f64,
    at: f64,
}

#[derive(Debug, Clone)]
struct Table {
    half_life: f64,
    cells: Vec<Cell>,
}

#[derive(Debug, Clone)]
pub(crate) struct StatLedger {
    n_actors: usize,
    n_types: usize,
    tables: Vec<Table>,
    /// Per spec, the table index for history-dependent statistics.
    table_of: Vec<Option<usize>>,
}

impl StatLedger {
    pub(crate) fn new(specs: &[StatisticSpec], n_actors: usize, n_types: usize) -> Self {
        let mut tables: Vec<Table> = Vec::new();
        let table_of = specs
            .iter()
            .map(|spec| {
                spec.half_life().map(|h| {
                    tables
                        .iter()
                        .position(|t| t.half_life == h)
                        .unwrap_or_else(|| {
                            tables.push(Table {
                                half_life: h,
                                cells: vec![Cell::default(); n_actors * n_actors * n_types],
                            });
                            tables.len() - 1
                        })
                })
            })
            .collect();
        Self {
            n_actors,
            n_types,
            tables,
            table_of,
        }
    }

    fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_actors + j) * self.n_types + k
    }

    pub(crate) fn absorb(&mut self, event: &RelationalEvent) {
        let idx = self.cell_index(event.sender.0, event.receiver.0, event.event_type.0);
        for table in &mut self.tables {
            let cell = &mut table.cells[idx];
            cell.sum = cell.sum * decay(event.time - cell.at, table.half_life) + event.weight;
            cell.at = event.time;
        }
    }

    fn weight(&self, table: usize, i: usize, j: usize, k: usize, t: f64) -> f64 {
        let table = &self.tables[table];
        let cell = table.cells[self.cell_index(i, j, k)];
        if cell.sum == 0.0 {
            0.0
        } else {
            cell.sum * decay(t - cell.at, table.half_life)
        }
    }

    fn weight_over(&self, table: usize, i: usize, j: usize, types: Option<&TypeSet>, t: f64) -> f64 {
        match types {
            Some(set) => set.iter().map(|k| self.weight(table, i, j, k.0, t)).sum(),
            None => (0..self.n_types).map(|k| self.weight(table, i, j, k, t)).sum(),
        }
    }

    /// Writes S(c, t) into `out`, reading history-dependent entries from the
    /// ledger state (events absorbed so far).
    pub(crate) fn fill_stats(
        &self,
        specs: &[StatisticSpec],
        attrs: &AttributeSet,
        c: Candidate,
        t: f64,
        out: &mut [f64],
    ) {
        let (i, j, k) = (c.dyad.sender.0, c.dyad.receiver.0, c.event_type);
        for ((spec, table), slot) in specs.iter().zip(&self.table_of).zip(out.iter_mut()) {
            *slot = match spec {
                StatisticSpec::Intercept => 1.0,
                StatisticSpec::Inertia { .. } => {
                    self.weight(table.expect("history statistic"), i, j, k.0, t)
                }
                StatisticSpec::Reciprocity { types, .. } => {
                    self.weight_over(table.expect("history statistic"), j, i, types.as_ref(), t)
                }
                StatisticSpec::SenderAttr { name, types } => {
                    if types.as_ref().is_none_or(|s| s.contains(k)) {
                        attrs.actor(c.dyad.sender, name)
                    } else {
                        0.0
                    }
                }
                StatisticSpec::TrustGate { types } => {
                    if types.contains(k) {
                        attrs.trust(c.dyad)
                    } else {
                        0.0
                    }
                }
            };
        }
    }

    /// Upper bound on theta . S(c, t') over all t' >= t with no new events:
    /// decaying statistics only move toward zero.
    pub(crate) fn predictor_bound(
        &self,
        specs: &[StatisticSpec],
        theta: &[f64],
        stats_now: &[f64],
    ) -> f64 {
        specs
            .iter()
            .zip(theta)
            .zip(stats_now)
            .map(|((spec, th), s)| {
                let v = th * s;
                match spec.half_life() {
                    Some(h) if h > 0.0 => v.max(0.0),
                    _ => v,
                }
            })
            .sum()
    }
}
