//! Capability and dependency-order checks over a finished episode log.

use std::collections::BTreeMap;

use crate::sim::log::LogRecord;
use crate::sim::world::{Action, Completion, HUMAN};

/// Returns one line per violated rule; empty for a clean log.
pub fn audit_log(records: &[LogRecord]) -> Vec<String> {
    let mut out = Vec::new();
    let Some(LogRecord::Header(header)) = records.first() else {
        return vec!["log does not start with a header".into()];
    };
    let fires: Vec<usize> = header.scenario.buildings.iter().filter(|b| b.fire).map(|b| b.id).collect();
    let mut treated: BTreeMap<usize, u64> = BTreeMap::new();
    let mut extinguished: BTreeMap<usize, u64> = BTreeMap::new();
    for r in records {
        match r {
            LogRecord::Action { tick, agent, action } => {
                let human = *agent == HUMAN;
                match *action {
                    Action::PickUp { victim } => {
                        if human {
                            out.push(format!("tick {tick}: human carried victim {victim}"));
                        }
                        if !treated.get(&victim).is_some_and(|t| t < tick) {
                            out.push(format!("tick {tick}: victim {victim} carried before treatment"));
                        }
                    }
                    Action::Extinguish { building } if human => {
                        out.push(format!("tick {tick}: human extinguished Building {building}"));
                    }
                    Action::Treat { victim } if !human => {
                        out.push(format!("tick {tick}: robot {agent} treated victim {victim}"));
                    }
                    _ => {}
                }
                if let Action::Search { building } | Action::ShutGas { building } = *action {
                    if fires.contains(&building) && !extinguished.get(&building).is_some_and(|t| t < tick) {
                        out.push(format!("tick {tick}: Building {building} entered before the fire was put down"));
                    }
                }
            }
            LogRecord::Completion { tick, completion } => match *completion {
                Completion::Treated { victim, .. } => {
                    treated.entry(victim).or_insert(*tick);
                }
                Completion::Extinguished { building, .. } => {
                    extinguished.entry(building).or_insert(*tick);
                }
                _ => {}
            },
            LogRecord::Message(m) if m.sender == HUMAN && m.discloses_hazard => {
                out.push(format!("tick {}: the human reported gas it cannot sense", m.tick));
            }
            _ => {}
        }
    }
    if !matches!(records.last(), Some(LogRecord::Metrics(_))) {
        out.push("log has no metrics trailer".into());
    }
    out
}
