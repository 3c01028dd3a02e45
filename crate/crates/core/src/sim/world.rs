use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::scenario::{Cell, Durations, ScenarioConfig};

pub const HUMAN: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Human,
    Robot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Victim {
    pub id: usize,
    pub injured: bool,
    pub treated: bool,
    pub evacuated: bool,
    pub carried_by: Option<usize>,
}

impl Victim {
    /// Treated, not yet picked up or evacuated.
    pub fn awaiting_carry(&self) -> bool {
        self.injured && self.treated && !self.evacuated && self.carried_by.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: usize,
    pub cell: Cell,
    pub fire_blocked: bool,
    pub gas_leak: bool,
    pub had_leak: bool,
    pub gas_density: f64,
    pub searched: bool,
    pub victims: Vec<Victim>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubTaskKind {
    Goto,
    SearchAssess,
    ExtinguishFire,
    Treat,
    CarryToShelter,
    ShutGas,
}

impl SubTaskKind {
    pub fn activity(self) -> &'static str {
        match self {
            SubTaskKind::Goto => "check on it",
            SubTaskKind::SearchAssess => "search and assess it",
            SubTaskKind::ExtinguishFire => "put down the fire",
            SubTaskKind::Treat => "treat a victim",
            SubTaskKind::CarryToShelter => "pick up a treated victim",
            SubTaskKind::ShutGas => "shut off the gas leak",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTask {
    pub kind: SubTaskKind,
    /// Building id (1-based).
    pub building: usize,
    pub victim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub role: Role,
    pub cell: Cell,
    pub carrying: Option<usize>,
    pub current_subtask: Option<SubTask>,
    /// Work in progress: the action being repeated and ticks spent on it.
    pub work: Option<(Action, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Stay,
    MoveTo { x: i32, y: i32 },
    Search { building: usize },
    Extinguish { building: usize },
    Treat { victim: usize },
    PickUp { victim: usize },
    ShutGas { building: usize },
}

/// Sub-task completions and deliveries produced by a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "done", rename_all = "snake_case")]
pub enum Completion {
    Searched { agent: usize, building: usize },
    Extinguished { agent: usize, building: usize },
    Treated { agent: usize, victim: usize },
    PickedUp { agent: usize, victim: usize },
    Evacuated { agent: usize, victim: usize },
    GasShut { agent: usize, building: usize },
}

impl Completion {
    pub fn agent(&self) -> usize {
        match *self {
            Completion::Searched { agent, .. }
            | Completion::Extinguished { agent, .. }
            | Completion::Treated { agent, .. }
            | Completion::PickedUp { agent, .. }
            | Completion::Evacuated { agent, .. }
            | Completion::GasShut { agent, .. } => agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub width: i32,
    pub height: i32,
    pub shelter_cell: Cell,
    pub buildings: Vec<Building>,
    pub agents: Vec<AgentState>,
    pub exploded: bool,
    /// Robots share one leak reading, so detection is team-wide.
    pub leak_detected: bool,
    pub gas_rate: f64,
    pub gas_threshold: f64,
    pub detect_fraction: f64,
    pub detect_radius: u32,
    pub durations: Durations,
}

impl WorldState {
    pub fn new(s: &ScenarioConfig) -> Result<Self> {
        s.validate()?;
        let buildings = s
            .buildings
            .iter()
            .map(|b| Building {
                id: b.id,
                cell: b.cell,
                fire_blocked: b.fire,
                gas_leak: b.gas_leak,
                had_leak: b.gas_leak,
                gas_density: 0.0,
                searched: false,
                victims: b
                    .victims
                    .iter()
                    .map(|v| Victim {
                        id: v.id,
                        injured: v.injured,
                        treated: false,
                        evacuated: false,
                        carried_by: None,
                    })
                    .collect(),
            })
            .collect();
        let agents = (0..=s.n_robots)
            .map(|id| AgentState {
                id,
                role: if id == HUMAN { Role::Human } else { Role::Robot },
                cell: s.shelter,
                carrying: None,
                current_subtask: None,
                work: None,
            })
            .collect();
        Ok(Self {
            tick: 0,
            width: s.width,
            height: s.height,
            shelter_cell: s.shelter,
            buildings,
            agents,
            exploded: false,
            leak_detected: false,
            gas_rate: s.gas_rate,
            gas_threshold: s.gas_threshold,
            detect_fraction: s.detect_fraction,
            detect_radius: s.detect_radius,
            durations: s.durations,
        })
    }

    pub fn robots(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(|a| a.role == Role::Robot)
    }

    pub fn building(&self, id: usize) -> Option<&Building> {
        id.checked_sub(1).and_then(|i| self.buildings.get(i))
    }

    fn building_mut(&mut self, id: usize) -> Result<&mut Building> {
        id.checked_sub(1)
            .and_then(|i| self.buildings.get_mut(i))
            .ok_or_else(|| Error::invalid(format!("no building {id}")))
    }

    pub fn leak(&self) -> Option<&Building> {
        self.buildings.iter().find(|b| b.had_leak)
    }

    pub fn leak_active(&self) -> bool {
        self.buildings.iter().any(|b| b.gas_leak)
    }

    /// Robots' estimate of the probability of a dangerous condition.
    pub fn danger_probability(&self) -> f64 {
        self.leak()
            .map_or(0.0, |b| (b.gas_density / self.gas_threshold).clamp(0.0, 1.0))
    }

    pub fn victim_location(&self, victim: usize) -> Option<(usize, &Victim)> {
        self.buildings
            .iter()
            .flat_map(|b| b.victims.iter().map(move |v| (b.id, v)))
            .find(|(_, v)| v.id == victim)
    }

    fn victim_mut(&mut self, victim: usize) -> Result<(usize, &mut Victim)> {
        self.buildings
            .iter_mut()
            .flat_map(|b| {
                let id = b.id;
                b.victims.iter_mut().map(move |v| (id, v))
            })
            .find(|(_, v)| v.id == victim)
            .ok_or_else(|| Error::invalid(format!("no victim {victim}")))
    }

    /// Every building searched, every injured victim evacuated, leak shut.
    pub fn mission_complete(&self) -> bool {
        !self.exploded
            && !self.leak_active()
            && self.buildings.iter().all(|b| {
                b.searched && b.victims.iter().all(|v| !v.injured || v.evacuated)
            })
    }

    pub fn terminated(&self) -> bool {
        self.exploded || self.mission_complete()
    }

    fn inside(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    fn check(&self, agent: &AgentState, action: Action) -> Result<()> {
        let rule = |m: &str| Err(Error::RuleViolation(m.to_string()));
        let at = |bid: usize| -> Result<&Building> {
            let b = self
                .building(bid)
                .ok_or_else(|| Error::invalid(format!("no building {bid}")))?;
            if b.cell != agent.cell {
                return Err(Error::RuleViolation(format!("agent {} is not at Building {bid}", agent.id)));
            }
            Ok(b)
        };
        let accessible = |b: &Building| -> Result<()> {
            if b.fire_blocked {
                return Err(Error::RuleViolation(format!(
                    "Building {} cannot be accessed until the fire is put down",
                    b.id
                )));
            }
            Ok(())
        };
        match action {
            Action::Stay => Ok(()),
            Action::MoveTo { x, y } => {
                let c = Cell::new(x, y);
                if !self.inside(c) || c.manhattan(agent.cell) > 1 {
                    return rule("moves are one 4-neighbour step inside the grid");
                }
                Ok(())
            }
            Action::Search { building } => accessible(at(building)?),
            Action::Extinguish { building } => {
                if agent.role == Role::Human {
                    return rule("humans cannot extinguish fires");
                }
                if !at(building)?.fire_blocked {
                    return rule("there is no fire to put down");
                }
                Ok(())
            }
            Action::ShutGas { building } => {
                let b = at(building)?;
                accessible(b)?;
                if !b.gas_leak {
                    return rule("there is no active gas leak here");
                }
                Ok(())
            }
            Action::Treat { victim } => {
                if agent.role == Role::Robot {
                    return rule("robots cannot treat victims");
                }
                let (bid, v) = self
                    .victim_location(victim)
                    .ok_or_else(|| Error::invalid(format!("no victim {victim}")))?;
                let b = at(bid)?;
                accessible(b)?;
                if !b.searched {
                    return rule("victims must be located by a search first");
                }
                if !v.injured || v.treated {
                    return rule("victim does not need treatment");
                }
                Ok(())
            }
            Action::PickUp { victim } => {
                if agent.role == Role::Human {
                    return rule("humans cannot carry");
                }
                if agent.carrying.is_some() {
                    return rule("a robot carries one victim at a time");
                }
                let (bid, v) = self
                    .victim_location(victim)
                    .ok_or_else(|| Error::invalid(format!("no victim {victim}")))?;
                accessible(at(bid)?)?;
                if !v.injured || !v.treated {
                    return rule("injured victims must be treated before being carried");
                }
                if !v.awaiting_carry() {
                    return rule("victim is not waiting for transport");
                }
                Ok(())
            }
        }
    }

    fn duration(&self, action: Action) -> u32 {
        match action {
            Action::Search { .. } => self.durations.search,
            Action::Extinguish { .. } => self.durations.extinguish,
            Action::Treat { .. } => self.durations.treat,
            Action::ShutGas { .. } => self.durations.shut,
            _ => 1,
        }
    }

    /// Advances one tick. `actions[a]` is agent a's action; every action is
    /// validated before any is applied, so a rejected tick leaves the world
    /// unchanged.
    pub fn step(&mut self, actions: &[Action]) -> Result<Vec<Completion>> {
        if actions.len() != self.agents.len() {
            return Err(Error::invalid("one action per agent required"));
        }
        if self.terminated() {
            return Err(Error::InvalidState("episode already terminated".into()));
        }
        for (agent, action) in self.agents.iter().zip(actions) {
            self.check(agent, *action)?;
        }
        let mut done = Vec::new();
        for (a, &action) in actions.iter().enumerate() {
            let need = self.duration(action);
            let progress = match self.agents[a].work {
                Some((w, p)) if w == action => p + 1,
                _ => 1,
            };
            let multi_tick = matches!(
                action,
                Action::Search { .. } | Action::Extinguish { .. } | Action::Treat { .. } | Action::ShutGas { .. }
            );
            self.agents[a].work = if multi_tick && progress < need {
                Some((action, progress))
            } else {
                None
            };
            if multi_tick && progress < need {
                continue;
            }
            match action {
                Action::Stay => {}
                Action::MoveTo { x, y } => {
                    self.agents[a].cell = Cell::new(x, y);
                    if self.agents[a].cell == self.shelter_cell {
                        if let Some(v) = self.agents[a].carrying.take() {
                            let (_, victim) = self.victim_mut(v)?;
                            victim.evacuated = true;
                            victim.carried_by = None;
                            done.push(Completion::Evacuated { agent: a, victim: v });
                        }
                    }
                }
                Action::Search { building } => {
                    self.building_mut(building)?.searched = true;
                    done.push(Completion::Searched { agent: a, building });
                }
                Action::Extinguish { building } => {
                    self.building_mut(building)?.fire_blocked = false;
                    done.push(Completion::Extinguished { agent: a, building });
                }
                Action::ShutGas { building } => {
                    self.building_mut(building)?.gas_leak = false;
                    done.push(Completion::GasShut { agent: a, building });
                }
                Action::Treat { victim } => {
                    self.victim_mut(victim)?.1.treated = true;
                    done.push(Completion::Treated { agent: a, victim });
                }
                Action::PickUp { victim } => {
                    self.victim_mut(victim)?.1.carried_by = Some(a);
                    self.agents[a].carrying = Some(victim);
                    done.push(Completion::PickedUp { agent: a, victim });
                }
            }
        }
        let rate = self.gas_rate;
        let threshold = self.gas_threshold;
        for b in &mut self.buildings {
            if b.gas_leak {
                b.gas_density += rate;
                if b.gas_density >= threshold {
                    self.exploded = true;
                }
            }
        }
        if !self.leak_detected {
            if let Some(leak) = self.buildings.iter().find(|b| b.gas_leak) {
                let near = self
                    .robots()
                    .any(|r| r.cell.manhattan(leak.cell) <= self.detect_radius);
                if near || leak.gas_density >= self.detect_fraction * threshold {
                    self.leak_detected = true;
                }
            }
        }
        self.tick += 1;
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{BuildingSpec, VictimSpec};

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            seed: 0,
            width: 6,
            height: 6,
            shelter: Cell::new(0, 0),
            n_robots: 1,
            buildings: vec![
                BuildingSpec {
                    id: 1,
                    cell: Cell::new(1, 0),
                    fire: false,
                    gas_leak: false,
                    victims: vec![VictimSpec { id: 1, injured: true }],
                },
                BuildingSpec {
                    id: 2,
                    cell: Cell::new(4, 4),
                    fire: true,
                    gas_leak: true,
                    victims: vec![],
                },
            ],
            gas_rate: 1.0,
            gas_threshold: 40.0,
            detect_fraction: 0.5,
            detect_radius: 1,
            max_ticks: 100,
            dt: 1.0,
            durations: Durations::default(),
        }
    }

    #[test]
    fn capability_rules() {
        let mut w = WorldState::new(&tiny()).unwrap();
        w.step(&[Action::MoveTo { x: 1, y: 0 }, Action::MoveTo { x: 1, y: 0 }]).unwrap();
        let err = w.step(&[Action::PickUp { victim: 1 }, Action::Stay]).unwrap_err();
        assert!(err.to_string().contains("humans cannot carry"), "{err}");
        let err = w.step(&[Action::Stay, Action::Treat { victim: 1 }]).unwrap_err();
        assert!(err.to_string().contains("robots cannot treat"), "{err}");
        let err = w.step(&[Action::Treat { victim: 1 }, Action::Stay]).unwrap_err();
        assert!(err.to_string().contains("search"), "{err}");
        let before = w.clone();
        assert!(w.step(&[Action::Stay, Action::MoveTo { x: 3, y: 0 }]).is_err());
        assert_eq!(w, before);
    }

    #[test]
    fn treat_carry_evacuate() {
        let mut w = WorldState::new(&tiny()).unwrap();
        w.step(&[Action::MoveTo { x: 1, y: 0 }, Action::MoveTo { x: 1, y: 0 }]).unwrap();
        for _ in 0..3 {
            w.step(&[Action::Search { building: 1 }, Action::Stay]).unwrap();
        }
        assert!(w.buildings[0].searched);
        let err = w.step(&[Action::Stay, Action::PickUp { victim: 1 }]).unwrap_err();
        assert!(err.to_string().contains("treated before"), "{err}");
        let mut done = Vec::new();
        for _ in 0..5 {
            done = w.step(&[Action::Treat { victim: 1 }, Action::Stay]).unwrap();
        }
        assert_eq!(done, [Completion::Treated { agent: 0, victim: 1 }]);
        w.step(&[Action::Stay, Action::PickUp { victim: 1 }]).unwrap();
        let done = w.step(&[Action::Stay, Action::MoveTo { x: 0, y: 0 }]).unwrap();
        assert_eq!(done, [Completion::Evacuated { agent: 1, victim: 1 }]);
        assert!(w.buildings[0].victims[0].evacuated);
    }

    #[test]
    fn unshut_leak_explodes_on_schedule() {
        let s = tiny();
        let mut w = WorldState::new(&s).unwrap();
        let mut last = 0.0;
        for _ in 0..s.ticks_to_explosion() {
            assert!(!w.exploded);
            w.step(&[Action::Stay, Action::Stay]).unwrap();
            assert!(w.buildings[1].gas_density >= last);
            last = w.buildings[1].gas_density;
        }
        assert!(w.exploded);
        assert!(w.step(&[Action::Stay, Action::Stay]).is_err());
    }

    #[test]
    fn fire_blocks_access() {
        let mut s = tiny();
        s.buildings[1].cell = Cell::new(0, 1);
        let mut w = WorldState::new(&s).unwrap();
        w.step(&[Action::Stay, Action::MoveTo { x: 0, y: 1 }]).unwrap();
        assert!(w.step(&[Action::Stay, Action::Search { building: 2 }]).is_err());
        assert!(w.step(&[Action::Stay, Action::ShutGas { building: 2 }]).is_err());
        assert!(w.leak_detected);
        for _ in 0..5 {
            w.step(&[Action::Stay, Action::Extinguish { building: 2 }]).unwrap();
        }
        for _ in 0..5 {
            w.step(&[Action::Stay, Action::ShutGas { building: 2 }]).unwrap();
        }
        assert!(!w.leak_active());
        let d = w.buildings[1].gas_density;
        w.step(&[Action::Stay, Action::Stay]).unwrap();
        assert_eq!(w.buildings[1].gas_density, d);
    }
}
