//! Greedy task planners for the robots and for the simulated human.

use crate::sim::scenario::Cell;
use crate::sim::world::{Action, AgentState, Building, SubTask, SubTaskKind, WorldState};

fn task(kind: SubTaskKind, building: usize, victim: Option<usize>) -> SubTask {
    SubTask { kind, building, victim }
}

/// Nearest building passing `keep`, ties to the lowest id.
fn nearest(world: &WorldState, from: Cell, keep: impl Fn(&Building) -> bool) -> Option<&Building> {
    world
        .buildings
        .iter()
        .filter(|b| keep(b))
        .min_by_key(|b| (b.cell.manhattan(from), b.id))
}

fn claimed(claims: &[SubTask], kind: SubTaskKind, building: usize) -> bool {
    claims.iter().any(|c| c.kind == kind && c.building == building)
}

/// What a robot does on arriving at a building it was sent to.
pub fn directive_task(world: &WorldState, building: usize) -> SubTask {
    let Some(b) = world.building(building) else {
        return task(SubTaskKind::Goto, building, None);
    };
    if b.fire_blocked {
        task(SubTaskKind::ExtinguishFire, building, None)
    } else if !b.searched {
        task(SubTaskKind::SearchAssess, building, None)
    } else if let Some(v) = b.victims.iter().find(|v| v.awaiting_carry()) {
        task(SubTaskKind::CarryToShelter, building, Some(v.id))
    } else {
        task(SubTaskKind::Goto, building, None)
    }
}

/// The robot leading the leak response: nearest robot, ties to the lowest id.
pub fn choose_gas_robot(world: &WorldState) -> Option<usize> {
    let leak = world.buildings.iter().find(|b| b.gas_leak)?;
    world
        .robots()
        .min_by_key(|r| (r.carrying.is_some(), r.cell.manhattan(leak.cell), r.id))
        .map(|r| r.id)
}

/// Robot priorities: finish a carry, follow an accepted instruction, handle
/// the leak if assigned, put out the nearest fire, move treated victims,
/// search. `claims` are other agents' current sub-tasks.
pub fn robot_policy(
    world: &WorldState,
    robot: &AgentState,
    directive: Option<usize>,
    gas_robot: Option<usize>,
    claims: &[SubTask],
) -> Option<SubTask> {
    if let Some(v) = robot.carrying {
        let origin = world.victim_location(v).map_or(0, |(b, _)| b);
        return Some(task(SubTaskKind::CarryToShelter, origin, Some(v)));
    }
    if let Some(b) = directive {
        return Some(directive_task(world, b));
    }
    if world.leak_detected && gas_robot == Some(robot.id) {
        if let Some(leak) = world.buildings.iter().find(|b| b.gas_leak) {
            let kind = if leak.fire_blocked {
                SubTaskKind::ExtinguishFire
            } else {
                SubTaskKind::ShutGas
            };
            return Some(task(kind, leak.id, None));
        }
    }
    if let Some(b) = nearest(world, robot.cell, |b| {
        b.fire_blocked && !claimed(claims, SubTaskKind::ExtinguishFire, b.id)
    }) {
        return Some(task(SubTaskKind::ExtinguishFire, b.id, None));
    }
    let waiting = world
        .buildings
        .iter()
        .flat_map(|b| b.victims.iter().map(move |v| (b, v)))
        .filter(|(_, v)| v.awaiting_carry())
        .filter(|(_, v)| !claims.iter().any(|c| c.victim == Some(v.id)))
        .min_by_key(|(b, v)| (b.cell.manhattan(robot.cell), b.id, v.id));
    if let Some((b, v)) = waiting {
        return Some(task(SubTaskKind::CarryToShelter, b.id, Some(v.id)));
    }
    nearest(world, robot.cell, |b| {
        !b.searched && !b.fire_blocked && !claimed(claims, SubTaskKind::SearchAssess, b.id)
    })
    .map(|b| task(SubTaskKind::SearchAssess, b.id, None))
}

/// Greedy human: treat located injured victims, otherwise search buildings
/// nobody else is searching.
pub fn human_policy(world: &WorldState, human: &AgentState, claims: &[SubTask]) -> Option<SubTask> {
    let treat = world
        .buildings
        .iter()
        .filter(|b| b.searched && !b.fire_blocked)
        .flat_map(|b| b.victims.iter().map(move |v| (b, v)))
        .filter(|(_, v)| v.injured && !v.treated)
        .min_by_key(|(b, v)| (b.cell.manhattan(human.cell), b.id, v.id));
    if let Some((b, v)) = treat {
        return Some(task(SubTaskKind::Treat, b.id, Some(v.id)));
    }
    nearest(world, human.cell, |b| {
        !b.searched && !b.fire_blocked && !claimed(claims, SubTaskKind::SearchAssess, b.id)
    })
    .map(|b| task(SubTaskKind::SearchAssess, b.id, None))
}

/// Next primitive action toward finishing `t`.
pub fn next_action(world: &WorldState, agent: &AgentState, t: Option<SubTask>) -> Action {
    let Some(t) = t else {
        return Action::Stay;
    };
    let toward = |c: Cell| {
        let n = agent.cell.step_toward(c);
        Action::MoveTo { x: n.x, y: n.y }
    };
    if t.kind == SubTaskKind::CarryToShelter && agent.carrying.is_some() {
        return if agent.cell == world.shelter_cell {
            Action::Stay
        } else {
            toward(world.shelter_cell)
        };
    }
    let Some(b) = world.building(t.building) else {
        return Action::Stay;
    };
    if agent.cell != b.cell {
        return toward(b.cell);
    }
    match t.kind {
        SubTaskKind::Goto => Action::Stay,
        SubTaskKind::SearchAssess => Action::Search { building: b.id },
        SubTaskKind::ExtinguishFire => Action::Extinguish { building: b.id },
        SubTaskKind::ShutGas => Action::ShutGas { building: b.id },
        SubTaskKind::Treat => t.victim.map_or(Action::Stay, |victim| Action::Treat { victim }),
        SubTaskKind::CarryToShelter => t.victim.map_or(Action::Stay, |victim| Action::PickUp { victim }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{BuildingSpec, Durations, ScenarioConfig};

    fn world(fires: &[(usize, Cell)], leak: Option<usize>) -> WorldState {
        let buildings = fires
            .iter()
            .map(|&(id, cell)| BuildingSpec {
                id,
                cell,
                fire: true,
                gas_leak: Some(id) == leak,
                victims: vec![],
            })
            .collect::<Vec<_>>();
        let mut buildings = buildings;
        if leak.is_none() {
            let n = buildings.len() + 1;
            buildings.push(BuildingSpec {
                id: n,
                cell: Cell::new(0, 9),
                fire: false,
                gas_leak: true,
                victims: vec![],
            });
        }
        let s = ScenarioConfig {
            seed: 0,
            width: 10,
            height: 10,
            shelter: Cell::new(5, 5),
            n_robots: 2,
            buildings,
            gas_rate: 1.0,
            gas_threshold: 1000.0,
            detect_fraction: 0.5,
            detect_radius: 0,
            max_ticks: 10,
            dt: 1.0,
            durations: Durations::default(),
        };
        WorldState::new(&s).unwrap()
    }

    #[test]
    fn detected_leak_comes_first() {
        let mut w = world(&[(1, Cell::new(5, 7)), (2, Cell::new(1, 1))], Some(2));
        w.leak_detected = true;
        let r = w.agents[1].clone();
        let t = robot_policy(&w, &r, None, Some(1), &[]).unwrap();
        // the leaking building is on fire, so the fire there goes first
        assert_eq!((t.kind, t.building), (SubTaskKind::ExtinguishFire, 2));
        w.buildings[1].fire_blocked = false;
        let t = robot_policy(&w, &r, None, Some(1), &[]).unwrap();
        assert_eq!((t.kind, t.building), (SubTaskKind::ShutGas, 2));
    }

    #[test]
    fn single_fire_and_ties() {
        let w = world(&[(1, Cell::new(5, 8))], None);
        let r = w.agents[1].clone();
        let t = robot_policy(&w, &r, None, None, &[]).unwrap();
        assert_eq!((t.kind, t.building), (SubTaskKind::ExtinguishFire, 1));
        let w = world(&[(1, Cell::new(2, 5)), (2, Cell::new(5, 2)), (3, Cell::new(8, 5))], None);
        let t = robot_policy(&w, &w.agents[1], None, None, &[]).unwrap();
        assert_eq!(t.building, 1);
    }

    #[test]
    fn claims_spread_the_robots() {
        let w = world(&[(1, Cell::new(5, 7)), (2, Cell::new(5, 0))], None);
        let first = robot_policy(&w, &w.agents[1], None, None, &[]).unwrap();
        let second = robot_policy(&w, &w.agents[2], None, None, &[first]).unwrap();
        assert_eq!(first.building, 1);
        assert_eq!(second.building, 2);
    }

    #[test]
    fn directive_wins_over_leak() {
        let mut w = world(&[(1, Cell::new(5, 7))], None);
        w.leak_detected = true;
        let t = robot_policy(&w, &w.agents[1], Some(1), Some(1), &[]).unwrap();
        assert_eq!((t.kind, t.building), (SubTaskKind::ExtinguishFire, 1));
    }
}
