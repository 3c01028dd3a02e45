use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// One 4-neighbour step toward `target`, x first.
    pub fn step_toward(self, target: Cell) -> Cell {
        if self.x != target.x {
            Cell::new(self.x + (target.x - self.x).signum(), self.y)
        } else if self.y != target.y {
            Cell::new(self.x, self.y + (target.y - self.y).signum())
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VictimSpec {
    pub id: usize,
    pub injured: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildingSpec {
    /// Display id, starting at 1.
    pub id: usize,
    pub cell: Cell,
    pub fire: bool,
    pub gas_leak: bool,
    pub victims: Vec<VictimSpec>,
}

/// Ticks needed to finish each multi-tick sub-task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Durations {
    pub search: u32,
    pub extinguish: u32,
    pub treat: u32,
    pub shut: u32,
}

impl Default for Durations {
    fn default() -> Self {
        Self {
            search: 3,
            extinguish: 5,
            treat: 5,
            shut: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub width: i32,
    pub height: i32,
    pub shelter: Cell,
    pub n_robots: usize,
    pub buildings: Vec<BuildingSpec>,
    pub gas_rate: f64,
    pub gas_threshold: f64,
    /// Robots sense the leak once density reaches this fraction of the threshold.
    pub detect_fraction: f64,
    /// ...or when a robot comes within this many cells of the leaking building.
    pub detect_radius: u32,
    pub max_ticks: u64,
    pub dt: f64,
    pub durations: Durations,
}

/// Knobs for [`generate_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub width: i32,
    pub height: i32,
    pub min_buildings: usize,
    pub max_buildings: usize,
    pub n_robots: usize,
    pub max_victims_per_building: usize,
    pub max_fires: usize,
    pub gas_rate: f64,
    /// Explosion deadline as a multiple of the worst-case time for a robot to
    /// reach and shut the leak after detection.
    pub gas_slack: f64,
    pub detect_fraction: f64,
    pub detect_radius: u32,
    pub max_ticks: u64,
    pub dt: f64,
    pub durations: Durations,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            width: 16,
            height: 16,
            min_buildings: 5,
            max_buildings: 6,
            n_robots: 2,
            max_victims_per_building: 2,
            max_fires: 2,
            gas_rate: 1.0,
            gas_slack: 1.1,
            detect_fraction: 0.2,
            detect_radius: 2,
            max_ticks: 600,
            dt: 1.0,
            durations: Durations::default(),
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if self.width < 4 || self.height < 4 {
            return Err(Error::invalid("grid must be at least 4x4"));
        }
        if self.min_buildings < 4 || self.max_buildings < self.min_buildings {
            return Err(Error::invalid("need 4 <= min_buildings <= max_buildings"));
        }
        if (self.max_buildings as i64) + 1 > (self.width as i64 * self.height as i64) / 4 {
            return Err(Error::invalid("grid too small for the building count"));
        }
        if self.n_robots == 0 || self.max_fires == 0 || self.max_victims_per_building == 0 {
            return Err(Error::invalid("robots, fires and victims per building must be positive"));
        }
        if !(self.gas_rate > 0.0) || !(self.gas_slack >= 1.0) || !(self.dt > 0.0) {
            return Err(Error::invalid("gas_rate and dt must be positive, gas_slack >= 1"));
        }
        if !(self.detect_fraction > 0.0 && self.detect_fraction < 1.0) {
            return Err(Error::invalid("detect_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.buildings.is_empty() {
            return Err(Error::invalid("scenario has no buildings"));
        }
        let inside = |c: Cell| c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height;
        if !inside(self.shelter) {
            return Err(Error::invalid("shelter outside the grid"));
        }
        let mut cells = vec![self.shelter];
        let mut victim_ids = Vec::new();
        for (i, b) in self.buildings.iter().enumerate() {
            if b.id != i + 1 {
                return Err(Error::invalid("building ids must be 1..=n in order"));
            }
            if !inside(b.cell) {
                return Err(Error::invalid(format!("building {} outside the grid", b.id)));
            }
            if cells.contains(&b.cell) {
                return Err(Error::invalid(format!("building {} shares a cell", b.id)));
            }
            cells.push(b.cell);
            victim_ids.extend(b.victims.iter().map(|v| v.id));
        }
        victim_ids.sort_unstable();
        if victim_ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate victim id"));
        }
        if self.buildings.iter().filter(|b| b.gas_leak).count() != 1 {
            return Err(Error::invalid("exactly one building must leak gas"));
        }
        if self.n_robots == 0 || !(self.gas_rate > 0.0) || !(self.gas_threshold > 0.0) || !(self.dt > 0.0) {
            return Err(Error::invalid("robots, gas rate, threshold and dt must be positive"));
        }
        Ok(())
    }

    pub fn leak_building(&self) -> &BuildingSpec {
        self.buildings.iter().find(|b| b.gas_leak).expect("validated scenario")
    }

    /// Ticks from the start until the leak would explode if never shut.
    pub fn ticks_to_explosion(&self) -> u64 {
        (self.gas_threshold / self.gas_rate).ceil() as u64
    }
}

fn farthest_distance(width: i32, height: i32, c: Cell) -> u32 {
    [Cell::new(0, 0), Cell::new(width - 1, 0), Cell::new(0, height - 1), Cell::new(width - 1, height - 1)]
        .into_iter()
        .map(|k| k.manhattan(c))
        .max()
        .unwrap_or(0)
}

/// Deterministic random scenario for `seed`.
pub fn generate_scenario(seed: u64, params: &ScenarioParams) -> Result<ScenarioConfig> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shelter = Cell::new(params.width / 2, params.height / 2);
    let n = rng.random_range(params.min_buildings..=params.max_buildings);

    let mut free: Vec<Cell> = (0..params.width)
        .flat_map(|x| (0..params.height).map(move |y| Cell::new(x, y)))
        .filter(|c| c.manhattan(shelter) >= 3)
        .collect();
    let mut cells = Vec::with_capacity(n);
    while cells.len() < n {
        let i = rng.random_range(0..free.len());
        let c = free.swap_remove(i);
        // keep buildings at least two cells apart so they read as separate squares
        if cells.iter().all(|o: &Cell| o.manhattan(c) >= 2) {
            cells.push(c);
        }
    }

    let leak = rng.random_range(0..n);
    let n_fires = rng.random_range(1..=params.max_fires.min(n));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let fires: Vec<usize> = order[..n_fires].to_vec();

    let mut next_victim = 1;
    let mut buildings: Vec<BuildingSpec> = cells
        .iter()
        .enumerate()
        .map(|(i, &cell)| {
            let count = rng.random_range(0..=params.max_victims_per_building);
            let victims = (0..count)
                .map(|_| {
                    let v = VictimSpec {
                        id: next_victim,
                        injured: rng.random_bool(0.5),
                    };
                    next_victim += 1;
                    v
                })
                .collect();
            BuildingSpec {
                id: i + 1,
                cell,
                fire: fires.contains(&i),
                gas_leak: i == leak,
                victims,
            }
        })
        .collect();
    if !buildings.iter().any(|b| b.victims.iter().any(|v| v.injured)) {
        let host = rng.random_range(0..n);
        buildings[host].victims.push(VictimSpec {
            id: next_victim,
            injured: true,
        });
    }

    let lb = &buildings[leak];
    let work = params.durations.shut + if lb.fire { params.durations.extinguish } else { 0 };
    let reach = farthest_distance(params.width, params.height, lb.cell) + work;
    let deadline = (params.gas_slack * reach as f64 / (1.0 - params.detect_fraction)).ceil();
    let scenario = ScenarioConfig {
        seed,
        width: params.width,
        height: params.height,
        shelter,
        n_robots: params.n_robots,
        buildings,
        gas_rate: params.gas_rate,
        gas_threshold: deadline * params.gas_rate,
        detect_fraction: params.detect_fraction,
        detect_radius: params.detect_radius,
        max_ticks: params.max_ticks,
        dt: params.dt,
        durations: params.durations,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let p = ScenarioParams::default();
        for seed in 0..50 {
            let a = generate_scenario(seed, &p).unwrap();
            assert_eq!(a, generate_scenario(seed, &p).unwrap());
            assert!(a.buildings.len() >= 4);
            assert!(a.buildings.iter().any(|b| b.fire));
            assert!(a.buildings.iter().flat_map(|b| &b.victims).any(|v| v.injured));
        }
        assert_ne!(generate_scenario(1, &p).unwrap(), generate_scenario(2, &p).unwrap());
    }

    #[test]
    fn steps_are_four_neighbour() {
        let mut c = Cell::new(0, 0);
        let t = Cell::new(2, -1);
        let mut n = 0;
        while c != t {
            let next = c.step_toward(t);
            assert_eq!(next.manhattan(c), 1);
            c = next;
            n += 1;
        }
        assert_eq!(n, 3);
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let mut s = generate_scenario(3, &ScenarioParams::default()).unwrap();
        s.buildings[1].cell = s.buildings[0].cell;
        assert!(s.validate().is_err());
        let mut s = generate_scenario(3, &ScenarioParams::default()).unwrap();
        for b in &mut s.buildings {
            b.gas_leak = false;
        }
        assert!(s.validate().is_err());
    }
}
