//! Independent reference implementations shared by the integration tests.
//! Everything here rescans the full history; nothing is cached.

#![allow(dead_code)]

use brem::rem::{
    ActorId, AttributeSet, Dyad, EventHistory, EventType, RateModel, RelationalEvent, StatisticSpec, TypeSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn scan(history: &EventHistory, i: usize, j: usize, types: Option<&TypeSet>, k: Option<usize>, t: f64, half_life: f64) -> f64 {
    let mut total = 0.0;
    for e in history.events() {
        if e.time >= t || e.sender.0 != i || e.receiver.0 != j {
            continue;
        }
        if let Some(k) = k {
            if e.event_type.0 != k {
                continue;
            }
        }
        if let Some(s) = types {
            if !s.contains(e.event_type) {
                continue;
            }
        }
        let decay = if half_life == 0.0 { 1.0 } else { 0.5f64.powf((t - e.time) / half_life) };
        total += e.weight * decay;
    }
    total
}

/// S(i, j, k, t) straight from the statistic definitions.
pub fn naive_stats(model: &RateModel, history: &EventHistory, attrs: &AttributeSet, i: usize, j: usize, k: usize, t: f64) -> Vec<f64> {
    let dyad = Dyad::new(ActorId(i), ActorId(j)).unwrap();
    model
        .specs
        .iter()
        .map(|s| match s {
            StatisticSpec::Intercept => 1.0,
            StatisticSpec::Inertia { half_life } => scan(history, i, j, None, Some(k), t, *half_life),
            StatisticSpec::Reciprocity { types, half_life } => scan(history, j, i, types.as_ref(), None, t, *half_life),
            StatisticSpec::SenderAttr { name, types } => {
                if types.as_ref().is_none_or(|s| s.contains(EventType(k))) {
                    attrs.actor(ActorId(i), name)
                } else {
                    0.0
                }
            }
            StatisticSpec::TrustGate { types } => {
                if types.contains(EventType(k)) {
                    attrs.trust(dyad)
                } else {
                    0.0
                }
            }
        })
        .collect()
}

pub fn naive_rate(model: &RateModel, history: &EventHistory, attrs: &AttributeSet, i: usize, j: usize, k: usize, t: f64) -> f64 {
    let s = naive_stats(model, history, attrs, i, j, k, t);
    let eta: f64 = model.theta.iter().zip(&s).map(|(a, b)| a * b).sum();
    model.baseline * eta.clamp(-500.0, 500.0).exp()
}

/// Every (i, j, k) with i != j, sender-major.
pub fn all_candidates(n: usize, k: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                for kk in 0..k {
                    out.push((i, j, kk));
                }
            }
        }
    }
    out
}

/// Per event: its own rate and the total rate over all candidates, each
/// evaluated at the event time under that event's attribute set.
fn per_event(model: &RateModel, history: &EventHistory, attrs: &[AttributeSet]) -> Vec<(f64, f64, f64)> {
    let cands = all_candidates(history.n_actors(), history.n_types());
    history
        .events()
        .iter()
        .enumerate()
        .map(|(e, ev)| {
            let a = &attrs[e.min(attrs.len() - 1)];
            let own = naive_rate(model, history, a, ev.sender.0, ev.receiver.0, ev.event_type.0, ev.time);
            let total: f64 = cands.iter().map(|&(i, j, k)| naive_rate(model, history, a, i, j, k, ev.time)).sum();
            (ev.time, own, total)
        })
        .collect()
}

pub fn naive_temporal(model: &RateModel, history: &EventHistory, attrs: &[AttributeSet], start: f64) -> f64 {
    let mut prev = start;
    let mut ll = 0.0;
    for (t, own, total) in per_event(model, history, attrs) {
        ll += own.ln() - (t - prev) * total;
        prev = t;
    }
    ll
}

pub fn naive_ordinal(model: &RateModel, history: &EventHistory, attrs: &[AttributeSet]) -> f64 {
    per_event(model, history, attrs).into_iter().map(|(_, own, total)| (own / total).ln()).sum()
}

pub struct RandomCase {
    pub model: RateModel,
    pub history: EventHistory,
    pub attrs: Vec<AttributeSet>,
}

/// A random history with random per-event trust values and coefficients.
pub fn random_case(seed: u64, n_actors: usize, n_types: usize, n_events: usize) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_life = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.5..5.0) };
    let specs = vec![
        StatisticSpec::Intercept,
        StatisticSpec::Inertia { half_life },
        StatisticSpec::Reciprocity { types: None, half_life },
        StatisticSpec::TrustGate { types: TypeSet::new([0, 1]).unwrap() },
    ];
    let theta = vec![
        rng.random_range(-1.0..1.0),
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.2..0.2),
        rng.random_range(-2.0..2.0),
    ];
    let model = RateModel::new(specs, theta, rng.random_range(0.5..2.0)).unwrap();
    let mut t = 0.0;
    let mut events = Vec::with_capacity(n_events);
    for _ in 0..n_events {
        // occasional exact ties exercise the strictly-before rule
        if !rng.random_bool(0.1) {
            t += rng.random_range(0.0..0.5);
        }
        let i = rng.random_range(0..n_actors);
        let mut j = rng.random_range(0..n_actors - 1);
        if j >= i {
            j += 1;
        }
        let k = rng.random_range(0..n_types);
        events.push(RelationalEvent::new(ActorId(i), ActorId(j), EventType(k), t).with_weight(rng.random_range(0.5..2.0)));
    }
    let history = EventHistory::from_events(n_actors, n_types, events).unwrap();
    let attrs = (0..n_events)
        .map(|_| {
            let mut a = AttributeSet::new();
            for i in 0..n_actors {
                for j in 0..n_actors {
                    if i != j {
                        a.set_trust(Dyad::new(ActorId(i), ActorId(j)).unwrap(), rng.random_range(0.0..1.0)).unwrap();
                    }
                }
            }
            a
        })
        .collect();
    RandomCase { model, history, attrs }
}

pub const RECOVERY_THETA: [f64; 3] = [0.0, 0.8, -0.6];

/// Intercept, fast-decaying inertia and a trust gate on type 0.
pub fn recovery_specs() -> Vec<StatisticSpec> {
    vec![
        StatisticSpec::Intercept,
        StatisticSpec::Inertia { half_life: 0.05 },
        StatisticSpec::TrustGate { types: TypeSet::new([0]).unwrap() },
    ]
}

/// Fixed random trust on every dyad of `n` actors.
pub fn random_trust(n: usize, rng: &mut impl Rng) -> AttributeSet {
    let mut a = AttributeSet::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a.set_trust(Dyad::new(ActorId(i), ActorId(j)).unwrap(), rng.random_range(0.0..1.0)).unwrap();
            }
        }
    }
    a
}

/// `m` events drawn exactly from `theta` over 5 actors and 2 types.
pub fn simulate_recovery(seed: u64, m: usize, theta: &[f64]) -> (EventHistory, AttributeSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attrs = random_trust(5, &mut rng);
    let model = RateModel::new(recovery_specs(), theta.to_vec(), 1.0).unwrap();
    let mut sampler = brem::rem::EventSampler::new(model, EventHistory::new(5, 2).unwrap(), 0.0).unwrap();
    for _ in 0..m {
        sampler.next_event(&attrs, f64::INFINITY, &mut rng).expect("unbounded horizon");
    }
    (sampler.into_history(), attrs)
}

/// Operator-style model on H (actor 0) and two robots: intercept, a human
/// boost on queries (type 0) and a trust gate on queries.
pub const OPERATOR_THETA: [f64; 3] = [-0.5, 1.5, -1.2];

pub fn operator_specs() -> Vec<StatisticSpec> {
    vec![
        StatisticSpec::Intercept,
        StatisticSpec::SenderAttr {
            name: "is_human".into(),
            types: Some(TypeSet::new([0]).unwrap()),
        },
        StatisticSpec::TrustGate { types: TypeSet::new([0]).unwrap() },
    ]
}

fn operator_attrs(trust: [f64; 6]) -> AttributeSet {
    let mut a = AttributeSet::new();
    a.set_actor(ActorId(0), "is_human", 1.0).unwrap();
    let mut idx = 0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                a.set_trust(Dyad::new(ActorId(i), ActorId(j)).unwrap(), trust[idx]).unwrap();
                idx += 1;
            }
        }
    }
    a
}

/// Grounding data: sessions with random known trust on every dyad, pooled
/// with per-event attributes.
pub fn operator_grounding(seed: u64, sessions: usize, per_session: usize) -> (EventHistory, Vec<AttributeSet>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let mut attrs = Vec::new();
    let mut offset = 0.0;
    for _ in 0..sessions {
        let trust: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let a = operator_attrs(trust);
        let model = RateModel::new(operator_specs(), OPERATOR_THETA.to_vec(), 1.0).unwrap();
        let mut s = brem::rem::EventSampler::new(model, EventHistory::new(3, 2).unwrap(), 0.0).unwrap();
        for _ in 0..per_session {
            s.next_event(&a, f64::INFINITY, &mut rng).unwrap();
        }
        let end = s.now();
        for e in s.history().events() {
            let mut e = *e;
            e.time += offset;
            events.push(e);
            attrs.push(a.clone());
        }
        offset += end;
    }
    (EventHistory::from_events(3, 2, events).unwrap(), attrs)
}

/// 20 windows of 30 s generated with true trust `beta` on both human dyads,
/// tracked with `model` from a uniform prior. Returns the final posterior
/// means and the worst normalization error seen over all updates.
pub fn track_true_trust(seed: u64, beta: f64, model: &RateModel) -> (Vec<f64>, f64) {
    use brem::trust::{InferenceConfig, TrustTracker};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = operator_attrs([beta, beta, 0.5, 0.5, 0.5, 0.5]);
    let gen = RateModel::new(operator_specs(), OPERATOR_THETA.to_vec(), 1.0).unwrap();
    let config = InferenceConfig::default();
    let window = config.window;
    let dyads = [(0, 1), (0, 2)].map(|(i, j)| Dyad::new(ActorId(i), ActorId(j)).unwrap());
    let priors: Vec<(Dyad, Option<f64>)> = dyads.iter().map(|d| (*d, None)).collect();
    let mut tracker = TrustTracker::new(config, model.clone(), &priors, 0.0).unwrap();
    let mut sampler = brem::rem::EventSampler::new(gen, EventHistory::new(3, 2).unwrap(), 0.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut means = Vec::new();
    for k in 1..=20 {
        let end = k as f64 * window;
        while sampler.next_event(&truth, end, &mut rng).is_some() {}
        let tel = tracker.advance(sampler.history(), &truth, end).unwrap();
        for t in &tel {
            worst = worst.max((t.posterior.iter().sum::<f64>() - 1.0).abs());
        }
        means = tel.iter().map(|t| t.mean).collect();
    }
    (means, worst)
}

/// Plan-existence check over the sub-task dependency graph, plus the
/// structural rules and a worst-case gas deadline. Returns the first problem.
pub fn feasibility(s: &brem::sim::ScenarioConfig) -> Result<(), String> {
    use std::collections::{HashSet, VecDeque};
    if s.buildings.len() < 4 {
        return Err("fewer than 4 buildings".into());
    }
    if s.buildings.iter().filter(|b| b.gas_leak).count() != 1 {
        return Err("leak count is not 1".into());
    }
    if !s.buildings.iter().any(|b| b.fire) {
        return Err("no fire-blocked building".into());
    }
    if !s.buildings.iter().any(|b| b.victims.iter().any(|v| v.injured)) {
        return Err("no injured victim".into());
    }
    let mut cells = HashSet::new();
    for b in &s.buildings {
        let c = b.cell;
        if c.x < 0 || c.y < 0 || c.x >= s.width || c.y >= s.height || c == s.shelter || !cells.insert(c) {
            return Err(format!("building {} badly placed", b.id));
        }
    }

    // tasks and their prerequisites, by index
    #[derive(PartialEq)]
    enum Task {
        Extinguish(usize),
        Search(usize),
        Shut(usize),
        Treat(usize, usize),
        Carry(usize),
    }
    let mut tasks = Vec::new();
    for (bi, b) in s.buildings.iter().enumerate() {
        if b.fire {
            tasks.push(Task::Extinguish(bi));
        }
        tasks.push(Task::Search(bi));
        if b.gas_leak {
            tasks.push(Task::Shut(bi));
        }
        for (vi, v) in b.victims.iter().enumerate() {
            if v.injured {
                tasks.push(Task::Treat(bi, vi));
                tasks.push(Task::Carry(tasks.len() - 1));
            }
        }
    }
    let pos = |t: &Task| tasks.iter().position(|x| x == t);
    let needs: Vec<Vec<usize>> = tasks
        .iter()
        .map(|t| match t {
            Task::Extinguish(_) => vec![],
            Task::Search(b) | Task::Shut(b) => pos(&Task::Extinguish(*b)).into_iter().collect(),
            Task::Treat(b, _) => vec![pos(&Task::Search(*b)).unwrap()],
            Task::Carry(treat) => vec![*treat],
        })
        .collect();
    let goal: u64 = (1u64 << tasks.len()) - 1;
    let mut seen = HashSet::from([0u64]);
    let mut queue = VecDeque::from([0u64]);
    let mut reached = false;
    while let Some(done) = queue.pop_front() {
        if done == goal {
            reached = true;
            break;
        }
        for (i, pre) in needs.iter().enumerate() {
            if done & (1 << i) == 0 && pre.iter().all(|p| done & (1 << p) != 0) {
                let next = done | (1 << i);
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
    if !reached {
        return Err("no plan completes every sub-task".into());
    }

    // a robot anywhere on the grid, starting when the leak is sensed, still shuts it in time
    let leak = s.buildings.iter().find(|b| b.gas_leak).unwrap();
    let far = [(0, 0), (s.width - 1, 0), (0, s.height - 1), (s.width - 1, s.height - 1)]
        .iter()
        .map(|&(x, y)| (leak.cell.x - x).unsigned_abs() + (leak.cell.y - y).unsigned_abs())
        .max()
        .unwrap() as u64;
    let work = (s.durations.shut + if leak.fire { s.durations.extinguish } else { 0 }) as u64;
    let deadline = (s.gas_threshold / s.gas_rate).ceil() as u64;
    let sensed = (s.detect_fraction * s.gas_threshold / s.gas_rate).ceil() as u64;
    if sensed + far + work > deadline {
        return Err(format!("leak sensed at {sensed}, needs {} more ticks, explodes at {deadline}", far + work));
    }
    Ok(())
}

/// Chi-square statistic and degrees of freedom for "leak building index is
/// uniform given the building count".
pub fn leak_uniformity(seeds: impl Iterator<Item = u64>, params: &brem::sim::ScenarioParams) -> (f64, usize) {
    use std::collections::BTreeMap;
    let mut counts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for seed in seeds {
        let s = brem::sim::generate_scenario(seed, params).unwrap();
        let n = s.buildings.len();
        let leak = s.buildings.iter().position(|b| b.gas_leak).unwrap();
        counts.entry(n).or_insert_with(|| vec![0; n])[leak] += 1;
    }
    let mut chi2 = 0.0;
    let mut df = 0;
    for c in counts.values() {
        let total: usize = c.iter().sum();
        let expected = total as f64 / c.len() as f64;
        chi2 += c.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum::<f64>();
        df += c.len() - 1;
    }
    (chi2, df)
}
