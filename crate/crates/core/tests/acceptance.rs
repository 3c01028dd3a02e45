//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use brem::controller::{coordinate_autonomy, decide_compliance, AutonomyState, Compliance, ControllerConfig, Phase, RobotController};
use brem::estimation::{fit_mle, FitConfig};
use brem::harness::{grounding_run, replay, run_compare, HarnessConfig};
use brem::rem::{
    next_event_distribution, ordinal_log_likelihood, temporal_log_likelihood, ActorId, AttributeSet, Dyad, EventHistory,
    EventType, LikelihoodMode, RateModel, RelationalEvent, StatisticSpec, TypeSet,
};
use brem::sim::log::log_to_string;
use brem::sim::{audit_log, generate_scenario, ScenarioParams};
use brem::trust::{init_prior, update_posterior, ObservationWindow, TrustGrid, TrustPosterior};
use common::*;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn likelihood_oracle() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let c = random_case(seed, 5, 5, 200);
        let t = temporal_log_likelihood(&c.model, &c.history, c.attrs.as_slice(), 0.0).map_err(|e| e.to_string())?;
        let o = ordinal_log_likelihood(&c.model, &c.history, c.attrs.as_slice()).map_err(|e| e.to_string())?;
        worst = worst
            .max(relative_gap(t, naive_temporal(&c.model, &c.history, &c.attrs, 0.0)))
            .max(relative_gap(o, naive_ordinal(&c.model, &c.history, &c.attrs)));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-10, || format!("relative gap {worst:e}"))?;
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("50 histories, worst relative gap {worst:.1e}, {secs:.2} s"))
}

fn normalization() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..1000 {
        let c = random_case(10_000 + seed, 4, 3, 30);
        let t = c.history.events()[seed as usize % 30].time + 0.01;
        let d = next_event_distribution(&c.model, &c.history, &c.attrs[0], t).map_err(|e| e.to_string())?;
        worst = worst.max((d.candidates.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs());
    }
    // ordinal terms: every possible next event appended to a prefix
    let mut worst_ordinal: f64 = 0.0;
    for seed in 0..100 {
        let c = random_case(20_000 + seed, 3, 2, 12);
        let base = ordinal_log_likelihood(&c.model, &c.history, c.attrs.as_slice()).map_err(|e| e.to_string())?;
        let t = c.history.events().last().unwrap().time + 0.3;
        let attrs: Vec<AttributeSet> = c.attrs.iter().cloned().chain([c.attrs[0].clone()]).collect();
        let mut sum = 0.0;
        for (i, j, k) in all_candidates(3, 2) {
            let mut events = c.history.events().to_vec();
            events.push(RelationalEvent::new(ActorId(i), ActorId(j), EventType(k), t));
            let h = EventHistory::from_events(3, 2, events).map_err(|e| e.to_string())?;
            sum += (ordinal_log_likelihood(&c.model, &h, attrs.as_slice()).map_err(|e| e.to_string())? - base).exp();
        }
        worst_ordinal = worst_ordinal.max((sum - 1.0).abs());
    }
    ensure(worst <= 1e-12, || format!("next-event mass error {worst:e}"))?;
    ensure(worst_ordinal <= 1e-12, || format!("ordinal mass error {worst_ordinal:e}"))?;
    Ok(format!("1000 states, mass error {worst:.1e}; ordinal {worst_ordinal:.1e}"))
}

fn mle_recovery() -> Check {
    let mut good = 0;
    let mut slowest: f64 = 0.0;
    for seed in 0..10 {
        let (h, attrs) = simulate_recovery(seed, 5000, &RECOVERY_THETA);
        let start = Instant::now();
        let fit = fit_mle(&h, &attrs, &recovery_specs(), &FitConfig::default()).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let err = fit.theta_star.iter().zip(RECOVERY_THETA).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        good += (fit.converged && err <= 0.15) as usize;
    }
    let events = (1..=100).map(|e| {
        let (i, j) = if e % 2 == 0 { (0, 1) } else { (1, 0) };
        RelationalEvent::new(ActorId(i), ActorId(j), EventType(0), e as f64 * 0.5)
    });
    let h = EventHistory::from_events(2, 1, events).map_err(|e| e.to_string())?;
    let cfg = FitConfig {
        mode: LikelihoodMode::Temporal,
        ..FitConfig::default()
    };
    let poisson = fit_mle(&h, &AttributeSet::new(), &[StatisticSpec::Intercept], &cfg).map_err(|e| e.to_string())?;
    let p = poisson.theta_star[0];
    ensure(good >= 9, || format!("{good}/10 seeds within 0.15"))?;
    ensure(p.abs() <= 0.05, || format!("Poisson intercept {p}"))?;
    ensure(slowest < 60.0, || format!("slowest fit {slowest:.1} s"))?;
    Ok(format!("{good}/10 seeds within 0.15, Poisson intercept {p:.4}, slowest fit {slowest:.2} s"))
}

fn posterior() -> Check {
    let d01 = Dyad::new(ActorId(0), ActorId(1)).unwrap();
    let one = EventHistory::from_events(2, 1, [RelationalEvent::new(ActorId(0), ActorId(1), EventType(0), 1.0)]).unwrap();
    let w = ObservationWindow::new(0, 0.0, 2.0).unwrap();

    // (a) a model without trust terms leaves the prior as it was
    let grid = TrustGrid::uniform(51).unwrap();
    let prior = init_prior(Some(0.7), &grid, 5.0).map_err(|e| e.to_string())?;
    let free = RateModel::new(vec![StatisticSpec::Intercept, StatisticSpec::inertia()], vec![0.3, 0.2], 1.0).unwrap();
    for mode in [LikelihoodMode::Temporal, LikelihoodMode::Ordinal] {
        let post = update_posterior(&prior, &w, &free, &one, &AttributeSet::new(), d01, mode).map_err(|e| e.to_string())?;
        ensure(post.log_probs() == prior.log_probs(), || "trust-free update moved the prior".into())?;
    }

    // (b) two-point grid against hand-computed Bayes
    let g = 0.9f64;
    let gated = RateModel::new(
        vec![StatisticSpec::Intercept, StatisticSpec::TrustGate { types: TypeSet::new([0]).unwrap() }],
        vec![0.0, g],
        1.0,
    )
    .unwrap();
    let two = TrustPosterior::uniform(TrustGrid::from_points(vec![0.2, 0.8]).unwrap());
    let w1 = ObservationWindow::new(0, 0.0, 1.0).unwrap();
    let post = update_posterior(&two, &w1, &gated, &one, &AttributeSet::new(), d01, LikelihoodMode::Temporal)
        .map_err(|e| e.to_string())?;
    let ll = |b: f64| g * b - ((g * b).exp() + 1.0);
    let lo = 1.0 / (1.0 + (ll(0.8) - ll(0.2)).exp());
    let p = post.probs();
    ensure((p[0] - lo).abs() < 1e-12 && (p[1] - (1.0 - lo)).abs() < 1e-12, || format!("{p:?} vs {lo}"))?;

    // (c) tracking true trust with a fitted model
    let (h, attrs) = operator_grounding(1, 12, 400);
    let cfg = FitConfig {
        mode: LikelihoodMode::Temporal,
        ..FitConfig::default()
    };
    let fit = fit_mle(&h, &attrs, &operator_specs(), &cfg).map_err(|e| e.to_string())?;
    let model = RateModel::new(operator_specs(), fit.theta_star, 1.0).unwrap();
    let (mut seeds_ok, mut worst_mass) = (0, 0.0f64);
    for seed in 0..50 {
        let (means, worst) = track_true_trust(seed, 0.8, &model);
        worst_mass = worst_mass.max(worst);
        seeds_ok += means.iter().all(|m| (m - 0.8).abs() <= 0.1) as usize;
    }
    ensure(seeds_ok >= 45, || format!("{seeds_ok}/50 seeds within 0.1"))?;
    ensure(worst_mass <= 1e-9, || format!("mass error {worst_mass:e}"))?;
    Ok(format!("prior kept exactly, hand Bayes exact, {seeds_ok}/50 seeds within 0.1, mass error {worst_mass:.1e}"))
}

fn controller() -> Check {
    for i in 0..=1000 {
        let s = AutonomyState::new(i as f64 / 1000.0).map_err(|e| e.to_string())?;
        ensure(s.alpha() + s.l_alpha() == 1.0, || format!("alpha + L_alpha != 1 at {}", s.l_alpha()))?;
    }
    let c = ControllerConfig::default();
    for level in [0.9, 0.1] {
        let l = coordinate_autonomy(level, Phase::Evolutionary, &c);
        ensure(l == level, || format!("L_beta {level} maps to {l}"))?;
    }
    let obeyed = (0..10_000u64)
        .filter(|&s| decide_compliance(0.9, s).map(|d| d.outcome == Compliance::Obey).unwrap_or(false))
        .count();
    let freq = obeyed as f64 / 10_000.0;
    ensure((freq - 0.1).abs() <= 0.01, || format!("obey frequency {freq}"))?;
    let mut ctl = RobotController::trust_preserved(1, c.clone(), 0.9).map_err(|e| e.to_string())?;
    let mut capped = 0;
    for k in 0..400 {
        let b = 0.5 + 0.5 * ((k as f64) * 0.7).sin();
        let tel = ctl.on_window(b, false).map_err(|e| e.to_string())?;
        if tel.phase == Phase::Revolutionary {
            ensure(tel.l_alpha <= c.revolutionary_cap, || format!("cap exceeded: {tel:?}"))?;
            capped += 1;
        }
    }
    Ok(format!("obey frequency {freq:.4}, fixed levels kept, cap held over {capped} revolutionary windows"))
}

fn closed_loop() -> Check {
    let start = Instant::now();
    let cfg = HarnessConfig::default();
    let g = grounding_run(&cfg).map_err(|e| e.to_string())?;
    let run = run_compare(&cfg, &g, false).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let t = &run.table;
    let (tp, base) = ("trust_preserved_sa", "baseline_sa");
    let (s_tp, s_b) = (t.summary(tp).unwrap(), t.summary(base).unwrap());
    let oriented = |metric: &str| {
        let c = t.comparison(metric, tp, base).unwrap();
        let (more, less) = if c.a == tp { (c.test.positive, c.test.negative) } else { (c.test.negative, c.test.positive) };
        (more, less, c.test.p_value)
    };
    let (sw, sl, sp) = oriented("success");
    let (cw, cl, cp) = oriented("n_commands");
    let detail = format!(
        "success {:.3} vs {:.3} (p {sp:.4}), commands {:.2} vs {:.2} (p {cp:.2e}), {} trials, {secs:.1} s",
        s_tp.success_rate, s_b.success_rate, s_tp.commands_mean, s_b.commands_mean, s_tp.n_trials
    );
    ensure(s_tp.n_trials == 200, || detail.clone())?;
    ensure(s_tp.success_rate > s_b.success_rate && sw > sl && sp < 0.05, || detail.clone())?;
    ensure(s_tp.commands_mean < s_b.commands_mean && cl > cw && cp < 0.05, || detail.clone())?;
    ensure(s_tp.success_rate >= 0.95, || detail.clone())?;
    ensure(secs < 300.0, || detail.clone())?;
    Ok(detail)
}

fn scenario_invariants() -> Check {
    let params = ScenarioParams::default();
    for seed in 0..1000 {
        let s = generate_scenario(seed, &params).map_err(|e| e.to_string())?;
        feasibility(&s).map_err(|why| format!("scenario {seed}: {why}"))?;
    }
    let cfg = HarnessConfig::default();
    let g = grounding_run(&cfg).map_err(|e| e.to_string())?;
    let first = run_compare(&cfg, &g, true).map_err(|e| e.to_string())?;
    let second = run_compare(&cfg, &g, true).map_err(|e| e.to_string())?;
    let mut violations = 0;
    let mut windows = 0;
    for (a, b) in first.logs.iter().zip(&second.logs) {
        violations += audit_log(&a.records).len();
        let ta = log_to_string(&a.records).map_err(|e| e.to_string())?;
        let tb = log_to_string(&b.records).map_err(|e| e.to_string())?;
        ensure(ta == tb, || format!("seed {} {} logs differ", a.seed, a.condition.name()))?;
        let r = replay(&a.records, Some(&cfg.inference)).map_err(|e| e.to_string())?;
        ensure(r.identical(), || format!("seed {} {} replay differs", a.seed, a.condition.name()))?;
        windows += r.logged.len();
    }
    ensure(violations == 0, || format!("{violations} rule violations"))?;
    Ok(format!(
        "1000 feasible, {} logs with 0 violations, byte-identical reruns, {windows} windows replayed bitwise",
        first.logs.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("likelihood oracle equivalence", likelihood_oracle),
        ("normalization", normalization),
        ("MLE recovery", mle_recovery),
        ("posterior correctness", posterior),
        ("controller algebra", controller),
        ("closed-loop direction", closed_loop),
        ("scenario and world invariants", scenario_invariants),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
