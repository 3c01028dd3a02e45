mod common;

use brem::sim::{generate_scenario, ScenarioParams};
use common::{feasibility, leak_uniformity};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn a_thousand_scenarios_are_feasible() {
    let params = ScenarioParams::default();
    for seed in 0..1000 {
        let s = generate_scenario(seed, &params).unwrap();
        if let Err(why) = feasibility(&s) {
            panic!("seed {seed}: {why}");
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let params = ScenarioParams::default();
    for seed in [0, 1, 77, u64::MAX] {
        assert_eq!(generate_scenario(seed, &params).unwrap(), generate_scenario(seed, &params).unwrap());
    }
    assert_ne!(generate_scenario(1, &params).unwrap(), generate_scenario(2, &params).unwrap());
}

#[test]
fn leak_building_is_uniform() {
    let (chi2, df) = leak_uniformity(0..1000, &ScenarioParams::default());
    let critical = ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical} at df {df}");
}

#[test]
fn tight_slack_still_leaves_a_robot_time() {
    let params = ScenarioParams {
        gas_slack: 1.0,
        ..ScenarioParams::default()
    };
    let late = (0..300)
        .filter(|&s| feasibility(&generate_scenario(s, &params).unwrap()).is_err())
        .count();
    // with no slack the ceiling on the sensing tick can eat the margin; the default never does
    assert!(late < 300);
}
