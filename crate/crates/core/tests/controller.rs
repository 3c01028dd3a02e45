use brem::controller::{
    coordinate_autonomy, decide_compliance, detect_inflection, select_repair, AutonomyState, Compliance,
    ControllerConfig, Phase, RepairContext, RepairKind, RobotController, TemplateSet, ViolationCause,
};

#[test]
fn alpha_and_autonomy_sum_to_one() {
    for i in 0..=1000 {
        let l = i as f64 / 1000.0;
        let s = AutonomyState::new(l).unwrap();
        assert_eq!(s.alpha() + s.l_alpha(), 1.0, "{l}");
    }
    assert!(AutonomyState::new(1.01).is_err());
    assert!(AutonomyState::new(f64::NAN).is_err());
}

#[test]
fn trust_maps_onto_the_fixed_levels() {
    let c = ControllerConfig::default();
    assert_eq!(coordinate_autonomy(0.9, Phase::Evolutionary, &c), 0.9);
    assert_eq!(coordinate_autonomy(0.1, Phase::Evolutionary, &c), 0.1);
    assert_eq!(coordinate_autonomy(0.9, Phase::Revolutionary, &c), c.revolutionary_cap);
    assert_eq!(coordinate_autonomy(0.1, Phase::Revolutionary, &c), 0.1);
}

#[test]
fn obey_frequency_matches_the_autonomy_level() {
    let n = 10_000;
    let obeyed = (0..n)
        .filter(|&seed| decide_compliance(0.9, seed).unwrap().outcome == Compliance::Obey)
        .count();
    let freq = obeyed as f64 / n as f64;
    assert!((freq - 0.10).abs() <= 0.01, "{freq}");
}

#[test]
fn extreme_levels_are_deterministic() {
    for seed in 0..500 {
        assert_eq!(decide_compliance(0.0, seed).unwrap().outcome, Compliance::Obey);
        assert_eq!(decide_compliance(1.0, seed).unwrap().outcome, Compliance::Refuse);
    }
}

#[test]
fn early_windows_are_teaming_onset() {
    let c = ControllerConfig::default();
    let s = AutonomyState::new(0.5).unwrap();
    let d = detect_inflection(&[0.6], &s, &c).unwrap();
    assert_eq!((d.phase, d.cause), (Phase::Revolutionary, Some(ViolationCause::TeamingOnset)));
    assert!(detect_inflection(&[], &s, &c).is_err());
}

#[test]
fn a_sharp_drop_is_a_violation_and_recovery_settles() {
    let c = ControllerConfig::default();
    let mut s = AutonomyState::new(0.5).unwrap();
    s.phase = Phase::Evolutionary;
    let steady = [0.7, 0.7, 0.7, 0.7, 0.7];
    let d = detect_inflection(&steady, &s, &c).unwrap();
    assert_eq!((d.phase, d.cause), (Phase::Evolutionary, None));

    let dropped = [0.7, 0.7, 0.7, 0.7, 0.7, 0.45];
    let d = detect_inflection(&dropped, &s, &c).unwrap();
    assert_eq!((d.phase, d.cause), (Phase::Revolutionary, Some(ViolationCause::CounterCommand)));
    s.phase = d.phase;
    s.phase_entered_at = d.entered_at;
    s.last_violation_cause = d.cause;

    let rising = [0.7, 0.7, 0.7, 0.7, 0.7, 0.45, 0.5, 0.55, 0.6];
    let d = detect_inflection(&rising, &s, &c).unwrap();
    assert_eq!(d.phase, Phase::Evolutionary);

    let low = [0.7, 0.7, 0.7, 0.7, 0.2];
    let d = detect_inflection(&low, &AutonomyState::new(0.5).unwrap(), &c).unwrap();
    assert_eq!(d.cause, Some(ViolationCause::CounterCommand));
}

#[test]
fn controller_never_exceeds_the_cap_while_revolutionary() {
    let mut ctl = RobotController::trust_preserved(1, ControllerConfig::default(), 0.5).unwrap();
    let series = [0.9, 0.95, 0.9, 0.9, 0.5, 0.95, 0.97, 0.99, 1.0, 1.0, 1.0];
    for &b in &series {
        let tel = ctl.on_window(b, false).unwrap();
        if tel.phase == Phase::Revolutionary {
            assert!(tel.l_alpha <= 0.5, "{tel:?}");
        }
    }
    assert_eq!(ctl.state().phase, Phase::Evolutionary);
}

#[test]
fn repair_table() {
    let t = TemplateSet::default();
    let none = RepairContext::default();
    let fault = RepairContext {
        robot_at_fault: true,
        ..Default::default()
    };
    let kind = |cause, ctx: &RepairContext| select_repair(cause, ctx, &t).unwrap()[0].kind;
    assert_eq!(kind(ViolationCause::TeamingOnset, &none), RepairKind::ConveyUncertainty);
    assert_eq!(kind(ViolationCause::PerceivedUnethical, &none), RepairKind::Control);
    assert_eq!(kind(ViolationCause::CounterCommand, &fault), RepairKind::Apology);
    assert_eq!(kind(ViolationCause::CounterCommand, &none), RepairKind::Denial);

    let critical = RepairContext {
        critical_state_present: true,
        building: Some(3),
        ..Default::default()
    };
    let r = select_repair(ViolationCause::CounterCommand, &critical, &t).unwrap();
    assert_eq!(r.iter().map(|s| s.kind).collect::<Vec<_>>(), [RepairKind::Denial, RepairKind::ShowCriticalStates]);
    assert!(r[1].message.contains("Building 3"), "{}", r[1].message);
}
