mod common;

use escort_hvac::controllers::ControllerKind;
use escort_hvac::metrics::{
    compare, constraint_violations, energy_between, energy_used, overshoot, report, tracking_rmse,
    transience, Comparison, MetricsError, SETTLING_BAND,
};
use escort_hvac::population::BoundedSimplex;
use escort_hvac::simulation::{run, SimError, Trace, TraceRow};

/// One-room trace from a payoff series, with the given allocations.
fn trace_of(payoffs: &[f64], allocation: &[[f64; 2]], dt: f64) -> Trace {
    let rows = payoffs
        .iter()
        .zip(allocation)
        .enumerate()
        .map(|(i, (&f, x))| TraceRow {
            time: i as f64 * dt,
            temperatures: vec![20.0 + f],
            setpoints: vec![20.0],
            allocation: x.to_vec(),
            payoffs: vec![f],
            escort: vec![0.0, 0.0],
            residual: f.abs(),
            objective: f * f / 2.0,
        })
        .collect();
    Trace {
        rooms: 1,
        zones: 1,
        dt,
        slack_payoff: 0.0,
        rows,
    }
}

fn simple(payoffs: &[f64]) -> Trace {
    trace_of(payoffs, &vec![[1.0, 1.0]; payoffs.len()], 1.0)
}

#[test]
fn rmse_examples() {
    assert_eq!(tracking_rmse(&simple(&[0.0; 5])).unwrap().aggregate, 0.0);
    assert_eq!(tracking_rmse(&simple(&[2.0; 5])).unwrap().aggregate, 2.0);
    assert_eq!(
        tracking_rmse(&simple(&[1.0, -1.0, 1.0, -1.0]))
            .unwrap()
            .aggregate,
        1.0
    );
    assert!(matches!(
        tracking_rmse(&simple(&[])),
        Err(MetricsError::EmptyTrace)
    ));
}

#[test]
fn overshoot_examples() {
    assert_eq!(
        overshoot(&simple(&[-3.0, -2.0, -1.0, -0.5, -0.1])),
        vec![0.0]
    );
    assert_eq!(
        overshoot(&simple(&[-3.0, -1.0, 0.5, 2.0, 1.0, 0.2, 0.0])),
        vec![2.0]
    );
    // Peaks before the first crossing do not occur when starting from below.
    assert_eq!(overshoot(&simple(&[-1.0, 0.0, 0.3])), vec![0.3]);
}

#[test]
fn transience_examples() {
    let monotone = simple(&[-3.0, -2.0, -1.0, -0.4, -0.1, 0.0]);
    let t = transience(&monotone, 0.5).unwrap();
    assert!(t.crossings <= 1);
    assert_eq!(t.settling_time, Some(3.0));

    let ringing = simple(&[-3.0, 2.0, -1.5, 1.0, -0.6, 0.3, -0.1]);
    let t = transience(&ringing, 0.5).unwrap();
    assert_eq!(t.crossings, 5);
    assert_eq!(t.settling_time, Some(5.0));

    let never = simple(&[-3.0, -2.0, -1.0, -0.9]);
    assert_eq!(transience(&never, 0.5).unwrap().settling_time, None);
    assert!(transience(&never, 0.0).is_err());
}

#[test]
fn violations_count_breaches() {
    let g = BoundedSimplex::uniform(2, 0.0, 2.0, 2.0).unwrap();
    let ok = trace_of(&[0.0; 3], &[[1.0, 1.0], [0.5, 1.5], [1.2, 0.8]], 1.0);
    assert_eq!(constraint_violations(&ok, &g), 0);
    let one = trace_of(&[0.0; 3], &[[1.0, 1.0], [-0.1, 2.1], [1.2, 0.8]], 1.0);
    // Both strategies leave the box in row 2.
    assert_eq!(constraint_violations(&one, &g), 2);
    let single = trace_of(&[0.0; 2], &[[1.0, 1.0], [2.1, 0.0]], 1.0);
    assert_eq!(constraint_violations(&single, &g), 2);
    let mass = trace_of(&[0.0; 2], &[[1.0, 1.0], [1.0, 0.9]], 1.0);
    assert_eq!(constraint_violations(&mass, &g), 1);
}

#[test]
fn failure_fixture_breaches_bounds() {
    let s = common::scenario("dip-failure.toml", ControllerKind::Dip);
    let Err(SimError::Aborted { partial, .. }) = run(&s) else {
        panic!("expected abort")
    };
    assert!(constraint_violations(&partial, &s.geometry) > 0);
}

#[test]
fn energy_examples() {
    let slack_only = trace_of(&[0.0; 4], &[[0.0, 2.0]; 4], 0.5);
    let e = energy_used(&slack_only);
    assert_eq!(e.delivered, 0.0);
    assert_eq!(e.slack, 3.0);
    let constant = trace_of(&[0.0; 11], &[[0.7, 1.3]; 11], 0.1);
    let e = energy_used(&constant);
    assert!((e.delivered - 0.7).abs() < 1e-12);
    assert!((e.delivered + e.slack - 2.0).abs() < 1e-12);
}

#[test]
fn energy_accounting_closes_on_every_fixture() {
    for (name, kind) in [
        ("desk-2room.toml", ControllerKind::Ded),
        ("desk-5room.toml", ControllerKind::Ded),
        ("desk-5room.toml", ControllerKind::Dip),
        ("reference-50.toml", ControllerKind::Ded),
        ("reference-50.toml", ControllerKind::Dip),
        ("fixed-point.toml", ControllerKind::Ed),
    ] {
        let s = common::scenario(name, kind);
        let e = energy_used(&run(&s).unwrap());
        let budget = s.geometry.total() * s.horizon;
        assert!(
            ((e.delivered + e.slack) - budget).abs() <= 1e-6 * budget,
            "{name} {kind}"
        );
        assert!((e.per_room.iter().sum::<f64>() - e.delivered).abs() <= 1e-9 * budget);
    }
}

#[test]
fn warm_afternoon_needs_less_heat_than_the_evening() {
    let s = common::scenario("reference-50.toml", ControllerKind::Ded);
    let trace = run(&s).unwrap();
    // Same setpoints in both windows; ambient averages about 12.4 C versus 9.9 C.
    let warm = energy_between(&trace, 13.0, 17.0);
    let cool = energy_between(&trace, 20.0, 24.0);
    assert!(
        warm.delivered < cool.delivered,
        "{} vs {}",
        warm.delivered,
        cool.delivered
    );
}

#[test]
fn halving_the_step_barely_moves_rmse() {
    let coarse = common::scenario("desk-5room.toml", ControllerKind::Ded);
    let mut fine = coarse.clone();
    fine.dt = coarse.dt / 2.0;
    let a = tracking_rmse(&run(&coarse).unwrap()).unwrap().aggregate;
    let b = tracking_rmse(&run(&fine).unwrap()).unwrap().aggregate;
    assert!((a - b).abs() < 0.05 * a, "{a} vs {b}");
}

fn ded_and_dip(
    name: &str,
) -> (
    escort_hvac::metrics::RunReport,
    escort_hvac::metrics::RunReport,
) {
    let file = common::load(name);
    let fingerprint = file.fingerprint();
    let one = |kind| {
        let s = file.scenario(kind).unwrap();
        report(
            &run(&s).unwrap(),
            &s.geometry,
            &fingerprint,
            kind.name(),
            SETTLING_BAND,
        )
        .unwrap()
    };
    (one(ControllerKind::Ded), one(ControllerKind::Dip))
}

#[test]
fn comparison_of_identical_reports_is_flat() {
    let (ded, _) = ded_and_dip("desk-2room.toml");
    let c = compare(&ded, &ded).unwrap();
    assert!(c.metrics.values().all(|m| m.delta.is_none_or(|d| d == 0.0)));
}

#[test]
fn comparison_ignores_row_order() {
    let (ded, dip) = ded_and_dip("desk-2room.toml");
    let c = compare(&ded, &dip).unwrap();
    let reversed = Comparison {
        metrics: c.metrics.clone().into_iter().rev().collect(),
        ..c.clone()
    };
    assert_eq!(c, reversed);
    let json = serde_json::to_string(&c).unwrap();
    assert_eq!(serde_json::from_str::<Comparison>(&json).unwrap(), c);
}

#[test]
fn comparison_rejects_other_scenarios() {
    let (a, _) = ded_and_dip("desk-2room.toml");
    let mut b = a.clone();
    b.scenario = "something-else".into();
    assert!(matches!(compare(&a, &b), Err(MetricsError::Provenance(..))));
}

#[test]
fn desk_fixture_baseline_carries_a_barrier_bias() {
    let (ded, dip) = ded_and_dip("desk-5room.toml");
    assert!(ded.steady_state_mean_abs_payoff < dip.steady_state_mean_abs_payoff);
    assert!(ded.crossings <= dip.crossings);
    assert_eq!(ded.constraint_violations, 0);
}

#[test]
fn reference_overshoot_and_transience_favor_escort_dynamics() {
    let (ded, dip) = ded_and_dip("reference-50.toml");
    assert!(ded.peak_overshoot <= dip.peak_overshoot);
    assert!(ded.crossings <= dip.crossings);
    assert!(dip.crossings >= 2);
}
