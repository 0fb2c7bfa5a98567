//! One test per acceptance criterion, each printing a single `ACCEPTANCE` line.
//!
//! Run with `cargo test -p ftsmfc --test acceptance -- --nocapture --test-threads=1`.

use std::time::Instant;

use ftsmfc::sim::config::{ControlLaw, ObserverOrder};
use ftsmfc::sim::output::{compute_metrics, write_csv};
use ftsmfc::sim::verify::{
    check_closed_loop_identities, check_constant_rejection, check_gain_at_origin, check_gamma,
    check_lemma1, check_observer_ultimate_bound, check_ramp_rejection, check_rho,
    check_tracking_neighborhood, PropertyResult,
};
use ftsmfc::sim::{run_closed_loop_partial, SimConfig};

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {id} {}: {title} -- {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn report_props(id: u32, title: &str, props: &[PropertyResult]) -> bool {
    let pass = props.iter().all(PropertyResult::passed);
    let detail: Vec<String> = props.iter().map(|p| p.to_string()).collect();
    report(id, title, pass, &detail.join("; "));
    pass
}

#[test]
fn criterion_1_pendulum_experiment() {
    let cfg = SimConfig::reference();
    let start = Instant::now();
    let (log, failure) = run_closed_loop_partial(&cfg);
    let elapsed = start.elapsed().as_secs_f64();
    let (pass, detail) = match failure {
        Some(e) => (false, format!("run aborted after {} of 7001 records: {e}; {elapsed:.3} s", log.len())),
        None => {
            let m = compute_metrics(&log, 20.0, &[0.5, 0.05]).unwrap();
            let (ex, et) = (m["ex.max_abs"], m["etheta.max_abs"]);
            (
                ex < 0.5 && et < 0.05 && elapsed < 5.0 && log.len() == 7001,
                format!("max|e_x| = {ex:.4} m, max|e_theta| = {et:.4} rad after 20 s; {elapsed:.3} s"),
            )
        }
    };
    report(1, "pendulum experiment steady-state bounds 0.5 m / 0.05 rad, < 5 s", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_2_constant_disturbance_rejection() {
    let props = [
        check_constant_rejection(ObserverOrder::First, 100, 500, 2001),
        check_constant_rejection(ObserverOrder::Second, 100, 500, 2002),
    ];
    assert!(report_props(2, "constant F rejected to 1e-9 within 500 steps", &props));
}

#[test]
fn criterion_3_ramp_rejection() {
    let props = [check_ramp_rejection(100, 1000, 3001)];
    assert!(report_props(3, "ramp F rejected to 1e-9 within 1000 steps", &props));
}

#[test]
fn criterion_4_observer_ultimate_bound() {
    let props: Vec<_> = [0.01, 0.1, 1.0]
        .into_iter()
        .map(|b| check_observer_ultimate_bound(b, 100, 10_000, 4001))
        .collect();
    assert!(report_props(4, "observer error never leaves rho|e| <= B after entry", &props));
}

#[test]
fn criterion_5_tracking_neighborhood() {
    let props: Vec<_> = [0.01, 0.1, 1.0]
        .into_iter()
        .map(|b| check_tracking_neighborhood(b, 100, 10_000, 5001))
        .collect();
    assert!(report_props(5, "tracking error enters sigma|e| <= B in finite time and stays", &props));
}

#[test]
fn criterion_6_lemma1_properties() {
    let (reach, cond, holder) = check_lemma1(10_000, 6001);
    assert!(report_props(
        6,
        "recursion reaches 0, decrement condition, Hoelder continuity",
        &[reach, cond, holder]
    ));
}

#[test]
fn criterion_7_algebraic_identities() {
    let props = [
        check_gamma(1_000_000, 7001),
        check_rho(1_000_000, 7002),
        check_gain_at_origin(),
        check_closed_loop_identities(ControlLaw::Basic, 100, 7003),
        check_closed_loop_identities(ControlLaw::Fts, 100, 7004),
    ];
    assert!(report_props(7, "gamma, rho, D(0)=C(0)=B(0)=-1, closed-loop identities", &props));
}

#[test]
fn criterion_8_determinism() {
    let cfg = SimConfig::reference();
    let csv = || {
        let (log, _) = run_closed_loop_partial(&cfg);
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        (buf, log.len())
    };
    let (a, n) = csv();
    let (b, _) = csv();
    let pass = a == b && n > 0;
    report(8, "two reference runs give byte-identical CSV", pass, &format!("{} bytes, {n} records", a.len()));
    assert!(pass);
}
