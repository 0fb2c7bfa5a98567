//! Seeded property suites over the library's stability and robustness claims.
//!
//! Each check returns a [`PropertyResult`] with the sample count, the number of
//! failing samples and the worst margin seen (positive = satisfied with room to
//! spare, negative = violated by that much). The sizes are parameters so the
//! same checks back both the quick CLI suites and the full acceptance run.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fts_core::{
    fts_recursion, gamma_of_v, holder_gain, robustness_radius, robustness_radius_from_zeta,
    verify_fts_condition, verify_holder_continuity, HolderGainParams,
};
use crate::plant_models::{DisturbanceKind, DisturbanceSource, NoiseConfig, SyntheticUlmPlant};
use crate::tracking_control::{control_law_fts, fts_correction, in_neighborhood_y, ControlGains};
use crate::ulm_observer::{
    in_neighborhood_f, FirstOrderObserverState, SecondOrderObserverState, UlmObserver,
};

use super::config::{ControlLaw, ObserverOrder};
use super::harness::{run_loop, LoopSetup, SimLog};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub samples: u64,
    pub failures: u64,
    /// Smallest slack over all samples; negative when violated.
    pub worst_margin: f64,
    pub detail: String,
}

impl PropertyResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            samples: 0,
            failures: 0,
            worst_margin: f64::INFINITY,
            detail: String::new(),
        }
    }

    fn record(&mut self, ok: bool, margin: f64) {
        self.samples += 1;
        if !ok {
            self.failures += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.samples > 0
    }
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}/{} ok, worst margin {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.samples - self.failures,
            self.samples,
            self.worst_margin
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub suite: String,
    pub properties: Vec<PropertyResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}", self.suite)?;
        for p in &self.properties {
            writeln!(f, "  {p}")?;
        }
        write!(f, "suite {}: {}", self.suite, if self.passed() { "PASS" } else { "FAIL" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemma1,
    Holder,
    Gamma,
    Rho,
    Observer1,
    Observer2,
    Control,
    Robustness,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Lemma1,
        Suite::Holder,
        Suite::Gamma,
        Suite::Rho,
        Suite::Observer1,
        Suite::Observer2,
        Suite::Control,
        Suite::Robustness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Holder => "holder",
            Suite::Gamma => "gamma",
            Suite::Rho => "rho",
            Suite::Observer1 => "observer1",
            Suite::Observer2 => "observer2",
            Suite::Control => "control",
            Suite::Robustness => "robustness",
        }
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                format!("unknown suite {s:?}; expected one of {} or all", names.join(", "))
            })
    }
}

/// Runs one suite with its default (CLI) sample sizes and fixed seeds.
pub fn verify_suite(suite: Suite) -> Report {
    let properties = match suite {
        Suite::Lemma1 => {
            let (reach, cond, _) = check_lemma1(10_000, 1);
            vec![reach, cond]
        }
        Suite::Holder => vec![check_lemma1(10_000, 1).2],
        Suite::Gamma => vec![check_gamma(1_000_000, 2), check_gain_at_origin()],
        Suite::Rho => vec![check_rho(1_000_000, 3)],
        Suite::Observer1 => vec![
            check_observer_recursion(ObserverOrder::First, 200, 4),
            check_constant_rejection(ObserverOrder::First, 20, 500, 5),
        ],
        Suite::Observer2 => vec![
            check_observer_recursion(ObserverOrder::Second, 200, 6),
            check_constant_rejection(ObserverOrder::Second, 20, 500, 7),
            check_ramp_rejection(20, 1000, 8),
        ],
        Suite::Control => vec![
            check_closed_loop_identities(ControlLaw::Basic, 50, 9),
            check_closed_loop_identities(ControlLaw::Fts, 50, 10),
        ],
        Suite::Robustness => {
            let mut v: Vec<_> = [0.01, 0.1, 1.0]
                .into_iter()
                .map(|b| check_observer_ultimate_bound(b, 20, 10_000, 11))
                .collect();
            v.push(check_tracking_neighborhood(0.1, 20, 10_000, 12));
            v
        }
    };
    Report {
        suite: suite.name().into(),
        properties,
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Finite-time recursion properties over random `(V0, η, α)`: V0 log-uniform in `[1e-6, 1e6]`,
/// η uniform in `[1e-3, 10]`, α uniform in `[0.05, 0.95]`.
///
/// Returns (reaches zero within `⌊V0/ε⌋ + 1` steps, decrement condition, Hölder continuity).
pub fn check_lemma1(samples: u64, seed: u64) -> (PropertyResult, PropertyResult, PropertyResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reach = PropertyResult::new("recursion reaches 0 within floor(V0/eps)+1 steps");
    let mut cond = PropertyResult::new("trace satisfies the FTS decrement condition");
    let mut holder = PropertyResult::new("trace is Hoelder continuous with constant eps");
    let mut max_steps_seen = 0usize;
    for _ in 0..samples {
        let v0 = log_uniform(&mut rng, 1e-6, 1e6);
        let eta: f64 = rng.gen_range(1e-3..=10.0);
        let alpha: f64 = rng.gen_range(0.05..=0.95);
        let eps = eta.powf(1.0 / (1.0 - alpha));
        // for V >= ε each step removes at least η ε^α = ε; below ε one step reaches 0
        let bound = (v0 / eps).floor() + 1.0;
        let cap = bound.min(1e9) as usize;
        let (trace, reached) = fts_recursion(v0, eta, alpha, cap).expect("valid recursion input");
        let n = reached.map_or(f64::INFINITY, |n| n as f64);
        max_steps_seen = max_steps_seen.max(reached.unwrap_or(cap));
        reach.record(n <= bound, (bound - n) / bound);
        let ok = verify_fts_condition(&trace, |_| eta, eps);
        cond.record(ok, if ok { 0.0 } else { -1.0 });
        let ok = verify_holder_continuity(&trace, eps);
        holder.record(ok, if ok { 0.0 } else { -1.0 });
    }
    reach.detail = format!("longest recursion {max_steps_seen} steps");
    holder.detail = format!("{} of {} traces satisfy it", holder.samples - holder.failures, holder.samples);
    (reach, cond, holder)
}

/// `γ(V)` against `(1 - D(V)²)·V^(1-1/r)` at 1e-12 relative, with random gains.
///
/// Exponents are drawn from `[1.05, 1.95]` (closer to 1 the power `1/a` overflows V)
/// and V so that `V^a/λ ∈ [1e-3, 1e3]`: outside that range `1 - D²` is a
/// difference of nearly equal numbers and the reference itself loses the digits.
pub fn check_gamma(samples: u64, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = PropertyResult::new("gamma(V) = (1 - D^2) V^(1-1/r) to 1e-12 relative");
    for _ in 0..samples {
        let r = rng.gen_range(1.05..1.95);
        let lambda = log_uniform(&mut rng, 1e-2, 1e2);
        let params = HolderGainParams::new(r, lambda).expect("valid gain");
        let a = params.holder_power();
        let ratio = log_uniform(&mut rng, 1e-3, 1e3);
        let v = (ratio * lambda).powf(1.0 / a);
        let d = params.gain_from_quadratic(v);
        let reference = (1.0 - d * d) * v.powf(a);
        let g = gamma_of_v(v, &params).expect("V >= 0");
        let rel = ((g - reference) / reference).abs();
        res.record(rel <= 1e-12, 1e-12 - rel);
    }
    res
}

/// `D(0) = C(0) = B(0) = -1` exactly, with and without a weight, in several dimensions.
pub fn check_gain_at_origin() -> PropertyResult {
    let mut res = PropertyResult::new("gain at the origin is exactly -1");
    let gains = [
        HolderGainParams::new(9.0 / 7.0, 1.5).unwrap(),
        HolderGainParams::new(11.0 / 9.0, 0.35).unwrap(),
        HolderGainParams::new(7.0 / 5.0, 2.0).unwrap(),
    ];
    for n in 1..=4 {
        for p in &gains {
            let weighted = p.clone().with_scalar_weight(2.1, n).unwrap();
            for q in [p, &weighted] {
                let g = holder_gain(&DVector::zeros(n), q).unwrap();
                res.record(g == -1.0, -(g + 1.0).abs());
            }
        }
    }
    res
}

/// `ρ(ζ) = 1 + √(1-ζ)` against the defining quotient `ζ / (1 - √(1-ζ))`, ζ log-uniform in `[1e-6, 1]`.
///
/// The quotient is evaluated as `ζ / -expm1(½·ln1p(-ζ))` so the reference keeps full
/// precision where `1 - √(1-ζ)` would cancel.
pub fn check_rho(samples: u64, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = PropertyResult::new("rho(zeta) = 1 + sqrt(1-zeta) to 1e-12 relative");
    let mut check = |zeta: f64| {
        let quotient = zeta / -(0.5 * (-zeta).ln_1p()).exp_m1();
        let a = robustness_radius_from_zeta(zeta);
        let b = robustness_radius(-(1.0 - zeta).sqrt());
        let rel = ((a - quotient) / quotient).abs().max(((b - quotient) / quotient).abs());
        res.record(rel <= 1e-12, 1e-12 - rel);
    };
    check(1e-6);
    check(1.0);
    for _ in 0..samples {
        check(log_uniform(&mut rng, 1e-6, 1.0));
    }
    res
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..=scale))
}

fn random_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DVector<f64> {
    loop {
        let v = random_vec(rng, n, 1.0);
        if v.norm() <= 1.0 {
            return v * radius;
        }
    }
}

fn reference_observer() -> HolderGainParams {
    HolderGainParams::new(9.0 / 7.0, 1.5).unwrap()
}

fn reference_controller() -> HolderGainParams {
    HolderGainParams::new(11.0 / 9.0, 0.35).unwrap()
}

/// Observer error recursions on random sinusoidal `F`:
/// first order `e^F_{k+1} = D(e^F_k)e^F_k - ΔF_k`;
/// second order `e^Δ_k = D(e^Δ_{k-1})e^Δ_{k-1} - Δ²F_{k-1}` and
/// `e^F_{k+1} = D(e^F_k)e^F_k + e^Δ_k`.
pub fn check_observer_recursion(order: ObserverOrder, trials: u64, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = match order {
        ObserverOrder::First => "first-order error recursion holds to 1e-12",
        ObserverOrder::Second => "second-order error recursions hold to 1e-12",
    };
    let mut res = PropertyResult::new(name);
    let p = reference_observer();
    let gain = |e: &DVector<f64>| e * holder_gain(e, &p).unwrap();
    for _ in 0..trials {
        let n = rng.gen_range(1..=3);
        let kind = DisturbanceKind::Sinusoid {
            offset: random_vec(&mut rng, n, 5.0).as_slice().to_vec(),
            amplitude: random_vec(&mut rng, n, 2.0).as_slice().to_vec(),
            freq: rng.gen_range(0.01..0.5),
            phase: rng.gen_range(0.0..6.0),
        };
        let mut src = DisturbanceSource::new(kind).unwrap();
        let f_hat0 = random_vec(&mut rng, n, 10.0);
        let mut fs = vec![src.current().clone()];
        for _ in 0..60 {
            fs.push(src.advance().clone());
        }
        let mut err = 0.0f64;
        match order {
            ObserverOrder::First => {
                let mut obs = FirstOrderObserverState::new(f_hat0, p.clone());
                for k in 0..fs.len() - 1 {
                    let e = obs.update(&fs[k]).unwrap();
                    let predicted = gain(&e) - (&fs[k + 1] - &fs[k]);
                    let actual = obs.estimate() - &fs[k + 1];
                    err = err.max((predicted - actual).norm() / (1.0 + fs[k + 1].norm()));
                }
            }
            ObserverOrder::Second => {
                let mut obs = SecondOrderObserverState::with_shared_params(f_hat0, p.clone());
                let mut prev_e_delta: Option<DVector<f64>> = None;
                for k in 0..fs.len() - 1 {
                    let e = obs.update(&fs[k]).unwrap();
                    if k >= 1 {
                        // e^Δ_k = ΔF̂_k - ΔF_k
                        let e_delta = &obs.df_hat - (&fs[k + 1] - &fs[k]);
                        let actual = obs.estimate() - &fs[k + 1];
                        let predicted = gain(&e) + &e_delta;
                        err = err.max((predicted - actual).norm() / (1.0 + fs[k + 1].norm()));
                        if let Some(prev) = &prev_e_delta {
                            let d2 = &fs[k + 1] - &fs[k] * 2.0 + &fs[k - 1];
                            let predicted = gain(prev) - d2;
                            err = err.max((predicted - &e_delta).norm() / (1.0 + fs[k + 1].norm()));
                        }
                        prev_e_delta = Some(e_delta);
                    }
                }
            }
        }
        res.record(err <= 1e-12, 1e-12 - err);
    }
    res
}

fn unit_setup(
    g: DMatrix<f64>,
    law: ControlLaw,
    order: ObserverOrder,
    f_hat0: DVector<f64>,
    steps: usize,
) -> LoopSetup {
    let n = g.nrows();
    LoopSetup {
        dt: 1.0,
        steps,
        law,
        gains: ControlGains::new(reference_controller(), g, 1).unwrap(),
        observer: order,
        observer_params: reference_observer(),
        observer_delta_params: reference_observer(),
        f_hat0,
        filter: None,
        y_hat0: None,
        noise: NoiseConfig::off(n),
    }
}

fn random_g(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(n, n, |i, j| {
            rng.gen_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 }
        });
        let sv = g.singular_values();
        if sv.min() > 0.2 * sv.max() {
            return g;
        }
    }
}

/// Largest error norms over `records[from..]`, skipping undefined estimates.
fn worst_after(log: &SimLog, from: usize) -> (f64, f64) {
    log.records.iter().skip(from).fold((0.0f64, 0.0f64), |(f, y), r| {
        let ef = if r.e_f.iter().any(|v| v.is_nan()) { f64::INFINITY } else { r.e_f.norm() };
        (f.max(ef), y.max(r.e_y.norm()))
    })
}

/// Constant `F`, control law 2, noise off, `‖e^F_0‖ ≤ 10`: `‖e^F‖` and `‖e^y‖` must be
/// below 1e-9 at every step from `limit` to `4·limit`.
pub fn check_constant_rejection(order: ObserverOrder, trials: u64, limit: usize, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = match order {
        ObserverOrder::First => "first-order",
        ObserverOrder::Second => "second-order",
    };
    let mut res = PropertyResult::new(&format!(
        "constant F, {label} observer + FTS law: |e^F|, |e^y| < 1e-9 from step {limit} on"
    ));
    let horizon = 4 * limit;
    let (mut worst_f, mut worst_y) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let n = 2;
        let g = random_g(&mut rng, n);
        let f = random_vec(&mut rng, n, 5.0);
        let e0 = random_ball(&mut rng, n, 10.0);
        let mut plant = SyntheticUlmPlant::at_rest(
            DisturbanceKind::Constant {
                value: f.as_slice().to_vec(),
            },
            g.clone(),
            1,
        )
        .unwrap();
        let setup = unit_setup(g, ControlLaw::Fts, order, &f + e0, horizon);
        let y_d = random_vec(&mut rng, n, 1.0);
        let desired = vec![y_d; horizon + 1];
        let (log, err) = run_loop(&mut plant, &setup, &desired);
        let (ef, ey) = if err.is_some() { (f64::INFINITY, f64::INFINITY) } else { worst_after(&log, limit) };
        worst_f = worst_f.max(ef);
        worst_y = worst_y.max(ey);
        let e = ef.max(ey);
        res.record(e < 1e-9, 1e-9 - e);
    }
    res.detail = format!("worst after step {limit}: |e^F| = {worst_f:.3e}, |e^y| = {worst_y:.3e}");
    res
}

/// Affine `F`, second-order observer: `‖e^Δ‖` and `‖e^F‖` must be below 1e-9 at every
/// step from `limit` to `4·limit`.
pub fn check_ramp_rejection(trials: u64, limit: usize, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = PropertyResult::new(&format!(
        "ramp F, second-order observer: |e^Delta|, |e^F| < 1e-9 from step {limit} on"
    ));
    let horizon = 4 * limit;
    let p = reference_observer();
    let (mut worst_d, mut worst_f) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let n = 2;
        let start = random_vec(&mut rng, n, 5.0);
        let slope = random_vec(&mut rng, n, 0.5);
        let f_hat0 = &start + random_ball(&mut rng, n, 10.0);
        let mut obs = SecondOrderObserverState::with_shared_params(f_hat0, p.clone());
        let (mut d_max, mut f_max) = (0.0f64, 0.0f64);
        for k in 0..horizon {
            let f = &start + &slope * k as f64;
            let e_f = obs.update(&f).unwrap();
            if k >= limit {
                // obs.e_delta_prev is e^Δ_{k-1}
                d_max = d_max.max(obs.e_delta_prev.norm());
                f_max = f_max.max(e_f.norm());
            }
        }
        worst_d = worst_d.max(d_max);
        worst_f = worst_f.max(f_max);
        let e = d_max.max(f_max);
        res.record(e < 1e-9, 1e-9 - e);
    }
    res.detail = format!("worst after step {limit}: |e^Delta| = {worst_d:.3e}, |e^F| = {worst_f:.3e}");
    res
}

/// Closed-loop error identities on synthetic plants (ν = 1, noise and filter off):
/// basic law `e^y_{k+1} = -e^F_k`, FTS law `e^y_{k+1} = C(ê_k)ê_k - e^F_k`,
/// where `e^F_k` uses the estimate that was applied at tick `k`.
pub fn check_closed_loop_identities(law: ControlLaw, trials: u64, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = match law {
        ControlLaw::Basic => "basic law: e^y_{k+nu} = -e^F_k to 1e-10",
        ControlLaw::Fts => "FTS law: e^y_{k+nu} = C(e)e - e^F_k to 1e-10",
    };
    let mut res = PropertyResult::new(name);
    let steps = 200;
    for trial in 0..trials {
        let n = rng.gen_range(1..=3);
        let g = random_g(&mut rng, n);
        let kind = DisturbanceKind::RandomWalk {
            start: random_vec(&mut rng, n, 2.0).as_slice().to_vec(),
            bound: 0.1,
            seed: seed * 1000 + trial,
        };
        let mut plant = SyntheticUlmPlant::at_rest(kind, g.clone(), 1).unwrap();
        let order = if trial % 2 == 0 { ObserverOrder::First } else { ObserverOrder::Second };
        let setup = unit_setup(g, law, order, random_vec(&mut rng, n, 3.0), steps);
        let desired: Vec<_> = (0..=steps)
            .map(|k| DVector::from_fn(n, |i, _| ((k + i) as f64 * 0.1).sin()))
            .collect();
        let (log, err) = run_loop(&mut plant, &setup, &desired);
        assert!(err.is_none(), "identity run failed: {err:?}");
        let mut worst = 0.0f64;
        for k in 0..log.len() - 1 {
            let now = &log.records[k];
            let next = &log.records[k + 1];
            // next.f = F_k, next.f_hat = the estimate applied at tick k
            let e_f = &next.f_hat - &next.f;
            let mut predicted = -e_f;
            if law == ControlLaw::Fts {
                let e_hat = &now.y_hat - &now.y_d;
                predicted += fts_correction(&e_hat, &setup.gains.params).unwrap();
            }
            worst = worst.max((&next.e_y - predicted).norm());
        }
        res.record(worst <= 1e-10, 1e-10 - worst);
    }
    res
}

/// Random-walk `F` with `‖ΔF_k‖ = B`: once `e^F` enters `{ρ(e)‖e‖ ≤ B}` it must stay
/// for the next `post_steps` updates.
pub fn check_observer_ultimate_bound(b: f64, trials: u64, post_steps: usize, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ b.to_bits());
    let mut res = PropertyResult::new(&format!(
        "observer error stays in rho|e| <= {b} for {post_steps} steps after entry"
    ));
    let p = reference_observer();
    let mut violations = 0u64;
    let mut not_entered = 0u64;
    for trial in 0..trials {
        let n = 2;
        let start = random_vec(&mut rng, n, 5.0);
        let mut src = DisturbanceSource::new(DisturbanceKind::RandomWalk {
            start: start.as_slice().to_vec(),
            bound: b,
            seed: seed * 10_000 + trial,
        })
        .unwrap();
        let mut obs = FirstOrderObserverState::new(&start + random_ball(&mut rng, n, 10.0), p.clone());
        let mut entered = None;
        let mut trial_viol = 0u64;
        let mut worst = f64::INFINITY;
        for k in 0..(post_steps + 100_000) {
            let f = src.current().clone();
            let e = obs.update(&f).unwrap();
            let inside = in_neighborhood_f(&e, b, &p).unwrap();
            match entered {
                None if inside => entered = Some(k),
                None => {}
                Some(k0) => {
                    let rho = robustness_radius(holder_gain(&e, &p).unwrap());
                    worst = worst.min(b - rho * e.norm());
                    if !inside {
                        trial_viol += 1;
                    }
                    if k - k0 >= post_steps {
                        break;
                    }
                }
            }
            src.advance();
        }
        if entered.is_none() {
            not_entered += 1;
            res.record(false, f64::NEG_INFINITY);
        } else {
            violations += trial_viol;
            res.record(trial_viol == 0, worst);
        }
    }
    res.detail = format!("{violations} post-entry violations in total, {not_entered} runs never entered");
    res
}

/// FTS law with an injected estimation error `‖e^F_k‖ ≤ B`: `σ(e^y)‖e^y‖ ≤ B` must hold
/// from some entry step in the first half of the horizon to its end.
pub fn check_tracking_neighborhood(b: f64, trials: u64, horizon: usize, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = PropertyResult::new(&format!(
        "tracking error enters and stays in sigma|e| <= {b}"
    ));
    let mut entries = Vec::new();
    for _ in 0..trials {
        let n = 2;
        let g = random_g(&mut rng, n);
        let gains = ControlGains::new(reference_controller(), g.clone(), 1).unwrap();
        let f = random_vec(&mut rng, n, 5.0);
        let y_d = DVector::zeros(n);
        let mut e_y = random_vec(&mut rng, n, 10.0);
        let mut last_out = None;
        let mut margins = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let sigma = robustness_radius(holder_gain(&e_y, &gains.params).unwrap());
            margins.push(b - sigma * e_y.norm());
            if !in_neighborhood_y(&e_y, b, &gains.params).unwrap() {
                last_out = Some(k);
            }
            let f_hat = &f + random_ball(&mut rng, n, b);
            let u = control_law_fts(&y_d, &f_hat, &e_y, &gains).unwrap();
            e_y = &f + &g * u - &y_d;
        }
        // entry = first step after the last excursion; it counts as finite only if
        // membership then holds for at least the second half of the horizon
        let entry = last_out.map_or(0, |k| k + 1);
        if entry <= horizon / 2 {
            entries.push(entry);
            res.record(true, margins[entry..].iter().copied().fold(f64::INFINITY, f64::min));
        } else {
            res.record(false, margins[horizon / 2..].iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    res.detail = format!(
        "{} of {} trials have a finite entry step{}",
        entries.len(),
        res.samples,
        entries.iter().max().map_or(String::new(), |m| format!(" (latest {m})"))
    );
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass() {
        assert!(check_gamma(10_000, 1).passed());
        assert!(check_rho(10_000, 1).passed());
        assert!(check_gain_at_origin().passed());
        let (reach, cond, _) = check_lemma1(200, 1);
        assert!(reach.passed() && cond.passed());
        assert!(check_observer_recursion(ObserverOrder::First, 10, 1).passed());
        assert!(check_observer_recursion(ObserverOrder::Second, 10, 1).passed());
        assert!(check_closed_loop_identities(ControlLaw::Basic, 5, 1).passed());
        assert!(check_closed_loop_identities(ControlLaw::Fts, 5, 1).passed());
    }

    #[test]
    fn report_formatting() {
        let mut p = PropertyResult::new("x");
        p.record(true, 0.5);
        p.record(false, -0.25);
        let r = Report {
            suite: "demo".into(),
            properties: vec![p],
        };
        assert!(!r.passed());
        let s = r.to_string();
        assert!(s.contains("FAIL x: 1/2 ok"));
        assert!(s.ends_with("suite demo: FAIL"));
    }
}
