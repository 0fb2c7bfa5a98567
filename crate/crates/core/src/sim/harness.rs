//! Closed-loop engine: measure → filter → reconstruct F → observe → control → plant.
//!
//! Tick `j` of a run with relative degree ν does, in order:
//!
//! 1. `y^m_j = y_j + η(t_j)`;
//! 2. `ŷ_j` from the output filter (at `j = 0` the filter is seeded with the
//!    configured initial estimate and paired with `y^m_0`);
//! 3. for `j ≥ ν`: `F_{j-ν} = ŷ_j - G u_{j-ν}`, then one observer update;
//! 4. for `j < N`: `u_j` from the newest `F̂`, `y^d_{j+ν}` and `ê_j = ŷ_j - y^d_j`;
//! 5. plant step.
//!
//! Every signal carries the latest tick whose measurement it depends on, so
//! each record states which measurements its input was computed from.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fts_core::HolderGainParams;
use crate::output_filter::{filter_update, OutputFilterState};
use crate::plant_models::{
    generate_samples, noise_sample, sample_count, NoiseConfig, PendulumPlant, Plant,
    SyntheticUlmPlant, DIVERGENCE_LIMIT,
};
use crate::tracking_control::{control_law_basic, control_law_fts, ControlGains};
use crate::ulm_observer::{FirstOrderObserverState, SecondOrderObserverState, UlmObserver};

use super::config::{
    matrix_from_rows, ControlLaw, DesiredConfig, ObserverOrder, PlantConfig, SimConfig,
};

/// One control step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub y: DVector<f64>,
    pub y_meas: DVector<f64>,
    pub y_hat: DVector<f64>,
    pub y_d: DVector<f64>,
    /// `y - y^d` on the true output.
    pub e_y: DVector<f64>,
    /// `F_{j-ν}` reconstructed at this tick; NaN before the first one exists.
    pub f: DVector<f64>,
    /// Estimate of that same sample, held before the observer consumed it.
    pub f_hat: DVector<f64>,
    pub e_f: DVector<f64>,
    /// Input applied at this tick (zero at the final tick, where none is applied).
    pub u: DVector<f64>,
    /// Latest measurement tick that `u` depends on; `None` when `u` uses no measurement.
    pub u_depends_on: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub dt: f64,
    pub records: Vec<SimRecord>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn output_dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.y.len())
    }

    pub fn input_dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.u.len())
    }
}

/// How the loop turns `F̂` and the tracking error into an input.
#[derive(Debug, Clone)]
pub struct LoopSetup {
    pub dt: f64,
    /// Number of records; the last one applies no input.
    pub steps: usize,
    pub law: ControlLaw,
    pub gains: ControlGains,
    pub observer: ObserverOrder,
    pub observer_params: HolderGainParams,
    pub observer_delta_params: HolderGainParams,
    pub f_hat0: DVector<f64>,
    pub filter: Option<HolderGainParams>,
    /// Seed for `ŷ_0`; the first measurement when absent.
    pub y_hat0: Option<DVector<f64>>,
    pub noise: NoiseConfig,
}

enum Observer {
    First(FirstOrderObserverState),
    Second(SecondOrderObserverState),
}

impl Observer {
    fn as_dyn(&mut self) -> &mut dyn UlmObserver {
        match self {
            Observer::First(s) => s,
            Observer::Second(s) => s,
        }
    }
}

fn nan_vec(n: usize) -> DVector<f64> {
    DVector::from_element(n, f64::NAN)
}

fn latest(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    a.max(b)
}

/// Runs the loop against any plant. `desired[j]` must exist for `j < steps + ν - 1`.
///
/// On failure the records produced so far are returned alongside the error.
pub fn run_loop(
    plant: &mut dyn Plant,
    setup: &LoopSetup,
    desired: &[DVector<f64>],
) -> (SimLog, Option<Error>) {
    let mut log = SimLog {
        dt: setup.dt,
        records: Vec::with_capacity(setup.steps),
    };
    let err = run_loop_inner(plant, setup, desired, &mut log).err();
    (log, err)
}

fn run_loop_inner(
    plant: &mut dyn Plant,
    setup: &LoopSetup,
    desired: &[DVector<f64>],
    log: &mut SimLog,
) -> Result<()> {
    let n = plant.output_dim();
    let m = plant.input_dim();
    let nu = setup.gains.relative_degree;
    let g = &setup.gains.g;
    if g.shape() != (n, m) {
        return Err(Error::Config(format!(
            "controller G is {}×{}, plant is {n}×{m}",
            g.nrows(),
            g.ncols()
        )));
    }
    if setup.f_hat0.len() != n || setup.noise.dim() != n {
        return Err(Error::Config("initial estimate or noise dimension mismatch".into()));
    }
    let needed = setup.steps.saturating_sub(1) + nu;
    if setup.steps > 0 && desired.len() < needed.max(setup.steps) {
        return Err(Error::Config(format!(
            "desired trajectory has {} samples, {} needed",
            desired.len(),
            needed.max(setup.steps)
        )));
    }

    let mut observer = match setup.observer {
        ObserverOrder::First => Observer::First(FirstOrderObserverState::new(
            setup.f_hat0.clone(),
            setup.observer_params.clone(),
        )),
        ObserverOrder::Second => Observer::Second(SecondOrderObserverState::new(
            setup.f_hat0.clone(),
            setup.observer_params.clone(),
            setup.observer_delta_params.clone(),
        )),
    };
    // dependency stamp of the observer's current estimate
    let mut f_hat_stamp: Option<usize> = None;
    let mut filter: Option<OutputFilterState> = None;
    let mut inputs: Vec<(DVector<f64>, Option<usize>)> = Vec::with_capacity(setup.steps);

    for j in 0..setup.steps {
        let t = j as f64 * setup.dt;
        let y = plant.output();
        let y_meas = &y + noise_sample(t, &setup.noise);

        let y_hat = match &setup.filter {
            None => y_meas.clone(),
            Some(params) => {
                let next = match filter.take() {
                    None => {
                        let seed = setup.y_hat0.clone().unwrap_or_else(|| y_meas.clone());
                        let mut s = OutputFilterState::new(seed, params.clone());
                        s.prime(&y_meas)?;
                        s
                    }
                    Some(s) => filter_update(&s, &y_meas)?,
                };
                let y_hat = next.y_hat.clone();
                filter = Some(next);
                y_hat
            }
        };
        // the filter state mixes all measurements up to j
        let y_hat_stamp = Some(j);

        let (f, f_hat, e_f) = if j >= nu {
            let (u_old, u_old_stamp) = &inputs[j - nu];
            let f = &y_hat - g * u_old;
            let obs = observer.as_dyn();
            let f_hat = obs.estimate().clone();
            let e_f = obs.update(&f)?;
            f_hat_stamp = latest(f_hat_stamp, latest(y_hat_stamp, *u_old_stamp));
            (f, f_hat, e_f)
        } else {
            (nan_vec(n), nan_vec(n), nan_vec(n))
        };

        let y_d = desired.get(j).cloned().unwrap_or_else(|| DVector::zeros(n));
        let (u, u_stamp) = if j + 1 < setup.steps {
            let y_d_future = &desired[j + nu];
            let f_hat_now = observer.as_dyn().estimate().clone();
            match setup.law {
                ControlLaw::Basic => (
                    control_law_basic(y_d_future, &f_hat_now, &setup.gains)?,
                    f_hat_stamp,
                ),
                ControlLaw::Fts => {
                    let e_hat = &y_hat - &y_d;
                    (
                        control_law_fts(y_d_future, &f_hat_now, &e_hat, &setup.gains)?,
                        latest(f_hat_stamp, y_hat_stamp),
                    )
                }
            }
        } else {
            (DVector::zeros(m), None)
        };

        log.records.push(SimRecord {
            t,
            e_y: &y - &y_d,
            y,
            y_meas,
            y_hat,
            y_d,
            f,
            f_hat,
            e_f,
            u: u.clone(),
            u_depends_on: u_stamp,
        });

        if j + 1 < setup.steps {
            plant.step(&u)?;
            let y_next = plant.output();
            if !y_next.iter().all(|v| v.is_finite()) || y_next.norm() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    step: j + 1,
                    detail: format!(
                        "plant output left the bounded region (|y| = {:e}) at t = {}",
                        y_next.norm(),
                        (j + 1) as f64 * setup.dt
                    ),
                });
            }
            inputs.push((u, u_stamp));
        }
    }
    Ok(())
}

/// Desired samples `y^d_0 … y^d_{count-1}`.
pub fn desired_trajectory(cfg: &SimConfig, count: usize) -> Result<Vec<DVector<f64>>> {
    let n = cfg.output_dim();
    match &cfg.desired {
        DesiredConfig::Generated {
            initial_state,
            params,
        } => {
            let p = match (params, &cfg.plant) {
                (Some(p), _) => *p,
                (None, PlantConfig::Pendulum { params, .. }) => *params,
                (None, _) => Default::default(),
            };
            if n != 2 {
                return Err(Error::Config(
                    "generated trajectories are two-dimensional; use a constant or file source".into(),
                ));
            }
            Ok(generate_samples(*initial_state, count, cfg.dt(), &p)?
                .into_iter()
                .map(|v| DVector::from_column_slice(v.as_slice()))
                .collect())
        }
        DesiredConfig::Constant { value } => Ok(vec![DVector::from_column_slice(value); count]),
        DesiredConfig::File { path } => {
            let mut samples = read_trajectory_file(path, n)?;
            if samples.is_empty() {
                return Err(Error::Config(format!("{} has no samples", path.display())));
            }
            // hold the final sample beyond the end of the file
            let last = samples[samples.len() - 1].clone();
            samples.resize(count.max(samples.len()), last);
            samples.truncate(count);
            Ok(samples)
        }
    }
}

/// Reads a CSV trajectory: header row, then `n` numeric columns, or `n + 1` with a leading time.
pub fn read_trajectory_file(path: &std::path::Path, n: usize) -> Result<Vec<DVector<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| {
            Error::Config(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        let cols = match vals.len() {
            k if k == n => &vals[..],
            k if k == n + 1 => &vals[1..],
            k => {
                return Err(Error::Config(format!(
                    "{}:{}: expected {n} or {} columns, found {k}",
                    path.display(),
                    i + 1,
                    n + 1
                )))
            }
        };
        out.push(DVector::from_column_slice(cols));
    }
    Ok(out)
}

pub fn build_plant(cfg: &SimConfig) -> Result<Box<dyn Plant>> {
    match &cfg.plant {
        PlantConfig::Pendulum {
            params,
            initial_state,
        } => Ok(Box::new(PendulumPlant::new(*params, cfg.dt(), *initial_state)?)),
        PlantConfig::Synthetic {
            relative_degree,
            g,
            initial_outputs,
            disturbance,
        } => {
            let g = matrix_from_rows(g, "plant.g")?;
            let n = g.nrows();
            let outs = match initial_outputs {
                Some(o) => o.iter().map(|v| DVector::from_column_slice(v)).collect(),
                None => vec![DVector::zeros(n); *relative_degree],
            };
            Ok(Box::new(SyntheticUlmPlant::new(disturbance.clone(), g, outs)?))
        }
    }
}

pub fn build_setup(cfg: &SimConfig) -> Result<LoopSetup> {
    let n = cfg.output_dim();
    let nu = cfg
        .controller
        .relative_degree
        .unwrap_or_else(|| cfg.plant_relative_degree());
    let g: DMatrix<f64> = cfg.controller_g()?;
    let gains = ControlGains::new(cfg.controller_params()?, g, nu)
        .map_err(|e| Error::Config(format!("controller: {e}")))?;
    let (observer_params, observer_delta_params) = cfg.observer_params()?;
    Ok(LoopSetup {
        dt: cfg.dt(),
        steps: sample_count(cfg.t_final(), cfg.dt()),
        law: cfg.controller.law,
        gains,
        observer: cfg.observer.order,
        observer_params,
        observer_delta_params,
        f_hat0: cfg
            .observer
            .initial_estimate
            .as_ref()
            .map(|v| DVector::from_column_slice(v))
            .unwrap_or_else(|| DVector::zeros(n)),
        filter: cfg.filter_params()?,
        y_hat0: cfg.initial_output_estimate(),
        noise: cfg.noise_config(),
    })
}

/// Runs a configured experiment, keeping the partial log on failure.
pub fn run_closed_loop_partial(cfg: &SimConfig) -> (SimLog, Option<Error>) {
    let prepared = (|| {
        let setup = build_setup(cfg)?;
        let desired = desired_trajectory(cfg, setup.steps + setup.gains.relative_degree)?;
        let plant = build_plant(cfg)?;
        Ok::<_, Error>((setup, desired, plant))
    })();
    match prepared {
        Err(e) => (
            SimLog {
                dt: cfg.dt(),
                records: Vec::new(),
            },
            Some(e),
        ),
        Ok((setup, desired, mut plant)) => run_loop(plant.as_mut(), &setup, &desired),
    }
}

pub fn run_closed_loop(cfg: &SimConfig) -> Result<SimLog> {
    match run_closed_loop_partial(cfg) {
        (log, None) => Ok(log),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant_models::DisturbanceKind;

    fn synthetic_cfg(law: &str, order: &str, t_final: f64) -> SimConfig {
        SimConfig::from_toml_str(&format!(
            r#"
dt = 1.0
t_final = {t_final}
settle_time = 0.0
[plant]
kind = "synthetic"
relative_degree = 1
g = [[1.0, 0.2], [0.0, 0.5]]
[plant.disturbance]
kind = "constant"
value = [3.0, -4.0]
[controller]
law = "{law}"
exponent = "11/9"
scale = 0.35
g = [[1.0, 0.2], [0.0, 0.5]]
[observer]
order = "{order}"
exponent = "9/7"
scale = 1.5
[desired]
source = "constant"
value = [1.0, 2.0]
"#
        ))
        .unwrap()
    }

    #[test]
    fn zero_horizon_gives_single_record() {
        let log = run_closed_loop(&synthetic_cfg("fts", "first", 0.0)).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.records[0].u, DVector::zeros(2));
        assert!(log.records[0].f.iter().all(|v| v.is_nan()));
    }

    #[test]
    fn records_are_consistent() {
        let log = run_closed_loop(&synthetic_cfg("fts", "second", 60.0)).unwrap();
        assert_eq!(log.len(), 61);
        for (j, r) in log.records.iter().enumerate() {
            assert_eq!(r.t, j as f64);
            if j >= 1 {
                let d = &r.f_hat - &r.f - &r.e_f;
                assert!(d.norm() <= 1e-12 * (1.0 + r.f.norm()));
                // the plant is exactly the model, so F is the disturbance
                assert!((&r.f - DVector::from_column_slice(&[3.0, -4.0])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_disturbance_estimation_error_decreases() {
        let log = run_closed_loop(&synthetic_cfg("fts", "first", 200.0)).unwrap();
        let last = log.records.last().unwrap();
        assert!(last.e_f.norm() < 1e-3);
        assert!(last.e_y.norm() < 1e-2);
    }

    #[test]
    fn input_never_depends_on_future() {
        let log = run_closed_loop(&synthetic_cfg("fts", "second", 30.0)).unwrap();
        for (j, r) in log.records.iter().enumerate() {
            if let Some(s) = r.u_depends_on {
                assert!(s <= j);
            }
        }
    }

    #[test]
    fn divergence_keeps_partial_log() {
        let g = DMatrix::from_row_slice(1, 1, &[1.0]);
        let mut plant = SyntheticUlmPlant::at_rest(
            DisturbanceKind::Constant { value: vec![0.0] },
            g.clone(),
            1,
        )
        .unwrap();
        let p = HolderGainParams::new(1.5, 1.0).unwrap();
        let setup = LoopSetup {
            dt: 1.0,
            steps: 50,
            law: ControlLaw::Basic,
            gains: ControlGains::new(p.clone(), g, 1).unwrap(),
            observer: ObserverOrder::First,
            observer_params: p.clone(),
            observer_delta_params: p,
            f_hat0: DVector::zeros(1),
            filter: None,
            y_hat0: None,
            noise: NoiseConfig::off(1),
        };
        let desired: Vec<_> = (0..60).map(|k| DVector::from_element(1, 10f64.powi(k / 3))).collect();
        let (log, err) = run_loop(&mut plant, &setup, &desired);
        assert!(matches!(err, Some(Error::Divergence { .. })));
        assert!(!log.is_empty() && log.len() < 50);
    }
}
