//! Simulated truth for the closed-loop experiments.
//!
//! The inverted pendulum on a cart is simulated through its forward-difference
//! discretisation, which is itself a relative-degree-two ultra-local model:
//!
//! ```text
//! y_{k+2} = F_k + G_k u_k,   G_k = Δt² M(y_k)⁻¹,
//! F_k     = 2y_{k+1} - y_k - Δt² M(y_k)⁻¹ D(y_k, (y_{k+1} - y_k)/Δt)
//! ```
//!
//! Outputs are `y = [x, θ]` (cart position, pendulum angle from upright),
//! inputs `u = [F, τ]` (cart force, pendulum torque).

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Abstract discrete plant driven by the harness, one tick per call to [`Plant::step`].
pub trait Plant: Send {
    fn output_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn relative_degree(&self) -> usize;
    /// True output `y_k` at the current tick.
    fn output(&self) -> DVector<f64>;
    /// True `(F_k, G_k)` of the plant's own ultra-local representation at the current tick.
    fn true_ulm(&self) -> Result<(DVector<f64>, DMatrix<f64>)>;
    /// Applies `u_k` and advances to tick `k + 1`.
    fn step(&mut self, u: &DVector<f64>) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumParams {
    /// Cart mass, kg.
    pub cart_mass: f64,
    /// Pendulum mass, kg.
    pub pendulum_mass: f64,
    /// Half-length of the pendulum, m.
    pub half_length: f64,
    /// Pendulum inertia, kg·m².
    pub inertia: f64,
    pub gravity: f64,
    /// Cart friction saturation, N.
    pub cart_friction: f64,
    /// Pivot friction saturation, N·m.
    pub pivot_friction: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.5,
            pendulum_mass: 0.5,
            half_length: 1.4,
            inertia: 0.84,
            gravity: 9.8,
            cart_friction: 0.028,
            pivot_friction: 0.0032,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.cart_mass,
            self.pendulum_mass,
            self.half_length,
            self.inertia,
            self.gravity,
            self.cart_friction,
            self.pivot_friction,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config("pendulum parameters must be finite and positive".into()))
        }
    }

    fn ml(&self) -> f64 {
        self.pendulum_mass * self.half_length
    }
}

/// `M(θ) = [[M+m, -ml cosθ], [-ml cosθ, I+ml²]]`.
pub fn mass_matrix(theta: f64, p: &PendulumParams) -> Matrix2<f64> {
    let c = -p.ml() * theta.cos();
    Matrix2::new(
        p.cart_mass + p.pendulum_mass,
        c,
        c,
        p.inertia + p.ml() * p.half_length,
    )
}

/// `D(q, q̇) = [ml θ̇² sinθ + c_x tanh ẋ ; c_θ tanh θ̇ - mgl sinθ]`.
pub fn bias_vector(theta: f64, xdot: f64, thetadot: f64, p: &PendulumParams) -> Vector2<f64> {
    let s = theta.sin();
    Vector2::new(
        p.ml() * thetadot * thetadot * s + p.cart_friction * xdot.tanh(),
        p.pivot_friction * thetadot.tanh() - p.ml() * p.gravity * s,
    )
}

/// Lifted pendulum state `(y_k, y_{k+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedPlantState {
    pub y_prev: Vector2<f64>,
    pub y_curr: Vector2<f64>,
}

impl LiftedPlantState {
    /// From `[x, θ, ẋ, θ̇]`, using `y_1 = y_0 + Δt·q̇(0)`.
    pub fn from_state(state: [f64; 4], dt: f64) -> Self {
        let y0 = Vector2::new(state[0], state[1]);
        let qd = Vector2::new(state[2], state[3]);
        Self {
            y_prev: y0,
            y_curr: y0 + qd * dt,
        }
    }
}

/// True `(F_k, G_k)` of the discretised pendulum at the given lifted state.
pub fn pendulum_ulm(
    state: &LiftedPlantState,
    dt: f64,
    p: &PendulumParams,
) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let minv = mass_matrix(state.y_prev[1], p).try_inverse().ok_or_else(|| {
        Error::Singular(format!("mass matrix singular at θ = {}", state.y_prev[1]))
    })?;
    let vel = (state.y_curr - state.y_prev) / dt;
    let bias = bias_vector(state.y_prev[1], vel[0], vel[1], p);
    let dt2 = dt * dt;
    let g = minv * dt2;
    let f = state.y_curr * 2.0 - state.y_prev - g * bias;
    Ok((f, g))
}

/// Next output `y_{k+2}` of the discretised pendulum under input `u_k`.
pub fn pendulum_step(
    state: &LiftedPlantState,
    u: &Vector2<f64>,
    dt: f64,
    p: &PendulumParams,
) -> Result<Vector2<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let vel = (state.y_curr - state.y_prev) / dt;
    let rhs = u - bias_vector(state.y_prev[1], vel[0], vel[1], p);
    let acc = mass_matrix(state.y_prev[1], p).lu().solve(&rhs).ok_or_else(|| {
        Error::Singular(format!("mass matrix singular at θ = {}", state.y_prev[1]))
    })?;
    Ok(state.y_curr * 2.0 - state.y_prev + acc * (dt * dt))
}

/// Model-based force/torque used only to generate the reference trajectory.
pub fn open_loop_input(theta: f64, thetadot: f64, p: &PendulumParams) -> Vector2<f64> {
    let s = theta.sin();
    let m_total = p.cart_mass + p.pendulum_mass;
    let force = p.ml() * thetadot * thetadot * s
        - 2.0 * (p.cart_mass + p.pendulum_mass * s * s) * p.gravity * s
        - m_total * p.gravity * s;
    let torque = -p.ml() * p.gravity * s;
    Vector2::new(force, torque)
}

/// Output norm beyond which trajectory generation and closed-loop runs abort.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Number of samples `⌊T/Δt⌋ + 1` on `[0, T]`.
pub fn sample_count(t_final: f64, dt: f64) -> usize {
    // tolerate T/Δt landing a hair below an integer
    (t_final / dt + 1e-9).floor() as usize + 1
}

/// Propagates the discretised pendulum under [`open_loop_input`] from `init = [x, θ, ẋ, θ̇]`.
pub fn generate_desired_trajectory(
    init: [f64; 4],
    t_final: f64,
    dt: f64,
    p: &PendulumParams,
) -> Result<Vec<Vector2<f64>>> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Domain(format!("horizon must be >= 0, got {t_final}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    check_finite(&init, "initial state")?;
    generate_samples(init, sample_count(t_final, dt), dt, p)
}

pub(crate) fn generate_samples(
    init: [f64; 4],
    count: usize,
    dt: f64,
    p: &PendulumParams,
) -> Result<Vec<Vector2<f64>>> {
    let mut state = LiftedPlantState::from_state(init, dt);
    let mut out = Vec::with_capacity(count);
    out.push(state.y_prev);
    if count > 1 {
        out.push(state.y_curr);
    }
    while out.len() < count {
        let thetadot = (state.y_curr[1] - state.y_prev[1]) / dt;
        let u = open_loop_input(state.y_prev[1], thetadot, p);
        let next = pendulum_step(&state, &u, dt, p)?;
        if !next.iter().all(|v| v.is_finite()) || next.norm() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                step: out.len(),
                detail: format!("desired trajectory left the bounded region: {next:?}"),
            });
        }
        out.push(next);
        state = LiftedPlantState {
            y_prev: state.y_curr,
            y_curr: next,
        };
    }
    Ok(out)
}

/// Discretised pendulum as a harness plant (ν = 2).
#[derive(Debug, Clone)]
pub struct PendulumPlant {
    pub params: PendulumParams,
    pub dt: f64,
    pub state: LiftedPlantState,
}

impl PendulumPlant {
    pub fn new(params: PendulumParams, dt: f64, init: [f64; 4]) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        check_finite(&init, "initial state")?;
        Ok(Self {
            params,
            dt,
            state: LiftedPlantState::from_state(init, dt),
        })
    }
}

impl Plant for PendulumPlant {
    fn output_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn relative_degree(&self) -> usize {
        2
    }

    fn output(&self) -> DVector<f64> {
        DVector::from_column_slice(self.state.y_prev.as_slice())
    }

    fn true_ulm(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (f, g) = pendulum_ulm(&self.state, self.dt, &self.params)?;
        Ok((
            DVector::from_column_slice(f.as_slice()),
            DMatrix::from_column_slice(2, 2, g.as_slice()),
        ))
    }

    fn step(&mut self, u: &DVector<f64>) -> Result<()> {
        check_dim("pendulum input", 2, u.len())?;
        let next = pendulum_step(&self.state, &Vector2::new(u[0], u[1]), self.dt, &self.params)?;
        self.state = LiftedPlantState {
            y_prev: self.state.y_curr,
            y_curr: next,
        };
        Ok(())
    }
}

/// Frequency-modulated sinusoidal measurement noise, one channel per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub amplitudes: Vec<f64>,
    pub base_freqs: Vec<f64>,
    pub fm_depth: Vec<f64>,
    pub fm_freqs: Vec<f64>,
    pub phases: Vec<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            amplitudes: vec![0.001, 0.001],
            base_freqs: vec![120.0, 150.0],
            fm_depth: vec![5.0, 5.0],
            fm_freqs: vec![0.5, 0.7],
            phases: vec![0.0, 0.0],
        }
    }
}

impl NoiseConfig {
    pub fn off(dim: usize) -> Self {
        Self {
            amplitudes: vec![0.0; dim],
            base_freqs: vec![0.0; dim],
            fm_depth: vec![0.0; dim],
            fm_freqs: vec![0.0; dim],
            phases: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.amplitudes.len();
        let lens = [
            self.base_freqs.len(),
            self.fm_depth.len(),
            self.fm_freqs.len(),
            self.phases.len(),
        ];
        if lens.iter().any(|l| *l != n) {
            return Err(Error::Config("noise vectors must share one length".into()));
        }
        for v in [
            &self.amplitudes,
            &self.base_freqs,
            &self.fm_depth,
            &self.fm_freqs,
            &self.phases,
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("noise parameters must be finite".into()));
            }
        }
        if self.amplitudes.iter().any(|a| *a < 0.0) {
            return Err(Error::Config("noise amplitudes must be >= 0".into()));
        }
        Ok(())
    }

    /// Euclidean bound on the noise vector.
    pub fn bound(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// `η_i(t) = a_i sin(ω_i t + δ_i sin(ν_i t) + φ_i)`.
pub fn noise_sample(t: f64, cfg: &NoiseConfig) -> DVector<f64> {
    DVector::from_iterator(
        cfg.dim(),
        (0..cfg.dim()).map(|i| {
            let phase = cfg.base_freqs[i] * t + cfg.fm_depth[i] * (cfg.fm_freqs[i] * t).sin() + cfg.phases[i];
            cfg.amplitudes[i] * phase.sin()
        }),
    )
}

/// How the unknown term of a synthetic ultra-local plant evolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceKind {
    Constant {
        value: Vec<f64>,
    },
    /// `F_k = start + k·slope`.
    Ramp {
        start: Vec<f64>,
        slope: Vec<f64>,
    },
    /// `F_k = offset + amplitude ⊙ sin(freq·k + phase)`, frequency in rad/step.
    Sinusoid {
        offset: Vec<f64>,
        amplitude: Vec<f64>,
        freq: f64,
        phase: f64,
    },
    /// `F_{k+1} = F_k + bound·d_k` with `d_k` uniform on the unit sphere.
    RandomWalk {
        start: Vec<f64>,
        bound: f64,
        seed: u64,
    },
}

impl DisturbanceKind {
    pub fn dim(&self) -> usize {
        match self {
            DisturbanceKind::Constant { value } => value.len(),
            DisturbanceKind::Ramp { start, .. } => start.len(),
            DisturbanceKind::Sinusoid { offset, .. } => offset.len(),
            DisturbanceKind::RandomWalk { start, .. } => start.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let ok = match self {
            DisturbanceKind::Constant { value } => value.iter().all(|v| v.is_finite()),
            DisturbanceKind::Ramp { start, slope } => {
                slope.len() == n && start.iter().chain(slope).all(|v| v.is_finite())
            }
            DisturbanceKind::Sinusoid {
                offset,
                amplitude,
                freq,
                phase,
            } => {
                amplitude.len() == n
                    && offset.iter().chain(amplitude).all(|v| v.is_finite())
                    && freq.is_finite()
                    && phase.is_finite()
            }
            DisturbanceKind::RandomWalk { start, bound, .. } => {
                start.iter().all(|v| v.is_finite()) && bound.is_finite() && *bound >= 0.0
            }
        };
        if n == 0 || !ok {
            return Err(Error::Config(format!("invalid synthetic disturbance: {self:?}")));
        }
        Ok(())
    }
}

/// Exogenous disturbance generator.
#[derive(Debug, Clone)]
pub struct DisturbanceSource {
    kind: DisturbanceKind,
    k: usize,
    current: DVector<f64>,
    rng: Option<ChaCha8Rng>,
}

impl DisturbanceSource {
    pub fn new(kind: DisturbanceKind) -> Result<Self> {
        kind.validate()?;
        let (current, rng) = match &kind {
            DisturbanceKind::RandomWalk { start, seed, .. } => (
                DVector::from_column_slice(start),
                Some(ChaCha8Rng::seed_from_u64(*seed)),
            ),
            other => (Self::closed_form(other, 0), None),
        };
        Ok(Self {
            kind,
            k: 0,
            current,
            rng,
        })
    }

    fn closed_form(kind: &DisturbanceKind, k: usize) -> DVector<f64> {
        let kf = k as f64;
        match kind {
            DisturbanceKind::Constant { value } => DVector::from_column_slice(value),
            DisturbanceKind::Ramp { start, slope } => {
                DVector::from_column_slice(start) + DVector::from_column_slice(slope) * kf
            }
            DisturbanceKind::Sinusoid {
                offset,
                amplitude,
                freq,
                phase,
            } => {
                let s = (freq * kf + phase).sin();
                DVector::from_column_slice(offset) + DVector::from_column_slice(amplitude) * s
            }
            DisturbanceKind::RandomWalk { .. } => unreachable!("random walk has no closed form"),
        }
    }

    pub fn current(&self) -> &DVector<f64> {
        &self.current
    }

    pub fn index(&self) -> usize {
        self.k
    }

    /// Advances to `F_{k+1}` and returns it.
    pub fn advance(&mut self) -> &DVector<f64> {
        self.k += 1;
        match (&self.kind, self.rng.as_mut()) {
            (DisturbanceKind::RandomWalk { bound, .. }, Some(rng)) => {
                let dir = unit_direction(rng, self.current.len());
                self.current += dir * *bound;
            }
            (kind, _) => self.current = Self::closed_form(kind, self.k),
        }
        &self.current
    }
}

/// Uniform direction on the unit sphere by rejection from the enclosing cube.
fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    if n == 1 {
        return DVector::from_element(1, if rng.gen::<bool>() { 1.0 } else { -1.0 });
    }
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return v / norm;
        }
    }
}

/// Plant realising `y_{k+ν} = F_k + G u_k` with an exogenous `F_k`.
#[derive(Debug, Clone)]
pub struct SyntheticUlmPlant {
    g: DMatrix<f64>,
    nu: usize,
    /// `y_k, …, y_{k+ν-1}`.
    pipeline: VecDeque<DVector<f64>>,
    source: DisturbanceSource,
}

impl SyntheticUlmPlant {
    /// `initial_outputs` holds `y_0 … y_{ν-1}`; ν is its length.
    pub fn new(
        kind: DisturbanceKind,
        g: DMatrix<f64>,
        initial_outputs: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let nu = initial_outputs.len();
        if nu == 0 {
            return Err(Error::Config("synthetic plant needs ν >= 1 initial outputs".into()));
        }
        let n = kind.dim();
        check_dim("synthetic plant G rows", n, g.nrows())?;
        for y in &initial_outputs {
            check_dim("synthetic plant initial output", n, y.len())?;
            check_finite(y.as_slice(), "initial output")?;
        }
        check_finite(g.as_slice(), "synthetic plant G")?;
        Ok(Self {
            g,
            nu,
            pipeline: initial_outputs.into(),
            source: DisturbanceSource::new(kind)?,
        })
    }

    /// Convenience: zero initial outputs.
    pub fn at_rest(kind: DisturbanceKind, g: DMatrix<f64>, nu: usize) -> Result<Self> {
        let n = kind.dim();
        Self::new(kind, g, vec![DVector::zeros(n); nu])
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn disturbance(&self) -> &DVector<f64> {
        self.source.current()
    }
}

impl Plant for SyntheticUlmPlant {
    fn output_dim(&self) -> usize {
        self.g.nrows()
    }

    fn input_dim(&self) -> usize {
        self.g.ncols()
    }

    fn relative_degree(&self) -> usize {
        self.nu
    }

    fn output(&self) -> DVector<f64> {
        self.pipeline[0].clone()
    }

    fn true_ulm(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.source.current().clone(), self.g.clone()))
    }

    fn step(&mut self, u: &DVector<f64>) -> Result<()> {
        check_dim("synthetic plant input", self.g.ncols(), u.len())?;
        let y_next = self.source.current() + &self.g * u;
        self.pipeline.pop_front();
        self.pipeline.push_back(y_next);
        self.source.advance();
        Ok(())
    }
}

/// Synthetic plant at rest with the given influence matrix and relative degree.
pub fn synthetic_ulm_plant(
    kind: DisturbanceKind,
    g: DMatrix<f64>,
    relative_degree: usize,
) -> Result<SyntheticUlmPlant> {
    SyntheticUlmPlant::at_rest(kind, g, relative_degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> PendulumParams {
        PendulumParams::default()
    }

    #[test]
    fn mass_matrix_examples() {
        let m = mass_matrix(std::f64::consts::FRAC_PI_2, &p());
        assert_relative_eq!(m, Matrix2::new(2.0, 0.0, 0.0, 1.82), epsilon = 1e-15);
        let m = mass_matrix(0.0, &p());
        assert_relative_eq!(m, Matrix2::new(2.0, -0.7, -0.7, 1.82), epsilon = 1e-15);
        assert_eq!(mass_matrix(0.3, &p()), mass_matrix(-0.3, &p()));
    }

    #[test]
    fn mass_matrix_spd_on_grid() {
        for i in 0..10_000 {
            let th = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / 10_000.0;
            let m = mass_matrix(th, &p());
            assert_eq!(m[(0, 1)], m[(1, 0)]);
            assert!(m.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn bias_examples() {
        assert_eq!(bias_vector(0.0, 0.0, 0.0, &p()), Vector2::zeros());
        let b = bias_vector(0.1, 0.0, 0.0, &p());
        assert_eq!(b[0], 0.0);
        assert_relative_eq!(b[1], -0.684_857_238_197_241_2, epsilon = 1e-12);
    }

    #[test]
    fn friction_bounded_and_odd() {
        for &(xd, td) in &[(1e3, -1e3), (0.3, 0.7), (-5.0, 2.0)] {
            let b = bias_vector(0.0, xd, td, &p());
            let bn = bias_vector(0.0, -xd, -td, &p());
            assert!(b[0].abs() <= p().cart_friction && b[1].abs() <= p().pivot_friction);
            assert_relative_eq!(b[0], -bn[0]);
            assert_relative_eq!(b[1], -bn[1]);
        }
    }

    #[test]
    fn upright_equilibrium() {
        let s = LiftedPlantState {
            y_prev: Vector2::zeros(),
            y_curr: Vector2::zeros(),
        };
        assert_eq!(pendulum_step(&s, &Vector2::zeros(), 0.01, &p()).unwrap(), Vector2::zeros());
    }

    #[test]
    fn step_matches_direct_solve() {
        let s = LiftedPlantState {
            y_prev: Vector2::zeros(),
            y_curr: Vector2::new(0.001, 0.001),
        };
        let dt = 0.01;
        let y = pendulum_step(&s, &Vector2::zeros(), dt, &p()).unwrap();
        // independent route: scalar Cramer solve of M a = -D
        let pp = p();
        let (a11, a12, a22) = (2.0, -pp.ml(), pp.inertia + pp.ml() * pp.half_length);
        let vel = (0.001f64 / dt, 0.001f64 / dt);
        let d1 = pp.cart_friction * vel.0.tanh();
        let d2 = pp.pivot_friction * vel.1.tanh();
        let det = a11 * a22 - a12 * a12;
        let acc_x = (-d1 * a22 + a12 * d2) / det;
        let acc_t = (-a11 * d2 + a12 * d1) / det;
        assert_relative_eq!(y[0], 0.002 + dt * dt * acc_x, epsilon = 1e-15);
        assert_relative_eq!(y[1], 0.002 + dt * dt * acc_t, epsilon = 1e-15);
    }

    #[test]
    fn open_loop_examples() {
        assert_eq!(open_loop_input(0.0, 0.0, &p()), Vector2::zeros());
        let u = open_loop_input(0.1, 0.0, &p());
        assert_relative_eq!(u[1], -0.684_857_238_197_241_2, epsilon = 1e-12);
        let s = 0.1f64.sin();
        let oracle = -(2.0 * (1.5 + 0.5 * s * s) * 9.8 + 2.0 * 9.8) * s;
        assert_relative_eq!(u[0], oracle, epsilon = 1e-12);
        assert_relative_eq!(u[0], -4.901_588_521_728_485, epsilon = 1e-12);
    }

    #[test]
    fn trajectory_counts_and_start() {
        let init = [0.45, -0.14, -0.3, 0.05];
        let traj = generate_desired_trajectory(init, 70.0, 0.01, &p()).unwrap();
        assert_eq!(traj.len(), 7001);
        assert_eq!(traj[0], Vector2::new(0.45, -0.14));
        let single = generate_desired_trajectory(init, 0.0, 0.01, &p()).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn noise_examples() {
        let off = NoiseConfig::off(2);
        assert_eq!(noise_sample(3.7, &off), DVector::zeros(2));
        let cfg = NoiseConfig::default();
        assert_eq!(noise_sample(0.0, &cfg), DVector::zeros(2));
        for i in 0..10_000 {
            let t = i as f64 * 0.0137;
            let n = noise_sample(t, &cfg);
            assert!(n[0].abs() <= 0.001 && n[1].abs() <= 0.001);
            assert_eq!(n, noise_sample(t, &cfg));
        }
    }

    #[test]
    fn noise_validation() {
        let mut cfg = NoiseConfig::default();
        cfg.amplitudes[0] = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = NoiseConfig::default();
        cfg.phases.pop();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn synthetic_constant_outputs() {
        let c = vec![0.4, -0.2];
        let mut plant = synthetic_ulm_plant(
            DisturbanceKind::Constant { value: c.clone() },
            DMatrix::identity(2, 2),
            1,
        )
        .unwrap();
        let u = DVector::zeros(2);
        plant.step(&u).unwrap();
        for _ in 0..5 {
            assert_eq!(plant.output(), DVector::from_vec(c.clone()));
            plant.step(&u).unwrap();
        }
    }

    #[test]
    fn synthetic_ramp_zero_second_difference() {
        let mut src = DisturbanceSource::new(DisturbanceKind::Ramp {
            start: vec![1.0, 2.0],
            slope: vec![0.25, -0.5],
        })
        .unwrap();
        let mut f = vec![src.current().clone()];
        for _ in 0..100 {
            f.push(src.advance().clone());
        }
        for w in f.windows(3) {
            assert_eq!(&w[2] - &w[1] * 2.0 + &w[0], DVector::zeros(2));
        }
    }

    #[test]
    fn random_walk_saturates_bound() {
        let b = 0.1;
        let mut src = DisturbanceSource::new(DisturbanceKind::RandomWalk {
            start: vec![0.0, 0.0],
            bound: b,
            seed: 7,
        })
        .unwrap();
        let mut prev = src.current().clone();
        let mut max_step: f64 = 0.0;
        for _ in 0..100_000 {
            let next = src.advance().clone();
            let d = (&next - &prev).norm();
            assert!(d <= b * (1.0 + 1e-9));
            max_step = max_step.max(d);
            prev = next;
        }
        assert_relative_eq!(max_step, b, max_relative = 1e-9);
    }

    #[test]
    fn pendulum_ulm_pair_reproduces_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let s = LiftedPlantState {
                y_prev: Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-3.0..3.0)),
                y_curr: Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-3.0..3.0)),
            };
            let u = Vector2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
            let (f, g) = pendulum_ulm(&s, 0.01, &p()).unwrap();
            let y = pendulum_step(&s, &u, 0.01, &p()).unwrap();
            assert_relative_eq!(y, f + g * u, max_relative = 1e-12);
        }
    }
}
