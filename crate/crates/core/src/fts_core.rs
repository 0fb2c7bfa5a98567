//! Hölder-continuous finite-time-stable feedback primitives.
//!
//! Every observer and controller in this crate is built from one gain shape,
//!
//! ```text
//!     g(e) = (x - scale) / (x + scale),    x = (eᵀ W e)^(1 - 1/exponent)
//! ```
//!
//! which maps the origin to -1 and grows toward 1 as ‖e‖ grows. The error
//! update `e ↦ g(e)·e` then shrinks the quadratic Lyapunov function
//! `V = eᵀWe` by the factor `g²`, i.e. `V⁺ - V = -γ(V)·V^(1/exponent)` with
//! `γ` given by [`gamma_of_v`].
//!
//! The module also carries the scalar Lyapunov recursion used to certify
//! finite-time convergence, and checkers for the decrement and Hölder
//! conditions on recorded Lyapunov traces.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_finite, Error, Result};

/// Exponent/scale pair (plus optional SPD weight) parameterising a Hölder gain.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderGainParams {
    exponent: f64,
    scale: f64,
    weight: Option<DMatrix<f64>>,
}

impl HolderGainParams {
    /// `exponent` must lie strictly inside ]1, 2[ and `scale` must be positive.
    pub fn new(exponent: f64, scale: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 1.0 && exponent < 2.0) {
            return Err(Error::Domain(format!(
                "gain exponent must lie in ]1,2[, got {exponent}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!(
                "gain scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            exponent,
            scale,
            weight: None,
        })
    }

    /// Attaches a symmetric positive definite weight for the quadratic form.
    pub fn with_weight(mut self, weight: DMatrix<f64>) -> Result<Self> {
        if !weight.is_square() {
            return Err(Error::Domain("gain weight must be square".into()));
        }
        check_finite(weight.as_slice(), "gain weight")?;
        let asym = (&weight - weight.transpose()).amax();
        if asym > 1e-12 * weight.amax().max(1.0) {
            return Err(Error::Domain("gain weight must be symmetric".into()));
        }
        if weight.clone().cholesky().is_none() {
            return Err(Error::Domain("gain weight must be positive definite".into()));
        }
        self.weight = Some(weight);
        Ok(self)
    }

    /// Scalar weight `w·I` of dimension `dim`.
    pub fn with_scalar_weight(self, w: f64, dim: usize) -> Result<Self> {
        self.with_weight(DMatrix::identity(dim, dim) * w)
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn weight(&self) -> Option<&DMatrix<f64>> {
        self.weight.as_ref()
    }

    /// Hölder power `a = 1 - 1/exponent`, always inside ]0, 1/2[.
    pub fn holder_power(&self) -> f64 {
        1.0 - 1.0 / self.exponent
    }

    /// Quadratic form `eᵀWe` (plain squared norm when unweighted).
    pub fn quadratic_form(&self, e: &DVector<f64>) -> Result<f64> {
        check_finite(e.as_slice(), "gain argument")?;
        match &self.weight {
            None => Ok(e.norm_squared()),
            Some(w) => {
                check_dim("holder gain weight", w.nrows(), e.len())?;
                Ok(e.dot(&(w * e)))
            }
        }
    }

    /// Gain value as a function of the quadratic form `v = eᵀWe`.
    pub fn gain_from_quadratic(&self, v: f64) -> f64 {
        if v == 0.0 {
            return -1.0;
        }
        let x = (self.holder_power() * v.ln()).exp();
        (x - self.scale) / (x + self.scale)
    }
}

/// Hölder gain `(x - scale)/(x + scale)` with `x = (eᵀWe)^(1-1/exponent)`.
///
/// Returns exactly -1 at the origin and stays strictly below 1.
pub fn holder_gain(e: &DVector<f64>, params: &HolderGainParams) -> Result<f64> {
    let v = params.quadratic_form(e)?;
    Ok(params.gain_from_quadratic(v))
}

/// Class-K decrement gain `4λ V^(2a) / (V^a + λ)²`, `a = 1 - 1/exponent`.
pub fn gamma_of_v(v: f64, params: &HolderGainParams) -> Result<f64> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Domain(format!("V must be finite and >= 0, got {v}")));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let lambda = params.scale();
    let x = (params.holder_power() * v.ln()).exp();
    Ok(4.0 * lambda * x * x / ((x + lambda) * (x + lambda)))
}

/// Ultimate-bound inflation factor `ρ = ζ / (1 - √(1-ζ))` with `ζ = 1 - g²`.
///
/// Evaluated as `1 + √(1-ζ) = 1 + |g|`, which equals the quotient for
/// `ζ ∈ ]0,1]` and stays finite at `ζ = 0`.
pub fn robustness_radius(gain_value: f64) -> f64 {
    // √(1-ζ) = |g| exactly
    1.0 + gain_value.abs().min(1.0)
}

/// Same factor parameterised directly by `ζ ∈ [0, 1]`.
pub fn robustness_radius_from_zeta(zeta: f64) -> f64 {
    1.0 + (1.0 - zeta.clamp(0.0, 1.0)).sqrt()
}

/// Non-negative Lyapunov sequence together with the decrement exponent and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    values: Vec<f64>,
    alpha: f64,
    eta: f64,
}

impl LyapunovTrace {
    pub fn new(values: Vec<f64>, alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in ]0,1[, got {alpha}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Domain(format!("eta must be positive, got {eta}")));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("trace values must be finite and >= 0".into()));
        }
        if let Some(first_zero) = values.iter().position(|v| *v == 0.0) {
            if values[first_zero..].iter().any(|v| *v != 0.0) {
                return Err(Error::Domain(
                    "trace must stay at zero once it reaches zero".into(),
                ));
            }
        }
        Ok(Self { values, alpha, eta })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Threshold `η^(1/(1-α))` below which one step of the recursion reaches zero.
    pub fn epsilon(&self) -> f64 {
        self.eta.powf(1.0 / (1.0 - self.alpha))
    }
}

/// Iterates `V ← max(0, V - η V^α)` until zero or `max_steps`.
///
/// Returns the trace and the first index with `V = 0`, if reached.
pub fn fts_recursion(
    v0: f64,
    eta: f64,
    alpha: f64,
    max_steps: usize,
) -> Result<(LyapunovTrace, Option<usize>)> {
    if !(v0.is_finite() && v0 >= 0.0) {
        return Err(Error::Domain(format!("V0 must be finite and >= 0, got {v0}")));
    }
    let mut values = Vec::with_capacity(64);
    let mut v = v0;
    values.push(v);
    let mut reached = (v == 0.0).then_some(0);
    let mut k = 0;
    while reached.is_none() && k < max_steps {
        let next = v - eta * v.powf(alpha);
        // the bound going non-positive forces V = 0
        v = if next > 0.0 { next } else { 0.0 };
        k += 1;
        values.push(v);
        if v == 0.0 {
            reached = Some(k);
        }
    }
    Ok((LyapunovTrace::new(values, alpha, eta)?, reached))
}

/// Relative slack for rounding when comparing against the decrement bound.
const DECREMENT_RTOL: f64 = 1e-12;

/// Checks the finite-time decrement condition on a trace.
///
/// For each consecutive pair, `V_{k+1} <= max(0, V_k - γ(V_k)·V_k^α)`; a
/// bound that goes negative can only be met by `V_{k+1} = 0`. In addition
/// `γ(V_k) >= ε^(1-α)` must hold at every recorded `V_k >= ε`.
pub fn verify_fts_condition<G>(trace: &LyapunovTrace, gamma_fn: G, epsilon: f64) -> bool
where
    G: Fn(f64) -> f64,
{
    let alpha = trace.alpha();
    let floor = epsilon.powf(1.0 - alpha);
    let vals = trace.values();
    for (k, &v) in vals.iter().enumerate() {
        let gamma = gamma_fn(v);
        if v >= epsilon && gamma < floor * (1.0 - DECREMENT_RTOL) {
            return false;
        }
        if let Some(&next) = vals.get(k + 1) {
            let bound = (v - gamma * v.powf(alpha)).max(0.0);
            if next > bound + DECREMENT_RTOL * v {
                return false;
            }
        }
    }
    true
}

/// Checks `|V_{i+1} - V_{j+1}| / |i-j|^(1/(1-α)) <= ε + slack(|i-j|)` for all `i ≠ j`.
///
/// The slack for the higher-order remainder is fixed at `ε` per unit index
/// gap, so the admissible bound at gap `d` is `ε·(1 + d)`.
pub fn verify_holder_continuity(trace: &LyapunovTrace, epsilon: f64) -> bool {
    let vals = trace.values();
    let n = vals.len();
    if n < 2 {
        return true;
    }
    let h = 1.0 / (1.0 - trace.alpha());
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    // Non-increasing trace with non-increasing decrements (every recursion
    // trace): the widest gap at distance d is V_0 - V_d.
    let concave = vals.windows(3).all(|w| w[1] <= w[0] && w[2] <= w[1] && w[1] - w[2] <= w[0] - w[1])
        && vals[1] <= vals[0];
    for d in 1..n {
        let denom = (d as f64).powf(h);
        let allowed = epsilon * (1.0 + d as f64);
        // range/d^h falls and the allowance grows with d: nothing further can fail
        if range / denom <= allowed {
            return true;
        }
        if concave {
            if (vals[0] - vals[d]) / denom > allowed {
                return false;
            }
            continue;
        }
        for i in 0..n - d {
            if (vals[i] - vals[i + d]).abs() / denom > allowed {
                return false;
            }
        }
    }
    true
}
