//! Ultra-local model reconstruction and the first/second-order observers for
//! the unknown term `F_k` in `y_{k+ν} = F_k + G_k u_k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_finite, Result};
use crate::fts_core::{holder_gain, robustness_radius, HolderGainParams};

/// One reconstructed sample of the unknown dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct UlmSample {
    pub f: DVector<f64>,
    pub step_index: usize,
}

/// `F_k = y_{k+ν} - G_k u_k`.
pub fn compute_f(
    y_k_plus_nu: &DVector<f64>,
    g_k: &DMatrix<f64>,
    u_k: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("compute_f rows", g_k.nrows(), y_k_plus_nu.len())?;
    check_dim("compute_f cols", g_k.ncols(), u_k.len())?;
    Ok(y_k_plus_nu - g_k * u_k)
}

/// `D(e)·e` for the given gain parameters.
fn corrected(e: &DVector<f64>, params: &HolderGainParams) -> Result<DVector<f64>> {
    Ok(e * holder_gain(e, params)?)
}

/// Common interface of the disturbance observers so the harness can swap them.
pub trait UlmObserver {
    /// Current estimate `F̂`, i.e. the prediction of the next reconstructed sample.
    fn estimate(&self) -> &DVector<f64>;

    /// Consumes the newest reconstructed sample `F_k` and returns `e^F_k = F̂_k - F_k`
    /// (the error of the estimate held before the update).
    fn update(&mut self, f_k: &DVector<f64>) -> Result<DVector<f64>>;
}

/// First-order observer `F̂_{k+1} = D(e^F_k)·e^F_k + F_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderObserverState {
    pub f_hat: DVector<f64>,
    pub last_f: Option<DVector<f64>>,
    pub params: HolderGainParams,
}

impl FirstOrderObserverState {
    pub fn new(f_hat0: DVector<f64>, params: HolderGainParams) -> Self {
        Self {
            f_hat: f_hat0,
            last_f: None,
            params,
        }
    }
}

/// Advances the first-order observer by one reconstructed sample.
pub fn first_order_update(
    state: &FirstOrderObserverState,
    f_k: &DVector<f64>,
) -> Result<FirstOrderObserverState> {
    check_finite(f_k.as_slice(), "F_k")?;
    check_dim("first-order observer", state.f_hat.len(), f_k.len())?;
    let e = &state.f_hat - f_k;
    let f_hat = corrected(&e, &state.params)? + f_k;
    Ok(FirstOrderObserverState {
        f_hat,
        last_f: Some(f_k.clone()),
        params: state.params.clone(),
    })
}

impl UlmObserver for FirstOrderObserverState {
    fn estimate(&self) -> &DVector<f64> {
        &self.f_hat
    }

    fn update(&mut self, f_k: &DVector<f64>) -> Result<DVector<f64>> {
        let e = &self.f_hat - f_k;
        *self = first_order_update(self, f_k)?;
        Ok(e)
    }
}

/// Second-order observer
///
/// ```text
/// ΔF̂_k    = D(e^Δ_{k-1})·e^Δ_{k-1} + ΔF_{k-1}
/// F̂_{k+1} = D(e^F_k)·e^F_k + F_k + ΔF̂_k
/// ```
///
/// with `e^Δ_{k-1} = ΔF̂_{k-1} - ΔF_{k-1}` and `ΔF_{k-1} = F_k - F_{k-1}`.
/// Until two samples exist it behaves as the first-order observer
/// (`ΔF̂ = 0`, `e^Δ = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderObserverState {
    pub f_hat: DVector<f64>,
    /// `ΔF̂_k` produced by the latest update.
    pub df_hat: DVector<f64>,
    /// Up to two most recent reconstructed samples, oldest first.
    pub f_history: Vec<DVector<f64>>,
    /// `e^Δ_{k-1}` consumed by the latest update.
    pub e_delta_prev: DVector<f64>,
    pub params_f: HolderGainParams,
    pub params_delta: HolderGainParams,
}

impl SecondOrderObserverState {
    pub fn new(
        f_hat0: DVector<f64>,
        params_f: HolderGainParams,
        params_delta: HolderGainParams,
    ) -> Self {
        let n = f_hat0.len();
        Self {
            f_hat: f_hat0,
            df_hat: DVector::zeros(n),
            f_history: Vec::with_capacity(2),
            e_delta_prev: DVector::zeros(n),
            params_f,
            params_delta,
        }
    }

    /// Same gains for both loops.
    pub fn with_shared_params(f_hat0: DVector<f64>, params: HolderGainParams) -> Self {
        Self::new(f_hat0, params.clone(), params)
    }
}

/// Advances the second-order observer by one reconstructed sample.
pub fn second_order_update(
    state: &SecondOrderObserverState,
    f_k: &DVector<f64>,
) -> Result<SecondOrderObserverState> {
    check_finite(f_k.as_slice(), "F_k")?;
    check_dim("second-order observer", state.f_hat.len(), f_k.len())?;

    let e_f = &state.f_hat - f_k;
    let (df_hat, e_delta_prev) = match state.f_history.last() {
        None => (DVector::zeros(f_k.len()), DVector::zeros(f_k.len())),
        Some(f_prev) => {
            let df_prev = f_k - f_prev;
            let e_delta = &state.df_hat - &df_prev;
            (corrected(&e_delta, &state.params_delta)? + df_prev, e_delta)
        }
    };
    let f_hat = corrected(&e_f, &state.params_f)? + f_k + &df_hat;

    let mut f_history = state.f_history.clone();
    if f_history.len() == 2 {
        f_history.remove(0);
    }
    f_history.push(f_k.clone());

    Ok(SecondOrderObserverState {
        f_hat,
        df_hat,
        f_history,
        e_delta_prev,
        params_f: state.params_f.clone(),
        params_delta: state.params_delta.clone(),
    })
}

impl UlmObserver for SecondOrderObserverState {
    fn estimate(&self) -> &DVector<f64> {
        &self.f_hat
    }

    fn update(&mut self, f_k: &DVector<f64>) -> Result<DVector<f64>> {
        let e = &self.f_hat - f_k;
        *self = second_order_update(self, f_k)?;
        Ok(e)
    }
}

/// Membership in `{ e : ρ(e)·‖e‖ <= B_F }`.
pub fn in_neighborhood_f(e: &DVector<f64>, b_f: f64, params: &HolderGainParams) -> Result<bool> {
    let rho = robustness_radius(holder_gain(e, params)?);
    Ok(rho * e.norm() <= b_f)
}
