//! FTS output observer used as a measurement noise filter:
//! `ŷ_{k+1} = y^m_{k+1} + B(e^o_k)·e^o_k`, `e^o_k = ŷ_k - y^m_k`.

use nalgebra::DVector;

use crate::error::{check_dim, check_finite, Result};
use crate::fts_core::{holder_gain, HolderGainParams};

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFilterState {
    pub y_hat: DVector<f64>,
    /// Measurement paired with `y_hat`; absent before the first update.
    pub last_meas: Option<DVector<f64>>,
    pub params: HolderGainParams,
}

impl OutputFilterState {
    pub fn new(y_hat0: DVector<f64>, params: HolderGainParams) -> Self {
        Self {
            y_hat: y_hat0,
            last_meas: None,
            params,
        }
    }

    /// `e^o_k = ŷ_k - y^m_k`, zero until a measurement has been paired with the estimate.
    pub fn error(&self) -> DVector<f64> {
        match &self.last_meas {
            Some(m) => &self.y_hat - m,
            None => DVector::zeros(self.y_hat.len()),
        }
    }

    /// Pairs the initial estimate `ŷ_0` with the first measurement `y^m_0`.
    pub fn prime(&mut self, y_meas: &DVector<f64>) -> Result<()> {
        check_finite(y_meas.as_slice(), "measurement")?;
        check_dim("output filter", self.y_hat.len(), y_meas.len())?;
        self.last_meas = Some(y_meas.clone());
        Ok(())
    }
}

/// One filter step with the next measurement `y^m_{k+1}`.
pub fn filter_update(state: &OutputFilterState, y_meas_next: &DVector<f64>) -> Result<OutputFilterState> {
    check_finite(y_meas_next.as_slice(), "measurement")?;
    check_dim("output filter", state.y_hat.len(), y_meas_next.len())?;
    let e_o = state.error();
    let y_hat = y_meas_next + &e_o * holder_gain(&e_o, &state.params)?;
    Ok(OutputFilterState {
        y_hat,
        last_meas: Some(y_meas_next.clone()),
        params: state.params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn reference_params() -> HolderGainParams {
        HolderGainParams::new(7.0 / 5.0, 2.0)
            .unwrap()
            .with_scalar_weight(2.1, 2)
            .unwrap()
    }

    #[test]
    fn zero_error_passes_measurement() {
        let mut s = OutputFilterState::new(v(&[0.5, 0.5]), reference_params());
        s.prime(&v(&[0.5, 0.5])).unwrap();
        let s = filter_update(&s, &v(&[1.0, -1.0])).unwrap();
        assert_eq!(s.y_hat, v(&[1.0, -1.0]));
    }

    #[test]
    fn unit_error_reference_gains() {
        let mut s = OutputFilterState::new(v(&[1.0, 0.0]), reference_params());
        s.prime(&v(&[0.0, 0.0])).unwrap();
        let s = filter_update(&s, &v(&[0.3, 0.4])).unwrap();
        // 2.1^(2/7) = 1.236125..., B = -0.236045908...
        assert_relative_eq!(s.y_hat[0], 0.3 - 0.236_045_908_330_031, epsilon = 1e-12);
        assert_relative_eq!(s.y_hat[1], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn error_on_gain_sphere_is_dropped() {
        let params = reference_params();
        // 2.1·r² = β^(1/a), a = 2/7
        let r = (2.0f64.powf(3.5) / 2.1).sqrt();
        let mut s = OutputFilterState::new(v(&[r, 0.0]), params);
        s.prime(&v(&[0.0, 0.0])).unwrap();
        let s = filter_update(&s, &v(&[0.1, 0.2])).unwrap();
        assert_relative_eq!(s.y_hat, v(&[0.1, 0.2]), epsilon = 1e-12);
    }

    #[test]
    fn unprimed_filter_uses_zero_error() {
        let s = OutputFilterState::new(v(&[5.0, 5.0]), reference_params());
        let s = filter_update(&s, &v(&[1.0, 2.0])).unwrap();
        assert_eq!(s.y_hat, v(&[1.0, 2.0]));
    }

    #[test]
    fn noise_free_error_shrinks() {
        let mut s = OutputFilterState::new(v(&[1.0, -2.0]), reference_params());
        s.prime(&v(&[0.0, 0.0])).unwrap();
        let mut prev = s.error().norm();
        for k in 1..200 {
            let y = v(&[0.01 * k as f64, (0.1 * k as f64).sin()]);
            s = filter_update(&s, &y).unwrap();
            let e = s.error().norm();
            assert!(e < prev);
            prev = e;
        }
    }
}
