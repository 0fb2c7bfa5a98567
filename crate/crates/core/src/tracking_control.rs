//! Model-free tracking laws over the ultra-local model.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::fts_core::{holder_gain, robustness_radius, HolderGainParams};

/// Smallest admissible ratio of extreme singular values of `G`.
pub const RANK_TOL: f64 = 1e-12;

/// Controller configuration: FTS gain `(s, μ)`, designed influence matrix and relative degree.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGains {
    pub params: HolderGainParams,
    pub g: DMatrix<f64>,
    pub relative_degree: usize,
}

impl ControlGains {
    pub fn new(params: HolderGainParams, g: DMatrix<f64>, relative_degree: usize) -> Result<Self> {
        if relative_degree == 0 {
            return Err(Error::Domain("relative degree must be >= 1".into()));
        }
        check_full_row_rank(&g)?;
        Ok(Self {
            params,
            g,
            relative_degree,
        })
    }
}

/// Tracking error `e^y_k = y_k - y^d_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingError {
    pub e_y: DVector<f64>,
    pub step_index: usize,
}

impl TrackingError {
    pub fn new(y: &DVector<f64>, y_d: &DVector<f64>, step_index: usize) -> Self {
        Self {
            e_y: y - y_d,
            step_index,
        }
    }
}

fn check_full_row_rank(g: &DMatrix<f64>) -> Result<()> {
    let (n, m) = g.shape();
    if n == 0 || m < n {
        return Err(Error::Singular(format!(
            "influence matrix must be n×m with m >= n >= 1, got {n}×{m}"
        )));
    }
    check_finite(g.as_slice(), "influence matrix")?;
    let sv = g.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min < RANK_TOL * max {
        return Err(Error::Singular(format!(
            "influence matrix is rank deficient (σ_min/σ_max = {:e})",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    Ok(())
}

/// Solves `G u = rhs`: exact inverse when square, minimum-norm `Gᵀ(GGᵀ)⁻¹ rhs` when wide.
pub fn solve_input(g: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("solve_input", g.nrows(), rhs.len())?;
    check_finite(rhs.as_slice(), "solve_input rhs")?;
    check_full_row_rank(g)?;
    let singular = || Error::Singular("influence matrix factorisation failed".into());
    if g.is_square() {
        g.clone().lu().solve(rhs).ok_or_else(singular)
    } else {
        let ggt = g * g.transpose();
        let w = ggt.cholesky().ok_or_else(singular)?.solve(rhs);
        Ok(g.transpose() * w)
    }
}

/// `G u = y^d_{k+ν} - F̂_k`.
pub fn control_law_basic(
    y_d_future: &DVector<f64>,
    f_hat: &DVector<f64>,
    gains: &ControlGains,
) -> Result<DVector<f64>> {
    check_dim("control law", y_d_future.len(), f_hat.len())?;
    solve_input(&gains.g, &(y_d_future - f_hat))
}

/// `C(ê)·ê`, the tracking-error feedback term of the FTS law.
pub fn fts_correction(e_y: &DVector<f64>, params: &HolderGainParams) -> Result<DVector<f64>> {
    Ok(e_y * holder_gain(e_y, params)?)
}

/// `G u = y^d_{k+ν} - F̂_k + C(ê^y)·ê^y`.
pub fn control_law_fts(
    y_d_future: &DVector<f64>,
    f_hat: &DVector<f64>,
    e_y_recent: &DVector<f64>,
    gains: &ControlGains,
) -> Result<DVector<f64>> {
    check_dim("control law", y_d_future.len(), f_hat.len())?;
    check_dim("control law", y_d_future.len(), e_y_recent.len())?;
    let rhs = y_d_future - f_hat + fts_correction(e_y_recent, &gains.params)?;
    solve_input(&gains.g, &rhs)
}

/// Membership in `{ e : σ(e)·‖e‖ <= B }`.
pub fn in_neighborhood_y(e_y: &DVector<f64>, b: f64, params: &HolderGainParams) -> Result<bool> {
    let sigma = robustness_radius(holder_gain(e_y, params)?);
    Ok(sigma * e_y.norm() <= b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn reference_g() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.559, 0.196, 0.196, 0.657]) * 0.01
    }

    fn gains(g: DMatrix<f64>) -> ControlGains {
        ControlGains::new(HolderGainParams::new(11.0 / 9.0, 0.35).unwrap(), g, 2).unwrap()
    }

    #[test]
    fn solve_identity() {
        let u = solve_input(&DMatrix::identity(3, 3), &v(&[1.0, -2.0, 3.0])).unwrap();
        assert_eq!(u, v(&[1.0, -2.0, 3.0]));
    }

    #[test]
    fn solve_reference_matrix() {
        let u = solve_input(&reference_g(), &v(&[0.1, 0.2])).unwrap();
        assert_relative_eq!(u[0], 8.058_458_8, epsilon = 1e-6);
        assert_relative_eq!(u[1], 28.037_354_76, epsilon = 1e-6);
        // 2×2 Cramer's rule as independent route
        let a = reference_g();
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        assert_relative_eq!(det / 1e-4, 0.328_847, epsilon = 1e-12);
        let u0 = (0.1 * a[(1, 1)] - a[(0, 1)] * 0.2) / det;
        let u1 = (a[(0, 0)] * 0.2 - a[(1, 0)] * 0.1) / det;
        assert_relative_eq!(u[0], u0, max_relative = 1e-12);
        assert_relative_eq!(u[1], u1, max_relative = 1e-12);
    }

    #[test]
    fn solve_wide_minimum_norm() {
        let g = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let u = solve_input(&g, &v(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(u, v(&[1.0, 1.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn solve_rank_deficient() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(solve_input(&g, &v(&[1.0, 1.0])), Err(Error::Singular(_))));
        let tall = DMatrix::zeros(3, 2);
        assert!(matches!(solve_input(&tall, &v(&[1.0, 1.0, 1.0])), Err(Error::Singular(_))));
    }

    #[test]
    fn basic_law_subtraction() {
        let g = gains(DMatrix::identity(2, 2));
        let u = control_law_basic(&v(&[1.0, 1.0]), &v(&[0.5, 0.0]), &g).unwrap();
        assert_eq!(u, v(&[0.5, 1.0]));
    }

    #[test]
    fn basic_law_identity_with_injected_error() {
        // y_{k+ν} = F + G u with F̂ = F + e^F gives e^y = -e^F
        let g = gains(reference_g());
        let f = v(&[0.3, -0.7]);
        let e_f = v(&[0.1, -0.1]);
        let y_d = v(&[1.0, 2.0]);
        let u = control_law_basic(&y_d, &(&f + &e_f), &g).unwrap();
        let y = &f + &g.g * &u;
        assert_relative_eq!(y - y_d, v(&[-0.1, 0.1]), epsilon = 1e-12);
    }

    #[test]
    fn fts_law_reduces_to_basic_at_zero_error() {
        let g = gains(reference_g());
        let a = control_law_basic(&v(&[1.0, 2.0]), &v(&[0.1, 0.2]), &g).unwrap();
        let b = control_law_fts(&v(&[1.0, 2.0]), &v(&[0.1, 0.2]), &v(&[0.0, 0.0]), &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fts_correction_unit_error() {
        let p = HolderGainParams::new(11.0 / 9.0, 0.35).unwrap();
        let c = fts_correction(&v(&[1.0, 0.0]), &p).unwrap();
        assert_relative_eq!(c[0], 0.65 / 1.35, epsilon = 1e-15);
        assert_eq!(c[1], 0.0);
    }

    #[test]
    fn fts_law_error_dynamics_decrease() {
        // perfect estimation: e^y_{k+ν} = C(e^y_{k+ν-1})·e^y_{k+ν-1}
        let g = gains(reference_g());
        let f = v(&[0.2, 0.1]);
        let mut e = v(&[3.0, -4.0]);
        let mut prev = e.norm();
        for _ in 0..200 {
            let y_d = v(&[0.0, 0.0]);
            let u = control_law_fts(&y_d, &f, &e, &g).unwrap();
            e = &f + &g.g * &u - &y_d;
            assert!(e.norm() < prev);
            prev = e.norm();
        }
    }

    #[test]
    fn neighborhood_examples() {
        let p = HolderGainParams::new(11.0 / 9.0, 0.35).unwrap();
        assert!(in_neighborhood_y(&v(&[0.0, 0.0]), 1e-6, &p).unwrap());
        let r = 0.35f64.powf(1.0 / p.holder_power()).sqrt();
        assert!(in_neighborhood_y(&v(&[0.0, r]), r * (1.0 + 1e-12), &p).unwrap());
        assert!(!in_neighborhood_y(&v(&[0.0, r]), r * (1.0 - 1e-12), &p).unwrap());
        assert!(!in_neighborhood_y(&v(&[2.0, 0.0]), 1.0, &p).unwrap());
    }

    proptest! {
        #[test]
        fn solve_residual_small(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
                                d in -5.0f64..5.0, e in -5.0f64..5.0, f in -5.0f64..5.0,
                                r0 in -10.0f64..10.0, r1 in -10.0f64..10.0) {
            let g = DMatrix::from_row_slice(2, 3, &[a, b, c, d, e, f]);
            let sv = g.singular_values();
            prop_assume!(sv.min() > 1e-3 * sv.max());
            let rhs = v(&[r0, r1]);
            let u = solve_input(&g, &rhs).unwrap();
            prop_assert!((&g * &u - &rhs).norm() <= 1e-10 * rhs.norm().max(1e-300));
            // minimum norm: u lies in the row space of G
            let pinv = g.clone().pseudo_inverse(1e-14).unwrap();
            prop_assert!((&u - pinv * &rhs).norm() <= 1e-9 * u.norm().max(1.0));
        }
    }
}
