//! Two-mode covariance tomography from pairs of rotated-quadrature measurements.
//!
//! A setting `(θ_A, θ_B)` measures `S_θ = cos θ · x + sin θ · p` on each mode.
//! Each setting contributes three linear equations (two variances and one
//! covariance) in the ten independent entries of the covariance matrix.

mod stats;

pub use stats::{
    block_errors, pair_statistics, shape_statistics, tomography_report, BlockErrors, BlockMode, ChannelShape,
    ShapeStats, TomographyReport, DEFAULT_BLOCKS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::scalar::Real;

/// Measurement angles in degrees, normalized to `[0, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    theta_a: f64,
    theta_b: f64,
}

fn wrap_degrees(theta: f64) -> f64 {
    let w = theta.rem_euclid(180.0);
    if w >= 180.0 {
        0.0
    } else {
        w
    }
}

impl MeasurementSetting {
    pub fn new(theta_a: f64, theta_b: f64) -> Result<Self> {
        if !(theta_a.is_finite() && theta_b.is_finite()) {
            return Err(Error::invalid("measurement angles must be finite"));
        }
        Ok(Self { theta_a: wrap_degrees(theta_a), theta_b: wrap_degrees(theta_b) })
    }

    pub fn theta_a(&self) -> f64 {
        self.theta_a
    }

    pub fn theta_b(&self) -> f64 {
        self.theta_b
    }

    /// `(cos θ_A, sin θ_A)` and `(cos θ_B, sin θ_B)`.
    pub fn projectors<T: Real>(&self) -> ([T; 2], [T; 2]) {
        let proj = |deg: f64| {
            let rad = deg.to_radians();
            // exact values at the canonical angles keep reconstructions exact
            let (s, c) = match deg {
                d if d == 0.0 => (0.0, 1.0),
                d if d == 90.0 => (1.0, 0.0),
                _ => rad.sin_cos(),
            };
            [T::lit(c), T::lit(s)]
        };
        (proj(self.theta_a), proj(self.theta_b))
    }
}

/// The five settings that fix all ten entries.
pub fn canonical_settings() -> Vec<MeasurementSetting> {
    [(0.0, 0.0), (90.0, 0.0), (0.0, 90.0), (90.0, 90.0), (45.0, 45.0)]
        .iter()
        .map(|&(a, b)| MeasurementSetting { theta_a: a, theta_b: b })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics<T> {
    pub setting: MeasurementSetting,
    pub var_a: T,
    pub var_b: T,
    pub cov_ab: T,
    pub n: usize,
}

impl<T: Real> PairStatistics<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Validation(format!("pair statistics need n ≥ 2, got {}", self.n)));
        }
        if !(self.var_a.is_finite() && self.var_b.is_finite() && self.cov_ab.is_finite()) {
            return Err(Error::Validation("pair statistics must be finite".into()));
        }
        if self.var_a < T::zero() || self.var_b < T::zero() {
            return Err(Error::Validation("negative variance in pair statistics".into()));
        }
        let bound = (self.var_a * self.var_b).sqrt();
        if self.cov_ab.abs() > bound * (T::one() + T::tol(1e-12)) {
            return Err(Error::Validation(format!(
                "covariance {} exceeds Cauchy-Schwarz bound {bound}",
                self.cov_ab
            )));
        }
        Ok(())
    }
}

/// Unknown ordering of the linear system.
pub const UNKNOWNS: [&str; 10] = [
    "x_A variance",
    "p_A variance",
    "x_A p_A correlation",
    "x_B variance",
    "p_B variance",
    "x_B p_B correlation",
    "x_A x_B correlation",
    "x_A p_B correlation",
    "p_A x_B correlation",
    "p_A p_B correlation",
];

/// Matrix position `(i, j)` of each unknown in the 4×4 covariance.
const POSITIONS: [(usize, usize); 10] =
    [(0, 0), (1, 1), (0, 1), (2, 2), (3, 3), (2, 3), (0, 2), (0, 3), (1, 2), (1, 3)];

fn check_two_mode<T: Real>(gamma: &Matrix<T>) -> Result<()> {
    if gamma.rows() != 4 || gamma.cols() != 4 {
        return Err(Error::invalid(format!("tomography works on 4×4 covariances, got {}×{}", gamma.rows(), gamma.cols())));
    }
    Ok(())
}

fn local_row<T: Real>(c: [T; 2]) -> [T; 3] {
    [c[0] * c[0], c[1] * c[1], T::lit(2.0) * c[0] * c[1]]
}

fn equations<T: Real>(setting: &MeasurementSetting) -> [[T; 10]; 3] {
    let (a, b) = setting.projectors::<T>();
    let mut rows = [[T::zero(); 10]; 3];
    rows[0][..3].copy_from_slice(&local_row(a));
    rows[1][3..6].copy_from_slice(&local_row(b));
    rows[2][6] = a[0] * b[0];
    rows[2][7] = a[0] * b[1];
    rows[2][8] = a[1] * b[0];
    rows[2][9] = a[1] * b[1];
    rows
}

/// Exact statistics a state with covariance `gamma` yields for `setting`.
pub fn project_setting<T: Real>(gamma: &Matrix<T>, setting: &MeasurementSetting, n: usize) -> Result<PairStatistics<T>> {
    check_two_mode(gamma)?;
    let (a, b) = setting.projectors::<T>();
    let ua = [a[0], a[1], T::zero(), T::zero()];
    let ub = [T::zero(), T::zero(), b[0], b[1]];
    let gb = gamma.mul_vec(&ub);
    Ok(PairStatistics {
        setting: *setting,
        var_a: gamma.quadratic_form(&ua),
        var_b: gamma.quadratic_form(&ub),
        cov_ab: ua.iter().zip(&gb).map(|(&x, &y)| x * y).sum(),
        n,
    })
}

pub fn forward_project<T: Real>(
    gamma: &Matrix<T>,
    settings: &[MeasurementSetting],
    n: usize,
) -> Result<Vec<PairStatistics<T>>> {
    settings.iter().map(|s| project_setting(gamma, s, n)).collect()
}

/// Solves the setting equations for the covariance matrix (least squares when overdetermined).
pub fn reconstruct_covariance<T: Real>(stats: &[PairStatistics<T>]) -> Result<Matrix<T>> {
    if stats.is_empty() {
        return Err(Error::invalid("no measurement settings supplied"));
    }
    let mut a = Matrix::zeros(3 * stats.len(), 10);
    let mut rhs = Vec::with_capacity(3 * stats.len());
    for (k, s) in stats.iter().enumerate() {
        s.validate()?;
        for (r, row) in equations::<T>(&s.setting).iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                a[(3 * k + r, j)] = v;
            }
        }
        rhs.extend([s.var_a, s.var_b, s.cov_ab]);
    }
    let x = least_squares(&a, &rhs).map_err(|missing| {
        let names: Vec<&str> = missing.iter().map(|&j| UNKNOWNS[j]).collect();
        Error::invalid(format!("settings do not determine: {}", names.join(", ")))
    })?;
    let mut gamma = Matrix::zeros(4, 4);
    for (&(i, j), &v) in POSITIONS.iter().zip(&x) {
        gamma[(i, j)] = v;
        gamma[(j, i)] = v;
    }
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_wrap() {
        let s = MeasurementSetting::new(225.0, -45.0).unwrap();
        assert_eq!(s.theta_a(), 45.0);
        assert_eq!(s.theta_b(), 135.0);
    }

    #[test]
    fn vacuum_reconstructs_identity() {
        let stats = forward_project(&Matrix::<f64>::identity(4), &canonical_settings(), 100).unwrap();
        let g = reconstruct_covariance(&stats).unwrap();
        assert!(g.max_abs_diff(&Matrix::identity(4)) < 1e-14);
    }

    #[test]
    fn round_trip_general() {
        let g = Matrix::from_rows(&[
            [20.9, 0.3, -11.0, 2.1],
            [0.3, 20.5, 1.9, 10.8],
            [-11.0, 1.9, 25.2, -0.4],
            [2.1, 10.8, -0.4, 24.9],
        ])
        .unwrap();
        let stats = forward_project(&g, &canonical_settings(), 100).unwrap();
        assert!(reconstruct_covariance(&stats).unwrap().max_abs_diff(&g) < 1e-12);
    }

    #[test]
    fn missing_setting_is_named() {
        let settings: Vec<_> = canonical_settings().into_iter().take(4).collect();
        let stats = forward_project(&Matrix::<f64>::identity(4), &settings, 100).unwrap();
        let err = reconstruct_covariance(&stats).unwrap_err().to_string();
        assert!(err.contains("x_A p_A correlation"), "{err}");
    }

    #[test]
    fn overdetermined_accepted() {
        let mut settings = canonical_settings();
        settings.push(MeasurementSetting::new(30.0, 120.0).unwrap());
        let g = Matrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else { 0.1 });
        let stats = forward_project(&g, &settings, 10).unwrap();
        assert!(reconstruct_covariance(&stats).unwrap().max_abs_diff(&g) < 1e-12);
    }

    #[test]
    fn cauchy_schwarz_enforced() {
        let s = PairStatistics { setting: canonical_settings()[0], var_a: 1.0, var_b: 1.0, cov_ab: 1.5, n: 10 };
        assert!(s.validate().is_err());
    }
}
