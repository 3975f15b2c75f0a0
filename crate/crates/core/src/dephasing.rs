//! Gaussian phase noise on mode A ahead of Alice's beam splitter.
//!
//! A random rotation `φ ~ N(0, σ²)` of mode A followed by the beam splitter `U`
//! maps second moments exactly as
//!
//! ```text
//! γ' = U (Σ γ Σ + π ⊕ 0) Uᵀ,      d' = U Σ d,
//! π  = (1 − e^{−σ²})²/2 · (A + α) + (1 − e^{−2σ²})/2 · J (A + α) Jᵀ
//! ```
//!
//! with `Σ = diag(e^{−σ²/2}, e^{−σ²/2}, 1, 1)`, `A` the mode-A block of `γ` and
//! `α = 2 d_A d_Aᵀ`. The map is inverted in closed form, which lets a measured
//! post-beam-splitter covariance be traced back to the state before the noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::beam_splitter;
use crate::linalg::Matrix;
use crate::scalar::Real;

/// How a phase-noise figure quoted in degrees is turned into a variance in rad².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeReading {
    /// The figure is a variance in square degrees.
    #[default]
    SquareDegrees,
    /// The figure is a standard deviation in degrees; it is squared.
    StdDevDegrees,
}

/// Converts a phase-noise figure in degrees into a variance in rad².
pub fn phase_variance_from_degrees<T: Real>(value: T, reading: DegreeReading) -> T {
    let rad = T::PI() / T::lit(180.0);
    match reading {
        DegreeReading::SquareDegrees => value * rad * rad,
        DegreeReading::StdDevDegrees => (value * rad) * (value * rad),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingParams<T> {
    sigma2: T,
    transmittance: T,
}

impl<T: Real> DephasingParams<T> {
    pub fn new(sigma2: T, transmittance: T) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 >= T::zero()) {
            return Err(Error::invalid(format!("phase variance must be finite and ≥ 0, got {sigma2}")));
        }
        if !(transmittance >= T::zero() && transmittance <= T::one()) {
            return Err(Error::invalid(format!("transmittance {transmittance} outside [0, 1]")));
        }
        Ok(Self { sigma2, transmittance })
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn transmittance(&self) -> T {
        self.transmittance
    }

    /// `diag(e^{−σ²/2}, e^{−σ²/2}, 1, 1)`.
    pub fn sigma_matrix(&self) -> Matrix<T> {
        let damp = (-self.sigma2 * T::lit(0.5)).exp();
        Matrix::from_diag(&[damp, damp, T::one(), T::one()])
    }

    fn sigma_inverse(&self) -> Matrix<T> {
        let grow = (self.sigma2 * T::lit(0.5)).exp();
        Matrix::from_diag(&[grow, grow, T::one(), T::one()])
    }

    fn beam_splitter(&self) -> Result<Matrix<T>> {
        Ok(beam_splitter(self.transmittance)?.matrix().clone())
    }
}

/// `D = d dᵀ` for a mean vector `d`.
#[derive(Debug, Clone)]
pub struct FirstMomentMatrix<T> {
    d: Matrix<T>,
}

impl<T: Real> FirstMomentMatrix<T> {
    pub fn from_mean(mean: &[T]) -> Self {
        Self { d: Matrix::outer(mean, mean) }
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.d
    }

    /// Mean vector with the given sign pattern recovered from `D`: `|d_i| = √D_ii`,
    /// signs copied from `reference`.
    pub fn mean_like(&self, reference: &[T]) -> Vec<T> {
        self.d
            .diag()
            .iter()
            .zip(reference)
            .map(|(&dii, &r)| {
                let mag = dii.max(T::zero()).sqrt();
                if r < T::zero() {
                    -mag
                } else {
                    mag
                }
            })
            .collect()
    }
}

fn j_matrix<T: Real>() -> Matrix<T> {
    Matrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => T::one(),
        (1, 0) => -T::one(),
        _ => T::zero(),
    })
}

/// `c₁ (A + α) + c₂ J (A + α) Jᵀ` with the given prefactors.
fn rotation_mix<T: Real>(m: &Matrix<T>, c1: T, c2: T) -> Matrix<T> {
    let j = j_matrix::<T>();
    &m.scale(c1) + &m.congruence(&j).scale(c2)
}

/// Phase-noise correction `π` for mode-A block `a`, mean term `alpha = 2 d_A d_Aᵀ`.
pub fn pi_matrix<T: Real>(a: &Matrix<T>, alpha: &Matrix<T>, sigma2: T) -> Result<Matrix<T>> {
    check_2x2(a)?;
    check_2x2(alpha)?;
    let half = T::lit(0.5);
    let c1 = (T::one() - (-sigma2).exp()).powi(2) * half;
    let c2 = (T::one() - (-(sigma2 + sigma2)).exp()) * half;
    Ok(rotation_mix(&(a + alpha), c1, c2))
}

/// Inverse-map correction `π̃` built from `Ã = (Uᵀγ'U)_A` and `α̃ = 2(UᵀD'U)_A`.
pub fn pi_tilde_matrix<T: Real>(a_tilde: &Matrix<T>, alpha_tilde: &Matrix<T>, sigma2: T) -> Result<Matrix<T>> {
    check_2x2(a_tilde)?;
    check_2x2(alpha_tilde)?;
    let half = T::lit(0.5);
    let c1 = (T::one() - sigma2.exp()).powi(2) * half;
    let c2 = (T::one() - (sigma2 + sigma2).exp()) * half;
    Ok(rotation_mix(&(a_tilde + alpha_tilde), c1, c2))
}

fn check_2x2<T: Real>(m: &Matrix<T>) -> Result<()> {
    if m.rows() != 2 || m.cols() != 2 {
        return Err(Error::invalid(format!("expected a 2×2 block, got {}×{}", m.rows(), m.cols())));
    }
    Ok(())
}

fn check_two_mode<T: Real>(gamma: &Matrix<T>, d: &[T]) -> Result<()> {
    if gamma.rows() != 4 || gamma.cols() != 4 || d.len() != 4 {
        return Err(Error::invalid("dephasing acts on two-mode (4×4) covariances with length-4 means"));
    }
    Ok(())
}

/// Forward map: state of (A, C) before phase noise → (A', C') after the beam splitter.
pub fn dephase_forward<T: Real>(
    gamma_ac: &Matrix<T>,
    d_ac: &[T],
    params: &DephasingParams<T>,
) -> Result<(Matrix<T>, Vec<T>)> {
    check_two_mode(gamma_ac, d_ac)?;
    let u = params.beam_splitter()?;
    let sigma = params.sigma_matrix();
    let a = gamma_ac.block(0, 0, 2, 2);
    let alpha = FirstMomentMatrix::from_mean(&d_ac[..2]).matrix().scale(T::lit(2.0));
    let pi = pi_matrix(&a, &alpha, params.sigma2)?;
    let inner = &gamma_ac.congruence(&sigma) + &pi.direct_sum(&Matrix::zeros(2, 2));
    let gamma_out = inner.congruence(&u).symmetrize();
    let d_out = u.mul_vec(&sigma.mul_vec(d_ac));
    Ok((gamma_out, d_out))
}

/// Exact inverse of [`dephase_forward`] given the output covariance and mean.
pub fn dephase_invert<T: Real>(gamma_out: &Matrix<T>, d_out: &[T], params: &DephasingParams<T>) -> Result<Matrix<T>> {
    check_two_mode(gamma_out, d_out)?;
    if params.transmittance <= T::zero() || params.transmittance >= T::one() {
        return Err(Error::invalid("inversion needs a mixing beam splitter (0 < T < 1)"));
    }
    let u = params.beam_splitter()?;
    let ut = u.transpose();
    let back = gamma_out.congruence(&ut);
    let d_back = FirstMomentMatrix::from_mean(d_out).matrix().congruence(&ut);
    let a_tilde = back.block(0, 0, 2, 2);
    let alpha_tilde = d_back.block(0, 0, 2, 2).scale(T::lit(2.0));
    let pi_tilde = pi_tilde_matrix(&a_tilde, &alpha_tilde, params.sigma2)?;
    let out = &back.congruence(&params.sigma_inverse()) + &pi_tilde.direct_sum(&Matrix::zeros(2, 2));
    Ok(out.symmetrize())
}

/// Mean before the noise: `d = Σ⁻¹ Uᵀ d'`.
pub fn invert_mean<T: Real>(d_out: &[T], params: &DephasingParams<T>) -> Result<Vec<T>> {
    if d_out.len() != 4 {
        return Err(Error::invalid("mean must have length 4"));
    }
    let ut = params.beam_splitter()?.transpose();
    Ok(params.sigma_inverse().mul_vec(&ut.mul_vec(d_out)))
}
