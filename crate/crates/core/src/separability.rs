//! Separability and entanglement certificates for Gaussian states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{partial_transpose, quadratic_form_variance, uncertainty_spectrum, GaussianState, QuadratureCombination, PHYSICALITY_TOL};
use crate::linalg::symmetric_eigenvalues;
use crate::optimize::golden_section;
use crate::scalar::Real;

/// Resolution of the gain optimization.
pub const GAIN_XTOL: f64 = 1e-6;

/// Outcome of the PPT test on the `mode | rest` bipartition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PptVerdict<T> {
    /// Eigenvalues of `γ^{T_mode} + iΩ`, descending.
    pub eigenvalues: Vec<T>,
    pub min_eigenvalue: T,
    pub separable: bool,
    pub transposed_mode: usize,
    pub tolerance: f64,
}

/// One evaluation of the normalized product criterion at gain `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionPoint<T> {
    pub gain: T,
    pub var_x_norm: T,
    pub var_p_norm: T,
    pub product: T,
}

impl<T: Real> CriterionPoint<T> {
    /// Product below one certifies entanglement.
    pub fn certifies_entanglement(&self) -> bool {
        self.product < T::one()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainOptimum<T> {
    pub g_opt: T,
    pub point: CriterionPoint<T>,
    /// Objective was flat over the bracket and `g_opt` is the midpoint.
    pub flat: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalityVerdict<T> {
    pub min_eigenvalue: T,
    pub squeezed: bool,
}

/// PPT test isolating `mode` from the remaining modes.
///
/// For Gaussian states this is necessary and sufficient for `1 | N−1` separability.
pub fn ppt_test<T: Real>(state: &GaussianState<T>, mode: usize) -> Result<PptVerdict<T>> {
    if state.n_modes() < 2 {
        return Err(Error::invalid("PPT test needs at least two modes"));
    }
    let transposed = partial_transpose(state.gamma(), mode)?;
    let eigenvalues = uncertainty_spectrum(&transposed)?;
    let min_eigenvalue = *eigenvalues.last().unwrap();
    Ok(PptVerdict {
        separable: min_eigenvalue >= -T::lit(PHYSICALITY_TOL),
        eigenvalues,
        min_eigenvalue,
        transposed_mode: mode,
        tolerance: PHYSICALITY_TOL,
    })
}

/// `Δ²(g x₁ + x₂) · Δ²(g p₁ − p₂)`, each variance divided by its vacuum value `g² + 1`.
///
/// The two-mode vacuum sits exactly on the boundary (product 1) for every gain.
pub fn duan_product<T: Real>(state: &GaussianState<T>, g: T) -> Result<CriterionPoint<T>> {
    if state.n_modes() != 2 {
        return Err(Error::invalid(format!("product criterion needs two modes, got {}", state.n_modes())));
    }
    if !g.is_finite() {
        return Err(Error::invalid("gain must be finite"));
    }
    let norm = g * g + T::one();
    let var_x_norm = quadratic_form_variance(state, &QuadratureCombination::x_sum(g))? / norm;
    let var_p_norm = quadratic_form_variance(state, &QuadratureCombination::p_difference(g))? / norm;
    Ok(CriterionPoint { gain: g, var_x_norm, var_p_norm, product: var_x_norm * var_p_norm })
}

/// Golden-section minimization of the product criterion over `g ∈ [lo, hi]`.
pub fn optimize_gain<T: Real>(state: &GaussianState<T>, lo: T, hi: T) -> Result<GainOptimum<T>> {
    if state.n_modes() != 2 {
        return Err(Error::invalid(format!("product criterion needs two modes, got {}", state.n_modes())));
    }
    if !(lo < hi) {
        return Err(Error::invalid(format!("invalid gain bracket [{lo}, {hi}]")));
    }
    let objective = |g: T| duan_product(state, g).map(|p| p.product).unwrap_or(T::nan());
    let m = golden_section(objective, lo, hi, T::tol(GAIN_XTOL))?;
    Ok(GainOptimum { g_opt: m.x, point: duan_product(state, m.x)?, flat: m.flat })
}

/// Criterion evaluated on `n` evenly spaced gains across `[lo, hi]`.
pub fn criterion_curve<T: Real>(state: &GaussianState<T>, lo: T, hi: T, n: usize) -> Result<Vec<CriterionPoint<T>>> {
    if n < 2 || !(lo < hi) {
        return Err(Error::invalid("criterion curve needs n ≥ 2 and lo < hi"));
    }
    (0..n)
        .map(|k| duan_product(state, lo + (hi - lo) * T::lit(k as f64 / (n - 1) as f64)))
        .collect()
}

/// Smallest covariance eigenvalue; below one (minus tolerance) means some quadrature is squeezed.
///
/// A physical state without squeezing is a mixture of coherent states.
pub fn classicality_check<T: Real>(state: &GaussianState<T>) -> Result<ClassicalityVerdict<T>> {
    let ev = symmetric_eigenvalues(state.gamma())?;
    let min_eigenvalue = *ev.last().unwrap();
    Ok(ClassicalityVerdict { min_eigenvalue, squeezed: min_eigenvalue < T::one() - T::lit(PHYSICALITY_TOL) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{apply_symplectic, beam_splitter, squeezed_vacuum, vacuum_state, SqueezeAxis};

    #[test]
    fn vacuum_on_boundary() {
        let v = vacuum_state::<f64>(2).unwrap();
        for g in [0.0, 0.3, 1.0, 5.0] {
            assert!((duan_product(&v, g).unwrap().product - 1.0).abs() < 1e-12);
        }
        let opt = optimize_gain(&v, 0.1, 2.0).unwrap();
        assert!(opt.flat);
        assert!((opt.g_opt - 1.05).abs() < 1e-12);
        assert!((opt.point.product - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squeezed_pair_on_beam_splitter_is_entangled() {
        let st = squeezed_vacuum(0.5, SqueezeAxis::Momentum)
            .unwrap()
            .tensor(&squeezed_vacuum(0.5, SqueezeAxis::Position).unwrap());
        let out = apply_symplectic(&st, &beam_splitter(0.5).unwrap(), &[0, 1]).unwrap();
        let v = ppt_test(&out, 1).unwrap();
        assert!(v.min_eigenvalue < 0.0);
        assert!(!v.separable);
    }

    #[test]
    fn classicality_cases() {
        let v = classicality_check(&vacuum_state::<f64>(1).unwrap()).unwrap();
        assert!((v.min_eigenvalue - 1.0).abs() < 1e-12 && !v.squeezed);
        let s = classicality_check(&squeezed_vacuum(0.5, SqueezeAxis::Momentum).unwrap()).unwrap();
        assert!((s.min_eigenvalue - (-1.0f64).exp()).abs() < 1e-12 && s.squeezed);
    }

    #[test]
    fn arity_errors() {
        let one = vacuum_state::<f64>(1).unwrap();
        assert!(ppt_test(&one, 0).is_err());
        assert!(duan_product(&one, 1.0).is_err());
        let two = vacuum_state::<f64>(2).unwrap();
        assert!(duan_product(&two, f64::NAN).is_err());
        assert!(optimize_gain(&two, 1.0, 0.5).is_err());
    }
}
