//! Gaussian states in the covariance-matrix picture.
//!
//! Quadratures are ordered `(x₁, p₁, …, x_N, p_N)` and the covariance is
//! normalized so that the vacuum has `γ = I` (anticommutator convention,
//! `γ_jk = ⟨{ξ_j − d_j, ξ_k − d_k}⟩`). Every threshold in the crate assumes this.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, HermitianMatrix, Matrix};
use crate::scalar::Real;

/// Tolerance on `min eig(γ + iΩ)` below which a state counts as unphysical.
pub const PHYSICALITY_TOL: f64 = 1e-7;
/// Allowed deviation from `SΩSᵀ = Ω`.
pub const SYMPLECTIC_TOL: f64 = 1e-9;
/// Allowed asymmetry of a covariance matrix before it is rejected.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Which quadrature of a single-mode squeezed vacuum is squeezed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeAxis {
    /// `Var(x)` below vacuum.
    Position,
    /// `Var(p)` below vacuum.
    Momentum,
}

/// `Ω_N = ⊕ [[0, 1], [-1, 0]]`.
#[derive(Debug, Clone)]
pub struct SymplecticForm<T> {
    n_modes: usize,
    omega: Matrix<T>,
}

impl<T: Real> SymplecticForm<T> {
    pub fn new(n_modes: usize) -> Self {
        let mut omega = Matrix::zeros(2 * n_modes, 2 * n_modes);
        for k in 0..n_modes {
            omega[(2 * k, 2 * k + 1)] = T::one();
            omega[(2 * k + 1, 2 * k)] = -T::one();
        }
        Self { n_modes, omega }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    BeamSplitter,
    PhaseShift,
    Squeezer,
    General,
}

/// A symplectic matrix acting on a small ordered set of modes.
#[derive(Debug, Clone)]
pub struct SymplecticOp<T> {
    matrix: Matrix<T>,
    kind: OpKind,
    label: String,
}

impl<T: Real> SymplecticOp<T> {
    /// Wraps `matrix`, checking `SΩSᵀ = Ω` to within [`SYMPLECTIC_TOL`].
    pub fn new(matrix: Matrix<T>, kind: OpKind, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() || !matrix.rows().is_multiple_of(2) || matrix.rows() == 0 {
            return Err(Error::invalid(format!(
                "symplectic matrix must be 2N×2N, got {}×{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let op = Self { matrix, kind, label: label.into() };
        let err = op.symplectic_defect();
        if !(err < T::tol(SYMPLECTIC_TOL)) {
            return Err(Error::invalid(format!("matrix is not symplectic: ‖SΩSᵀ − Ω‖ = {err}")));
        }
        Ok(op)
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.rows() / 2
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `‖SΩSᵀ − Ω‖_max`.
    pub fn symplectic_defect(&self) -> T {
        let omega = SymplecticForm::new(self.n_modes());
        omega.matrix().congruence(&self.matrix).max_abs_diff(omega.matrix())
    }

    /// Embeds the op into an `n_modes` system at `modes`, identity elsewhere.
    pub fn embed(&self, modes: &[usize], n_modes: usize) -> Result<Matrix<T>> {
        check_modes(modes, n_modes)?;
        if modes.len() != self.n_modes() {
            return Err(Error::invalid(format!(
                "op acts on {} modes but {} indices were given",
                self.n_modes(),
                modes.len()
            )));
        }
        let idx = quadrature_indices(modes);
        let mut full = Matrix::identity(2 * n_modes);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                full[(i, j)] = self.matrix[(a, b)];
            }
        }
        Ok(full)
    }

    /// Composition `other ∘ self` (apply `self` first).
    pub fn then(&self, other: &Self) -> Result<Self> {
        if self.n_modes() != other.n_modes() {
            return Err(Error::invalid("cannot compose ops of different sizes"));
        }
        Self::new(
            other.matrix.matmul(&self.matrix),
            OpKind::General,
            format!("{} then {}", self.label, other.label),
        )
    }
}

/// Two-mode beam splitter with power transmittance `t`:
/// `[[√t·I, √(1−t)·I], [−√(1−t)·I, √t·I]]`.
///
/// The reflected amplitude picks up the minus sign on the second output.
pub fn beam_splitter<T: Real>(t: T) -> Result<SymplecticOp<T>> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::invalid(format!("transmittance {t} outside [0, 1]")));
    }
    let a = t.sqrt();
    let b = (T::one() - t).sqrt();
    let mut m = Matrix::zeros(4, 4);
    for k in 0..2 {
        m[(k, k)] = a;
        m[(k + 2, k + 2)] = a;
        m[(k, k + 2)] = b;
        m[(k + 2, k)] = -b;
    }
    SymplecticOp::new(m, OpKind::BeamSplitter, format!("beam splitter T={t}"))
}

/// Single-mode rotation `[[cos φ, sin φ], [−sin φ, cos φ]]`.
pub fn phase_shift<T: Real>(phi: T) -> Result<SymplecticOp<T>> {
    if !phi.is_finite() {
        return Err(Error::invalid("phase must be finite"));
    }
    let (s, c) = phi.sin_cos();
    let m = Matrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => c,
        (0, 1) => s,
        _ => -s,
    });
    SymplecticOp::new(m, OpKind::PhaseShift, format!("phase shift {phi}"))
}

/// Single-mode squeezer `diag(e^{r}, e^{−r})` on `(x, p)` for `Momentum`, swapped for `Position`.
pub fn squeezer<T: Real>(r: T, axis: SqueezeAxis) -> Result<SymplecticOp<T>> {
    if !r.is_finite() {
        return Err(Error::invalid("squeezing parameter must be finite"));
    }
    let (gx, gp) = match axis {
        SqueezeAxis::Momentum => (r.exp(), (-r).exp()),
        SqueezeAxis::Position => ((-r).exp(), r.exp()),
    };
    SymplecticOp::new(Matrix::from_diag(&[gx, gp]), OpKind::Squeezer, format!("squeezer r={r}"))
}

/// Linear form `u·ξ` over the quadratures, with the gain that produced it (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureCombination<T> {
    pub coefficients: Vec<T>,
    pub gain: Option<T>,
}

impl<T: Real> QuadratureCombination<T> {
    pub fn new(coefficients: Vec<T>) -> Self {
        Self { coefficients, gain: None }
    }

    /// `g·x₁ + x₂` on a two-mode system.
    pub fn x_sum(g: T) -> Self {
        Self { coefficients: vec![g, T::zero(), T::one(), T::zero()], gain: Some(g) }
    }

    /// `g·p₁ − p₂` on a two-mode system.
    pub fn p_difference(g: T) -> Self {
        Self { coefficients: vec![T::zero(), g, T::zero(), -T::one()], gain: Some(g) }
    }

    /// `uᵀu`, the variance the combination has in vacuum.
    pub fn vacuum_variance(&self) -> T {
        self.coefficients.iter().map(|&c| c * c).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == T::zero())
    }
}

/// Covariance matrix plus first moments of an `N`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState<T> {
    n_modes: usize,
    gamma: Matrix<T>,
    mean: Vec<T>,
}

impl<T: Real> GaussianState<T> {
    /// Validates shapes and symmetry, then stores the symmetrized covariance.
    pub fn new(gamma: Matrix<T>, mean: Vec<T>) -> Result<Self> {
        if !gamma.is_square() || gamma.rows() == 0 || !gamma.rows().is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "covariance must be 2N×2N with N ≥ 1, got {}×{}",
                gamma.rows(),
                gamma.cols()
            )));
        }
        if mean.len() != gamma.rows() {
            return Err(Error::Validation(format!(
                "mean has length {}, expected {}",
                mean.len(),
                gamma.rows()
            )));
        }
        if !gamma.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("state contains non-finite entries".into()));
        }
        let scale = gamma.max_abs().max(T::one());
        let asym = gamma.asymmetry();
        if asym > T::tol(SYMMETRY_TOL) * scale {
            return Err(Error::Validation(format!("covariance is asymmetric (max |γ_ij − γ_ji| = {asym})")));
        }
        Ok(Self { n_modes: gamma.rows() / 2, gamma: gamma.symmetrize(), mean })
    }

    pub fn from_covariance(gamma: Matrix<T>) -> Result<Self> {
        let n = gamma.rows();
        Self::new(gamma, vec![T::zero(); n])
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn gamma(&self) -> &Matrix<T> {
        &self.gamma
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn into_parts(self) -> (Matrix<T>, Vec<T>) {
        (self.gamma, self.mean)
    }

    /// Reduced state of the listed modes, in the given order.
    pub fn reduce(&self, modes: &[usize]) -> Result<Self> {
        check_modes(modes, self.n_modes)?;
        let idx = quadrature_indices(modes);
        Ok(Self {
            n_modes: modes.len(),
            gamma: self.gamma.select(&idx),
            mean: idx.iter().map(|&i| self.mean[i]).collect(),
        })
    }

    /// Product state `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut mean = self.mean.clone();
        mean.extend_from_slice(&other.mean);
        Self { n_modes: self.n_modes + other.n_modes, gamma: self.gamma.direct_sum(&other.gamma), mean }
    }

    pub fn is_physical(&self) -> Result<bool> {
        Ok(min_physicality_eigenvalue(self)? >= -T::lit(PHYSICALITY_TOL))
    }

    pub fn cast<U: Real>(&self) -> GaussianState<U> {
        GaussianState {
            n_modes: self.n_modes,
            gamma: self.gamma.cast(),
            mean: self.mean.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    pub(crate) fn from_parts_unchecked(gamma: Matrix<T>, mean: Vec<T>) -> Self {
        Self { n_modes: gamma.rows() / 2, gamma, mean }
    }
}

#[derive(Serialize, Deserialize)]
struct StateRepr<T> {
    n_modes: usize,
    gamma: Matrix<T>,
    mean: Vec<T>,
}

impl<T: Real + Serialize> Serialize for GaussianState<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateRepr { n_modes: self.n_modes, gamma: self.gamma.clone(), mean: self.mean.clone() }.serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for GaussianState<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = StateRepr::<T>::deserialize(deserializer)?;
        if repr.gamma.rows() != 2 * repr.n_modes {
            return Err(serde::de::Error::custom(format!(
                "n_modes = {} but gamma is {}×{}",
                repr.n_modes,
                repr.gamma.rows(),
                repr.gamma.cols()
            )));
        }
        GaussianState::new(repr.gamma, repr.mean).map_err(serde::de::Error::custom)
    }
}

pub fn vacuum_state<T: Real>(n_modes: usize) -> Result<GaussianState<T>> {
    if n_modes == 0 {
        return Err(Error::invalid("vacuum state needs at least one mode"));
    }
    Ok(GaussianState::from_parts_unchecked(Matrix::identity(2 * n_modes), vec![T::zero(); 2 * n_modes]))
}

/// Single-mode squeezed vacuum: `diag(e^{2r}, e^{−2r})` when `axis` is momentum.
pub fn squeezed_vacuum<T: Real>(r: T, axis: SqueezeAxis) -> Result<GaussianState<T>> {
    if !r.is_finite() || r < T::zero() {
        return Err(Error::invalid(format!("squeezing parameter must be finite and ≥ 0, got {r}")));
    }
    let big = (r + r).exp();
    let small = (-(r + r)).exp();
    let diag = match axis {
        SqueezeAxis::Momentum => [big, small],
        SqueezeAxis::Position => [small, big],
    };
    Ok(GaussianState::from_parts_unchecked(Matrix::from_diag(&diag), vec![T::zero(); 2]))
}

/// `γ → S γ Sᵀ`, `d → S d` with `op` embedded at `modes`.
pub fn apply_symplectic<T: Real>(
    state: &GaussianState<T>,
    op: &SymplecticOp<T>,
    modes: &[usize],
) -> Result<GaussianState<T>> {
    let s = op.embed(modes, state.n_modes())?;
    Ok(GaussianState::from_parts_unchecked(
        state.gamma.congruence(&s).symmetrize(),
        s.mul_vec(&state.mean),
    ))
}

/// Shifts the first moments; the covariance is untouched.
pub fn displace<T: Real>(state: &GaussianState<T>, shift: &[T]) -> Result<GaussianState<T>> {
    if shift.len() != state.mean.len() {
        return Err(Error::invalid(format!(
            "shift has length {}, state has {} quadratures",
            shift.len(),
            state.mean.len()
        )));
    }
    if shift.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("shift must be finite"));
    }
    let mean = state.mean.iter().zip(shift).map(|(&m, &s)| m + s).collect();
    Ok(GaussianState::from_parts_unchecked(state.gamma.clone(), mean))
}

/// `Λ_j γ Λ_j` with `Λ_j` flipping the sign of mode `mode`'s momentum.
pub fn partial_transpose<T: Real>(gamma: &Matrix<T>, mode: usize) -> Result<Matrix<T>> {
    if !gamma.is_square() || !gamma.rows().is_multiple_of(2) {
        return Err(Error::invalid("partial transpose needs a 2N×2N matrix"));
    }
    let n = gamma.rows() / 2;
    if mode >= n {
        return Err(Error::invalid(format!("mode index {mode} out of range for {n} modes")));
    }
    let pj = 2 * mode + 1;
    let mut out = gamma.clone();
    for k in 0..gamma.rows() {
        if k != pj {
            out[(pj, k)] = -out[(pj, k)];
            out[(k, pj)] = -out[(k, pj)];
        }
    }
    Ok(out)
}

/// Eigenvalues of `γ + iΩ`, descending.
pub fn uncertainty_spectrum<T: Real>(gamma: &Matrix<T>) -> Result<Vec<T>> {
    let n = gamma.rows() / 2;
    let h = HermitianMatrix::new(gamma.clone(), SymplecticForm::new(n).matrix().clone(), T::tol(SYMMETRY_TOL) * gamma.max_abs().max(T::one()))?;
    hermitian_eigenvalues(&h)
}

/// `min eig(γ + iΩ)`; non-negative (to [`PHYSICALITY_TOL`]) exactly for physical states.
pub fn min_physicality_eigenvalue<T: Real>(state: &GaussianState<T>) -> Result<T> {
    let ev = uncertainty_spectrum(&state.gamma)?;
    Ok(*ev.last().expect("non-empty spectrum"))
}

/// `uᵀ γ u` in vacuum units (the vacuum gives `uᵀu`).
pub fn quadratic_form_variance<T: Real>(state: &GaussianState<T>, u: &QuadratureCombination<T>) -> Result<T> {
    if u.coefficients.len() != state.gamma.rows() {
        return Err(Error::invalid(format!(
            "combination has {} coefficients, state has {} quadratures",
            u.coefficients.len(),
            state.gamma.rows()
        )));
    }
    Ok(state.gamma.quadratic_form(&u.coefficients))
}

pub(crate) fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

pub(crate) fn check_modes(modes: &[usize], n_modes: usize) -> Result<()> {
    for (k, &m) in modes.iter().enumerate() {
        if m >= n_modes {
            return Err(Error::invalid(format!("mode index {m} out of range for {n_modes} modes")));
        }
        if modes[..k].contains(&m) {
            return Err(Error::invalid(format!("duplicate mode index {m}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn vacuum_cases() {
        let v1 = vacuum_state::<f64>(1).unwrap();
        assert_eq!(v1.gamma(), &Matrix::identity(2));
        assert_eq!(v1.mean(), &[0.0, 0.0]);
        assert_eq!(vacuum_state::<f64>(3).unwrap().gamma(), &Matrix::identity(6));
        assert!(matches!(vacuum_state::<f64>(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn squeezed_vacuum_values() {
        assert_eq!(squeezed_vacuum(0.0, SqueezeAxis::Momentum).unwrap().gamma(), &Matrix::identity(2));
        let m = squeezed_vacuum(0.5, SqueezeAxis::Momentum).unwrap();
        assert_close(m.gamma()[(0, 0)], 1.0f64.exp(), 1e-12);
        assert_close(m.gamma()[(1, 1)], (-1.0f64).exp(), 1e-12);
        let p = squeezed_vacuum(0.5, SqueezeAxis::Position).unwrap();
        assert_close(p.gamma()[(0, 0)], (-1.0f64).exp(), 1e-12);
        assert_close(p.gamma()[(1, 1)], 1.0f64.exp(), 1e-12);
        assert!(squeezed_vacuum(-0.1, SqueezeAxis::Position).is_err());
        assert!(squeezed_vacuum(f64::NAN, SqueezeAxis::Position).is_err());
    }

    #[test]
    fn beam_splitter_cases() {
        assert_eq!(beam_splitter(1.0).unwrap().matrix(), &Matrix::identity(4));
        let half = beam_splitter(0.5).unwrap();
        assert_close(half.matrix()[(0, 2)], std::f64::consts::FRAC_1_SQRT_2, 1e-12);
        assert_close(half.matrix()[(2, 0)], -std::f64::consts::FRAC_1_SQRT_2, 1e-12);
        let bs = beam_splitter(0.49).unwrap();
        assert_close(bs.matrix()[(0, 0)], 0.7, 1e-12);
        assert_close(bs.matrix()[(1, 3)], 0.71414, 1e-5);
        assert_close(bs.matrix()[(3, 1)], -0.71414, 1e-5);
        assert!(bs.symplectic_defect() < 1e-9);
        assert!(beam_splitter(1.2).is_err());
        assert!(beam_splitter(-0.01).is_err());
    }

    #[test]
    fn phase_shift_cases() {
        assert!(phase_shift(0.0).unwrap().matrix().max_abs_diff(&Matrix::identity(2)) < 1e-15);
        let q = phase_shift(std::f64::consts::FRAC_PI_2).unwrap();
        let out = q.matrix().mul_vec(&[1.0, 2.0]);
        assert_close(out[0], 2.0, 1e-12);
        assert_close(out[1], -1.0, 1e-12);
        let pi = phase_shift(std::f64::consts::PI).unwrap();
        assert!(pi.matrix().max_abs_diff(&Matrix::identity(2).scale(-1.0)) < 1e-12);
        assert!(phase_shift(f64::INFINITY).is_err());
    }

    #[test]
    fn non_symplectic_rejected() {
        assert!(SymplecticOp::new(Matrix::from_diag(&[2.0, 2.0]), OpKind::General, "x").is_err());
    }

    #[test]
    fn balanced_bs_on_vacuum_is_vacuum() {
        let v = vacuum_state::<f64>(2).unwrap();
        let out = apply_symplectic(&v, &beam_splitter(0.5).unwrap(), &[0, 1]).unwrap();
        assert!(out.gamma().max_abs_diff(&Matrix::identity(4)) < 1e-12);
    }

    #[test]
    fn balanced_bs_on_squeezed_pair_matches_brute_force_product() {
        let r: f64 = 0.5;
        let input = squeezed_vacuum(r, SqueezeAxis::Momentum)
            .unwrap()
            .tensor(&squeezed_vacuum(r, SqueezeAxis::Position).unwrap());
        let out = apply_symplectic(&input, &beam_splitter(0.5).unwrap(), &[0, 1]).unwrap();
        // brute-force S γ Sᵀ with explicit index loops
        let h = 0.5_f64.sqrt();
        let s = [[h, 0., h, 0.], [0., h, 0., h], [-h, 0., h, 0.], [0., -h, 0., h]];
        let g = input.gamma();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        acc += s[i][k] * g[(k, l)] * s[j][l];
                    }
                }
                assert_close(out.gamma()[(i, j)], acc, 1e-12);
            }
        }
        let cosh2 = ((2.0 * r).exp() + (-2.0 * r).exp()) / 2.0;
        for k in 0..4 {
            assert_close(out.gamma()[(k, k)], cosh2, 1e-12);
        }
        assert!(out.gamma()[(0, 2)].abs() > 0.1);
    }

    #[test]
    fn rotation_acts_locally() {
        let gamma = Matrix::from_fn(6, 6, |i, j| if i == j { 2.0 + i as f64 } else { 0.1 * (i + j) as f64 });
        let st = GaussianState::new(gamma.clone(), vec![0.0; 6]).unwrap();
        let out = apply_symplectic(&st, &phase_shift(std::f64::consts::FRAC_PI_2).unwrap(), &[2]).unwrap();
        // (x₃, p₃) → (p₃, −x₃)
        assert_close(out.gamma()[(4, 4)], gamma[(5, 5)], 1e-12);
        assert_close(out.gamma()[(5, 5)], gamma[(4, 4)], 1e-12);
        assert_close(out.gamma()[(4, 0)], gamma[(5, 0)], 1e-12);
        assert_close(out.gamma()[(5, 0)], -gamma[(4, 0)], 1e-12);
        assert_close(out.gamma()[(0, 1)], gamma[(0, 1)], 1e-12);
    }

    #[test]
    fn bad_mode_routing() {
        let v = vacuum_state::<f64>(2).unwrap();
        let bs = beam_splitter(0.5).unwrap();
        assert!(apply_symplectic(&v, &bs, &[0, 2]).is_err());
        assert!(apply_symplectic(&v, &bs, &[1, 1]).is_err());
        assert!(apply_symplectic(&v, &bs, &[0]).is_err());
    }

    #[test]
    fn displacement_moves_mean_only() {
        let v = vacuum_state::<f64>(1).unwrap();
        assert_eq!(displace(&v, &[0.0, 0.0]).unwrap().mean(), v.mean());
        let d = displace(&v, &[1.0, -2.0]).unwrap();
        assert_eq!(d.mean(), &[1.0, -2.0]);
        assert_eq!(d.gamma(), &Matrix::identity(2));
        let dd = displace(&d, &[0.5, 0.5]).unwrap();
        assert_eq!(dd.mean(), &[1.5, -1.5]);
        assert!(displace(&v, &[1.0]).is_err());
    }

    #[test]
    fn partial_transpose_flips_momentum_row() {
        let g = Matrix::from_fn(4, 4, |i, j| 1.0 + (i * 4 + j.min(i) + i.min(j)) as f64);
        let g = g.symmetrize();
        let t = partial_transpose(&g, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let flip = (i == 3) ^ (j == 3);
                let expect = if flip { -g[(i, j)] } else { g[(i, j)] };
                assert_eq!(t[(i, j)], expect);
            }
        }
        assert_eq!(partial_transpose(&t, 1).unwrap(), g);
        assert_eq!(partial_transpose(&Matrix::<f64>::identity(4), 0).unwrap(), Matrix::identity(4));
        assert!(partial_transpose(&g, 2).is_err());
    }

    #[test]
    fn physicality_eigenvalue() {
        assert_close(min_physicality_eigenvalue(&vacuum_state::<f64>(1).unwrap()).unwrap(), 0.0, 1e-12);
        let bad = GaussianState::from_covariance(Matrix::from_diag(&[0.5, 0.5])).unwrap();
        assert_close(min_physicality_eigenvalue(&bad).unwrap(), -0.5, 1e-12);
        assert!(!bad.is_physical().unwrap());
    }

    #[test]
    fn quadratic_form_cases() {
        let v = vacuum_state::<f64>(2).unwrap();
        let g = 0.7;
        assert_close(quadratic_form_variance(&v, &QuadratureCombination::x_sum(g)).unwrap(), g * g + 1.0, 1e-12);
        assert_eq!(quadratic_form_variance(&v, &QuadratureCombination::new(vec![0.0; 4])).unwrap(), 0.0);
        assert!(quadratic_form_variance(&v, &QuadratureCombination::new(vec![1.0; 3])).is_err());
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.4, 1.0]]).unwrap();
        assert!(matches!(GaussianState::from_covariance(m), Err(Error::Validation(_))));
        let odd = Matrix::<f64>::identity(3);
        assert!(GaussianState::from_covariance(odd).is_err());
    }

    #[test]
    fn single_precision_state_ops() {
        let st = squeezed_vacuum(0.3_f32, SqueezeAxis::Momentum)
            .unwrap()
            .tensor(&vacuum_state(1).unwrap());
        let out = apply_symplectic(&st, &beam_splitter(0.5_f32).unwrap(), &[0, 1]).unwrap();
        assert!(min_physicality_eigenvalue(&out).unwrap() > -1e-5);
    }
}
