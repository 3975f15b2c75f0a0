//! Cyclic Jacobi eigensolver for small dense symmetric matrices, and a Hermitian
//! front end that works on the real-symmetric embedding `[[Re, -Im], [Im, Re]]`.
//!
//! The embedding has the Hermitian spectrum with every eigenvalue doubled. After
//! sorting, neighbours are paired and averaged to recover the `n` eigenvalues.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Complex Hermitian matrix stored as real and imaginary parts.
#[derive(Debug, Clone)]
pub struct HermitianMatrix<T> {
    pub re: Matrix<T>,
    pub im: Matrix<T>,
}

impl<T: Real> HermitianMatrix<T> {
    /// Validates `re = reᵀ` and `im = -imᵀ` within `tol`.
    pub fn new(re: Matrix<T>, im: Matrix<T>, tol: T) -> Result<Self> {
        if !re.is_square() || re.rows() != im.rows() || re.cols() != im.cols() {
            return Err(Error::invalid("hermitian parts must be square and equally sized"));
        }
        let n = re.rows();
        for i in 0..n {
            for j in i..n {
                let re_err = (re[(i, j)] - re[(j, i)]).abs();
                let im_err = (im[(i, j)] + im[(j, i)]).abs();
                if re_err > tol || im_err > tol {
                    return Err(Error::invalid(format!(
                        "matrix is not Hermitian at ({i},{j}): |ΔRe|={re_err}, |ΣIm|={im_err}"
                    )));
                }
            }
        }
        Ok(Self { re, im })
    }

    pub fn dim(&self) -> usize {
        self.re.rows()
    }

    /// `[[Re, -Im], [Im, Re]]`.
    pub fn real_embedding(&self) -> Matrix<T> {
        let n = self.dim();
        let mut out = Matrix::zeros(2 * n, 2 * n);
        out.set_block(0, 0, &self.re);
        out.set_block(n, n, &self.re);
        out.set_block(0, n, &-&self.im);
        out.set_block(n, 0, &self.im);
        out
    }
}

/// Eigenvalues of a real symmetric matrix, descending.
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    if !a.is_square() {
        return Err(Error::invalid("eigenvalues of a non-square matrix"));
    }
    if !a.is_finite() {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let scale = a.max_abs().max(T::one());
    if !a.is_symmetric(T::tol(1e-9) * scale) {
        return Err(Error::invalid(format!("matrix is not symmetric (max asymmetry {})", a.asymmetry())));
    }
    let mut vals = jacobi_diagonalize(a.symmetrize())?;
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(vals)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues<T: Real>(h: &HermitianMatrix<T>) -> Result<Vec<T>> {
    let doubled = symmetric_eigenvalues(&h.real_embedding())?;
    let half = T::lit(0.5);
    Ok(doubled.chunks(2).map(|p| (p[0] + p[1]) * half).collect())
}

/// Cyclic Jacobi sweeps until every off-diagonal entry falls below `1e-12·‖A‖_F`.
fn jacobi_diagonalize<T: Real>(mut a: Matrix<T>) -> Result<Vec<T>> {
    let n = a.rows();
    let threshold = T::tol(1e-12) * a.frobenius_norm();
    let two = T::lit(2.0);
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= threshold {
            return Ok(a.diag());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= threshold * T::lit(1e-3) {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
            }
        }
    }
    Err(Error::Numerical(format!("Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")))
}

/// Applies `Jᵀ A J` for the plane rotation in (p, q).
fn rotate<T: Real>(a: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
}
