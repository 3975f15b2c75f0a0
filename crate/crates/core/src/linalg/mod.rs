//! Small dense linear algebra: matrices, a Jacobi eigensolver, least squares.

mod eigen;
mod lstsq;
mod matrix;

pub use eigen::{hermitian_eigenvalues, symmetric_eigenvalues, HermitianMatrix};
pub use lstsq::least_squares;
pub use matrix::Matrix;
