//! Gaussian-state toolkit for distributing entanglement with separable ancillas.
//!
//! Covariance matrices are vacuum-normalized (vacuum `γ = I`) with quadratures
//! ordered `(x₁, p₁, x₂, p₂, …)`. The numerical core is generic over [`Real`]
//! (`f32` or `f64`); the aliases below fix it to `f64`.

pub mod dephasing;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod protocol;
pub mod reference;
pub mod scalar;
pub mod separability;
pub mod tomography;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix64 = linalg::Matrix<f64>;
pub type State = gaussian::GaussianState<f64>;
pub type Symplectic = gaussian::SymplecticOp<f64>;
pub type Config = protocol::ProtocolConfig<f64>;
pub type Trace = protocol::ProtocolTrace<f64>;
pub type Verdict = separability::PptVerdict<f64>;
pub type Dephasing = dephasing::DephasingParams<f64>;
pub type Pair = tomography::PairStatistics<f64>;
