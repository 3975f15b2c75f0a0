//! Published reference data bundled with the crate.

use serde::Deserialize;

use crate::linalg::Matrix;

pub const GAMMA_AC_JSON: &str = include_str!("../../../reference/gamma_ac.json");
pub const GAMMA_AB_JSON: &str = include_str!("../../../reference/gamma_ab.json");
pub const DEPHASING_INPUTS_JSON: &str = include_str!("../../../reference/dephasing_inputs.json");
pub const SHAPE_STATISTICS_JSON: &str = include_str!("../../../reference/shape_statistics.json");

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceMatrix {
    pub label: String,
    pub provenance: String,
    pub gamma: Matrix<f64>,
    /// Ten-block standard deviations of each entry.
    pub errors: Matrix<f64>,
    pub ppt_transposed_mode: usize,
    pub ppt_eigenvalues: Vec<f64>,
    pub trace: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DephasingInputs {
    pub provenance: String,
    pub mean: [f64; 4],
    pub transmittance: f64,
    pub phase_noise_degrees: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ShapeReference {
    pub provenance: String,
    pub skewness: std::collections::BTreeMap<String, [f64; 2]>,
    pub kurtosis: std::collections::BTreeMap<String, [f64; 2]>,
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> T {
    serde_json::from_str(text).expect("bundled reference data is valid")
}

/// Covariance of A' and C' after Alice's beam splitter.
pub fn gamma_ac() -> ReferenceMatrix {
    parse(GAMMA_AC_JSON)
}

/// Output covariance of A' and B' before correction.
pub fn gamma_ab() -> ReferenceMatrix {
    parse(GAMMA_AB_JSON)
}

pub fn dephasing_inputs() -> DephasingInputs {
    parse(DEPHASING_INPUTS_JSON)
}

pub fn shape_reference() -> ShapeReference {
    parse(SHAPE_STATISTICS_JSON)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_parses() {
        let ac = gamma_ac();
        assert_eq!(ac.gamma.rows(), 4);
        assert!((ac.gamma.trace() - ac.trace).abs() < 1e-9);
        let ab = gamma_ab();
        assert!((ab.gamma.trace() - ab.trace).abs() < 1e-9);
        assert_eq!(dephasing_inputs().mean[1], 9.876);
        assert_eq!(shape_reference().kurtosis.len(), 4);
    }

    #[test]
    fn reference_files_are_valid_states() {
        assert!(crate::io::parse_state(GAMMA_AC_JSON).is_ok());
        assert!(crate::io::parse_state(GAMMA_AB_JSON).is_ok());
    }
}
