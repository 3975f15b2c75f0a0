//! The three-step distribution protocol.
//!
//! David prepares a momentum-squeezed mode A, a vacuum mode B and a
//! position-squeezed mode C, and applies the correlated classical displacements
//!
//! ```text
//! p_A → p_A − p,   x_C → x_C + x,   x_B → x_B + √2·x,   p_B → p_B + √2·p
//! ```
//!
//! with `x, p ~ N(0, (e^{2r} − 1)/2)`. Alice mixes A and C on a balanced beam
//! splitter and sends C' to Bob, who mixes it with B. Modes A' and B' end up
//! entangled although every transmitted state is separable.
//!
//! Covariances are propagated analytically on an augmented state that carries
//! the two hidden classical variables as an extra register mode, so
//! displacements correlated across modes (and relocated after Bob's beam
//! splitter) stay exact. [`ChannelMap`] is the sample-level counterpart used by
//! the Monte Carlo engine.

mod ensemble;

pub use ensemble::{
    a_posteriori_correct, estimate_covariance, simulate_ensemble, Channel, Correction, EnsembleOptions, SampleRecord,
    SampleSet, SamplingMode, CHANNELS, CH_AP, CH_AX, CH_BP, CH_BX,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    apply_symplectic, beam_splitter, phase_shift, vacuum_state, GaussianState, OpKind, SymplecticOp,
};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::separability::{criterion_curve, optimize_gain, ppt_test, CriterionPoint, GainOptimum, PptVerdict};

pub const MODE_A: usize = 0;
pub const MODE_B: usize = 1;
pub const MODE_C: usize = 2;
/// Index of the classical register in the augmented four-mode state.
const REGISTER: usize = 3;

pub const DEFAULT_GAIN_GRID: (f64, f64, usize) = (0.05, 2.0, 200);

/// Where Bob's displacement is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// On mode B before Bob's beam splitter.
    DisplaceBBeforeBs,
    /// Relocated onto B' after Bob's beam splitter.
    DisplaceBAfterBs,
    /// Not applied physically; recovered from recorded data afterwards.
    APosteriori,
}

/// Order of Bob's attenuation relative to a relocated displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossOrdering {
    /// The relocated displacement is attenuated like the physical one would be.
    #[default]
    ModulationThenLoss,
    /// The relocated displacement is added after the attenuation, unscaled.
    LossThenModulation,
}

/// Injection of the shared classical pair `(x, p)` into one mode:
/// `x_mode += x_loading·(x, p)`, `p_mode += p_loading·(x, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection<T> {
    pub mode: usize,
    pub x_loading: [T; 2],
    pub p_loading: [T; 2],
}

/// The correlated displacement scheme for squeezing `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePlan<T> {
    /// Variance of each of `x` and `p`: `(e^{2r} − 1)/2`.
    pub displacement_variance: T,
    pub injections: Vec<Injection<T>>,
}

impl<T: Real> NoisePlan<T> {
    pub fn new(r: T) -> Result<Self> {
        check_r(r)?;
        let z = T::zero();
        let one = T::one();
        let s2 = T::lit(2.0).sqrt();
        Ok(Self {
            displacement_variance: ((r + r).exp() - one) * T::lit(0.5),
            injections: vec![
                Injection { mode: MODE_A, x_loading: [z, z], p_loading: [z, -one] },
                Injection { mode: MODE_B, x_loading: [s2, z], p_loading: [z, s2] },
                Injection { mode: MODE_C, x_loading: [one, z], p_loading: [z, z] },
            ],
        })
    }

    pub fn injection(&self, mode: usize) -> Option<&Injection<T>> {
        self.injections.iter().find(|i| i.mode == mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig<T> {
    pub r: T,
    pub variant: Variant,
    /// Fraction of Bob's output power lost (0.5 in the reference experiment).
    pub bob_loss: T,
    /// Linear response of Bob's detector relative to Alice's.
    pub detector_gain: T,
    #[serde(default)]
    pub loss_ordering: LossOrdering,
    pub gain_grid: (T, T, usize),
}

impl<T: Real> ProtocolConfig<T> {
    pub fn new(r: T, variant: Variant) -> Self {
        Self {
            r,
            variant,
            bob_loss: T::lit(0.5),
            detector_gain: T::one(),
            loss_ordering: LossOrdering::default(),
            gain_grid: (T::lit(DEFAULT_GAIN_GRID.0), T::lit(DEFAULT_GAIN_GRID.1), DEFAULT_GAIN_GRID.2),
        }
    }

    pub fn with_loss(mut self, bob_loss: T) -> Self {
        self.bob_loss = bob_loss;
        self
    }

    pub fn with_detector_gain(mut self, gain: T) -> Self {
        self.detector_gain = gain;
        self
    }

    pub fn with_loss_ordering(mut self, ordering: LossOrdering) -> Self {
        self.loss_ordering = ordering;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_r(self.r)?;
        if !(self.bob_loss >= T::zero() && self.bob_loss <= T::one()) {
            return Err(Error::invalid(format!("bob_loss {} outside [0, 1]", self.bob_loss)));
        }
        if !(self.detector_gain.is_finite() && self.detector_gain > T::zero()) {
            return Err(Error::invalid("detector gain must be positive and finite"));
        }
        let (lo, hi, n) = self.gain_grid;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || n < 2 {
            return Err(Error::invalid("gain grid needs lo < hi and at least two points"));
        }
        Ok(())
    }

    pub fn transmittance(&self) -> T {
        T::one() - self.bob_loss
    }

    fn with_variant(&self, variant: Variant) -> Self {
        Self { variant, ..self.clone() }
    }
}

fn check_r<T: Real>(r: T) -> Result<()> {
    if !r.is_finite() || r < T::zero() {
        return Err(Error::invalid(format!("squeezing parameter must be finite and ≥ 0, got {r}")));
    }
    Ok(())
}

/// Three-mode resource state (A, B, C) including all of David's displacements.
pub fn build_resource_state<T: Real>(r: T) -> Result<GaussianState<T>> {
    let plan = NoisePlan::new(r)?;
    resource_augmented(r, &plan, true)?.reduce(&[MODE_A, MODE_B, MODE_C])
}

/// Attenuates `mode` to power transmittance `t` by mixing in a vacuum ancilla.
pub fn apply_loss<T: Real>(state: &GaussianState<T>, mode: usize, t: T) -> Result<GaussianState<T>> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::invalid(format!("transmittance {t} outside [0, 1]")));
    }
    let n = state.n_modes();
    if mode >= n {
        return Err(Error::invalid(format!("mode index {mode} out of range for {n} modes")));
    }
    let extended = state.tensor(&vacuum_state(1)?);
    let mixed = apply_symplectic(&extended, &beam_splitter(t)?, &[mode, n])?;
    mixed.reduce(&(0..n).collect::<Vec<_>>())
}

/// Alice's balanced beam splitter, acting on (A, C).
pub fn alice_beam_splitter<T: Real>() -> Result<SymplecticOp<T>> {
    beam_splitter(T::lit(0.5))
}

/// Bob's balanced beam splitter, acting on (C', B). His output port B' is
/// referenced with a π phase so that positive gains certify entanglement.
pub fn bob_beam_splitter<T: Real>() -> Result<SymplecticOp<T>> {
    let port_phase = phase_shift(T::PI())?.embed(&[1], 2)?;
    let bs = beam_splitter(T::lit(0.5))?;
    SymplecticOp::new(port_phase.matmul(bs.matrix()), OpKind::BeamSplitter, "Bob's beam splitter (π-referenced B')")
}

/// Augmented (A, B, C, register) resource state. The register holds `(x, p)`
/// with covariance `2σ²·I` in the same vacuum-normalized units.
fn resource_augmented<T: Real>(r: T, plan: &NoisePlan<T>, include_b: bool) -> Result<GaussianState<T>> {
    let e2 = (r + r).exp();
    let quantum = [e2, e2.recip(), T::one(), T::one(), e2.recip(), e2];
    let reg = plan.displacement_variance * T::lit(2.0);
    let mut diag = quantum.to_vec();
    diag.extend([reg, reg]);
    let mut state = GaussianState::from_parts_unchecked(Matrix::from_diag(&diag), vec![T::zero(); 8]);
    for inj in &plan.injections {
        if inj.mode == MODE_B && !include_b {
            continue;
        }
        state = shear(&state, inj.mode, [inj.x_loading, inj.p_loading]);
    }
    Ok(state)
}

/// `ξ_mode += L·(x, p)` on the augmented state.
fn shear<T: Real>(state: &GaussianState<T>, mode: usize, loading: [[T; 2]; 2]) -> GaussianState<T> {
    let dim = state.gamma().rows();
    let mut m = Matrix::identity(dim);
    for q in 0..2 {
        for h in 0..2 {
            m[(2 * mode + q, 2 * REGISTER + h)] = loading[q][h];
        }
    }
    GaussianState::from_parts_unchecked(state.gamma().congruence(&m).symmetrize(), m.mul_vec(state.mean()))
}

/// Linear rescaling of one mode's recorded quadratures (detector response).
fn scale_mode<T: Real>(state: &GaussianState<T>, mode: usize, gain: T) -> GaussianState<T> {
    let mut diag = vec![T::one(); state.gamma().rows()];
    diag[2 * mode] = gain;
    diag[2 * mode + 1] = gain;
    let m = Matrix::from_diag(&diag);
    GaussianState::from_parts_unchecked(state.gamma().congruence(&m), m.mul_vec(state.mean()))
}

/// Loading of Bob's displacement once relocated behind his beam splitter (and loss).
fn relocated_b_loading<T: Real>(config: &ProtocolConfig<T>, plan: &NoisePlan<T>) -> Result<[[T; 2]; 2]> {
    let bob = bob_beam_splitter::<T>()?;
    let inj = plan.injection(MODE_B).ok_or_else(|| Error::invalid("plan has no injection on B"))?;
    let kb = [inj.x_loading, inj.p_loading];
    let attenuation = match config.loss_ordering {
        LossOrdering::ModulationThenLoss => config.transmittance().sqrt(),
        LossOrdering::LossThenModulation => T::one(),
    };
    // B' rows (2, 3) of Bob's op, B input columns (2, 3)
    let mut out = [[T::zero(); 2]; 2];
    for q in 0..2 {
        for h in 0..2 {
            let mut acc = T::zero();
            for k in 0..2 {
                acc += bob.matrix()[(2 + q, 2 + k)] * kb[k][h];
            }
            out[q][h] = acc * attenuation;
        }
    }
    Ok(out)
}

/// Augmented states at each stage: (resource, after Alice's BS, after Bob's BS + loss + displacement).
struct Stages<T> {
    resource: GaussianState<T>,
    after_ac: GaussianState<T>,
    after_bc: GaussianState<T>,
}

fn propagate_states<T: Real>(config: &ProtocolConfig<T>, inject_b_after: bool) -> Result<Stages<T>> {
    config.validate()?;
    let plan = NoisePlan::new(config.r)?;
    let before = config.variant == Variant::DisplaceBBeforeBs;
    let resource = resource_augmented(config.r, &plan, before)?;
    let after_ac = apply_symplectic(&resource, &alice_beam_splitter()?, &[MODE_A, MODE_C])?;
    let mut after_bc = apply_symplectic(&after_ac, &bob_beam_splitter()?, &[MODE_C, MODE_B])?;
    after_bc = apply_loss(&after_bc, MODE_B, config.transmittance())?;
    if !before && inject_b_after {
        after_bc = shear(&after_bc, MODE_B, relocated_b_loading(config, &plan)?);
    }
    Ok(Stages { resource, after_ac, after_bc })
}

/// Final measured A'B' covariance (after loss and detector response).
pub fn final_two_mode_state<T: Real>(config: &ProtocolConfig<T>) -> Result<GaussianState<T>> {
    let stages = propagate_states(config, true)?;
    scale_mode(&stages.after_bc, MODE_B, config.detector_gain).reduce(&[MODE_A, MODE_B])
}

/// A'B' covariance of the a-posteriori variant before any digital correction.
pub fn uncorrected_two_mode_state<T: Real>(config: &ProtocolConfig<T>) -> Result<GaussianState<T>> {
    let cfg = config.with_variant(Variant::APosteriori);
    let stages = propagate_states(&cfg, false)?;
    scale_mode(&stages.after_bc, MODE_B, config.detector_gain).reduce(&[MODE_A, MODE_B])
}

/// A'B' covariance after applying the digital correction `correction` to the
/// uncorrected a-posteriori data at the covariance level.
pub fn corrected_two_mode_state<T: Real>(config: &ProtocolConfig<T>, correction: &Correction<T>) -> Result<GaussianState<T>> {
    let cfg = config.with_variant(Variant::APosteriori);
    let stages = propagate_states(&cfg, false)?;
    let mut st = scale_mode(&stages.after_bc, MODE_B, config.detector_gain);
    // natural-unit loadings: calibration is in sample units (√2 per natural unit)
    let inv = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut loading = [[T::zero(); 2]; 2];
    for q in 0..2 {
        for h in 0..2 {
            loading[q][h] = correction.b_shift[q][h] * inv;
        }
    }
    st = shear(&st, MODE_B, loading);
    st.reduce(&[MODE_A, MODE_B])
}

/// A PPT verdict stamped with the stage and bipartition it belongs to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageVerdict<T> {
    pub stage: String,
    pub cut: String,
    pub verdict: PptVerdict<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct StageState<T> {
    pub stage: String,
    pub modes: Vec<String>,
    pub state: GaussianState<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ProtocolTrace<T> {
    pub config: ProtocolConfig<T>,
    pub noise_plan: NoisePlan<T>,
    pub stages: Vec<StageState<T>>,
    pub verdicts: Vec<StageVerdict<T>>,
    /// Measured A'B' covariance the criterion is evaluated on.
    pub final_state: GaussianState<T>,
    pub criterion_curve: Vec<CriterionPoint<T>>,
    pub optimum: GainOptimum<T>,
    /// Present for the a-posteriori variant: the criterion before correction.
    pub uncorrected_optimum: Option<GainOptimum<T>>,
    pub correction: Option<Correction<T>>,
}

impl<T: Real> ProtocolTrace<T> {
    pub fn verdict(&self, stage: &str, cut: &str) -> Option<&PptVerdict<T>> {
        self.verdicts.iter().find(|v| v.stage == stage && v.cut == cut).map(|v| &v.verdict)
    }

    pub fn min_product(&self) -> T {
        self.optimum.point.product
    }
}

pub const STAGE_RESOURCE: &str = "resource";
pub const STAGE_AFTER_AC: &str = "after_bs_ac";
pub const STAGE_AFTER_BC: &str = "after_bs_bc";
pub const STAGE_FINAL: &str = "final";

/// Runs the protocol analytically and records every stage.
pub fn run_protocol<T: Real>(config: &ProtocolConfig<T>) -> Result<ProtocolTrace<T>> {
    config.validate()?;
    let stages = propagate_states(config, true)?;
    let abc = [MODE_A, MODE_B, MODE_C];
    let resource = stages.resource.reduce(&abc)?;
    let after_ac = stages.after_ac.reduce(&abc)?;
    let after_bc = stages.after_bc.reduce(&abc)?;

    let mut verdicts = Vec::new();
    let mut record = |stage: &str, cut: &str, st: &GaussianState<T>, mode: usize| -> Result<()> {
        verdicts.push(StageVerdict { stage: stage.into(), cut: cut.into(), verdict: ppt_test(st, mode)? });
        Ok(())
    };
    record(STAGE_RESOURCE, "A|BC", &resource, MODE_A)?;
    record(STAGE_RESOURCE, "B|AC", &resource, MODE_B)?;
    record(STAGE_RESOURCE, "C|AB", &resource, MODE_C)?;
    record(STAGE_AFTER_AC, "B|A'C'", &after_ac, MODE_B)?;
    record(STAGE_AFTER_AC, "C'|A'B", &after_ac, MODE_C)?;
    record(STAGE_AFTER_AC, "A'|BC'", &after_ac, MODE_A)?;

    let (final_state, uncorrected_optimum, correction) = if config.variant == Variant::APosteriori {
        let correction = Correction::matching(config)?;
        let corrected = corrected_two_mode_state(config, &correction)?;
        let raw = uncorrected_two_mode_state(config)?;
        let (lo, hi, _) = config.gain_grid;
        (corrected, Some(optimize_gain(&raw, lo, hi)?), Some(correction))
    } else {
        (final_two_mode_state(config)?, None, None)
    };
    record(STAGE_FINAL, "A'|B'", &final_state, 0)?;

    let (lo, hi, n) = config.gain_grid;
    let criterion_curve = criterion_curve(&final_state, lo, hi, n)?;
    let optimum = optimize_gain(&final_state, lo, hi)?;

    let names = |a: &str, b: &str, c: &str| vec![a.to_string(), b.to_string(), c.to_string()];
    Ok(ProtocolTrace {
        config: config.clone(),
        noise_plan: NoisePlan::new(config.r)?,
        stages: vec![
            StageState { stage: STAGE_RESOURCE.into(), modes: names("A", "B", "C"), state: resource },
            StageState { stage: STAGE_AFTER_AC.into(), modes: names("A'", "B", "C'"), state: after_ac },
            StageState { stage: STAGE_AFTER_BC.into(), modes: names("A'", "B'", "C''"), state: after_bc },
        ],
        verdicts,
        final_state,
        criterion_curve,
        optimum,
        uncorrected_optimum,
        correction,
    })
}

/// Sample-level linear model of the protocol.
///
/// Each channel is `quantum · n + hidden · (x, p)` where `n` holds eight
/// independent standard normals (six for the A, B, C input vacua, two for the
/// loss ancilla) and `(x, p)` are the hidden displacements in natural units.
/// Channels are in shot-noise units, so their covariance equals the
/// vacuum-normalized covariance matrix. Channel order: A'x, A'p, C'x, C'p
/// (after Alice's beam splitter), B'x, B'p (after Bob's beam splitter).
#[derive(Debug, Clone)]
pub struct ChannelMap<T> {
    pub quantum: Matrix<T>,
    pub hidden: Matrix<T>,
}

pub const N_NOISE_SOURCES: usize = 8;

impl<T: Real> ChannelMap<T> {
    /// Builds the map by pushing unit inputs through the protocol one vector at a time.
    pub fn new(config: &ProtocolConfig<T>) -> Result<Self> {
        config.validate()?;
        let mut quantum = Matrix::zeros(6, N_NOISE_SOURCES);
        for k in 0..N_NOISE_SOURCES {
            let mut n = [T::zero(); N_NOISE_SOURCES];
            n[k] = T::one();
            let out = propagate_vector(config, &n, [T::zero(); 2])?;
            for (c, v) in out.iter().enumerate() {
                quantum[(c, k)] = *v;
            }
        }
        let mut hidden = Matrix::zeros(6, 2);
        for h in 0..2 {
            let mut hv = [T::zero(); 2];
            hv[h] = T::one();
            let out = propagate_vector(config, &[T::zero(); N_NOISE_SOURCES], hv)?;
            for (c, v) in out.iter().enumerate() {
                hidden[(c, h)] = *v;
            }
        }
        Ok(Self { quantum, hidden })
    }

    /// Analytic channel covariance `Q Qᵀ + σ² H Hᵀ`.
    pub fn covariance(&self, displacement_variance: T) -> Matrix<T> {
        let q = self.quantum.matmul(&self.quantum.transpose());
        let h = self.hidden.matmul(&self.hidden.transpose()).scale(displacement_variance);
        &q + &h
    }
}

/// One realization of the protocol on quadrature vectors (shot-noise units).
fn propagate_vector<T: Real>(config: &ProtocolConfig<T>, n: &[T; N_NOISE_SOURCES], hidden: [T; 2]) -> Result<[T; 6]> {
    let plan = NoisePlan::new(config.r)?;
    let e = config.r.exp();
    let sqrt2 = T::lit(2.0).sqrt();
    let mut xi = vec![e * n[0], n[1] / e, n[2], n[3], n[4] / e, e * n[5]];
    for inj in &plan.injections {
        if inj.mode == MODE_B && config.variant != Variant::DisplaceBBeforeBs {
            continue;
        }
        let m = inj.mode;
        xi[2 * m] += sqrt2 * (inj.x_loading[0] * hidden[0] + inj.x_loading[1] * hidden[1]);
        xi[2 * m + 1] += sqrt2 * (inj.p_loading[0] * hidden[0] + inj.p_loading[1] * hidden[1]);
    }
    xi = alice_beam_splitter()?.embed(&[MODE_A, MODE_C], 3)?.mul_vec(&xi);
    let a_c = [xi[0], xi[1], xi[4], xi[5]];
    xi = bob_beam_splitter()?.embed(&[MODE_C, MODE_B], 3)?.mul_vec(&xi);
    let eta = config.transmittance();
    let keep = eta.sqrt();
    let leak = (T::one() - eta).sqrt();
    let mut bx = keep * xi[2] + leak * n[6];
    let mut bp = keep * xi[3] + leak * n[7];
    if config.variant == Variant::DisplaceBAfterBs {
        let l = relocated_b_loading(config, &plan)?;
        bx += sqrt2 * (l[0][0] * hidden[0] + l[0][1] * hidden[1]);
        bp += sqrt2 * (l[1][0] * hidden[0] + l[1][1] * hidden[1]);
    }
    let g = config.detector_gain;
    Ok([a_c[0], a_c[1], a_c[2], a_c[3], g * bx, g * bp])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separability::duan_product;

    #[test]
    fn plan_coefficients() {
        let p = NoisePlan::new(0.5).unwrap();
        assert!((p.displacement_variance - (1f64.exp() - 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(NoisePlan::new(0.0).unwrap().displacement_variance, 0.0);
        assert!(NoisePlan::new(-1.0).is_err());
    }

    #[test]
    fn resource_at_zero_is_vacuum() {
        let st = build_resource_state(0.0).unwrap();
        assert!(st.gamma().max_abs_diff(&Matrix::identity(6)) < 1e-15);
    }

    #[test]
    fn resource_entries() {
        let r = 0.5f64;
        let e2 = (2.0 * r).exp();
        let g = build_resource_state(r).unwrap();
        let g = g.gamma();
        assert!((g[(0, 0)] - 1f64.exp()).abs() < 1e-12);
        assert!((g[(1, 1)] - ((-2.0 * r).exp() + e2 - 1.0)).abs() < 1e-12);
        assert!((g[(2, 2)] - (2.0 * e2 - 1.0)).abs() < 1e-12);
        assert!((g[(3, 3)] - (2.0 * e2 - 1.0)).abs() < 1e-12);
        assert!((g[(1, 3)] + 2f64.sqrt() * (e2 - 1.0)).abs() < 1e-12);
        assert!((g[(1, 3)] + 2.4301).abs() < 1e-4);
        assert!((g[(4, 2)] - 2f64.sqrt() * (e2 - 1.0)).abs() < 1e-12);
        assert!(build_resource_state(-0.1).is_err());
    }

    #[test]
    fn loss_cases() {
        let sq = crate::gaussian::squeezed_vacuum(0.5, crate::gaussian::SqueezeAxis::Momentum).unwrap();
        assert!(apply_loss(&sq, 0, 1.0).unwrap().gamma().max_abs_diff(sq.gamma()) < 1e-15);
        assert!(apply_loss(&sq, 0, 0.0).unwrap().gamma().max_abs_diff(&Matrix::identity(2)) < 1e-15);
        let half = apply_loss(&sq, 0, 0.5).unwrap();
        // explicit oracle: T·γ + (1−T)·I
        assert!((half.gamma()[(1, 1)] - ((-1f64).exp() + 1.0) / 2.0).abs() < 1e-12);
        assert!((half.gamma()[(1, 1)] - 0.6839).abs() < 1e-4);
        assert!(apply_loss(&sq, 0, 1.5).is_err());
        assert!(apply_loss(&sq, 1, 0.5).is_err());
    }

    #[test]
    fn channel_map_matches_state_route() {
        for variant in [Variant::DisplaceBBeforeBs, Variant::DisplaceBAfterBs] {
            let cfg = ProtocolConfig::new(0.7, variant).with_loss(0.3).with_detector_gain(1.1);
            let map = ChannelMap::new(&cfg).unwrap();
            let plan = NoisePlan::new(cfg.r).unwrap();
            let cov = map.covariance(plan.displacement_variance);
            let ab = final_two_mode_state(&cfg).unwrap();
            let ab_idx = [0, 1, 4, 5];
            assert!(cov.select(&ab_idx).max_abs_diff(ab.gamma()) < 1e-10);
            let ac = run_protocol(&cfg).unwrap().stages[1].state.reduce(&[MODE_A, MODE_C]).unwrap();
            assert!(cov.select(&[0, 1, 2, 3]).max_abs_diff(ac.gamma()) < 1e-10);
        }
    }

    #[test]
    fn zero_squeezing_never_entangles() {
        let trace = run_protocol(&ProtocolConfig::<f64>::new(0.0, Variant::DisplaceBBeforeBs)).unwrap();
        for p in &trace.criterion_curve {
            assert!((p.product - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relocation_is_exact() {
        let before = final_two_mode_state(&ProtocolConfig::new(0.5, Variant::DisplaceBBeforeBs)).unwrap();
        let after = final_two_mode_state(&ProtocolConfig::new(0.5, Variant::DisplaceBAfterBs)).unwrap();
        assert!(before.gamma().max_abs_diff(after.gamma()) < 1e-9);
    }

    #[test]
    fn loss_then_modulation_differs() {
        let base = ProtocolConfig::new(0.5, Variant::DisplaceBAfterBs);
        let a = final_two_mode_state(&base).unwrap();
        let b = final_two_mode_state(&base.clone().with_loss_ordering(LossOrdering::LossThenModulation)).unwrap();
        assert!(a.gamma().max_abs_diff(b.gamma()) > 1e-3);
    }

    #[test]
    fn lossless_ideal_output_is_entangled() {
        let st = final_two_mode_state(&ProtocolConfig::<f64>::new(0.5, Variant::DisplaceBBeforeBs).with_loss(0.0)).unwrap();
        let at = duan_product(&st, 0.7856).unwrap().product;
        assert!((at - 0.32612).abs() < 1e-4);
    }
}
