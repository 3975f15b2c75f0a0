//! Monte Carlo ensembles of the protocol and a-posteriori noise correction.
//!
//! Every record gets its own RNG stream keyed by `(seed, cell, record)`, so the
//! output does not depend on how many worker threads produced it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChannelMap, NoisePlan, ProtocolConfig, Variant, N_NOISE_SOURCES};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// A recorded quadrature channel: mode label and quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Channel {
    pub mode: &'static str,
    pub quadrature: &'static str,
}

pub const CHANNELS: [Channel; 6] = [
    Channel { mode: "A'", quadrature: "x" },
    Channel { mode: "A'", quadrature: "p" },
    Channel { mode: "C'", quadrature: "x" },
    Channel { mode: "C'", quadrature: "p" },
    Channel { mode: "B'", quadrature: "x" },
    Channel { mode: "B'", quadrature: "p" },
];

pub const CH_AX: usize = 0;
pub const CH_AP: usize = 1;
pub const CH_BX: usize = 4;
pub const CH_BP: usize = 5;

/// Span of the displacement grid in units of the displacement standard deviation.
const GRID_HALF_WIDTH: f64 = 4.0;
const HIDDEN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Each cell draws its displacement from the continuous Gaussian.
    #[default]
    Continuous,
    /// Displacements sit on an `n_outer × n_outer` grid and each cell receives
    /// a number of records proportional to its Gaussian weight.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub n_outer: usize,
    pub n_inner: usize,
    #[serde(default)]
    pub sampling: SamplingMode,
}

impl EnsembleOptions {
    pub fn new(n_outer: usize, n_inner: usize) -> Self {
        Self { n_outer, n_inner, sampling: SamplingMode::Continuous }
    }

    pub fn grid(mut self) -> Self {
        self.sampling = SamplingMode::Grid;
        self
    }

    pub fn total_records(&self) -> usize {
        self.n_outer * self.n_outer * self.n_inner
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub cell: u32,
    /// Hidden displacement `(x, p)` in natural units; `None` if it was not recorded.
    pub hidden: Option<[f64; 2]>,
    /// Outcomes in shot-noise units, ordered as [`CHANNELS`].
    pub values: [f64; 6],
}

/// Digital correction of Bob's channels: `B' += b_shift · (x, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correction<T> {
    /// Fraction of Alice's classical noise moved onto Bob's outcomes.
    pub fraction: T,
    /// Net loading added to (B'x, B'p) per unit hidden `(x, p)`, shot-noise units.
    pub b_shift: [[T; 2]; 2],
}

impl<T: Real> Correction<T> {
    /// Removes B's own classical noise, subtracts `fraction` of A'x's classical
    /// noise from B'x and adds the same fraction of A'p's to B'p.
    pub fn with_fraction(config: &ProtocolConfig<T>, fraction: T) -> Result<Self> {
        if !fraction.is_finite() {
            return Err(Error::invalid("correction fraction must be finite"));
        }
        let raw = ChannelMap::new(&ProtocolConfig { variant: Variant::APosteriori, ..config.clone() })?;
        let h = &raw.hidden;
        let mut b_shift = [[T::zero(); 2]; 2];
        for k in 0..2 {
            b_shift[0][k] = -h[(CH_BX, k)] - fraction * h[(CH_AX, k)];
            b_shift[1][k] = -h[(CH_BP, k)] + fraction * h[(CH_AP, k)];
        }
        Ok(Self { fraction, b_shift })
    }

    /// The fraction that reproduces the relocated-displacement protocol exactly.
    pub fn matching(config: &ProtocolConfig<T>) -> Result<Self> {
        let raw = ChannelMap::new(&ProtocolConfig { variant: Variant::APosteriori, ..config.clone() })?;
        let target = ChannelMap::new(&ProtocolConfig { variant: Variant::DisplaceBAfterBs, ..config.clone() })?;
        // target B'x = −f·A'x,  target B'p = +f·A'p  (hidden loadings)
        let mut basis = Vec::with_capacity(4);
        let mut goal = Vec::with_capacity(4);
        for k in 0..2 {
            basis.push(-raw.hidden[(CH_AX, k)]);
            goal.push(target.hidden[(CH_BX, k)]);
        }
        for k in 0..2 {
            basis.push(raw.hidden[(CH_AP, k)]);
            goal.push(target.hidden[(CH_BP, k)]);
        }
        let bb: T = basis.iter().map(|&v| v * v).sum();
        let fraction = basis.iter().zip(&goal).map(|(&b, &g)| b * g).sum::<T>() / bb;
        let residual = basis
            .iter()
            .zip(&goal)
            .fold(T::zero(), |m, (&b, &g)| m.max((g - fraction * b).abs()));
        if residual > T::tol(1e-9) * bb.sqrt().max(T::one()) {
            return Err(Error::Numerical(format!(
                "no single fraction matches the target noise loadings (residual {residual})"
            )));
        }
        Self::with_fraction(config, fraction)
    }
}

/// Seeded ensemble plus everything needed to interpret and correct it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub seed: u64,
    pub config: ProtocolConfig<f64>,
    pub options: EnsembleOptions,
    pub records: Vec<SampleRecord>,
    /// Hidden-variable loading of each channel (calibration), shot-noise units per natural unit.
    pub calibration: [[f64; 2]; 6],
    pub correction: Option<Correction<f64>>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Values of one channel in record order.
    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.values[ch]).collect()
    }
}

fn stream_key(seed: u64, cell: u64, record: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = seed
        .wrapping_add(cell.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(record.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, cell: u64, record: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_key(seed, cell, record));
    rng.set_stream(cell);
    rng
}

/// Grid levels (in units of σ) and their normalized Gaussian weights, rescaled
/// so the discrete distribution has unit variance.
fn grid_levels(n: usize) -> (Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = (0..n)
        .map(|i| -GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * (i as f64 + 0.5) / n as f64)
        .collect();
    let w: Vec<f64> = z.iter().map(|v| (-0.5 * v * v).exp()).collect();
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let var: f64 = z.iter().zip(&w).map(|(v, p)| p * v * v).sum();
    let s = if var > 0.0 { var.sqrt().recip() } else { 1.0 };
    (z.iter().map(|v| v * s).collect(), w)
}

/// Largest-remainder apportionment of `total` records over `weights`.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Draws `n_outer² × n_inner` records of the protocol's measured channels.
pub fn simulate_ensemble(config: &ProtocolConfig<f64>, options: EnsembleOptions, seed: u64) -> Result<SampleSet> {
    config.validate()?;
    if options.n_outer == 0 || options.n_inner == 0 {
        return Err(Error::invalid("ensemble counts must be at least 1"));
    }
    let plan = NoisePlan::new(config.r)?;
    let sigma = plan.displacement_variance.sqrt();
    let map = ChannelMap::new(config)?;
    let n_cells = options.n_outer * options.n_outer;

    let cells: Vec<([f64; 2], usize)> = match options.sampling {
        SamplingMode::Continuous => (0..n_cells)
            .map(|c| {
                let hidden = if sigma == 0.0 {
                    [0.0, 0.0]
                } else {
                    let mut rng = rng_for(seed, c as u64, HIDDEN_STREAM);
                    let x: f64 = StandardNormal.sample(&mut rng);
                    let p: f64 = StandardNormal.sample(&mut rng);
                    [sigma * x, sigma * p]
                };
                (hidden, options.n_inner)
            })
            .collect(),
        SamplingMode::Grid => {
            let (levels, w) = grid_levels(options.n_outer);
            let weights: Vec<f64> = (0..n_cells).map(|c| w[c / options.n_outer] * w[c % options.n_outer]).collect();
            let counts = apportion(&weights, options.total_records());
            (0..n_cells)
                .map(|c| {
                    let hidden = if sigma == 0.0 {
                        [0.0, 0.0]
                    } else {
                        [sigma * levels[c / options.n_outer], sigma * levels[c % options.n_outer]]
                    };
                    (hidden, counts[c])
                })
                .collect()
        }
    };

    let q = &map.quantum;
    let h = &map.hidden;
    let records: Vec<SampleRecord> = cells
        .par_iter()
        .enumerate()
        .flat_map_iter(|(c, &(hidden, count))| {
            (0..count).map(move |k| {
                let mut rng = rng_for(seed, c as u64, k as u64);
                let mut noise = [0.0; N_NOISE_SOURCES];
                for v in noise.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let mut values = [0.0; 6];
                for (ch, out) in values.iter_mut().enumerate() {
                    let mut acc = h[(ch, 0)] * hidden[0] + h[(ch, 1)] * hidden[1];
                    for (s, n) in noise.iter().enumerate() {
                        acc += q[(ch, s)] * n;
                    }
                    *out = acc;
                }
                SampleRecord { cell: c as u32, hidden: Some(hidden), values }
            })
        })
        .collect();

    let mut calibration = [[0.0; 2]; 6];
    for (ch, row) in calibration.iter_mut().enumerate() {
        *row = [h[(ch, 0)], h[(ch, 1)]];
    }
    Ok(SampleSet { seed, config: config.clone(), options, records, calibration, correction: None })
}

/// Applies the digital noise correction to raw a-posteriori data.
///
/// With `fraction = None` the fraction matching the relocated-displacement
/// protocol is solved for; it is reported in the returned set's `correction`.
pub fn a_posteriori_correct(samples: &SampleSet, plan: &NoisePlan<f64>, fraction: Option<f64>) -> Result<SampleSet> {
    if samples.config.variant != Variant::APosteriori {
        return Err(Error::invalid("a-posteriori correction needs raw a_posteriori samples"));
    }
    if samples.correction.is_some() {
        return Err(Error::invalid("samples are already corrected"));
    }
    let expected = NoisePlan::new(samples.config.r)?;
    if (expected.displacement_variance - plan.displacement_variance).abs() > 1e-12 * expected.displacement_variance.max(1.0)
        || expected.injections != plan.injections
    {
        return Err(Error::invalid("noise plan does not match the squeezing the samples were taken with"));
    }
    if let Some(i) = samples.records.iter().position(|r| r.hidden.is_none()) {
        return Err(Error::invalid(format!("record {i} has no hidden displacement values")));
    }
    let correction = match fraction {
        Some(f) => Correction::with_fraction(&samples.config, f)?,
        None => Correction::matching(&samples.config)?,
    };
    let f = correction.fraction;
    let cal = samples.calibration;
    let mut out = samples.clone();
    out.records.par_iter_mut().for_each(|rec| {
        let [x, p] = rec.hidden.expect("checked above");
        let load = |ch: usize| cal[ch][0] * x + cal[ch][1] * p;
        // B' loses its own classical noise entirely
        rec.values[CH_BX] -= load(CH_BX);
        rec.values[CH_BP] -= load(CH_BP);
        rec.values[CH_BX] -= f * load(CH_AX);
        rec.values[CH_BP] += f * load(CH_AP);
    });
    out.correction = Some(correction);
    Ok(out)
}

/// Unbiased sample covariance of the listed channels over `records`.
pub fn estimate_covariance(records: &[SampleRecord], channels: &[usize]) -> Result<Matrix<f64>> {
    let n = records.len();
    if n < 2 {
        return Err(Error::invalid("covariance estimate needs at least two records"));
    }
    let k = channels.len();
    let mut mean = vec![0.0; k];
    for r in records {
        for (i, &c) in channels.iter().enumerate() {
            mean[i] += r.values[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(k, k);
    for r in records {
        for i in 0..k {
            let di = r.values[channels[i]] - mean[i];
            for j in i..k {
                cov[(i, j)] += di * (r.values[channels[j]] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..k {
        for j in i..k {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_samples() {
        let cfg = ProtocolConfig::new(0.5, Variant::APosteriori);
        let a = simulate_ensemble(&cfg, EnsembleOptions::new(4, 5), 7).unwrap();
        let b = simulate_ensemble(&cfg, EnsembleOptions::new(4, 5), 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_ensemble(&cfg, EnsembleOptions::new(4, 5), 8).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = ProtocolConfig::new(0.5, Variant::APosteriori);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&cfg, EnsembleOptions::new(10, 30), 11).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn zero_squeezing_has_zero_hidden() {
        for opts in [EnsembleOptions::new(3, 4), EnsembleOptions::new(3, 4).grid()] {
            let s = simulate_ensemble(&ProtocolConfig::new(0.0, Variant::APosteriori), opts, 1).unwrap();
            assert!(s.records.iter().all(|r| r.hidden == Some([0.0, 0.0])));
            let fixed = a_posteriori_correct(&s, &NoisePlan::new(0.0).unwrap(), None).unwrap();
            assert_eq!(fixed.records, s.records);
        }
    }

    #[test]
    fn zero_counts_rejected() {
        let cfg = ProtocolConfig::new(0.5, Variant::APosteriori);
        assert!(simulate_ensemble(&cfg, EnsembleOptions::new(0, 5), 1).is_err());
        assert!(simulate_ensemble(&cfg, EnsembleOptions::new(5, 0), 1).is_err());
    }

    #[test]
    fn grid_has_exact_unit_variance_and_counts() {
        let (levels, w) = grid_levels(80);
        let var: f64 = levels.iter().zip(&w).map(|(z, p)| p * z * z).sum();
        assert!((var - 1.0).abs() < 1e-12);
        let counts = apportion(&[0.25, 0.25, 0.5], 7);
        assert_eq!(counts.iter().sum::<usize>(), 7);
        let s = simulate_ensemble(&ProtocolConfig::new(0.5, Variant::APosteriori), EnsembleOptions::new(6, 10).grid(), 3)
            .unwrap();
        assert_eq!(s.len(), 360);
    }

    #[test]
    fn matching_fraction_closed_form() {
        // Alice's classical loading is 1/√2; Bob's target is √η/2 ⇒ f = √η/√2 · gain
        let cfg = ProtocolConfig::new(0.5, Variant::APosteriori).with_loss(0.5).with_detector_gain(1.2);
        let c = Correction::matching(&cfg).unwrap();
        let expect = 0.5f64.sqrt() * 1.2 / 2f64.sqrt();
        assert!((c.fraction - expect).abs() < 1e-12);
    }

    #[test]
    fn correction_requires_hidden_values() {
        let cfg = ProtocolConfig::new(0.5, Variant::APosteriori);
        let mut s = simulate_ensemble(&cfg, EnsembleOptions::new(2, 2), 1).unwrap();
        s.records[3].hidden = None;
        assert!(a_posteriori_correct(&s, &NoisePlan::new(0.5).unwrap(), None).is_err());
        let other = simulate_ensemble(&ProtocolConfig::new(0.5, Variant::DisplaceBBeforeBs), EnsembleOptions::new(2, 2), 1).unwrap();
        assert!(a_posteriori_correct(&other, &NoisePlan::new(0.5).unwrap(), None).is_err());
    }
}
