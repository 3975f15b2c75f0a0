use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{reconstruct_covariance, MeasurementSetting, PairStatistics};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::protocol::{SampleRecord, CHANNELS};

pub const DEFAULT_BLOCKS: usize = 10;

/// Sample statistics of one setting from paired `(x, p)` outcomes of two modes.
pub fn pair_statistics(a: &[[f64; 2]], b: &[[f64; 2]], setting: MeasurementSetting) -> Result<PairStatistics<f64>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("mode sample counts differ ({} vs {})", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid(format!("pair statistics need at least two samples, got {n}")));
    }
    let (ca, cb) = setting.projectors::<f64>();
    let sa: Vec<f64> = a.iter().map(|q| ca[0] * q[0] + ca[1] * q[1]).collect();
    let sb: Vec<f64> = b.iter().map(|q| cb[0] * q[0] + cb[1] * q[1]).collect();
    let ma = sa.iter().sum::<f64>() / n as f64;
    let mb = sb.iter().sum::<f64>() / n as f64;
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (x, y) in sa.iter().zip(&sb) {
        let (dx, dy) = (x - ma, y - mb);
        vaa += dx * dx;
        vbb += dy * dy;
        vab += dx * dy;
    }
    let d = (n - 1) as f64;
    Ok(PairStatistics { setting, var_a: vaa / d, var_b: vbb / d, cov_ab: vab / d, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    pub skewness: f64,
    pub kurtosis: f64,
    /// Spread of the skewness over the error blocks; `None` when blocks are too short.
    pub skewness_error: Option<f64>,
    pub kurtosis_error: Option<f64>,
    pub n: usize,
}

fn raw_shape(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in samples {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(m2 > (f64::EPSILON * scale).powi(2) * 16.0) {
        return Err(Error::DegenerateVariance(format!("sample variance {m2} is zero to working precision")));
    }
    let s = m2.sqrt();
    let skew = m3 / (s * s * s);
    let kurt = m4 / (m2 * m2);
    if !(kurt + 1e-9 * kurt.abs() >= skew * skew + 1.0) {
        return Err(Error::Numerical(format!("Pearson bound violated: K = {kurt}, S = {skew}")));
    }
    Ok((skew, kurt))
}

/// Standardized third and fourth central moments with ten-block error bars.
pub fn shape_statistics(samples: &[f64]) -> Result<ShapeStats> {
    if samples.len() < 4 {
        return Err(Error::invalid(format!("shape statistics need n ≥ 4, got {}", samples.len())));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let (skewness, kurtosis) = raw_shape(samples)?;
    let per_block = samples.len() / DEFAULT_BLOCKS;
    let (mut skewness_error, mut kurtosis_error) = (None, None);
    if per_block >= 4 {
        let blocks: Option<Vec<(f64, f64)>> =
            samples.chunks_exact(per_block).take(DEFAULT_BLOCKS).map(|c| raw_shape(c).ok()).collect();
        if let Some(b) = blocks {
            let s: Vec<f64> = b.iter().map(|v| v.0).collect();
            let k: Vec<f64> = b.iter().map(|v| v.1).collect();
            skewness_error = Some(std_dev(&s));
            kurtosis_error = Some(std_dev(&k));
        }
    }
    Ok(ShapeStats { skewness, kurtosis, skewness_error, kurtosis_error, n: samples.len() })
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BlockMode {
    /// Consecutive runs of records, as for a time series.
    #[default]
    Contiguous,
    /// Records are shuffled with the given seed before splitting.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockErrors {
    pub blocks: usize,
    pub block_len: usize,
    /// Average of the statistic over blocks.
    pub block_mean: Matrix<f64>,
    /// Elementwise standard deviation across blocks (`k − 1` denominator).
    pub block_std: Matrix<f64>,
    /// `block_std / √k`: standard error of the block mean.
    pub standard_error: Matrix<f64>,
}

/// Evaluates `statistic` on `k` equal blocks (remainder dropped) and returns the spread.
pub fn block_errors<R, F>(records: &[R], k: usize, mode: BlockMode, statistic: F) -> Result<BlockErrors>
where
    R: Clone + Sync,
    F: Fn(&[R]) -> Result<Matrix<f64>> + Sync,
{
    if k < 2 {
        return Err(Error::invalid(format!("need at least two blocks, got {k}")));
    }
    if records.len() < k {
        return Err(Error::invalid(format!("{} records cannot fill {k} blocks", records.len())));
    }
    let shuffled;
    let data: &[R] = match mode {
        BlockMode::Contiguous => records,
        BlockMode::Shuffled { seed } => {
            let mut v = records.to_vec();
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            shuffled = v;
            &shuffled
        }
    };
    let len = data.len() / k;
    let values: Vec<Matrix<f64>> = data
        .par_chunks_exact(len)
        .take(k)
        .map(&statistic)
        .collect::<Result<_>>()?;
    let (rows, cols) = (values[0].rows(), values[0].cols());
    if values.iter().any(|m| m.rows() != rows || m.cols() != cols) {
        return Err(Error::Numerical("statistic changed shape between blocks".into()));
    }
    let kf = k as f64;
    // shifted by the first block so identical blocks give exactly zero spread
    let shift = &values[0];
    let sum = Matrix::from_fn(rows, cols, |i, j| values.iter().map(|m| m[(i, j)] - shift[(i, j)]).sum::<f64>());
    let mean = Matrix::from_fn(rows, cols, |i, j| shift[(i, j)] + sum[(i, j)] / kf);
    let std = Matrix::from_fn(rows, cols, |i, j| {
        let ss: f64 = values.iter().map(|m| (m[(i, j)] - shift[(i, j)]).powi(2)).sum();
        ((ss - sum[(i, j)] * sum[(i, j)] / kf).max(0.0) / (kf - 1.0)).sqrt()
    });
    let se = std.scale(kf.sqrt().recip());
    Ok(BlockErrors { blocks: k, block_len: len, block_mean: mean, block_std: std, standard_error: se })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelShape {
    pub mode: String,
    pub quadrature: String,
    pub stats: ShapeStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyReport {
    /// Channel indices (x_A, p_A, x_B, p_B) the two modes were read from.
    pub channels: [usize; 4],
    pub settings: Vec<MeasurementSetting>,
    pub n: usize,
    pub gamma: Matrix<f64>,
    pub errors: BlockErrors,
    pub shape_stats: Vec<ChannelShape>,
}

fn reconstruct_from(records: &[SampleRecord], channels: [usize; 4], settings: &[MeasurementSetting]) -> Result<Matrix<f64>> {
    let a: Vec<[f64; 2]> = records.iter().map(|r| [r.values[channels[0]], r.values[channels[1]]]).collect();
    let b: Vec<[f64; 2]> = records.iter().map(|r| [r.values[channels[2]], r.values[channels[3]]]).collect();
    let stats = settings
        .iter()
        .map(|s| pair_statistics(&a, &b, *s))
        .collect::<Result<Vec<_>>>()?;
    reconstruct_covariance(&stats)
}

/// Reconstructs the two-mode covariance from recorded channels with block errors
/// and per-channel shape statistics.
pub fn tomography_report(
    records: &[SampleRecord],
    channels: [usize; 4],
    settings: &[MeasurementSetting],
    k: usize,
    mode: BlockMode,
) -> Result<TomographyReport> {
    if records.is_empty() {
        return Err(Error::Validation("no sample records".into()));
    }
    if let Some(&c) = channels.iter().find(|&&c| c >= CHANNELS.len()) {
        return Err(Error::invalid(format!("channel index {c} out of range")));
    }
    let gamma = reconstruct_from(records, channels, settings)?;
    let errors = block_errors(records, k, mode, |blk| reconstruct_from(blk, channels, settings))?;
    let shape_stats = channels
        .iter()
        .map(|&c| {
            let v: Vec<f64> = records.iter().map(|r| r.values[c]).collect();
            Ok(ChannelShape {
                mode: CHANNELS[c].mode.to_string(),
                quadrature: CHANNELS[c].quadrature.to_string(),
                stats: shape_statistics(&v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TomographyReport { channels, settings: settings.to_vec(), n: records.len(), gamma, errors, shape_stats })
}
