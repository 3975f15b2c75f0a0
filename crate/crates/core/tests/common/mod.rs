#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sepdist::gaussian::{beam_splitter, phase_shift, squeezer, SqueezeAxis};
use sepdist::linalg::Matrix;

/// Random symplectic matrix on `n_modes` built from squeezers, rotations and beam splitters.
pub fn random_symplectic<R: Rng>(rng: &mut R, n_modes: usize) -> Matrix<f64> {
    let mut s = Matrix::identity(2 * n_modes);
    for _ in 0..2 {
        for m in 0..n_modes {
            let sq = squeezer(rng.random_range(-1.0..1.0), SqueezeAxis::Momentum).unwrap();
            let ph = phase_shift(rng.random_range(0.0..std::f64::consts::TAU)).unwrap();
            s = sq.embed(&[m], n_modes).unwrap().matmul(&s);
            s = ph.embed(&[m], n_modes).unwrap().matmul(&s);
        }
        for a in 0..n_modes {
            for b in (a + 1)..n_modes {
                let bs = beam_splitter(rng.random_range(0.0..1.0)).unwrap();
                s = bs.embed(&[a, b], n_modes).unwrap().matmul(&s);
            }
        }
    }
    s
}

/// Random physical covariance: thermal symplectic spectrum in `[1, 3]` dressed by a random symplectic.
pub fn random_physical<R: Rng>(rng: &mut R, n_modes: usize) -> Matrix<f64> {
    let nu: Vec<f64> = (0..n_modes).flat_map(|_| {
        let v = rng.random_range(1.0..3.0);
        [v, v]
    }).collect();
    Matrix::from_diag(&nu).congruence(&random_symplectic(rng, n_modes)).symmetrize()
}

/// Local symplectic acting on a single mode of an `n_modes` system.
pub fn random_local<R: Rng>(rng: &mut R, mode: usize, n_modes: usize) -> Matrix<f64> {
    let sq = squeezer(rng.random_range(-1.0..1.0), SqueezeAxis::Position).unwrap();
    let a = phase_shift(rng.random_range(0.0..std::f64::consts::TAU)).unwrap();
    let b = phase_shift(rng.random_range(0.0..std::f64::consts::TAU)).unwrap();
    a.then(&sq).unwrap().then(&b).unwrap().embed(&[mode], n_modes).unwrap()
}

/// `n` zero-mean Gaussian vectors with covariance `gamma`.
pub fn gaussian_samples<R: Rng>(rng: &mut R, gamma: &Matrix<f64>, n: usize) -> Vec<Vec<f64>> {
    let l = gamma.cholesky().unwrap();
    let d = gamma.rows();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            l.mul_vec(&z)
        })
        .collect()
}

/// Plain two-pass sample covariance (`n − 1`).
pub fn sample_covariance(rows: &[Vec<f64>]) -> Matrix<f64> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    Matrix::from_fn(d, d, |i, j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0))
}

/// Standard error of each covariance entry for Gaussian data: `√((γ_ii γ_jj + γ_ij²)/n)`.
pub fn covariance_se(gamma: &Matrix<f64>, n: usize) -> Matrix<f64> {
    Matrix::from_fn(gamma.rows(), gamma.cols(), |i, j| {
        ((gamma[(i, i)] * gamma[(j, j)] + gamma[(i, j)] * gamma[(i, j)]) / n as f64).sqrt()
    })
}

pub fn measured_ac() -> Matrix<f64> {
    Matrix::from_rows(&[
        [20.90, 1.102, -7.796, -1.679],
        [1.102, 25.30, 1.000, 14.63],
        [-7.796, 1.000, 20.68, 0.8010],
        [-1.679, 14.63, 0.8010, 24.65],
    ])
    .unwrap()
}

pub fn measured_ab() -> Matrix<f64> {
    Matrix::from_rows(&[
        [19.95, 1.025, -4.758, -1.063],
        [1.025, 22.92, 0.9699, 9.153],
        [-4.758, 0.9699, 9.925, 0.2881],
        [-1.063, 9.153, 0.2881, 11.65],
    ])
    .unwrap()
}
