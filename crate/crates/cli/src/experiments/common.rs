//! Random inputs shared by several experiments.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use tci_lab::gaussian::{PathGaussian, ProcessKind};
use tci_lab::paths::SampledPath;
use tci_lab::SeededRng;

use crate::error::RunError;

pub fn normals(g: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| g.sample(StandardNormal)).collect()
}

/// Gaussian random walk with `len` points on a uniform grid of `[0, 1]`.
pub fn random_walk(g: &mut impl Rng, len: usize, dim: usize) -> Result<SampledPath, RunError> {
    let times = SampledPath::uniform_times(len, 1.0);
    let step = (1.0 / (len.max(2) - 1) as f64).sqrt();
    let mut values = vec![0.0; dim];
    for k in 1..len {
        let prev = values[(k - 1) * dim..k * dim].to_vec();
        values.extend(prev.iter().map(|v| v + step * g.sample::<f64, _>(StandardNormal)));
    }
    Ok(SampledPath::new(times, values, dim)?)
}

/// `h^c(t) = scale * sum_{j=1..3} a_{jc} sin(j pi t / T) / j` with standard normal `a`.
pub fn smooth_shift(rng: SeededRng, times: &[f64], dim: usize, scale: f64) -> Result<SampledPath, RunError> {
    let mut g = rng.generator();
    let coeffs = normals(&mut g, 3 * dim);
    let horizon = times[times.len() - 1] - times[0];
    Ok(SampledPath::from_fn(times.to_vec(), dim, |t| {
        (0..dim)
            .map(|c| {
                (1..=3)
                    .map(|j| {
                        let a = coeffs[(j - 1) * dim + c];
                        scale * a * (j as f64 * std::f64::consts::PI * t / horizon).sin() / j as f64
                    })
                    .sum()
            })
            .collect()
    })?)
}

pub fn brownian(n: usize, dim: usize, horizon: f64) -> Result<PathGaussian, RunError> {
    Ok(PathGaussian::new(ProcessKind::BrownianMotion, horizon, n, dim)?)
}

/// `B B^T / k + floor I` with standard normal `B`.
pub fn random_covariance(g: &mut impl Rng, k: usize, floor: f64) -> DMatrix<f64> {
    let b = DMatrix::from_vec(k, k, normals(g, k * k));
    (&b * b.transpose()) / k as f64 + DMatrix::identity(k, k) * floor
}

/// `2^j + 1` for grid sizes that must be dyadic.
pub fn is_dyadic_grid(n: usize) -> bool {
    n >= 2 && (n - 1).is_power_of_two()
}
