//! Gaussian laws: path-valued processes on a uniform grid, finite-dimensional
//! normals, Brownian Cameron-Martin geometry and the finite-rank projection
//! pseudometrics built from the Schauder system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::paths::SampledPath;
use crate::rng::{normal_vec, SeededRng};

/// Largest grid for the dense Cholesky sampler.
pub const CHOLESKY_MAX_POINTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    BrownianMotion,
    FractionalBm { hurst: f64 },
    OrnsteinUhlenbeck { theta: f64, sigma: f64 },
    BrownianBridge,
}

/// A centred Gaussian process started at zero, sampled on `n` uniform points of `[0, horizon]`,
/// with `dim` independent coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGaussian {
    pub process: ProcessKind,
    pub horizon: f64,
    pub n: usize,
    pub dim: usize,
}

/// `N(mean, cov)` on `R^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDimGaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaussianSpec {
    Path(PathGaussian),
    FiniteDim(FiniteDimGaussian),
}

impl ProcessKind {
    /// `Cov(X_s, X_t)` of one coordinate on `[0, horizon]`.
    pub fn covariance(&self, s: f64, t: f64, horizon: f64) -> f64 {
        match *self {
            ProcessKind::BrownianMotion => s.min(t),
            ProcessKind::FractionalBm { hurst } => {
                let h2 = 2.0 * hurst;
                0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
            }
            ProcessKind::OrnsteinUhlenbeck { theta, sigma } => {
                sigma * sigma / (2.0 * theta)
                    * ((-theta * (t - s).abs()).exp() - (-theta * (t + s)).exp())
            }
            ProcessKind::BrownianBridge => s.min(t) - s * t / horizon,
        }
    }
}

impl PathGaussian {
    pub fn new(process: ProcessKind, horizon: f64, n: usize, dim: usize) -> Result<Self> {
        let spec = Self {
            process,
            horizon,
            n,
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn brownian(horizon: f64, n: usize, dim: usize) -> Self {
        Self {
            process: ProcessKind::BrownianMotion,
            horizon,
            n,
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(LabError::arg("horizon must be positive"));
        }
        if self.n < 2 {
            return Err(LabError::arg("grid needs at least two points"));
        }
        if self.dim == 0 {
            return Err(LabError::arg("dimension must be at least 1"));
        }
        match self.process {
            ProcessKind::FractionalBm { hurst } if !(hurst > 0.0 && hurst < 1.0) => {
                Err(LabError::arg(format!("hurst {hurst} not in (0,1)")))
            }
            ProcessKind::OrnsteinUhlenbeck { theta, sigma } if !(theta > 0.0 && sigma >= 0.0) => {
                Err(LabError::arg("OU needs theta > 0 and sigma >= 0"))
            }
            ProcessKind::FractionalBm { .. } if self.n > CHOLESKY_MAX_POINTS => {
                Err(LabError::TooLarge {
                    what: "fBm grid points",
                    got: self.n,
                    limit: CHOLESKY_MAX_POINTS,
                })
            }
            _ => Ok(()),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        SampledPath::uniform_times(self.n, self.horizon)
    }

    /// Weak variance `sup_{|l| <= 1} E<l, X>^2` for the sup norm: `max_t Var(X_t)`.
    pub fn sigma2(&self) -> f64 {
        self.times()
            .iter()
            .map(|&t| self.process.covariance(t, t, self.horizon))
            .fold(0.0, f64::max)
    }
}

impl FiniteDimGaussian {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if k == 0 || cov.nrows() != k || cov.ncols() != k {
            return Err(LabError::arg("covariance must be k x k for a mean of length k"));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(LabError::arg("gaussian parameters must be finite"));
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return Err(LabError::arg("covariance must be symmetric"));
        }
        let eig = cov.clone().symmetric_eigen();
        if eig.eigenvalues.min() < -1e-10 * scale {
            return Err(LabError::arg("covariance must be positive semidefinite"));
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov,
        })
    }

    pub fn standard(k: usize) -> Self {
        Self {
            mean: DVector::zeros(k),
            cov: DMatrix::identity(k, k),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Largest covariance eigenvalue.
    pub fn sigma2(&self) -> f64 {
        self.cov.clone().symmetric_eigen().eigenvalues.max().max(0.0)
    }
}

impl GaussianSpec {
    pub fn sigma2(&self) -> f64 {
        match self {
            GaussianSpec::Path(p) => p.sigma2(),
            GaussianSpec::FiniteDim(f) => f.sigma2(),
        }
    }
}

/// Lower-triangular factor of `cov + jitter I` with `jitter = 1e-12 trace / n`.
pub fn jittered_cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    let trace = cov.trace();
    if trace == 0.0 && cov.amax() == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let jitter = 1e-12 * trace / n as f64;
    let mut a = cov.clone();
    for i in 0..n {
        a[(i, i)] += jitter;
    }
    a.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| LabError::num("cholesky failed after jitter: covariance not PSD"))
}

/// Sampler with any factorisation precomputed, reusable across trials.
#[derive(Debug, Clone)]
pub enum GaussianSampler {
    Path {
        spec: PathGaussian,
        /// Factor of the covariance at `t_1..t_{n-1}` (fBm only).
        factor: Option<DMatrix<f64>>,
    },
    FiniteDim {
        mean: DVector<f64>,
        factor: DMatrix<f64>,
    },
}

impl GaussianSampler {
    pub fn new(spec: &GaussianSpec) -> Result<Self> {
        match spec {
            GaussianSpec::Path(p) => Self::for_path(p),
            GaussianSpec::FiniteDim(f) => Ok(Self::FiniteDim {
                mean: f.mean.clone(),
                factor: jittered_cholesky(&f.cov)?,
            }),
        }
    }

    pub fn for_path(spec: &PathGaussian) -> Result<Self> {
        spec.validate()?;
        let factor = match spec.process {
            ProcessKind::FractionalBm { .. } => {
                let times = spec.times();
                let m = spec.n - 1;
                let cov = DMatrix::from_fn(m, m, |i, j| {
                    spec.process
                        .covariance(times[i + 1], times[j + 1], spec.horizon)
                });
                Some(jittered_cholesky(&cov)?)
            }
            _ => None,
        };
        Ok(Self::Path {
            spec: *spec,
            factor,
        })
    }

    /// One path sample; errors for a finite-dimensional sampler.
    pub fn sample_path(&self, rng: SeededRng) -> Result<SampledPath> {
        let GaussianSampler::Path { spec, factor } = self else {
            return Err(LabError::arg("finite-dimensional law has no path samples"));
        };
        let mut g = rng.generator();
        let n = spec.n;
        let d = spec.dim;
        let times = spec.times();
        let mut values = vec![0.0; n * d];
        for c in 0..d {
            let col = match spec.process {
                ProcessKind::BrownianMotion => brownian_column(&times, &mut g),
                ProcessKind::BrownianBridge => {
                    let mut w = brownian_column(&times, &mut g);
                    let end = w[n - 1];
                    for (v, t) in w.iter_mut().zip(&times) {
                        *v -= t / spec.horizon * end;
                    }
                    w
                }
                ProcessKind::OrnsteinUhlenbeck { theta, sigma } => {
                    let mut w = vec![0.0; n];
                    for i in 1..n {
                        let dt = times[i] - times[i - 1];
                        let decay = (-theta * dt).exp();
                        let sd = sigma * ((1.0 - decay * decay) / (2.0 * theta)).sqrt();
                        w[i] = w[i - 1] * decay + sd * crate::rng::standard_normal(&mut g);
                    }
                    w
                }
                ProcessKind::FractionalBm { .. } => {
                    let l = factor.as_ref().expect("fBm factor precomputed");
                    let z = DVector::from_vec(normal_vec(&mut g, n - 1));
                    let x = l * z;
                    std::iter::once(0.0).chain(x.iter().copied()).collect()
                }
            };
            for i in 0..n {
                values[i * d + c] = col[i];
            }
        }
        SampledPath::new(times, values, d)
    }

    /// One vector sample; errors for a path sampler.
    pub fn sample_vector(&self, rng: SeededRng) -> Result<Vec<f64>> {
        let GaussianSampler::FiniteDim { mean, factor } = self else {
            return Err(LabError::arg("path law has no finite-dimensional samples"));
        };
        let mut g = rng.generator();
        let z = DVector::from_vec(normal_vec(&mut g, mean.len()));
        Ok((mean + factor * z).iter().copied().collect())
    }

    /// `count` vector samples drawn from one stream.
    pub fn sample_vectors(&self, rng: SeededRng, count: usize) -> Result<Vec<Vec<f64>>> {
        let GaussianSampler::FiniteDim { mean, factor } = self else {
            return Err(LabError::arg("path law has no finite-dimensional samples"));
        };
        let mut g = rng.generator();
        Ok((0..count)
            .map(|_| {
                let z = DVector::from_vec(normal_vec(&mut g, mean.len()));
                (mean + factor * z).iter().copied().collect()
            })
            .collect())
    }
}

impl GaussianSampler {
    /// Latin hypercube sample: every standard normal coordinate takes one
    /// value in each of the `count` equiprobable strata, with the strata
    /// paired across coordinates by independent random permutations. Each
    /// point has the exact law; the sample mean is far less noisy than for
    /// independent draws.
    pub fn sample_vectors_latin(&self, rng: SeededRng, count: usize) -> Result<Vec<Vec<f64>>> {
        use rand::seq::SliceRandom;
        use rand::Rng;
        use rand_distr::Open01;
        use statrs::distribution::{ContinuousCDF, Normal};
        let GaussianSampler::FiniteDim { mean, factor } = self else {
            return Err(LabError::arg("path law has no finite-dimensional samples"));
        };
        let k = mean.len();
        let std = Normal::standard();
        let mut g = rng.generator();
        let mut z = vec![DVector::zeros(k); count];
        let mut strata: Vec<usize> = (0..count).collect();
        for c in 0..k {
            strata.shuffle(&mut g);
            for (zi, &s) in z.iter_mut().zip(&strata) {
                let u: f64 = g.sample(Open01);
                zi[c] = std.inverse_cdf((s as f64 + u) / count as f64);
            }
        }
        Ok(z.into_iter().map(|zi| (mean + factor * zi).iter().copied().collect()).collect())
    }
}

fn brownian_column<R: rand::Rng>(times: &[f64], g: &mut R) -> Vec<f64> {
    let mut w = vec![0.0; times.len()];
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        w[i] = w[i - 1] + dt.sqrt() * crate::rng::standard_normal(g);
    }
    w
}

/// One path from `spec` on stream `rng`.
pub fn sample_path(spec: &PathGaussian, rng: SeededRng) -> Result<SampledPath> {
    GaussianSampler::for_path(spec)?.sample_path(rng)
}

/// Brownian Cameron-Martin norm `(sum |dh|^2 / dt)^{1/2}` of the interpolant.
pub fn cm_norm(h: &SampledPath) -> Result<f64> {
    if h.value(0).iter().any(|v| *v != 0.0) {
        return Err(LabError::arg("Cameron-Martin norm needs h(0) = 0"));
    }
    let t = h.times();
    let s: f64 = (0..h.len() - 1)
        .map(|i| h.increment_norm(i, i + 1).powi(2) / (t[i + 1] - t[i]))
        .sum();
    Ok(s.sqrt())
}

/// `cm_norm(x - y)`, the grid-level Cameron-Martin distance.
pub fn cm_distance(x: &SampledPath, y: &SampledPath) -> Result<f64> {
    let diff = x.sub(y)?;
    let offset: Vec<f64> = diff.value(0).iter().map(|v| -v).collect();
    cm_norm(&diff.shift(&offset)?)
}

/// Number of dyadic levels `J` with `n - 1 = 2^J` on a uniform grid.
fn dyadic_levels(x: &SampledPath) -> Result<u32> {
    let segs = x.len() - 1;
    if segs == 0 || !segs.is_power_of_two() {
        return Err(LabError::arg(format!(
            "Schauder system needs 2^J segments, got {segs}"
        )));
    }
    let t = x.times();
    let step = x.horizon() / segs as f64;
    if t.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step) {
        return Err(LabError::arg("Schauder system needs a uniform grid"));
    }
    Ok(segs.trailing_zeros())
}

/// Point-evaluation weights `(grid index, weight)` of the `k`-th Schauder functional.
fn schauder_weights(k: usize, levels: u32, horizon: f64) -> Vec<(usize, f64)> {
    let segs = 1usize << levels;
    let rt = horizon.sqrt();
    if k == 0 {
        return vec![(segs, 1.0 / rt), (0, -1.0 / rt)];
    }
    let j = usize::BITS - 1 - k.leading_zeros();
    let m = k - (1 << j);
    let width = segs >> j;
    let left = m * width;
    let c = (1u64 << j) as f64;
    let c = c.sqrt() / rt;
    vec![(left + width / 2, 2.0 * c), (left, -c), (left + width, -c)]
}

fn check_basis(n_basis: usize, levels: u32) -> Result<()> {
    let max = 1usize << levels;
    if n_basis == 0 || n_basis > max {
        return Err(LabError::arg(format!(
            "n_basis {n_basis} not in 1..={max} for this grid"
        )));
    }
    Ok(())
}

/// Coefficients `<e*_k, x>` against the Cameron-Martin orthonormal Schauder
/// system `e_1(t) = t / sqrt(T)` followed by integrated Haar functions.
pub fn schauder_coeffs(x: &SampledPath, n_basis: usize) -> Result<Vec<f64>> {
    if x.dim() != 1 {
        return Err(LabError::arg("Schauder coefficients need a scalar path"));
    }
    let levels = dyadic_levels(x)?;
    check_basis(n_basis, levels)?;
    let vals = x.values();
    Ok((0..n_basis)
        .map(|k| {
            schauder_weights(k, levels, x.horizon())
                .iter()
                .map(|(i, w)| w * vals[*i])
                .sum()
        })
        .collect())
}

/// `d_n(x, y) = min(|pi_n(x - y)|, n)` with `pi_n` the first `n_basis`
/// Schauder coefficients of every coordinate.
pub fn projection_metric(x: &SampledPath, y: &SampledPath, n_basis: usize) -> Result<f64> {
    let diff = x.sub(y)?;
    if diff.value(0).iter().any(|v| *v != 0.0) {
        return Err(LabError::arg("projection metric needs x(0) = y(0)"));
    }
    let mut sq = 0.0;
    for c in 0..diff.dim() {
        let comp = diff.component(c)?;
        sq += schauder_coeffs(&comp, n_basis)?
            .iter()
            .map(|v| v * v)
            .sum::<f64>();
    }
    Ok(sq.sqrt().min(n_basis as f64))
}

/// `L_n = sqrt(d) (sum_{k < n} |e*_k|_op^2)^{1/2}` with `|e*_k|_op` the sup-norm operator
/// norm of the functional on paths vanishing at zero, so that
/// `projection_metric(x, y, n) <= L_n sup_distance(x, y)`.
pub fn projection_lipschitz(x: &SampledPath, n_basis: usize) -> Result<f64> {
    let levels = dyadic_levels(x)?;
    check_basis(n_basis, levels)?;
    let s: f64 = (0..n_basis)
        .map(|k| {
            schauder_weights(k, levels, x.horizon())
                .iter()
                .filter(|(i, _)| *i != 0)
                .map(|(_, w)| w.abs())
                .sum::<f64>()
                .powi(2)
        })
        .sum();
    Ok((x.dim() as f64).sqrt() * s.sqrt())
}

/// Path of the `k`-th Schauder basis function on `x`'s grid (for tests and experiments).
pub fn schauder_basis(times: Vec<f64>, k: usize) -> Result<SampledPath> {
    let probe = SampledPath::zeros(times.clone(), 1)?;
    let levels = dyadic_levels(&probe)?;
    check_basis(k + 1, levels)?;
    let horizon = probe.horizon();
    let t0 = times[0];
    SampledPath::from_fn(times, 1, |t| {
        let s = t - t0;
        if k == 0 {
            return vec![s / horizon.sqrt()];
        }
        let j = usize::BITS - 1 - k.leading_zeros();
        let m = (k - (1 << j)) as f64;
        let width = horizon / (1u64 << j) as f64;
        let (left, mid, right) = (m * width, (m + 0.5) * width, (m + 1.0) * width);
        let c = ((1u64 << j) as f64).sqrt() / horizon.sqrt();
        let v = if s <= left || s >= right {
            0.0
        } else if s <= mid {
            c * (s - left)
        } else {
            c * (right - s)
        };
        vec![v]
    })
}
