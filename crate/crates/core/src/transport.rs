//! Wasserstein distances between empirical measures, closed forms for
//! Gaussians, and transportation-cost inequality checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assignment::{self, CostMatrix};
use crate::error::{LabError, Result};
use crate::flows::{ode_additive_solve, VectorFieldSpec};
use crate::gaussian::{cm_distance, cm_norm, projection_metric, FiniteDimGaussian, GaussianSampler, PathGaussian, ProcessKind};
use crate::par;
use crate::paths::{pvar_distance, sup_distance, SampledPath};
use crate::rng::SeededRng;

/// Largest empirical measure accepted by [`empirical_wasserstein`].
pub const MAX_SAMPLES: usize = 4096;

/// Triangle-inequality tolerance for empirical Wasserstein distances.
pub const TRIANGLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundCost {
    Euclidean,
    SupDistance,
    PVarDistance { p: f64 },
    /// Brownian Cameron-Martin norm of the difference.
    CmDistance,
    ProjectionMetric { n_basis: usize },
}

/// Point types that carry a ground cost.
pub trait GroundSpace: Sync {
    fn ground_cost(cost: &GroundCost, a: &Self, b: &Self) -> Result<f64>;
}

impl GroundSpace for Vec<f64> {
    fn ground_cost(cost: &GroundCost, a: &Self, b: &Self) -> Result<f64> {
        match cost {
            GroundCost::Euclidean => {
                if a.len() != b.len() {
                    return Err(LabError::arg("points have different dimensions"));
                }
                Ok(a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt())
            }
            other => Err(LabError::arg(format!("{other:?} needs path-valued points"))),
        }
    }
}

impl GroundSpace for SampledPath {
    fn ground_cost(cost: &GroundCost, a: &Self, b: &Self) -> Result<f64> {
        match *cost {
            GroundCost::Euclidean => Err(LabError::arg("Euclidean cost needs vector points")),
            GroundCost::SupDistance => sup_distance(a, b),
            GroundCost::PVarDistance { p } => pvar_distance(a, b, p),
            GroundCost::CmDistance => cm_distance(a, b),
            GroundCost::ProjectionMetric { n_basis } => projection_metric(a, b, n_basis),
        }
    }
}

/// `n` equally weighted sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<P> {
    points: Vec<P>,
}

impl<P> EmpiricalMeasure<P> {
    pub fn new(points: Vec<P>) -> Result<Self> {
        if points.is_empty() {
            return Err(LabError::arg("empirical measure needs at least one point"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_pair<P>(mu: &EmpiricalMeasure<P>, nu: &EmpiricalMeasure<P>, p: f64) -> Result<usize> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(LabError::arg(format!("Wasserstein order p = {p} must be >= 1")));
    }
    if mu.len() != nu.len() {
        return Err(LabError::arg(format!(
            "sample counts differ ({} vs {}); resample to equal sizes",
            mu.len(),
            nu.len()
        )));
    }
    Ok(mu.len())
}

/// Matrix of `cost(mu_i, nu_j)^p`, rows computed in parallel.
pub fn cost_matrix<P: GroundSpace>(
    mu: &EmpiricalMeasure<P>,
    nu: &EmpiricalMeasure<P>,
    cost: &GroundCost,
    p: f64,
) -> Result<CostMatrix> {
    let n = mu.len();
    let rows = par::try_map_indexed(n, |i| {
        nu.points
            .iter()
            .map(|b| P::ground_cost(cost, &mu.points[i], b).map(|c| c.powf(p)))
            .collect::<Result<Vec<f64>>>()
    })?;
    CostMatrix::new(n, rows.concat())
}

/// Exact `W_p` between equal-size empirical measures via linear assignment.
pub fn empirical_wasserstein_assignment<P: GroundSpace>(
    mu: &EmpiricalMeasure<P>,
    nu: &EmpiricalMeasure<P>,
    cost: &GroundCost,
    p: f64,
) -> Result<f64> {
    let n = check_pair(mu, nu, p)?;
    if n > MAX_SAMPLES {
        return Err(LabError::TooLarge {
            what: "empirical measure size",
            got: n,
            limit: MAX_SAMPLES,
        });
    }
    let m = cost_matrix(mu, nu, cost, p)?;
    let total = assignment::solve(&m).total;
    Ok((total / n as f64).powf(1.0 / p))
}

/// Exact `W_p` on the real line: the sorted (monotone) coupling is optimal for `p >= 1`.
pub fn wasserstein_sorted_1d(a: &[f64], b: &[f64], p: f64) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(LabError::arg("need two nonempty samples of equal size"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let mut costs: Vec<f64> = x.iter().zip(&y).map(|(u, v)| (u - v).abs().powf(p)).collect();
    costs.sort_by(f64::total_cmp);
    Ok((costs.iter().sum::<f64>() / a.len() as f64).powf(1.0 / p))
}

/// Exact `W_p` between equal-size empirical measures.
///
/// Scalar Euclidean samples use the sorted coupling; everything else goes
/// through the assignment solver. Returns `+inf` when no finite-cost perfect
/// matching exists.
pub fn empirical_wasserstein<P: GroundSpace + AsScalar>(
    mu: &EmpiricalMeasure<P>,
    nu: &EmpiricalMeasure<P>,
    cost: &GroundCost,
    p: f64,
) -> Result<f64> {
    let n = check_pair(mu, nu, p)?;
    if n > MAX_SAMPLES {
        return Err(LabError::TooLarge {
            what: "empirical measure size",
            got: n,
            limit: MAX_SAMPLES,
        });
    }
    if matches!(cost, GroundCost::Euclidean) {
        let a: Option<Vec<f64>> = mu.points.iter().map(AsScalar::as_scalar).collect();
        let b: Option<Vec<f64>> = nu.points.iter().map(AsScalar::as_scalar).collect();
        if let (Some(a), Some(b)) = (a, b) {
            return wasserstein_sorted_1d(&a, &b, p);
        }
    }
    empirical_wasserstein_assignment(mu, nu, cost, p)
}

/// Points that may be real numbers in disguise.
pub trait AsScalar {
    fn as_scalar(&self) -> Option<f64>;
}

impl AsScalar for Vec<f64> {
    fn as_scalar(&self) -> Option<f64> {
        (self.len() == 1).then(|| self[0])
    }
}

impl AsScalar for SampledPath {
    fn as_scalar(&self) -> Option<f64> {
        None
    }
}

/// Minimum over all `n!` couplings; `n <= 8`.
pub fn wasserstein_bruteforce<P: GroundSpace>(
    mu: &EmpiricalMeasure<P>,
    nu: &EmpiricalMeasure<P>,
    cost: &GroundCost,
    p: f64,
) -> Result<f64> {
    let n = check_pair(mu, nu, p)?;
    if n > assignment::BRUTEFORCE_MAX {
        return Err(LabError::TooLarge {
            what: "brute-force measure size",
            got: n,
            limit: assignment::BRUTEFORCE_MAX,
        });
    }
    let m = cost_matrix(mu, nu, cost, p)?;
    let total = assignment::solve_bruteforce(&m)?.total;
    Ok((total / n as f64).powf(1.0 / p))
}

fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = a.clone().symmetric_eigen();
    let vals = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose()
}

fn sym_inv_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = a.clone().symmetric_eigen();
    if e.eigenvalues.min() <= 0.0 {
        return Err(LabError::num("matrix is not positive definite"));
    }
    let vals = e.eigenvalues.map(|v| 1.0 / v.sqrt());
    Ok(&e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose())
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// `W_2(N(m1,S1), N(m2,S2))` with
/// `W_2^2 = |m1-m2|^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2})`.
pub fn gaussian_w2(a: &FiniteDimGaussian, b: &FiniteDimGaussian) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(LabError::arg("gaussians have different dimensions"));
    }
    let mean = (a.mean() - b.mean()).norm_squared();
    let root = sym_sqrt(b.cov());
    let cross = symmetrize(&root * a.cov() * &root);
    let e = cross.symmetric_eigen();
    if e.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(LabError::num("eigendecomposition failed"));
    }
    let bures = a.cov().trace() + b.cov().trace()
        - 2.0 * e.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>();
    Ok((mean + bures).max(0.0).sqrt())
}

/// Relative entropy `H(nu | mu)` of two Gaussians; `+inf` when `nu` is not
/// absolutely continuous with respect to `mu` (singular covariances).
pub fn gaussian_kl(nu: &FiniteDimGaussian, mu: &FiniteDimGaussian) -> Result<f64> {
    if nu.dim() != mu.dim() {
        return Err(LabError::arg("gaussians have different dimensions"));
    }
    let k = nu.dim() as f64;
    let Some(chol_mu) = mu.cov().clone().cholesky() else {
        return Ok(f64::INFINITY);
    };
    let Some(chol_nu) = nu.cov().clone().cholesky() else {
        return Ok(f64::INFINITY);
    };
    let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ld_mu = logdet(&chol_mu.l());
    let ld_nu = logdet(&chol_nu.l());
    let trace = chol_mu.solve(nu.cov()).trace();
    let dm: DVector<f64> = mu.mean() - nu.mean();
    let quad = dm.dot(&chol_mu.solve(&dm));
    Ok((0.5 * (trace + quad - k + ld_mu - ld_nu)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct T2Report {
    /// `W_2(nu, mu)` under the Cameron-Martin (Mahalanobis) metric of `mu`.
    pub lhs: f64,
    /// `sqrt(C H(nu | mu))`.
    pub rhs: f64,
    pub holds: bool,
    /// `rhs - lhs`.
    pub equality_gap: f64,
}

/// Finite-dimensional Talagrand check `W_2 <= sqrt(C H(nu|mu))`, with `W_2`
/// measured in the metric `|Sigma_mu^{-1/2} (x - y)|`.
pub fn t2_check_finite_dim(
    nu: &FiniteDimGaussian,
    mu: &FiniteDimGaussian,
    c: f64,
) -> Result<T2Report> {
    let w = sym_inv_sqrt(mu.cov())?;
    let white_nu = FiniteDimGaussian::new(
        (&w * (nu.mean() - mu.mean())).iter().copied().collect(),
        symmetrize(&w * nu.cov() * &w),
    )?;
    let white_mu = FiniteDimGaussian::standard(mu.dim());
    let lhs = gaussian_w2(&white_nu, &white_mu)?;
    let rhs = (c * gaussian_kl(nu, mu)?).sqrt();
    Ok(T2Report {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-9),
        equality_gap: rhs - lhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct T2ShiftReport {
    /// `(E d_{p-var}(y^1, y^2)^{2-eps})^{1/(2-eps)}` under the synchronous coupling.
    pub lhs: f64,
    /// `|h|_H^2 / 2`, the entropy of the Cameron-Martin shift.
    pub entropy: f64,
    /// `lhs^2 / entropy`.
    pub implied_c: f64,
}

/// Monte Carlo shift experiment on Brownian path space.
///
/// Trial `i` samples `x` from stream `rng.substream(i)`, solves the additive
/// flow (or takes the identity) for `x` and `x + h`, and records the
/// `p`-variation distance of the two solutions.
#[allow(clippy::too_many_arguments)]
pub fn t2_shift_experiment_path(
    spec: &PathGaussian,
    h: &SampledPath,
    flow: Option<&VectorFieldSpec>,
    p: f64,
    epsilon: f64,
    trials: usize,
    rng: SeededRng,
) -> Result<T2ShiftReport> {
    if spec.process != ProcessKind::BrownianMotion {
        return Err(LabError::arg("shift experiment needs Brownian motion"));
    }
    if !(0.0..1.0).contains(&epsilon) || trials == 0 {
        return Err(LabError::arg("need epsilon in [0,1) and at least one trial"));
    }
    let sampler = GaussianSampler::for_path(spec)?;
    let xi = vec![0.0; spec.dim];
    let expo = 2.0 - epsilon;
    let dists = par::try_map_indexed(trials, |i| {
        let x = sampler.sample_path(rng.substream(i as u64))?;
        let xh = x.add(h)?;
        let (y1, y2) = match flow {
            Some(b) => (ode_additive_solve(&x, b, &xi)?, ode_additive_solve(&xh, b, &xi)?),
            None => (x, xh),
        };
        pvar_distance(&y1, &y2, p).map(|d| d.powf(expo))
    })?;
    let lhs = (dists.iter().sum::<f64>() / trials as f64).powf(1.0 / expo);
    let entropy = 0.5 * cm_norm(h)?.powi(2);
    let implied_c = if entropy == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs * lhs / entropy
    };
    Ok(T2ShiftReport {
        lhs,
        entropy,
        implied_c,
    })
}

/// Named Lipschitz maps `R^k -> R^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PushMap {
    Identity,
    Scale { c: f64 },
    /// Componentwise `tanh`.
    Tanh,
}

impl PushMap {
    pub fn lipschitz(&self) -> f64 {
        match self {
            PushMap::Identity | PushMap::Tanh => 1.0,
            PushMap::Scale { c } => c.abs(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            PushMap::Identity => x.to_vec(),
            PushMap::Scale { c } => x.iter().map(|v| c * v).collect(),
            PushMap::Tanh => x.iter().map(|v| v.tanh()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PushforwardRow {
    /// Empirical `W_2(Psi#nu, Psi#mu)`.
    pub lhs: f64,
    /// Bootstrap standard error of `lhs`.
    pub se: f64,
    /// `L sqrt(C H(nu|mu))`.
    pub rhs: f64,
    pub holds: bool,
}

fn empirical_w2_vectors(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let mu = EmpiricalMeasure::new(a.to_vec())?;
    let nu = EmpiricalMeasure::new(b.to_vec())?;
    empirical_wasserstein(&mu, &nu, &GroundCost::Euclidean, 2.0)
}

/// Checks `W_2(Psi#nu, Psi#mu) <= L sqrt(C H(nu|mu))` with `n` pushed samples
/// per measure and `boot` bootstrap resamples for the standard error; the
/// check passes when `lhs - 3 se <= rhs`.
#[allow(clippy::too_many_arguments)]
pub fn pushforward_check(
    mu: &FiniteDimGaussian,
    nu: &FiniteDimGaussian,
    map: PushMap,
    c: f64,
    n: usize,
    boot: usize,
    rng: SeededRng,
) -> Result<PushforwardRow> {
    use rand::Rng;
    let push = |spec: &FiniteDimGaussian, stream: SeededRng| -> Result<Vec<Vec<f64>>> {
        let s = GaussianSampler::new(&crate::gaussian::GaussianSpec::FiniteDim(spec.clone()))?;
        Ok(s.sample_vectors(stream, n)?
            .iter()
            .map(|x| map.apply(x))
            .collect())
    };
    let a = push(nu, rng.substream(0))?;
    let b = push(mu, rng.substream(1))?;
    let lhs = empirical_w2_vectors(&a, &b)?;
    let reps = par::try_map_indexed(boot, |r| {
        let mut g = rng.substream(2 + r as u64).generator();
        let ra: Vec<Vec<f64>> = (0..n).map(|_| a[g.random_range(0..n)].clone()).collect();
        let rb: Vec<Vec<f64>> = (0..n).map(|_| b[g.random_range(0..n)].clone()).collect();
        empirical_w2_vectors(&ra, &rb)
    })?;
    let se = if reps.len() > 1 {
        let m = reps.iter().sum::<f64>() / reps.len() as f64;
        (reps.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (reps.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let rhs = map.lipschitz() * (c * gaussian_kl(nu, mu)?).sqrt();
    Ok(PushforwardRow {
        lhs,
        se,
        rhs,
        holds: lhs - 3.0 * se <= rhs * (1.0 + 1e-9),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricAxiomsReport {
    pub d_ab: f64,
    pub d_bc: f64,
    pub d_ac: f64,
    pub symmetric: bool,
    pub identity: bool,
    pub triangle: bool,
}

impl MetricAxiomsReport {
    pub fn holds(&self) -> bool {
        self.symmetric && self.identity && self.triangle
    }
}

/// Splits `points` into three consecutive equal blocks and checks the metric
/// axioms for `W_p` built on `cost`: exact symmetry, `W(a,a) = 0`, and every
/// triangle inequality within [`TRIANGLE_TOL`].
pub fn metric_axioms_check<P: GroundSpace + AsScalar + Clone>(
    points: &[P],
    cost: &GroundCost,
    p: f64,
) -> Result<MetricAxiomsReport> {
    let m = points.len() / 3;
    if m == 0 {
        return Err(LabError::arg("need at least three points"));
    }
    let block = |k: usize| EmpiricalMeasure::new(points[k * m..(k + 1) * m].to_vec());
    let (a, b, c) = (block(0)?, block(1)?, block(2)?);
    let w = |x: &EmpiricalMeasure<P>, y: &EmpiricalMeasure<P>| {
        empirical_wasserstein_assignment(x, y, cost, p)
    };
    let (ab, ba) = (w(&a, &b)?, w(&b, &a)?);
    let (bc, cb) = (w(&b, &c)?, w(&c, &b)?);
    let (ac, ca) = (w(&a, &c)?, w(&c, &a)?);
    let identity = w(&a, &a)? == 0.0 && w(&b, &b)? == 0.0 && w(&c, &c)? == 0.0;
    let tri = |x: f64, y: f64, z: f64| x <= y + z + TRIANGLE_TOL;
    Ok(MetricAxiomsReport {
        d_ab: ab,
        d_bc: bc,
        d_ac: ac,
        symmetric: ab == ba && bc == cb && ac == ca,
        identity,
        triangle: tri(ac, ab, bc) && tri(ab, ac, bc) && tri(bc, ab, ac),
    })
}
