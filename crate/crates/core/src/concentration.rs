//! Monte Carlo tail analysis: Gaussian-tail fits, Fernique checks, the tail
//! of the accumulation count, and concentration of empirical measures.

use rand::Rng;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{LabError, Result};
use crate::gaussian::{FiniteDimGaussian, GaussianSampler, GaussianSpec, PathGaussian, ProcessKind};
use crate::par;
use crate::paths::{p_variation, SampledPath};
use crate::rng::SeededRng;
use crate::roughlift::{chen_lift, homogeneous_gauge, n_alpha};
use crate::transport::{empirical_wasserstein, EmpiricalMeasure, GroundCost};

pub const MIN_TAIL_SAMPLES: usize = 10_000;
pub const MIN_TAIL_POINTS: usize = 10;
/// Deepest tail level keeps at least this many exceedances.
pub const MIN_EXCEEDANCES: usize = 10;
pub const TAIL_LEVELS: usize = 24;
pub const R2_THRESHOLD: f64 = 0.95;
/// Curvature beyond this many standard errors counts as a trend.
pub const TREND_SE: f64 = 2.0;
pub const BOOTSTRAP_REPS: usize = 32;
pub const DEFAULT_QUANTILE_LO: f64 = 0.8;

const BOOTSTRAP_SEED: u64 = 0x07a1_1f17;

/// `P(Z > x)` for a standard normal `Z`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailVerdict {
    Gaussian,
    /// Tail lighter than Gaussian, typically a bounded law.
    Bounded,
    NotGaussian,
}

impl std::fmt::Display for TailVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TailVerdict::Gaussian => "gaussian",
            TailVerdict::Bounded => "bounded",
            TailVerdict::NotGaussian => "not_gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub r: f64,
    pub log_survival: f64,
    pub fit: f64,
}

/// Fit of `log P(X > r) = -(r - r1)^2 / (2 sigma2)` to the upper tail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub sigma2: f64,
    pub r1: f64,
    /// `R^2` of the fit in log-survival space.
    pub r2: f64,
    pub n_tail: usize,
    /// Quadratic coefficient of the log-survival residuals; positive means
    /// the tail is heavier than the fitted Gaussian shape further out.
    pub curvature: f64,
    pub curvature_se: f64,
    pub verdict: TailVerdict,
    #[serde(skip)]
    pub points: Vec<TailPoint>,
}

/// Radii and empirical log-survival at geometrically spaced tail levels from
/// `1 - quantile_lo` down to `MIN_EXCEEDANCES / n`; `sorted` is ascending.
fn tail_points(sorted: &[f64], quantile_lo: f64) -> Vec<(f64, f64)> {
    let n = sorted.len();
    let top = 1.0 - quantile_lo;
    let bottom = MIN_EXCEEDANCES as f64 / n as f64;
    let ratio = (bottom / top).powf(1.0 / (TAIL_LEVELS - 1) as f64);
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(TAIL_LEVELS);
    for i in 0..TAIL_LEVELS {
        let level = top * ratio.powi(i as i32);
        let m = ((level * n as f64).round() as usize).clamp(1, n);
        let r = sorted[n - m];
        let above = n - sorted.partition_point(|v| *v <= r);
        if above == 0 || out.last().is_some_and(|(prev, _)| *prev == r) {
            continue;
        }
        out.push((r, (above as f64 / n as f64).ln()));
    }
    out
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for ((a, b), c) in x.iter().zip(y).zip(w) {
        sxy += c * (a - mx) * (b - my);
        sxx += c * (a - mx) * (a - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Least-squares quadratic coefficient of `y` against `x`.
fn quadratic_coeff(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let u: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (ui, yi) in u.iter().zip(y) {
        let basis = [1.0, *ui, ui * ui];
        for r in 0..3 {
            b[r] += basis[r] * yi;
            for c in 0..3 {
                a[r][c] += basis[r] * basis[c];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if d.abs() < 1e-300 {
        return 0.0;
    }
    let mut a2 = a;
    for r in 0..3 {
        a2[r][2] = b[r];
    }
    det(&a2) / d
}

/// Gaussian tail parameters `(sigma2, r1)` for log-survival values at the
/// given radii, fitted as the line `sqrt(-2 log S) = (r - r1) / sigma` with
/// binomial weights for a sample of size `n`.
pub fn gaussian_tail_params(points: &[(f64, f64)], n: usize) -> (f64, f64) {
    let r: Vec<f64> = points.iter().map(|p| p.0).collect();
    let z: Vec<f64> = points.iter().map(|p| (-2.0 * p.1).sqrt()).collect();
    let w: Vec<f64> = points
        .iter()
        .zip(&z)
        .map(|(&(_, l), zi)| {
            let s = l.exp();
            n as f64 * s / (1.0 - s).max(1e-300) * zi * zi
        })
        .collect();
    let (a, b) = weighted_line(&r, &z, &w);
    if b <= 0.0 {
        return (f64::INFINITY, f64::NAN);
    }
    (1.0 / (b * b), -a / b)
}

/// Tail points of a count sample: the survival `P(N >= k)` at the lattice
/// atoms, interpolated linearly in log scale between consecutive atoms and
/// evaluated at the same geometric levels as [`tail_points`].
fn lattice_tail_points(counts: &[usize], quantile_lo: f64) -> Vec<(f64, f64)> {
    let n = counts.len();
    let top_count = counts.iter().copied().max().unwrap_or(0);
    let mut at_least = vec![0usize; top_count + 2];
    for &c in counts {
        at_least[c] += 1;
    }
    for k in (0..=top_count).rev() {
        at_least[k] += at_least[k + 1];
    }
    let log_g: Vec<f64> = at_least.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
    let top = 1.0 - quantile_lo;
    let bottom = MIN_EXCEEDANCES as f64 / n as f64;
    let ratio = (bottom / top).powf(1.0 / (TAIL_LEVELS - 1) as f64);
    (0..TAIL_LEVELS)
        .filter_map(|i| {
            let ls = (top * ratio.powi(i as i32)).ln();
            let k = log_g.iter().rposition(|&g| g >= ls)?;
            let next = *log_g.get(k + 1)?;
            if next == f64::NEG_INFINITY {
                return None;
            }
            Some((k as f64 + (log_g[k] - ls) / (log_g[k] - next), ls))
        })
        .collect()
}

struct RawFit {
    sigma2: f64,
    r1: f64,
    r2: f64,
    curvature: f64,
    points: Vec<TailPoint>,
}

fn raw_fit(pts: &[(f64, f64)], n: usize) -> Option<RawFit> {
    if pts.len() < MIN_TAIL_POINTS {
        return None;
    }
    let (sigma2, r1) = gaussian_tail_params(pts, n);
    let fitted = |r: f64| {
        if sigma2.is_finite() {
            -(r - r1) * (r - r1) / (2.0 * sigma2)
        } else {
            0.0
        }
    };
    let mean_l = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    let points: Vec<TailPoint> = pts
        .iter()
        .map(|&(r, l)| {
            let f = fitted(r);
            ss_res += (l - f) * (l - f);
            ss_tot += (l - mean_l) * (l - mean_l);
            TailPoint {
                r,
                log_survival: l,
                fit: f,
            }
        })
        .collect();
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).max(0.0) } else { 0.0 };
    let xs: Vec<f64> = points.iter().map(|p| p.r).collect();
    let res: Vec<f64> = points.iter().map(|p| p.log_survival - p.fit).collect();
    Some(RawFit {
        sigma2,
        r1,
        r2,
        curvature: quadratic_coeff(&xs, &res),
        points,
    })
}

fn check_tail_args(len: usize, quantile_lo: f64) -> Result<()> {
    if len < MIN_TAIL_SAMPLES {
        return Err(LabError::TooLarge {
            what: "tail fit needs more samples; sample count",
            got: len,
            limit: MIN_TAIL_SAMPLES,
        });
    }
    if !(quantile_lo > 0.5 && quantile_lo < 0.99) {
        return Err(LabError::arg(format!("quantile_lo = {quantile_lo} must lie in (0.5, 0.99)")));
    }
    Ok(())
}

/// Fit, bootstrap curvature error and verdict for any sample type whose
/// tail points are produced by `extract`.
fn classify<T, F>(data: &[T], quantile_lo: f64, top: f64, extract: F) -> TailFit
where
    T: Copy + Send + Sync,
    F: Fn(&[T], f64) -> Vec<(f64, f64)> + Sync,
{
    let n = data.len();
    let pts = extract(data, quantile_lo);
    let Some(fit) = raw_fit(&pts, n) else {
        return TailFit {
            sigma2: 0.0,
            r1: top,
            r2: 0.0,
            n_tail: pts.len(),
            curvature: 0.0,
            curvature_se: 0.0,
            verdict: TailVerdict::Bounded,
            points: vec![],
        };
    };
    let boot = SeededRng::new(BOOTSTRAP_SEED, n as u64);
    let curvatures: Vec<f64> = par::map_indexed(BOOTSTRAP_REPS, |b| {
        let mut g = boot.substream(b as u64).generator();
        let re: Vec<T> = (0..n).map(|_| data[g.random_range(0..n)]).collect();
        raw_fit(&extract(&re, quantile_lo), n).map_or(f64::NAN, |f| f.curvature)
    })
    .into_iter()
    .filter(|v| v.is_finite())
    .collect();
    let curvature_se = std_dev(&curvatures);
    let trend = TREND_SE * curvature_se;
    let verdict = if fit.curvature > trend {
        TailVerdict::NotGaussian
    } else if fit.curvature < -trend {
        TailVerdict::Bounded
    } else if fit.r2 >= R2_THRESHOLD && fit.sigma2.is_finite() {
        TailVerdict::Gaussian
    } else {
        TailVerdict::NotGaussian
    };
    TailFit {
        sigma2: fit.sigma2,
        r1: fit.r1,
        r2: fit.r2,
        n_tail: fit.points.len(),
        curvature: fit.curvature,
        curvature_se,
        verdict,
        points: fit.points,
    }
}

/// Fits a Gaussian tail to the samples above `quantile_lo` and classifies it.
///
/// The verdict is `Bounded` when the tail has fewer than
/// [`MIN_TAIL_POINTS`] distinct radii or a significantly concave residual
/// trend, `NotGaussian` for a significantly convex trend or `R^2` below
/// [`R2_THRESHOLD`], and `Gaussian` otherwise. The curvature standard error
/// comes from a bootstrap with a fixed seed, so the fit is deterministic.
pub fn tail_fit(samples: &[f64], quantile_lo: f64) -> Result<TailFit> {
    check_tail_args(samples.len(), quantile_lo)?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(LabError::num("tail fit samples must be finite"));
    }
    let top = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(classify(samples, quantile_lo, top, |data, q| {
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        tail_points(&sorted, q)
    }))
}

/// [`tail_fit`] for integer-valued samples, using [`lattice_tail_points`]
/// so that radii between atoms carry no artificial within-cell shape.
pub fn tail_fit_counts(counts: &[usize], quantile_lo: f64) -> Result<TailFit> {
    check_tail_args(counts.len(), quantile_lo)?;
    let top = counts.iter().copied().max().unwrap_or(0) as f64;
    Ok(classify(counts, quantile_lo, top, lattice_tail_points))
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailFunctional {
    /// `sup_t |x_t|`.
    SupNorm,
    PVarNorm { p: f64 },
    /// Dilation-homogeneous `p`-variation gauge of the canonical lift.
    HomogLiftNorm { p: f64 },
}

impl TailFunctional {
    pub fn eval(&self, x: &SampledPath) -> Result<f64> {
        match *self {
            TailFunctional::SupNorm => Ok((0..x.len())
                .map(|i| x.value(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max)),
            TailFunctional::PVarNorm { p } => p_variation(x, p, x.full()),
            TailFunctional::HomogLiftNorm { p } => homogeneous_gauge(&chen_lift(x)?, p, x.full()),
        }
    }
}

/// The running maximum of scalar Brownian motion against the reflection law
/// `P(max_{[0,T]} B > r) = 2 Phi(-r / sqrt(T))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectionComparison {
    /// Tail scale fitted to the sampled running maxima.
    pub sigma2_fit: f64,
    /// The same fit applied to the exact reflection law at the same radii.
    pub sigma2_reflection: f64,
    /// `|log P_hat(max > r) - log 2 Phi(-r/sqrt T)|` at the empirical 0.9 quantile.
    pub log_gap_q90: f64,
    /// The same at the empirical 0.99 quantile.
    pub log_gap_q99: f64,
}

impl ReflectionComparison {
    pub fn relative_error(&self) -> f64 {
        (self.sigma2_fit / self.sigma2_reflection - 1.0).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FerniqueReport {
    pub functional: TailFunctional,
    pub trials: usize,
    pub mean: f64,
    pub fit: TailFit,
    /// Present for scalar Brownian motion.
    pub reflection: Option<ReflectionComparison>,
}

fn reflection_comparison(maxima: &[f64], horizon: f64, quantile_lo: f64) -> Result<ReflectionComparison> {
    let mut sorted = maxima.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let pts = tail_points(&sorted, quantile_lo);
    if pts.len() < MIN_TAIL_POINTS {
        return Err(LabError::num("running maxima have a degenerate tail"));
    }
    let exact = |r: f64| (2.0 * normal_sf(r / horizon.sqrt())).min(1.0).ln();
    let exact_pts: Vec<(f64, f64)> = pts.iter().map(|&(r, _)| (r, exact(r))).collect();
    let gap = |q: f64| {
        let r = sorted[((q * n as f64).ceil() as usize).min(n - 1)];
        let above = n - sorted.partition_point(|v| *v <= r);
        ((above as f64 / n as f64).ln() - exact(r)).abs()
    };
    Ok(ReflectionComparison {
        sigma2_fit: gaussian_tail_params(&pts, n).0,
        sigma2_reflection: gaussian_tail_params(&exact_pts, n).0,
        log_gap_q90: gap(0.9),
        log_gap_q99: gap(0.99),
    })
}

/// Samples `trials` paths (trial `i` on stream `rng.substream(i)`), evaluates
/// the functional and fits its tail.
pub fn fernique_check(
    spec: &PathGaussian,
    functional: TailFunctional,
    trials: usize,
    quantile_lo: f64,
    rng: SeededRng,
) -> Result<FerniqueReport> {
    check_tail_args(trials, quantile_lo)?;
    let sampler = GaussianSampler::for_path(spec)?;
    let reflect = spec.process == ProcessKind::BrownianMotion && spec.dim == 1;
    let pairs = par::try_map_indexed(trials, |i| {
        let x = sampler.sample_path(rng.substream(i as u64))?;
        let top = if reflect {
            x.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            f64::NAN
        };
        Ok::<_, LabError>((functional.eval(&x)?, top))
    })?;
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let reflection = if reflect {
        let maxima: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        Some(reflection_comparison(&maxima, spec.horizon, quantile_lo)?)
    } else {
        None
    };
    Ok(FerniqueReport {
        functional,
        trials,
        mean: values.iter().sum::<f64>() / trials as f64,
        fit: tail_fit(&values, quantile_lo)?,
        reflection,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct N1TailReport {
    pub trials: usize,
    pub mean_count: f64,
    pub max_count: usize,
    pub counts: Vec<usize>,
    pub fit: TailFit,
}

/// Tail of `N_1(S(B); [0,T])` for Brownian motion lifted by its canonical
/// piecewise-linear lift, fitted with [`tail_fit_counts`].
pub fn n1_tail_experiment(
    spec: &PathGaussian,
    p: f64,
    trials: usize,
    quantile_lo: f64,
    rng: SeededRng,
) -> Result<N1TailReport> {
    if spec.process != ProcessKind::BrownianMotion {
        return Err(LabError::arg("accumulation-count tails need Brownian motion"));
    }
    if !(p > 2.0 && p < 3.0) {
        return Err(LabError::arg(format!("p = {p} must lie in (2, 3)")));
    }
    check_tail_args(trials, quantile_lo)?;
    let sampler = GaussianSampler::for_path(spec)?;
    let counts = par::try_map_indexed(trials, |i| {
        let x = sampler.sample_path(rng.substream(i as u64))?;
        n_alpha(&chen_lift(&x)?, 1.0, p, x.full())
    })?;
    Ok(N1TailReport {
        trials,
        mean_count: counts.iter().sum::<usize>() as f64 / trials as f64,
        max_count: counts.iter().copied().max().unwrap_or(0),
        fit: tail_fit_counts(&counts, quantile_lo)?,
        counts,
    })
}

/// Radii at which the exceedance curve is compared with `Phi(-r)`.
pub const EXCEEDANCE_RADII: [f64; 7] = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
pub const MAX_CONCENTRATION_DIM: usize = 5;
pub const MAX_CONCENTRATION_N: usize = 512;
pub const CONCENTRATION_BOOTSTRAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExceedancePoint {
    pub r: f64,
    pub p_hat: f64,
    pub se: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub trials: usize,
    pub median: f64,
    /// Square root of the top covariance eigenvalue.
    pub sigma: f64,
    pub exceedance: Vec<ExceedancePoint>,
}

impl ConcentrationRow {
    pub fn holds(&self) -> bool {
        self.exceedance.iter().all(|e| e.holds)
    }
}

fn exceedance_probability(w: &[f64], threshold_at: impl Fn(f64) -> f64, r: f64) -> f64 {
    let m = median(w);
    let cut = threshold_at(m) + r;
    w.iter().filter(|v| **v > cut).count() as f64 / w.len() as f64
}

/// Concentration of `W_2(L_n, gamma)` around its median.
///
/// For every `n` a reference sample of size `n` is drawn once and held fixed;
/// trial `j` draws a fresh `L_n` and records `W_2(L_n, R_n)`. Conditionally
/// on the reference this statistic is `sigma / sqrt(n)`-Lipschitz in the
/// standard Gaussian coordinates of `L_n`, so its exceedance probability
/// above `median + sigma r / sqrt(n)` is at most `Phi(-r)`.
pub fn empirical_concentration_experiment(
    spec: &FiniteDimGaussian,
    n_grid: &[usize],
    trials: usize,
    rng: SeededRng,
) -> Result<Vec<ConcentrationRow>> {
    if spec.dim() == 0 || spec.dim() > MAX_CONCENTRATION_DIM {
        return Err(LabError::arg(format!(
            "dimension {} must lie in 1..={MAX_CONCENTRATION_DIM}",
            spec.dim()
        )));
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n == 0 || n > MAX_CONCENTRATION_N) {
        return Err(LabError::arg(format!(
            "sample size {n} must lie in 1..={MAX_CONCENTRATION_N}"
        )));
    }
    if trials < 2 {
        return Err(LabError::arg("need at least two trials"));
    }
    let sampler = GaussianSampler::new(&GaussianSpec::FiniteDim(spec.clone()))?;
    let sigma = spec.sigma2().max(0.0).sqrt();
    n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let base = rng.substream(g as u64);
            let reference = EmpiricalMeasure::new(sampler.sample_vectors(base.substream(0), n)?)?;
            let w = par::try_map_indexed(trials, |j| {
                let draw = EmpiricalMeasure::new(
                    sampler.sample_vectors(base.substream(1 + j as u64), n)?,
                )?;
                empirical_wasserstein(&draw, &reference, &GroundCost::Euclidean, 2.0)
            })?;
            let scale = sigma / (n as f64).sqrt();
            let boot = base.substream(u64::MAX);
            let exceedance = EXCEEDANCE_RADII
                .iter()
                .map(|&r| {
                    let p_hat = exceedance_probability(&w, |m| m, scale * r);
                    let reps: Vec<f64> = (0..CONCENTRATION_BOOTSTRAP)
                        .map(|b| {
                            let mut g = boot.substream(b as u64).generator();
                            let re: Vec<f64> =
                                (0..trials).map(|_| w[g.random_range(0..trials)]).collect();
                            exceedance_probability(&re, |m| m, scale * r)
                        })
                        .collect();
                    let se = std_dev(&reps);
                    let bound = normal_sf(r);
                    ExceedancePoint {
                        r,
                        p_hat,
                        se,
                        bound,
                        holds: p_hat <= bound + 3.0 * se,
                    }
                })
                .collect();
            Ok(ConcentrationRow {
                n,
                trials,
                median: median(&w),
                sigma,
                exceedance,
            })
        })
        .collect()
}

/// `true` when the medians strictly decrease along the rows.
pub fn medians_decreasing(rows: &[ConcentrationRow]) -> bool {
    rows.windows(2).all(|w| w[1].median < w[0].median)
}
