//! Sampled paths and deterministic path norms.
//!
//! A [`SampledPath`] is read as the piecewise-linear interpolant of its grid
//! samples. For that class of paths and `p >= 1`, refining a partition inside
//! a straight segment never increases `sum |dx|^p`, so every supremum over
//! partitions below is taken over grid partitions and is exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Largest grid handled by the exhaustive partition enumeration.
pub const BRUTEFORCE_MAX_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    times: Vec<f64>,
    /// Row-major `n x d`.
    values: Vec<f64>,
    dim: usize,
}

/// Closed index interval `[start, end]` into a path grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn full(len: usize) -> Self {
        Self {
            start: 0,
            end: len.saturating_sub(1),
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        if self.end < self.start {
            return Err(LabError::arg(format!(
                "empty subinterval [{}, {}]",
                self.start, self.end
            )));
        }
        if self.end >= len {
            return Err(LabError::arg(format!(
                "subinterval end {} outside grid of {} points",
                self.end, len
            )));
        }
        Ok(())
    }
}

/// Grid partition: strictly increasing indices pinned to an interval's ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    indices: Vec<usize>,
}

impl Partition {
    pub fn new(indices: Vec<usize>, sub: Interval) -> Result<Self> {
        if indices.first() != Some(&sub.start) || indices.last() != Some(&sub.end) {
            return Err(LabError::arg("partition must start and end at the interval ends"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::arg("partition indices must be strictly increasing"));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    pub delta: f64,
    pub p: f64,
}

impl SobolevParams {
    pub fn new(delta: f64, p: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(LabError::arg(format!("sobolev delta {delta} not in (0,1]")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(LabError::arg(format!("sobolev p {p} not in (1,inf)")));
        }
        Ok(Self { delta, p })
    }

    /// `delta * p > 1`, the range in which the space embeds into continuous paths.
    pub fn embeds(&self) -> bool {
        self.delta * self.p > 1.0
    }
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        let n = times.len();
        if n == 0 || dim == 0 {
            return Err(LabError::arg("path needs at least one point and one dimension"));
        }
        if values.len() != n * dim {
            return Err(LabError::arg(format!(
                "values length {} != {} points x {} dims",
                values.len(),
                n,
                dim
            )));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(LabError::arg("path entries must be finite"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::arg("times must be strictly increasing"));
        }
        Ok(Self { times, values, dim })
    }

    /// Scalar path from samples.
    pub fn scalar(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(times, values, 1)
    }

    /// Uniform grid of `n` points on `[0, horizon]`.
    pub fn uniform_times(n: usize, horizon: f64) -> Vec<f64> {
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|i| horizon * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Samples `f(t)` on the given grid.
    pub fn from_fn<F>(times: Vec<f64>, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let mut values = Vec::with_capacity(times.len() * dim);
        for &t in &times {
            let v = f(t);
            if v.len() != dim {
                return Err(LabError::arg("sampler returned wrong dimension"));
            }
            values.extend(v);
        }
        Self::new(times, values, dim)
    }

    pub fn zeros(times: Vec<f64>, dim: usize) -> Result<Self> {
        let n = times.len();
        Self::new(times, vec![0.0; n * dim], dim)
    }

    /// Piecewise-linear path through `breakpoints` (time, value...) evaluated
    /// on `times`; constant extrapolation outside the breakpoint range.
    pub fn from_breakpoints(times: Vec<f64>, breakpoints: &[(f64, Vec<f64>)]) -> Result<Self> {
        let first = breakpoints
            .first()
            .ok_or_else(|| LabError::arg("need at least one breakpoint"))?;
        let dim = first.1.len();
        if breakpoints.iter().any(|(_, v)| v.len() != dim) {
            return Err(LabError::arg("breakpoints have mixed dimensions"));
        }
        if breakpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(LabError::arg("breakpoint times must be strictly increasing"));
        }
        Self::from_fn(times, dim, |t| {
            let k = breakpoints.partition_point(|(bt, _)| *bt <= t);
            if k == 0 {
                return breakpoints[0].1.clone();
            }
            if k == breakpoints.len() {
                return breakpoints[k - 1].1.clone();
            }
            let (t0, v0) = &breakpoints[k - 1];
            let (t1, v1) = &breakpoints[k];
            let w = (t - t0) / (t1 - t0);
            v0.iter().zip(v1).map(|(a, b)| a + w * (b - a)).collect()
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.len() - 1] - self.times[0]
    }

    pub fn full(&self) -> Interval {
        Interval::full(self.len())
    }

    /// Increment `x_j - x_i` written into `out`.
    pub fn increment_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let (a, b) = (self.value(i), self.value(j));
        for k in 0..self.dim {
            out[k] = b[k] - a[k];
        }
    }

    /// Euclidean length of `x_j - x_i`.
    pub fn increment_norm(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.value(i), self.value(j));
        a.iter()
            .zip(b)
            .map(|(u, v)| (v - u) * (v - u))
            .sum::<f64>()
            .sqrt()
    }

    pub fn same_grid(&self, other: &SampledPath) -> bool {
        self.dim == other.dim && self.times == other.times
    }

    pub(crate) fn check_same_grid(&self, other: &SampledPath) -> Result<()> {
        if self.dim != other.dim {
            return Err(LabError::GridMismatch(format!(
                "dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        if self.times != other.times {
            return Err(LabError::GridMismatch("time grids differ".into()));
        }
        Ok(())
    }

    fn zip_with(&self, other: &SampledPath, f: impl Fn(f64, f64) -> f64) -> Result<SampledPath> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        SampledPath::new(self.times.clone(), values, self.dim)
    }

    pub fn add(&self, other: &SampledPath) -> Result<SampledPath> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SampledPath) -> Result<SampledPath> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> SampledPath {
        SampledPath {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            dim: self.dim,
        }
    }

    /// Adds a constant vector to every sample.
    pub fn shift(&self, c: &[f64]) -> Result<SampledPath> {
        if c.len() != self.dim {
            return Err(LabError::arg("shift vector has wrong dimension"));
        }
        let values = self
            .values
            .chunks(self.dim)
            .flat_map(|row| row.iter().zip(c).map(|(a, b)| a + b))
            .collect();
        SampledPath::new(self.times.clone(), values, self.dim)
    }

    /// Keeps every `step`-th sample (plus the last), e.g. to coarsen a dyadic grid.
    pub fn subsample(&self, step: usize) -> Result<SampledPath> {
        if step == 0 || !(self.len() - 1).is_multiple_of(step) {
            return Err(LabError::arg(format!(
                "step {step} does not divide {} segments",
                self.len() - 1
            )));
        }
        let idx: Vec<usize> = (0..self.len()).step_by(step).collect();
        let times = idx.iter().map(|&i| self.times[i]).collect();
        let values = idx.iter().flat_map(|&i| self.value(i).to_vec()).collect();
        SampledPath::new(times, values, self.dim)
    }

    /// One coordinate as a scalar path.
    pub fn component(&self, k: usize) -> Result<SampledPath> {
        if k >= self.dim {
            return Err(LabError::arg("component index out of range"));
        }
        let values = (0..self.len()).map(|i| self.value(i)[k]).collect();
        SampledPath::new(self.times.clone(), values, 1)
    }

    /// CSV with header `t,x1,...,xd`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![fmt_f64(self.times[i])];
            row.extend(self.value(i).iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<SampledPath> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("t") || header.len() < 2 {
            return Err(LabError::arg("path CSV header must be `t,x1,...,xd`"));
        }
        let dim = header.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut fields = rec.iter().map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| LabError::arg(format!("bad number {s:?}: {e}")))
            });
            times.push(fields.next().ok_or_else(|| LabError::arg("empty row"))??);
            for _ in 0..dim {
                values.push(fields.next().ok_or_else(|| LabError::arg("short row"))??);
            }
        }
        SampledPath::new(times, values, dim)
    }
}

/// Fixed scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(LabError::arg(format!("variation exponent p = {p} must be >= 1")));
    }
    Ok(())
}

fn pow_p(c: f64, p: f64) -> f64 {
    if p == 1.0 {
        c
    } else if p == 2.0 {
        c * c
    } else {
        c.powf(p)
    }
}

/// Maximises `sum cost(t_k, t_{k+1})^p` over grid partitions of `[start, end]`.
///
/// `V(i) = max_{start <= j < i} V(j) + cost(j, i)^p`, `V(start) = 0`. Returns
/// the optimal sum (not its `p`-th root) and the maximising partition.
pub(crate) fn variation_dp<F>(start: usize, end: usize, p: f64, mut cost: F) -> (f64, Vec<usize>)
where
    F: FnMut(usize, usize) -> f64,
{
    if end <= start {
        return (0.0, vec![start]);
    }
    let m = end - start + 1;
    let mut best = vec![0.0_f64; m];
    let mut back = vec![0usize; m];
    for i in 1..m {
        let mut v = f64::NEG_INFINITY;
        let mut arg = 0;
        for j in 0..i {
            let c = best[j] + pow_p(cost(start + j, start + i), p);
            if c > v {
                v = c;
                arg = j;
            }
        }
        best[i] = v;
        back[i] = arg;
    }
    let mut idx = vec![m - 1];
    while let Some(&k) = idx.last() {
        if k == 0 {
            break;
        }
        idx.push(back[k]);
    }
    idx.reverse();
    (best[m - 1], idx.into_iter().map(|k| k + start).collect())
}

/// `p`-variation of `path` over `sub`, exact over grid partitions.
pub fn p_variation(path: &SampledPath, p: f64, sub: Interval) -> Result<f64> {
    p_variation_with_partition(path, p, sub).map(|(v, _)| v)
}

/// `p`-variation together with a maximising partition.
pub fn p_variation_with_partition(
    path: &SampledPath,
    p: f64,
    sub: Interval,
) -> Result<(f64, Partition)> {
    check_p(p)?;
    sub.check(path.len())?;
    let (sum, idx) = variation_dp(sub.start, sub.end, p, |i, j| path.increment_norm(i, j));
    Ok((sum.powf(1.0 / p), Partition { indices: idx }))
}

/// Exhaustive enumeration over all `2^(m-2)` partitions of an `m`-point interval.
pub fn p_variation_bruteforce(path: &SampledPath, p: f64, sub: Interval) -> Result<f64> {
    check_p(p)?;
    sub.check(path.len())?;
    let m = sub.len();
    if m > BRUTEFORCE_MAX_POINTS {
        return Err(LabError::TooLarge {
            what: "brute-force grid points",
            got: m,
            limit: BRUTEFORCE_MAX_POINTS,
        });
    }
    if m == 1 {
        return Ok(0.0);
    }
    let interior = m - 2;
    let mut best = 0.0_f64;
    for mask in 0u32..(1u32 << interior) {
        let mut prev = sub.start;
        let mut sum = 0.0;
        for k in 0..interior {
            if mask & (1 << k) != 0 {
                let idx = sub.start + 1 + k;
                sum += path.increment_norm(prev, idx).powf(p);
                prev = idx;
            }
        }
        sum += path.increment_norm(prev, sub.end).powf(p);
        best = best.max(sum);
    }
    Ok(best.powf(1.0 / p))
}

/// `max_i |x_i - y_i|` over a common grid.
pub fn sup_distance(x: &SampledPath, y: &SampledPath) -> Result<f64> {
    x.check_same_grid(y)?;
    Ok((0..x.len())
        .map(|i| {
            x.value(i)
                .iter()
                .zip(y.value(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}

/// `d_{p-var}(x, y) = ||x - y||_{p-var}` on the full grid.
pub fn pvar_distance(x: &SampledPath, y: &SampledPath, p: f64) -> Result<f64> {
    let diff = x.sub(y)?;
    p_variation(&diff, p, diff.full())
}

/// Control `omega(s,t) = ||x||_{p-var;[s,t]}^p`.
pub fn control_eval(path: &SampledPath, p: f64, s_idx: usize, t_idx: usize) -> Result<f64> {
    check_p(p)?;
    if s_idx > t_idx {
        return Err(LabError::arg("control needs s <= t"));
    }
    let sub = Interval::new(s_idx, t_idx);
    sub.check(path.len())?;
    Ok(variation_dp(s_idx, t_idx, p, |i, j| path.increment_norm(i, j)).0)
}

// Gauss-Legendre nodes/weights on [-1, 1].
const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];
const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn lerp_into(path: &SampledPath, seg: usize, w: f64, out: &mut [f64]) {
    let (a, b) = (path.value(seg), path.value(seg + 1));
    for k in 0..path.dim() {
        out[k] = a[k] + w * (b[k] - a[k]);
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||h||_{L^p}` of the interpolant (Gauss-Legendre per segment).
pub fn lp_norm(path: &SampledPath, p: f64) -> f64 {
    if path.len() < 2 {
        return 0.0;
    }
    let mut buf = vec![0.0; path.dim()];
    let mut acc = 0.0;
    for seg in 0..path.len() - 1 {
        let dt = path.times[seg + 1] - path.times[seg];
        for (x, w) in GL4_X.iter().zip(GL4_W) {
            lerp_into(path, seg, 0.5 * (x + 1.0), &mut buf);
            acc += 0.5 * dt * w * euclid(&buf).powf(p);
        }
    }
    acc.powf(1.0 / p)
}

/// Sobolev-Slobodeckij seminorm `|h|_{W^{delta,p}}` of the interpolant.
///
/// For `delta = 1` this is `||h'||_{L^p}`, exact for piecewise-linear paths.
/// For `delta < 1` the diagonal cells `[t_k,t_{k+1}]^2` are integrated in
/// closed form (the path is affine there), off-diagonal cells by tensor
/// Gauss-Legendre (8 points per axis for neighbouring cells, 4 otherwise).
pub fn sobolev_seminorm(path: &SampledPath, params: SobolevParams) -> Result<f64> {
    let SobolevParams { delta, p } = SobolevParams::new(params.delta, params.p)?;
    let n = path.len();
    if n < 2 {
        return Err(LabError::arg("sobolev norm needs at least two grid points"));
    }
    let d = path.dim();
    let slope = |k: usize| path.increment_norm(k, k + 1) / (path.times[k + 1] - path.times[k]);
    if delta == 1.0 {
        let s: f64 = (0..n - 1)
            .map(|k| slope(k).powf(p) * (path.times[k + 1] - path.times[k]))
            .sum();
        return Ok(s.powf(1.0 / p));
    }
    let a = p - 1.0 - delta * p;
    let mut acc = 0.0;
    for k in 0..n - 1 {
        let dt = path.times[k + 1] - path.times[k];
        acc += 2.0 * slope(k).powf(p) * dt.powf(a + 2.0) / ((a + 1.0) * (a + 2.0));
    }
    let expo = 1.0 + delta * p;
    let mut bu = vec![0.0; d];
    let mut bv = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut off = 0.0;
    for k in 0..n - 1 {
        let (tk, dk) = (path.times[k], path.times[k + 1] - path.times[k]);
        for l in k + 1..n - 1 {
            let (tl, dl) = (path.times[l], path.times[l + 1] - path.times[l]);
            let (xs, ws): (&[f64], &[f64]) = if l == k + 1 {
                (&GL8_X, &GL8_W)
            } else {
                (&GL4_X, &GL4_W)
            };
            let mut cell = 0.0;
            for (xu, wu) in xs.iter().zip(ws) {
                let su = 0.5 * (xu + 1.0);
                lerp_into(path, k, su, &mut bu);
                let u = tk + su * dk;
                for (xv, wv) in xs.iter().zip(ws) {
                    let sv = 0.5 * (xv + 1.0);
                    lerp_into(path, l, sv, &mut bv);
                    let v = tl + sv * dl;
                    for c in 0..d {
                        diff[c] = bv[c] - bu[c];
                    }
                    cell += wu * wv * euclid(&diff).powf(p) / (v - u).powf(expo);
                }
            }
            off += 0.25 * dk * dl * cell;
        }
    }
    acc += 2.0 * off;
    Ok(acc.powf(1.0 / p))
}

/// `||h||_{W^{delta,p}} = ||h||_{L^p} + |h|_{W^{delta,p}}`.
pub fn sobolev_norm(path: &SampledPath, params: SobolevParams) -> Result<f64> {
    let semi = sobolev_seminorm(path, params)?;
    Ok(lp_norm(path, params.p) + semi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(v: &[f64]) -> SampledPath {
        SampledPath::scalar(SampledPath::uniform_times(v.len(), 1.0), v.to_vec()).unwrap()
    }

    #[test]
    fn monotone_increments_coarsest_partition() {
        let x = scalar(&[0.0, 0.5, 1.0]);
        assert_abs_diff_eq!(p_variation(&x, 2.0, x.full()).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zigzag() {
        let x = scalar(&[0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(p_variation(&x, 1.0, x.full()).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            p_variation(&x, 2.0, x.full()).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            p_variation_bruteforce(&x, 2.0, x.full()).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_segment() {
        let x = scalar(&[0.3, -1.2]);
        assert_abs_diff_eq!(
            p_variation_bruteforce(&x, 2.5, x.full()).unwrap(),
            1.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn partition_is_reported() {
        let x = scalar(&[0.0, 1.0, 0.0, 0.2]);
        let (v, part) = p_variation_with_partition(&x, 2.0, x.full()).unwrap();
        let sum: f64 = part
            .indices()
            .windows(2)
            .map(|w| x.increment_norm(w[0], w[1]).powi(2))
            .sum();
        assert_abs_diff_eq!(sum.sqrt(), v, epsilon = 1e-14);
        assert_eq!(part.indices().first(), Some(&0));
        assert_eq!(part.indices().last(), Some(&3));
    }

    #[test]
    fn argument_errors() {
        let x = scalar(&[0.0, 1.0]);
        assert!(matches!(
            p_variation(&x, 0.5, x.full()),
            Err(LabError::InvalidArgument(_))
        ));
        assert!(p_variation(&x, 2.0, Interval::new(1, 0)).is_err());
        assert!(p_variation(&x, 2.0, Interval::new(0, 5)).is_err());
        let long = scalar(&[0.0; 17]);
        assert!(matches!(
            p_variation_bruteforce(&long, 2.0, long.full()),
            Err(LabError::TooLarge { .. })
        ));
        assert!(SampledPath::scalar(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(SampledPath::scalar(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(Partition::new(vec![0, 2, 1, 3], Interval::new(0, 3)).is_err());
    }

    #[test]
    fn sup_distance_cases() {
        let x = scalar(&[0.0, 1.0, -0.5]);
        assert_eq!(sup_distance(&x, &x).unwrap(), 0.0);
        let y = x.shift(&[-0.7]).unwrap();
        assert_abs_diff_eq!(sup_distance(&x, &y).unwrap(), 0.7, epsilon = 1e-15);
        let z = SampledPath::scalar(vec![0.0, 0.4, 1.0], vec![0.0; 3]).unwrap();
        assert!(matches!(sup_distance(&x, &z), Err(LabError::GridMismatch(_))));
    }

    #[test]
    fn control_cases() {
        let x = scalar(&[0.0, 0.2, 0.7, 1.5]);
        assert_eq!(control_eval(&x, 2.5, 2, 2).unwrap(), 0.0);
        assert_abs_diff_eq!(
            control_eval(&x, 2.5, 0, 3).unwrap(),
            1.5f64.powf(2.5),
            epsilon = 1e-13
        );
        assert!(control_eval(&x, 2.5, 3, 1).is_err());
    }

    #[test]
    fn sobolev_constant_path() {
        let c = SampledPath::from_fn(SampledPath::uniform_times(33, 1.0), 1, |_| vec![-1.7])
            .unwrap();
        for params in [
            SobolevParams::new(1.0, 2.0).unwrap(),
            SobolevParams::new(0.7, 3.0).unwrap(),
        ] {
            assert_abs_diff_eq!(sobolev_norm(&c, params).unwrap(), 1.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn sobolev_identity_delta_one() {
        let h = SampledPath::from_fn(SampledPath::uniform_times(65, 1.0), 1, |t| vec![t]).unwrap();
        let v = sobolev_norm(&h, SobolevParams::new(1.0, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(v, (1.0f64 / 3.0).sqrt() + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sobolev_rejects_bad_delta() {
        assert!(SobolevParams::new(0.0, 2.0).is_err());
        assert!(SobolevParams::new(1.2, 2.0).is_err());
        assert!(SobolevParams::new(0.5, 1.0).is_err());
        let h = scalar(&[0.0]);
        assert!(sobolev_norm(&h, SobolevParams::new(0.5, 3.0).unwrap()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let x = SampledPath::new(vec![0.0, 0.5, 1.0], vec![0.1, 0.2, 1.0 / 3.0, -4.0, 5.5, 6.0], 2)
            .unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2\n"));
        let y = SampledPath::read_csv(&buf[..]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn breakpoints_interpolate() {
        let h = SampledPath::from_breakpoints(
            SampledPath::uniform_times(5, 1.0),
            &[(0.0, vec![0.0]), (0.5, vec![0.5]), (1.0, vec![0.0])],
        )
        .unwrap();
        assert_eq!(h.values(), &[0.0, 0.25, 0.5, 0.25, 0.0]);
    }
}
