//! Level-2 weakly geometric rough paths over a grid.
//!
//! The second level is stored per segment and extended to arbitrary grid
//! pairs through Chen's relation
//! `X_{s,u} = X_{s,t} + X_{t,u} + x_{s,t} (x) x_{t,u}`, using prefix sums so
//! that any `X_{s,t}` is an O(d^2) lookup. Tensors are `d x d` row-major and
//! `X^{ij}_{s,t}` approximates `int_s^t int_s^r dx^i_u dx^j_r`.

use std::io::Write;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::paths::{fmt_f64, p_variation, variation_dp, Interval, SampledPath};

pub const DEFAULT_P: f64 = 2.5;
pub const DEFAULT_Q: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RoughPath2 {
    base: SampledPath,
    /// `X_{k,k+1}` for every segment, `(n-1) * d^2` entries.
    segments: Vec<f64>,
    /// `X_{0,k}` for every grid point, `n * d^2` entries.
    prefix: Vec<f64>,
}

fn check_rough_p(p: f64) -> Result<()> {
    if !(2.0..3.0).contains(&p) {
        return Err(LabError::arg(format!("rough exponent p = {p} not in [2,3)")));
    }
    Ok(())
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl RoughPath2 {
    /// Builds a rough path from its first level and per-segment second level.
    pub fn from_segments(base: SampledPath, segments: Vec<f64>) -> Result<Self> {
        let d = base.dim();
        let n = base.len();
        if n < 2 {
            return Err(LabError::arg("rough path needs at least two grid points"));
        }
        if segments.len() != (n - 1) * d * d {
            return Err(LabError::arg("second level must hold one d x d tensor per segment"));
        }
        if segments.iter().any(|v| !v.is_finite()) {
            return Err(LabError::arg("second level entries must be finite"));
        }
        let dd = d * d;
        let mut prefix = vec![0.0; n * dd];
        let mut from0 = vec![0.0; d];
        let mut inc = vec![0.0; d];
        for k in 0..n - 1 {
            base.increment_into(0, k, &mut from0);
            base.increment_into(k, k + 1, &mut inc);
            for i in 0..d {
                for j in 0..d {
                    prefix[(k + 1) * dd + i * d + j] = prefix[k * dd + i * d + j]
                        + segments[k * dd + i * d + j]
                        + from0[i] * inc[j];
                }
            }
        }
        Ok(Self {
            base,
            segments,
            prefix,
        })
    }

    pub fn base(&self) -> &SampledPath {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn segment(&self, k: usize) -> &[f64] {
        let dd = self.dim() * self.dim();
        &self.segments[k * dd..(k + 1) * dd]
    }

    /// `X_{s,t}` for grid indices `s <= t`.
    pub fn level2_into(&self, s: usize, t: usize, out: &mut [f64]) {
        let d = self.dim();
        let dd = d * d;
        let (a, b) = (&self.prefix[s * dd..(s + 1) * dd], &self.prefix[t * dd..(t + 1) * dd]);
        let x0 = self.base.value(0);
        let xs = self.base.value(s);
        let xt = self.base.value(t);
        for i in 0..d {
            let from0 = xs[i] - x0[i];
            for j in 0..d {
                out[i * d + j] = b[i * d + j] - a[i * d + j] - from0 * (xt[j] - xs[j]);
            }
        }
    }

    pub fn level2(&self, s: usize, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim() * self.dim()];
        self.level2_into(s, t, &mut out);
        out
    }

    /// `X_{s,t}` by left-to-right Chen composition of the segments.
    pub fn level2_sequential(&self, s: usize, t: usize) -> Vec<f64> {
        let d = self.dim();
        let mut acc = vec![0.0; d * d];
        let mut run = vec![0.0; d];
        let mut inc = vec![0.0; d];
        for k in s..t {
            self.base.increment_into(s, k, &mut run);
            self.base.increment_into(k, k + 1, &mut inc);
            let seg = self.segment(k);
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j] += seg[i * d + j] + run[i] * inc[j];
                }
            }
        }
        acc
    }

    /// Max-abs Chen residual at the triple `s <= t <= u`.
    pub fn chen_residual(&self, s: usize, t: usize, u: usize) -> f64 {
        let d = self.dim();
        let (su, st, tu) = (self.level2(s, u), self.level2(s, t), self.level2(t, u));
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        self.base.increment_into(s, t, &mut a);
        self.base.increment_into(t, u, &mut b);
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let r = su[i * d + j] - st[i * d + j] - tu[i * d + j] - a[i] * b[j];
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    /// Max-abs of `Sym(X_{s,t}) - x_{s,t} (x) x_{s,t} / 2`.
    pub fn weak_geometric_residual(&self, s: usize, t: usize) -> f64 {
        let d = self.dim();
        let x2 = self.level2(s, t);
        let mut a = vec![0.0; d];
        self.base.increment_into(s, t, &mut a);
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let sym = 0.5 * (x2[i * d + j] + x2[j * d + i]);
                worst = worst.max((sym - 0.5 * a[i] * a[j]).abs());
            }
        }
        worst
    }

    /// CSV `t,x1..xd,X11..Xdd`; each segment's tensor sits on its right endpoint.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|k| format!("x{k}")));
        for i in 1..=d {
            for j in 1..=d {
                header.push(format!("X{i}{j}"));
            }
        }
        w.write_record(&header)?;
        let zeros = vec![0.0; d * d];
        for k in 0..self.len() {
            let mut row = vec![fmt_f64(self.base.times()[k])];
            row.extend(self.base.value(k).iter().map(|v| fmt_f64(*v)));
            let tensor = if k == 0 { &zeros[..] } else { self.segment(k - 1) };
            row.extend(tensor.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Step-2 signature of the piecewise-linear interpolant: `X_{k,k+1} = dx (x) dx / 2`.
pub fn chen_lift(x: &SampledPath) -> Result<RoughPath2> {
    let n = x.len();
    let d = x.dim();
    if n < 2 {
        return Err(LabError::arg("lift needs at least two grid points"));
    }
    let mut seg = vec![0.0; (n - 1) * d * d];
    let mut inc = vec![0.0; d];
    for k in 0..n - 1 {
        x.increment_into(k, k + 1, &mut inc);
        for i in 0..d {
            for j in 0..d {
                seg[k * d * d + i * d + j] = 0.5 * inc[i] * inc[j];
            }
        }
    }
    RoughPath2::from_segments(x.clone(), seg)
}

/// Translation `T_h`: first level `x + h`, second level corrected by the
/// cross Young integrals, exact for piecewise-linear `x`, `h` on a common grid.
pub fn translate(rp: &RoughPath2, h: &SampledPath) -> Result<RoughPath2> {
    rp.base.check_same_grid(h)?;
    let d = rp.dim();
    let n = rp.len();
    let mut seg = rp.segments.clone();
    let mut dx = vec![0.0; d];
    let mut dh = vec![0.0; d];
    for k in 0..n - 1 {
        rp.base.increment_into(k, k + 1, &mut dx);
        h.increment_into(k, k + 1, &mut dh);
        for i in 0..d {
            for j in 0..d {
                seg[k * d * d + i * d + j] +=
                    0.5 * (dh[i] * dx[j] + dx[i] * dh[j]) + 0.5 * dh[i] * dh[j];
            }
        }
    }
    RoughPath2::from_segments(rp.base.add(h)?, seg)
}

/// The two partition suprema `(sum |x|^p, sum |X|^{p/2})` over `sub`.
fn homog_sums(rp: &RoughPath2, p: f64, sub: Interval) -> (f64, f64) {
    let d = rp.dim();
    let first = variation_dp(sub.start, sub.end, p, |i, j| rp.base.increment_norm(i, j)).0;
    let mut buf = vec![0.0; d * d];
    let second = variation_dp(sub.start, sub.end, p / 2.0, |i, j| {
        rp.level2_into(i, j, &mut buf);
        frobenius(&buf)
    })
    .0;
    (first, second)
}

/// Homogeneous `p`-variation norm `sup(sum |x|^p)^{1/p} + sup(sum |X|^{p/2})^{2/p}`.
pub fn homog_pvar_norm(rp: &RoughPath2, p: f64, sub: Interval) -> Result<f64> {
    check_rough_p(p)?;
    sub.check(rp.len())?;
    let (a, b) = homog_sums(rp, p, sub);
    Ok(a.powf(1.0 / p) + b.powf(2.0 / p))
}

/// Dilation-homogeneous gauge `sup(sum |x|^p)^{1/p} + sup(sum |X|^{p/2})^{1/p}`:
/// scaling the path by `lambda` scales the gauge by `lambda`.
pub fn homogeneous_gauge(rp: &RoughPath2, p: f64, sub: Interval) -> Result<f64> {
    check_rough_p(p)?;
    sub.check(rp.len())?;
    let (a, b) = homog_sums(rp, p, sub);
    Ok(a.powf(1.0 / p) + b.powf(1.0 / p))
}

/// Inhomogeneous `p`-variation metric between two rough paths on a common grid.
pub fn rho_pvar(rp1: &RoughPath2, rp2: &RoughPath2, p: f64, sub: Interval) -> Result<f64> {
    check_rough_p(p)?;
    rp1.base.check_same_grid(&rp2.base)?;
    sub.check(rp1.len())?;
    let d = rp1.dim();
    let first = variation_dp(sub.start, sub.end, p, |i, j| {
        let (a0, a1) = (rp1.base.value(i), rp1.base.value(j));
        let (b0, b1) = (rp2.base.value(i), rp2.base.value(j));
        (0..d)
            .map(|k| {
                let e = (a1[k] - a0[k]) - (b1[k] - b0[k]);
                e * e
            })
            .sum::<f64>()
            .sqrt()
    })
    .0;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d * d];
    let second = variation_dp(sub.start, sub.end, p / 2.0, |i, j| {
        rp1.level2_into(i, j, &mut a);
        rp2.level2_into(i, j, &mut b);
        a.iter()
            .zip(&b)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt()
    })
    .0;
    Ok(first.powf(1.0 / p) + second.powf(2.0 / p))
}

/// Control `omega(s,t) = ||x||_{p-var;[s,t]}^p` of the homogeneous norm.
pub fn rough_control(rp: &RoughPath2, p: f64, s: usize, t: usize) -> Result<f64> {
    Ok(homog_pvar_norm(rp, p, Interval::new(s, t))?.powf(p))
}

/// Greedy accumulation count for an arbitrary control on grid indices.
///
/// `tau_0 = s`, `tau_{i+1}` is the first grid point `u > tau_i` with
/// `omega(tau_i, u) >= alpha` (or `t` if there is none), and the count is
/// `max { i : tau_i < t }`.
pub fn n_alpha_control<F>(s: usize, t: usize, alpha: f64, omega: F) -> Result<usize>
where
    F: Fn(usize, usize) -> f64,
{
    check_alpha(alpha)?;
    Ok(greedy(s, t, |tau| (tau + 1..=t).find(|&u| omega(tau, u) >= alpha)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(LabError::arg(format!("alpha = {alpha} must be positive")));
    }
    Ok(())
}

fn greedy(s: usize, t: usize, mut next: impl FnMut(usize) -> Option<usize>) -> usize {
    let mut count = 0;
    let mut tau = s;
    while tau < t {
        match next(tau) {
            Some(u) if u < t => {
                count += 1;
                tau = u;
            }
            _ => break,
        }
    }
    count
}

/// `N_alpha(x; [s,t])` for the homogeneous rough control `omega = ||x||^p`.
///
/// From each `tau_i` the two partition suprema are grown one grid point at a
/// time, so a block of length `L` costs `O(L^2)`.
pub fn n_alpha(rp: &RoughPath2, alpha: f64, p: f64, sub: Interval) -> Result<usize> {
    check_rough_p(p)?;
    check_alpha(alpha)?;
    sub.check(rp.len())?;
    let d = rp.dim();
    let mut buf = vec![0.0; d * d];
    let mut first: Vec<f64> = Vec::new();
    let mut second: Vec<f64> = Vec::new();
    Ok(greedy(sub.start, sub.end, |tau| {
        first.clear();
        second.clear();
        first.push(0.0);
        second.push(0.0);
        for u in tau + 1..=sub.end {
            let mut v1 = f64::NEG_INFINITY;
            let mut v2 = f64::NEG_INFINITY;
            for j in tau..u {
                let k = j - tau;
                v1 = v1.max(first[k] + rp.base.increment_norm(j, u).powf(p));
                rp.level2_into(j, u, &mut buf);
                v2 = v2.max(second[k] + frobenius(&buf).powf(p / 2.0));
            }
            first.push(v1);
            second.push(v2);
            let omega = (v1.powf(1.0 / p) + v2.powf(2.0 / p)).powf(p);
            if omega >= alpha {
                return Some(u);
            }
        }
        None
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftBoundReport {
    pub alpha: f64,
    /// `N_alpha(T_h x)`.
    pub lhs: f64,
    /// `(||x||^p v (2 N_1(x) + 1)) + ||h||_{q-var}^q`.
    pub rhs: f64,
    pub n1: usize,
    pub holds: bool,
}

/// Both sides of the growth bound for the accumulation count of a translated rough path.
pub fn n_alpha_shift_bound_check(
    rp: &RoughPath2,
    h: &SampledPath,
    p: f64,
    q: f64,
    alpha: f64,
) -> Result<ShiftBoundReport> {
    check_rough_p(p)?;
    if !(q >= 1.0 && q <= p && 1.0 / p + 1.0 / q > 1.0) {
        return Err(LabError::arg(format!(
            "need 1 <= q <= p and 1/p + 1/q > 1, got p = {p}, q = {q}"
        )));
    }
    let full = Interval::full(rp.len());
    let shifted = translate(rp, h)?;
    let lhs = n_alpha(&shifted, alpha, p, full)?;
    let n1 = n_alpha(rp, 1.0, p, full)?;
    let norm_p = homog_pvar_norm(rp, p, full)?.powf(p);
    let hq = p_variation(h, q, full)?.powf(q);
    let rhs = norm_p.max(2.0 * n1 as f64 + 1.0) + hq;
    Ok(ShiftBoundReport {
        alpha,
        lhs: lhs as f64,
        rhs,
        n1,
        holds: lhs as f64 <= rhs,
    })
}

/// `||T_h x||^p / (||x||^p + ||h||_{q-var}^p)` on the full interval: the
/// empirical constant in `omega_{T_h x} <= C (omega_x + omega_h)`.
pub fn translation_constant(rp: &RoughPath2, h: &SampledPath, p: f64, q: f64) -> Result<f64> {
    let full = Interval::full(rp.len());
    let shifted = translate(rp, h)?;
    let num = homog_pvar_norm(&shifted, p, full)?.powf(p);
    let den = homog_pvar_norm(rp, p, full)?.powf(p) + p_variation(h, q, full)?.powf(p);
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// `rho(T_h x, x) / ((1 v ||x||) (||h||_q + ||h||_q^2))`, the measured constant
/// of the translation estimate; `0` when `h` has zero variation.
pub fn translation_ratio(rp: &RoughPath2, h: &SampledPath, p: f64, q: f64) -> Result<f64> {
    let full = Interval::full(rp.len());
    let shifted = translate(rp, h)?;
    let rho = rho_pvar(&shifted, rp, p, full)?;
    let hq = p_variation(h, q, full)?;
    let den = homog_pvar_norm(rp, p, full)?.max(1.0) * (hq + hq * hq);
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(rho / den)
}
