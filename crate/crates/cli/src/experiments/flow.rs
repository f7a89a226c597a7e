use nalgebra::{DMatrix, DVector};
use serde_json::json;
use tci_lab::flows::{
    additive_lipschitz_ratio, additive_sobolev_ratio, rde_shift_response, rde_solve, VectorFieldSpec,
};
use tci_lab::gaussian::sample_path;
use tci_lab::paths::{SampledPath, SobolevParams};
use tci_lab::roughlift::chen_lift;
use tci_lab::{par, SeededRng};

use super::common::{brownian, normals, smooth_shift};
use crate::config::Params;
use crate::error::RunError;
use crate::report::{check_row, flag, int, num, Outcome, Table, CHECK_HEADER};

/// Random `m x m` matrix with spectral norm exactly `lambda`.
fn scaled_matrix(g: &mut impl rand::Rng, m: usize, lambda: f64) -> DMatrix<f64> {
    let a = DMatrix::from_vec(m, m, normals(g, m * m));
    let s = a.clone().singular_values().max();
    if s == 0.0 {
        a
    } else {
        a * (lambda / s)
    }
}

fn drift_preset(kind: &str, a: DMatrix<f64>) -> Result<VectorFieldSpec, RunError> {
    let m = a.nrows();
    Ok(match kind {
        "linear" => VectorFieldSpec::linear(a, vec![])?,
        _ => VectorFieldSpec::tanh_linear(a, vec![DMatrix::zeros(m, m)], vec![vec![0.0; m]])?,
    })
}

pub fn additive_lipschitz(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let drift = params.choice("drift", "linear", &["linear", "tanh"])?;
    let q = params.f64_in("q", 1.0, 1.0, 1e3)?;
    let lambda = params.f64_in("lambda", 1.0, 0.0, 50.0)?;
    let trials = params.usize_in("trials", 10_000, 1, 10_000_000)?;
    let n = params.usize_in("n", 512, 2, 8192)?;
    let dim = params.usize_in("dim", 2, 1, 16)?;
    let h_scale = params.f64_in("h_scale", 1.0, 0.0, 1e3)?;
    params.finish()?;

    let spec = brownian(n, dim, 1.0)?;
    let times = spec.times();
    let reports = par::try_map_indexed(trials, |i| {
        let stream = rng.substream(i as u64);
        let mut g = stream.substream(0).generator();
        let b = drift_preset(&drift, scaled_matrix(&mut g, dim, lambda))?;
        let xi = normals(&mut g, dim);
        let x = sample_path(&spec, stream.substream(1))?;
        let h = smooth_shift(stream.substream(2), &times, dim, h_scale)?;
        Ok::<_, RunError>(additive_lipschitz_ratio(&x, &h, &b, &xi, q)?)
    })?;
    let mut table = Table::new(&["trial", "num", "den", "bound", "holds"]);
    let mut violations = 0usize;
    let mut worst = 0.0_f64;
    for (i, r) in reports.iter().enumerate() {
        violations += usize::from(!r.holds);
        if r.den > 0.0 {
            worst = worst.max(r.num / (r.bound * r.den));
        }
        table.push(vec![int(i), num(r.num), num(r.den), num(r.bound), flag(r.holds)]);
    }
    let mut out = Outcome::new(table);
    out.assert("lipschitz_bound", violations == 0, json!({"violations": violations, "trials": trials, "max_num_over_bound_den": worst}));
    Ok(out)
}

pub fn sobolev_ratio(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let delta = params.f64_in("delta", 0.6, f64::MIN_POSITIVE, 1.0 - f64::EPSILON)?;
    let p = params.f64_in("p", 4.0, 1.0, 1e3)?;
    let sp = SobolevParams::new(delta, p)?;
    let drift = params.choice("drift", "linear", &["linear", "tanh"])?;
    let lambda = params.f64_in("lambda", 1.0, 0.0, 50.0)?;
    let n = params.usize_in("n", 256, 2, 4096)?;
    let dim = params.usize_in("dim", 1, 1, 16)?;
    let trials = params.usize_in("trials", 200, 1, 1_000_000)?;
    let scales = params.f64_list("scales", &[0.1, 1.0, 10.0])?;
    if scales.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(RunError::Config("parameter `scales`: entries must be positive".into()));
    }
    let tol = params.f64_in("scale_tol", 0.2, 0.0, 10.0)?;
    params.finish()?;

    let spec = brownian(n, dim, 1.0)?;
    let times = spec.times();
    let rows = par::try_map_indexed(trials, |i| {
        let stream = rng.substream(i as u64);
        let mut g = stream.substream(0).generator();
        let b = drift_preset(&drift, scaled_matrix(&mut g, dim, lambda))?;
        let xi = normals(&mut g, dim);
        let x = sample_path(&spec, stream.substream(1))?;
        let h = smooth_shift(stream.substream(2), &times, dim, 1.0)?;
        scales
            .iter()
            .map(|&c| Ok(additive_sobolev_ratio(&x, &h.scale(c), &b, &xi, sp)?))
            .collect::<Result<Vec<_>, RunError>>()
    })?;
    let mut table = Table::new(&["trial", "scale", "num", "den", "ratio"]);
    let mut max_per_scale = vec![0.0_f64; scales.len()];
    for (i, row) in rows.iter().enumerate() {
        for (k, r) in row.iter().enumerate() {
            max_per_scale[k] = max_per_scale[k].max(r.ratio);
            table.push(vec![int(i), num(scales[k]), num(r.num), num(r.den), num(r.ratio)]);
        }
    }
    let hi = max_per_scale.iter().copied().fold(0.0, f64::max);
    let lo = max_per_scale.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = Outcome::new(table);
    out.assert("max_ratio_finite", hi.is_finite(), json!({"max_ratio": hi}));
    out.assert(
        "max_ratio_scale_stable",
        lo > 0.0 && hi <= lo * (1.0 + tol),
        json!({"scales": scales, "max_ratio": max_per_scale, "tol": tol}),
    );
    out.measure("max_ratio", hi);
    Ok(out)
}

/// Smooth scalar driver `x(t) = sin(3t) + t/2`.
fn smooth_scalar(t: f64) -> f64 {
    (3.0 * t).sin() + 0.5 * t
}

/// Smooth planar driver.
fn smooth_planar(t: f64) -> Vec<f64> {
    vec![(2.0 * t).sin() + 0.3 * t, 1.0 - (1.5 * t).cos()]
}

fn tanh_fields() -> Result<VectorFieldSpec, RunError> {
    let drift = DMatrix::zeros(2, 2);
    let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.5]);
    let a2 = DMatrix::from_row_slice(2, 2, &[0.8, -0.3, 0.2, 0.0]);
    Ok(VectorFieldSpec::tanh_linear(drift, vec![a1, a2], vec![vec![0.2, 0.0], vec![0.0, -0.1]])?)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn terminal(y: &SampledPath) -> Vec<f64> {
    y.value(y.len() - 1).to_vec()
}

pub fn rde_convergence(params: &Params, _rng: SeededRng) -> Result<Outcome, RunError> {
    let n = params.usize_in("n", 4096, 2, 1 << 20)?;
    let tol = params.f64_in("tol", 1e-4, 0.0, 1.0)?;
    let a = params.f64_in("a", 0.7, -1e3, 1e3)?;
    let base_level = params.usize_in("base_level", 6, 1, 16)?;
    let refinements = params.usize_in("refinements", 4, 2, 8)?;
    params.finish()?;

    let horizon = 1.0;
    let times = SampledPath::uniform_times(n, horizon);
    let mut table = Table::new(&CHECK_HEADER);
    let mut out_props = Vec::new();

    // dy = a y dx, y_T = xi exp(a (x_T - x_0)).
    let xi = 1.5;
    let x = SampledPath::from_fn(times.clone(), 1, |t| vec![smooth_scalar(t) - smooth_scalar(0.0)])?;
    let f = VectorFieldSpec::linear(DMatrix::zeros(1, 1), vec![DMatrix::from_element(1, 1, a)])?;
    let y = rde_solve(&chen_lift(&x)?, &f, &[xi])?;
    let exact = xi * (a * (smooth_scalar(horizon) - smooth_scalar(0.0))).exp();
    let err = (terminal(&y)[0] - exact).abs();
    table.push(check_row("rde-convergence", format!("scalar_exponential;n={n}"), err, tol, err <= tol));
    out_props.push(("scalar_exponential", err <= tol, json!({"error": err, "tol": tol})));

    // Commuting fields: a rotation generator and a multiple of the identity.
    let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.9, -0.9, 0.0]);
    let a2 = DMatrix::identity(2, 2) * 0.4;
    let xi2 = [1.0, -0.5];
    let x2 = SampledPath::from_fn(times.clone(), 2, smooth_planar)?;
    let f2 = VectorFieldSpec::linear(DMatrix::zeros(2, 2), vec![a1.clone(), a2.clone()])?;
    let y2 = rde_solve(&chen_lift(&x2)?, &f2, &xi2)?;
    let end = smooth_planar(horizon);
    let expm = (a1 * end[0] + a2 * end[1]).exp();
    let exact2: Vec<f64> = (expm * DVector::from_column_slice(&xi2)).iter().copied().collect();
    let err2 = max_abs_diff(&terminal(&y2), &exact2);
    table.push(check_row("rde-convergence", format!("commuting_linear;n={n}"), err2, tol, err2 <= tol));
    out_props.push(("commuting_linear", err2 <= tol, json!({"error": err2, "tol": tol})));

    // Self-convergence against the double-resolution solution.
    let f3 = tanh_fields()?;
    let solve_at = |level: usize| -> Result<Vec<f64>, RunError> {
        let t = SampledPath::uniform_times((1 << level) + 1, horizon);
        let x = SampledPath::from_fn(t, 2, smooth_planar)?;
        Ok(terminal(&rde_solve(&chen_lift(&x)?, &f3, &xi2)?))
    };
    let mut errors = Vec::with_capacity(refinements);
    for k in 0..refinements {
        let level = base_level + k;
        let e = max_abs_diff(&solve_at(level)?, &solve_at(level + 1)?);
        errors.push(e);
    }
    for (k, w) in errors.windows(2).enumerate() {
        let level = base_level + k + 1;
        table.push(check_row(
            "rde-convergence",
            format!("self_convergence;points={}", (1usize << level) + 1),
            w[1],
            w[0],
            w[1] < w[0],
        ));
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    out_props.push(("self_convergence_monotone", monotone, json!({"errors": errors})));

    let mut out = Outcome::new(table);
    for (name, holds, detail) in out_props {
        out.assert(name, holds, detail);
    }
    Ok(out)
}

/// Average ranks, ties sharing the mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `NaN` when either sample is constant.
pub(crate) fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn rde_shift(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let trials = params.usize_in("trials", 1000, 3, 1_000_000)?;
    let n = params.usize_in("n", 257, 2, 4096)?;
    let p = params.f64("p", 2.5)?;
    let q = params.f64("q", 1.0)?;
    if !(2.0..3.0).contains(&p) || !(q >= 1.0 && q <= p) {
        return Err(RunError::Config(format!("need 2 <= p < 3 and 1 <= q <= p, got p = {p}, q = {q}")));
    }
    let h_cm = params.f64_in("h_cm_norm", 1.0, 0.0, 1e3)?;
    let breakpoints = params.breakpoints("h")?;
    params.finish()?;

    let spec = brownian(n, 2, 1.0)?;
    let times = spec.times();
    let h = match breakpoints {
        Some(b) => SampledPath::from_breakpoints(times.clone(), &b)?,
        // Tent in both coordinates, scaled to the requested Cameron-Martin norm.
        None => {
            let a = h_cm / 2f64.sqrt();
            SampledPath::from_fn(times.clone(), 2, |t| vec![a * (0.5 - (t - 0.5).abs()); 2])?
        }
    };
    if h.dim() != 2 {
        return Err(RunError::Config("parameter `h`: the driver is two-dimensional".into()));
    }
    let f = tanh_fields()?;
    let xi = [0.3, -0.2];
    let reports = par::try_map_indexed(trials, |i| {
        let x = sample_path(&spec, rng.substream(i as u64))?;
        Ok::<_, RunError>(rde_shift_response(&chen_lift(&x)?, &h, &f, &xi, p, q)?)
    })?;
    let mut table = Table::new(&["trial", "d", "hq", "n1", "ratio"]);
    for (i, r) in reports.iter().enumerate() {
        table.push(vec![int(i), num(r.d), num(r.hq), int(r.n1), num(r.ratio)]);
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    let n1: Vec<f64> = reports.iter().map(|r| r.n1 as f64).collect();
    let rho = spearman(&n1, &ratios);
    // Large-sample standard error of the rank correlation under independence.
    let z = rho * ((trials - 1) as f64).sqrt();
    let logs: Vec<f64> = ratios.iter().filter(|r| **r > 0.0).map(|r| r.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / logs.len().max(1) as f64;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let mut out = Outcome::new(table);
    out.assert("ratio_finite", ratios.iter().all(|r| r.is_finite()), json!({"max_ratio": max_ratio}));
    out.measure("spearman_n1_ratio", rho);
    out.measure("spearman_z", z);
    out.measure("mean_log_ratio", mean_log);
    out.measure("max_ratio", max_ratio);
    Ok(out)
}
