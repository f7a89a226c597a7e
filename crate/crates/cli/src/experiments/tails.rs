use nalgebra::DMatrix;
use serde_json::json;
use tci_lab::concentration::{
    empirical_concentration_experiment, fernique_check, medians_decreasing, n1_tail_experiment,
    TailFit, TailFunctional, DEFAULT_QUANTILE_LO, MIN_TAIL_SAMPLES,
};
use tci_lab::gaussian::{sample_path, FiniteDimGaussian, PathGaussian, ProcessKind};
use tci_lab::paths::SampledPath;
use tci_lab::roughlift::{chen_lift, n_alpha_shift_bound_check, translation_constant};
use tci_lab::{par, SeededRng};

use super::common::brownian;
use crate::config::Params;
use crate::error::RunError;
use crate::report::{check_row, int, num, Outcome, Table, CHECK_HEADER, TAIL_HEADER};

const VERDICTS: [&str; 4] = ["gaussian", "bounded", "not_gaussian", "any"];

/// Streams above this index are reserved for calibration draws.
const CALIBRATION_STREAM: u64 = 1 << 40;

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn tail_row(experiment: &str, n: usize, trials: usize, median: f64, fit: &TailFit) -> Vec<String> {
    vec![
        experiment.to_string(),
        int(n),
        int(trials),
        num(median),
        num(fit.sigma2),
        num(fit.r2),
        fit.verdict.to_string(),
    ]
}

fn push_tail_points(table: &mut Table, label: f64, fit: &TailFit) {
    for pt in &fit.points {
        table.push(vec![num(label), num(pt.r), num(pt.log_survival), num(pt.fit)]);
    }
}

fn verdict_matches(expect: &str, fit: &TailFit) -> bool {
    expect == "any" || fit.verdict.to_string() == expect
}

fn fit_detail(fit: &TailFit, expect: &str) -> serde_json::Value {
    json!({
        "expected": expect,
        "verdict": fit.verdict.to_string(),
        "sigma2": fit.sigma2,
        "r1": fit.r1,
        "r2": fit.r2,
        "n_tail": fit.n_tail,
        "curvature": fit.curvature,
        "curvature_se": fit.curvature_se,
    })
}

pub fn nalpha_tails(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    match params.choice("check", "tails", &["tails", "shift_bound"])?.as_str() {
        "tails" => n1_tails(params, rng),
        _ => shift_bound(params, rng),
    }
}

fn n1_tails(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let n = params.usize_in("n", 512, 2, 2048)?;
    let dim = params.usize_in("dim", 2, 1, 8)?;
    let p = params.f64("p", 2.5)?;
    if !(p > 2.0 && p < 3.0) {
        return Err(RunError::Config(format!("parameter `p`: {p} not in (2, 3)")));
    }
    let trials = params.usize_in("trials", 10_000, MIN_TAIL_SAMPLES, 10_000_000)?;
    let horizons = params.f64_list("horizons", &[1.0])?;
    if horizons.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(RunError::Config("parameter `horizons`: entries must be positive".into()));
    }
    let quantile_lo = params.f64_in("quantile_lo", DEFAULT_QUANTILE_LO, 0.5, 0.99)?;
    let expect = params.choice("expect_verdict", "gaussian", &VERDICTS)?;
    params.finish()?;

    let mut report = Table::new(&TAIL_HEADER);
    let mut tail = Table::new(&["horizon", "r", "log_survival", "fit"]);
    let mut means = Vec::new();
    let mut verdicts_ok = true;
    let mut fits = Vec::new();
    // Horizons share streams so that the counts are paired across horizons.
    for &horizon in &horizons {
        let spec = PathGaussian::new(ProcessKind::BrownianMotion, horizon, n, dim)?;
        let r = n1_tail_experiment(&spec, p, trials, quantile_lo, rng)?;
        let median = median_of(r.counts.iter().map(|&c| c as f64).collect());
        report.push(tail_row("nalpha-tails", n, trials, median, &r.fit));
        push_tail_points(&mut tail, horizon, &r.fit);
        verdicts_ok &= verdict_matches(&expect, &r.fit);
        means.push(r.mean_count);
        fits.push(json!({"horizon": horizon, "mean_count": r.mean_count, "max_count": r.max_count, "fit": fit_detail(&r.fit, &expect)}));
    }
    let mut out = Outcome::new(report);
    out.attach("tail", tail);
    out.assert("tail_verdict", verdicts_ok, &fits);
    if horizons.len() > 1 {
        let ordered = horizons.windows(2).all(|w| w[1] > w[0]);
        let increasing = means.windows(2).all(|w| w[1] >= w[0]);
        out.assert("mean_count_nondecreasing_in_horizon", !ordered || increasing, json!({"horizons": horizons, "means": means}));
    }
    Ok(out)
}

/// `h_s(t) = s (sin(pi t / T), (t / T)^2)` restricted to the first `dim` coordinates.
fn shift_profile(times: &[f64], dim: usize, scale: f64) -> Result<SampledPath, RunError> {
    let horizon = times[times.len() - 1];
    Ok(SampledPath::from_fn(times.to_vec(), dim, |t| {
        let u = t / horizon;
        let base = [(std::f64::consts::PI * u).sin(), u * u];
        (0..dim).map(|c| scale * base[c % 2]).collect()
    })?)
}

fn shift_bound(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let trials = params.usize_in("trials", 10_000, 1, 10_000_000)?;
    let n = params.usize_in("n", 129, 2, 2048)?;
    let dim = params.usize_in("dim", 2, 1, 8)?;
    let p = params.f64("p", 2.5)?;
    let q = params.f64("q", 1.0)?;
    if !(2.0..3.0).contains(&p) || !(q >= 1.0 && q <= p && 1.0 / p + 1.0 / q > 1.0) {
        return Err(RunError::Config(format!("need 2 <= p < 3 and 1 <= q <= p with 1/p + 1/q > 1, got p = {p}, q = {q}")));
    }
    let scales = params.f64_list("h_scales", &[0.0, 1.0, 2.0, 3.0, 4.0])?;
    if scales.iter().any(|s| !s.is_finite()) {
        return Err(RunError::Config("parameter `h_scales`: entries must be finite".into()));
    }
    let calibration = params.usize_in("calibration_trials", 200, 1, 100_000)?;
    let alpha_given = params.value::<Option<f64>>("alpha", None)?;
    if let Some(a) = alpha_given {
        if !(a > 0.0 && a.is_finite()) {
            return Err(RunError::Config(format!("parameter `alpha`: {a} must be positive")));
        }
    }
    params.finish()?;

    let spec = brownian(n, dim, 1.0)?;
    let times = spec.times();
    let shifts = scales
        .iter()
        .map(|&s| shift_profile(&times, dim, s))
        .collect::<Result<Vec<_>, _>>()?;
    let nonzero: Vec<&SampledPath> = shifts
        .iter()
        .zip(&scales)
        .filter(|(_, s)| **s != 0.0)
        .map(|(h, _)| h)
        .collect();
    let alpha = match alpha_given {
        Some(a) => a,
        None if nonzero.is_empty() => 1.0,
        None => {
            let cal = rng.substream(CALIBRATION_STREAM);
            par::try_map_indexed(calibration, |i| {
                let x = sample_path(&spec, cal.substream(i as u64))?;
                translation_constant(&chen_lift(&x)?, nonzero[i % nonzero.len()], p, q)
            })?
            .into_iter()
            .fold(0.0_f64, f64::max)
            .max(1.0)
        }
    };

    let reports = par::try_map_indexed(trials, |i| {
        let x = sample_path(&spec, rng.substream(i as u64))?;
        n_alpha_shift_bound_check(&chen_lift(&x)?, &shifts[i % shifts.len()], p, q, alpha)
    })?;
    let mut table = Table::new(&CHECK_HEADER);
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for (i, r) in reports.iter().enumerate() {
        violations += usize::from(!r.holds);
        worst = worst.min(r.rhs - r.lhs);
        let param = format!("trial={i};h_scale={};n1={};alpha={}", scales[i % scales.len()], r.n1, num(alpha));
        table.push(check_row("nalpha-tails", param, r.lhs, r.rhs, r.holds));
    }
    let mut out = Outcome::new(table);
    out.assert(
        "shift_bound",
        violations == 0,
        json!({"violations": violations, "trials": trials, "alpha": alpha, "alpha_calibrated": alpha_given.is_none(), "min_margin": worst}),
    );
    out.measure("alpha", alpha);
    Ok(out)
}

pub fn empirical_concentration(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let dim = params.usize_in("dim", 2, 1, tci_lab::concentration::MAX_CONCENTRATION_DIM)?;
    let n_grid = params.usize_list("n_grid", &[16, 64, 256])?;
    if let Some(n) = n_grid.iter().find(|&&n| n == 0 || n > tci_lab::concentration::MAX_CONCENTRATION_N) {
        return Err(RunError::Config(format!("parameter `n_grid`: {n} not in [1, 512]")));
    }
    let trials = params.usize_in("trials", 200, 2, 1_000_000)?;
    let variance = params.f64_in("variance", 1.0, 0.0, 1e6)?;
    params.finish()?;

    let spec = FiniteDimGaussian::new(vec![0.0; dim], DMatrix::identity(dim, dim) * variance)?;
    let rows = empirical_concentration_experiment(&spec, &n_grid, trials, rng)?;
    let mut report = Table::new(&TAIL_HEADER);
    let mut exceed = Table::new(&["n", "r", "p_hat", "se", "bound", "holds"]);
    for row in &rows {
        let verdict = if row.holds() { "concentrated" } else { "violated" };
        report.push(vec![
            "empirical-concentration".into(),
            int(row.n),
            int(row.trials),
            num(row.median),
            num(f64::NAN),
            num(f64::NAN),
            verdict.into(),
        ]);
        for e in &row.exceedance {
            exceed.push(vec![int(row.n), num(e.r), num(e.p_hat), num(e.se), num(e.bound), e.holds.to_string()]);
        }
    }
    let medians: Vec<f64> = rows.iter().map(|r| r.median).collect();
    let mut out = Outcome::new(report);
    out.attach("exceedance", exceed);
    out.assert("medians_decreasing", medians_decreasing(&rows), json!({"n_grid": n_grid, "medians": medians}));
    let failing: Vec<usize> = rows.iter().filter(|r| !r.holds()).map(|r| r.n).collect();
    out.assert("exceedance_below_gaussian_bound", failing.is_empty(), json!({"failing_n": failing}));
    Ok(out)
}

fn functional(params: &Params) -> Result<TailFunctional, RunError> {
    let kind = params.choice("functional", "sup", &["sup", "pvar", "homog_lift"])?;
    if kind == "sup" {
        return Ok(TailFunctional::SupNorm);
    }
    let p = params.f64("functional_p", 2.5)?;
    match kind.as_str() {
        "pvar" if p >= 1.0 && p.is_finite() => Ok(TailFunctional::PVarNorm { p }),
        "homog_lift" if (2.0..3.0).contains(&p) => Ok(TailFunctional::HomogLiftNorm { p }),
        _ => Err(RunError::Config(format!("parameter `functional_p`: {p} out of range for `{kind}`"))),
    }
}

pub fn fernique(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let process: ProcessKind = params.value("process", ProcessKind::BrownianMotion)?;
    let n = params.usize_in("n", 512, 2, 2048)?;
    let dim = params.usize_in("dim", 1, 1, 8)?;
    let horizon = params.f64_in("horizon", 1.0, f64::MIN_POSITIVE, 1e6)?;
    let functional = functional(params)?;
    let trials = params.usize_in("trials", 10_000, MIN_TAIL_SAMPLES, 10_000_000)?;
    let quantile_lo = params.f64_in("quantile_lo", DEFAULT_QUANTILE_LO, 0.5, 0.99)?;
    let expect = params.choice("expect_verdict", "gaussian", &VERDICTS)?;
    let reflection_tol = params.f64_in("reflection_tol", 0.15, 0.0, 10.0)?;
    let log_gap_tol = params.f64_in("log_gap_tol", 0.2, 0.0, 10.0)?;
    params.finish()?;

    let spec = PathGaussian::new(process, horizon, n, dim)?;
    let r = fernique_check(&spec, functional, trials, quantile_lo, rng)?;
    let mut report = Table::new(&TAIL_HEADER);
    report.push(tail_row("fernique", n, trials, r.mean, &r.fit));
    let mut tail = Table::new(&["horizon", "r", "log_survival", "fit"]);
    push_tail_points(&mut tail, horizon, &r.fit);
    let mut out = Outcome::new(report);
    out.attach("tail", tail);
    out.assert("tail_verdict", verdict_matches(&expect, &r.fit), fit_detail(&r.fit, &expect));
    out.measure("mean", r.mean);
    if let Some(c) = r.reflection {
        let mut t = Table::new(&["sigma2_fit", "sigma2_reflection", "relative_error", "log_gap_q90", "log_gap_q99"]);
        t.push(vec![num(c.sigma2_fit), num(c.sigma2_reflection), num(c.relative_error()), num(c.log_gap_q90), num(c.log_gap_q99)]);
        out.attach("reflection", t);
        out.assert("reflection_scale", c.relative_error() <= reflection_tol, json!({"comparison": c, "tol": reflection_tol}));
        out.assert(
            "reflection_pointwise",
            c.log_gap_q90 <= log_gap_tol && c.log_gap_q99 <= log_gap_tol,
            json!({"log_gap_q90": c.log_gap_q90, "log_gap_q99": c.log_gap_q99, "tol": log_gap_tol}),
        );
    }
    Ok(out)
}
