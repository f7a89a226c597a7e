use nalgebra::DMatrix;
use rand::Rng;
use serde_json::json;
use tci_lab::assignment::{solve, solve_bruteforce, CostMatrix};
use tci_lab::flows::VectorFieldSpec;
use tci_lab::gaussian::{
    cm_distance, cm_norm, projection_metric, sample_path, FiniteDimGaussian, GaussianSampler,
    GaussianSpec,
};
use tci_lab::paths::SampledPath;
use tci_lab::transport::{
    empirical_wasserstein_assignment, metric_axioms_check, pushforward_check, t2_check_finite_dim,
    t2_shift_experiment_path, EmpiricalMeasure, GroundCost, PushMap, MAX_SAMPLES,
};
use tci_lab::{par, SeededRng};

use super::common::{brownian, is_dyadic_grid, normals, random_covariance, smooth_shift};
use crate::config::Params;
use crate::error::RunError;
use crate::report::{check_row, num, Outcome, Table, CHECK_HEADER};

/// Streams above this index are used by auxiliary sections of a run.
const AUX_STREAM: u64 = 1 << 40;

const COV_FLOOR: f64 = 0.1;

fn scaled_normals(g: &mut impl Rng, k: usize, scale: f64) -> Vec<f64> {
    normals(g, k).into_iter().map(|v| v * scale).collect()
}

pub fn t2_finite_dim(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let dims = if params.has("k") {
        vec![params.usize_in("k", 1, 1, 64)?]
    } else {
        params.usize_list("dims", &[1, 2, 5, 20])?
    };
    if dims.iter().any(|&k| k == 0 || k > 64) {
        return Err(RunError::Config("parameter `dims`: entries must lie in [1, 64]".into()));
    }
    let cases = params.usize_in("cases", 1000, 1, 10_000_000)?;
    let family = params.choice("family", "general", &["shift", "general"])?;
    let c = params.f64_in("C", 2.0, 0.0, 1e6)?;
    let mean_scale = params.f64_in("mean_scale", 1.0, 0.0, 1e3)?;
    let equality_tol = params.f64_in("equality_tol", 1e-9, 0.0, 1.0)?;
    let empirical_n = params.usize_in("empirical_n", 0, 0, MAX_SAMPLES)?;
    let empirical_shifts = params.f64_list("empirical_shifts", &[0.5, 1.0, 2.0])?;
    if empirical_shifts.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(RunError::Config("parameter `empirical_shifts`: entries must be positive".into()));
    }
    let empirical_dim = params.usize_in("empirical_dim", 1, 1, 64)?;
    let empirical_tol = params.f64_in("empirical_tol", 0.05, 0.0, 10.0)?;
    let latin = params.choice("empirical_sampling", "latin", &["latin", "iid"])? == "latin";
    params.finish()?;

    let shift = family == "shift";
    let reports = par::try_map_indexed(cases, |i| {
        let k = dims[i % dims.len()];
        let mut g = rng.substream(i as u64).generator();
        let cov_mu = random_covariance(&mut g, k, COV_FLOOR);
        let mu = FiniteDimGaussian::new(scaled_normals(&mut g, k, mean_scale), cov_mu.clone())?;
        let offset = scaled_normals(&mut g, k, mean_scale);
        let mean_nu: Vec<f64> = mu.mean().iter().zip(&offset).map(|(a, b)| a + b).collect();
        let cov_nu = if shift { cov_mu } else { random_covariance(&mut g, k, COV_FLOOR) };
        let nu = FiniteDimGaussian::new(mean_nu, cov_nu)?;
        Ok::<_, RunError>((k, t2_check_finite_dim(&nu, &mu, c)?))
    })?;

    let mut table = Table::new(&CHECK_HEADER);
    let mut violations = 0usize;
    let mut worst_gap = 0.0_f64;
    for (i, (k, r)) in reports.iter().enumerate() {
        violations += usize::from(!r.holds);
        worst_gap = worst_gap.max(r.equality_gap.abs());
        table.push(check_row("t2-finite-dim", format!("case={i};k={k};family={family}"), r.lhs, r.rhs, r.holds));
    }
    let mut out = Outcome::new(table);
    out.assert("t2_holds", violations == 0, json!({"violations": violations, "cases": cases, "C": c}));
    if shift && c == 2.0 {
        out.assert("equality_at_shifts", worst_gap <= equality_tol, json!({"max_abs_gap": worst_gap, "tol": equality_tol}));
    }

    if empirical_n > 0 {
        let k = empirical_dim;
        let mut worst = 0.0_f64;
        for (j, &s) in empirical_shifts.iter().enumerate() {
            let stream = rng.substream(AUX_STREAM + j as u64);
            let mean = vec![s / (k as f64).sqrt(); k];
            let draw = |spec: FiniteDimGaussian, r: SeededRng| -> Result<Vec<Vec<f64>>, RunError> {
                let sampler = GaussianSampler::new(&GaussianSpec::FiniteDim(spec))?;
                Ok(if latin {
                    sampler.sample_vectors_latin(r, empirical_n)?
                } else {
                    sampler.sample_vectors(r, empirical_n)?
                })
            };
            let a = draw(FiniteDimGaussian::new(mean, DMatrix::identity(k, k))?, stream.substream(0))?;
            let b = draw(FiniteDimGaussian::standard(k), stream.substream(1))?;
            let w = empirical_wasserstein_assignment(
                &EmpiricalMeasure::new(a)?,
                &EmpiricalMeasure::new(b)?,
                &GroundCost::Euclidean,
                2.0,
            )?;
            let rel = (w / s - 1.0).abs();
            worst = worst.max(rel);
            out.report.push(check_row(
                "t2-finite-dim",
                format!("empirical;k={k};shift={s};n={empirical_n};sampling={}", if latin { "latin" } else { "iid" }),
                w,
                s,
                rel <= empirical_tol,
            ));
        }
        out.assert("empirical_w2_matches_shift", worst <= empirical_tol, json!({"max_relative_error": worst, "tol": empirical_tol}));
    }
    Ok(out)
}

pub fn t2_shift_path(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let n = params.usize_in("n", 257, 2, 4096)?;
    let p = params.f64_in("p", 2.5, 1.0, 1e3)?;
    let epsilon = params.f64_in("epsilon", 0.1, 0.0, 1.0 - f64::EPSILON)?;
    let trials = params.usize_in("trials", 2000, 1, 10_000_000)?;
    let scales = params.f64_list("h_scales", &[0.25, 1.0, 4.0])?;
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(RunError::Config("parameter `h_scales`: entries must be positive".into()));
    }
    let flow = params.choice("flow", "contractive", &["contractive", "none"])?;
    let lambda = params.f64("lambda", -1.0)?;
    let stability = params.f64_in("stability_factor", 4.0, 1.0, 1e6)?;
    let breakpoints = params.breakpoints("h")?;
    params.finish()?;

    let field = match flow.as_str() {
        "contractive" => Some(VectorFieldSpec::contractive_1d(lambda)?),
        _ => None,
    };
    let dim = breakpoints.as_ref().map_or(1, |b| b[0].1.len());
    if field.is_some() && dim != 1 {
        return Err(RunError::Config("parameter `h`: the contractive flow is one-dimensional".into()));
    }
    let spec = brownian(n, dim, 1.0)?;
    let times = spec.times();
    let h = match breakpoints {
        Some(b) => SampledPath::from_breakpoints(times.clone(), &b)?,
        None => SampledPath::from_fn(times.clone(), 1, |t| vec![0.5 - (t - 0.5).abs()])?,
    };
    if cm_norm(&h)? == 0.0 {
        return Err(RunError::Config("parameter `h`: the shift must be nonzero".into()));
    }

    let mut table = Table::new(&CHECK_HEADER);
    let mut implied = Vec::with_capacity(scales.len());
    let mut all_finite = true;
    // Every scale reuses the same streams, so the scales are compared on common draws.
    for &s in &scales {
        let r = t2_shift_experiment_path(&spec, &h.scale(s), field.as_ref(), p, epsilon, trials, rng)?;
        let ok = r.implied_c.is_finite() && r.implied_c > 0.0;
        all_finite &= ok;
        implied.push(r.implied_c);
        table.push(check_row(
            "t2-shift-path",
            format!("scale={s};lhs={};entropy={}", num(r.lhs), num(r.entropy)),
            r.implied_c,
            f64::INFINITY,
            ok,
        ));
    }
    let hi = implied.iter().copied().fold(0.0, f64::max);
    let lo = implied.iter().copied().fold(f64::INFINITY, f64::min);
    let stable = all_finite && hi <= stability * lo;
    table.push(check_row("t2-shift-path", format!("stability;factor={stability}"), hi, stability * lo, stable));
    let mut out = Outcome::new(table);
    out.assert("implied_c_finite", all_finite, json!({"implied_c": implied}));
    out.assert("implied_c_stable", stable, json!({"max": hi, "min": lo, "factor": stability}));
    Ok(out)
}

pub fn pushforward(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let map = match params.choice("map", "tanh", &["identity", "scale", "tanh"])?.as_str() {
        "identity" => PushMap::Identity,
        "scale" => PushMap::Scale { c: params.f64_in("scale_c", 2.0, -1e6, 1e6)? },
        _ => PushMap::Tanh,
    };
    let dim = params.usize_in("dim", 1, 1, 16)?;
    let n = params.usize_in("n", 2000, 2, MAX_SAMPLES)?;
    let family_size = params.usize_in("family_size", 20, 1, 100_000)?;
    let boot = params.usize_in("boot", 50, 2, 10_000)?;
    let c = params.f64_in("C", 2.0, 0.0, 1e6)?;
    let family = params.choice("family", "general", &["shift", "general"])?;
    let mean_scale = params.f64_in("mean_scale", 1.0, 0.0, 1e3)?;
    params.finish()?;

    let mu = FiniteDimGaussian::standard(dim);
    let rows = par::try_map_indexed(family_size, |j| {
        let stream = rng.substream(j as u64);
        let mut g = stream.substream(0).generator();
        let mean = scaled_normals(&mut g, dim, mean_scale);
        let cov = if family == "shift" {
            DMatrix::identity(dim, dim)
        } else {
            random_covariance(&mut g, dim, COV_FLOOR)
        };
        let nu = FiniteDimGaussian::new(mean, cov)?;
        Ok::<_, RunError>(pushforward_check(&mu, &nu, map, c, n, boot, stream.substream(1))?)
    })?;
    let mut table = Table::new(&CHECK_HEADER);
    let mut violations = 0usize;
    for (j, r) in rows.iter().enumerate() {
        violations += usize::from(!r.holds);
        table.push(check_row("pushforward", format!("member={j};se={}", num(r.se)), r.lhs, r.rhs, r.holds));
    }
    let mut out = Outcome::new(table);
    out.assert("pushforward_bound", violations == 0, json!({"violations": violations, "family_size": family_size, "lipschitz": map.lipschitz()}));
    Ok(out)
}

const SECTIONS: [&str; 3] = ["assignment_oracle", "axioms", "projection"];

fn assignment_oracle(rng: SeededRng, instances: usize, max_n: usize, table: &mut Table) -> Result<usize, RunError> {
    let rows = par::try_map_indexed(instances, |i| {
        let mut g = rng.substream(i as u64).generator();
        let n = g.random_range(1..=max_n);
        let with_inf = g.random_bool(0.2);
        let data: Vec<f64> = (0..n * n)
            .map(|_| {
                if with_inf && g.random_bool(0.3) {
                    f64::INFINITY
                } else {
                    g.random::<f64>() * 10.0
                }
            })
            .collect();
        let m = CostMatrix::new(n, data)?;
        let fast = solve(&m).total;
        let brute = solve_bruteforce(&m)?.total;
        Ok::<_, RunError>((n, fast, brute))
    })?;
    let mut failures = 0;
    for (i, (n, fast, brute)) in rows.into_iter().enumerate() {
        let holds = fast == brute;
        failures += usize::from(!holds);
        table.push(check_row("metric-axioms", format!("assignment;case={i};n={n}"), fast, brute, holds));
    }
    Ok(failures)
}

fn ground_kinds(n_basis: usize) -> Vec<(&'static str, GroundCost)> {
    vec![
        ("euclidean", GroundCost::Euclidean),
        ("sup", GroundCost::SupDistance),
        ("pvar", GroundCost::PVarDistance { p: 2.5 }),
        ("cm", GroundCost::CmDistance),
        ("projection", GroundCost::ProjectionMetric { n_basis }),
    ]
}

pub fn metric_axioms(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let sections: Vec<String> = params.value("sections", SECTIONS.iter().map(|s| s.to_string()).collect())?;
    if let Some(s) = sections.iter().find(|s| !SECTIONS.contains(&s.as_str())) {
        return Err(RunError::Config(format!("parameter `sections`: `{s}` is not one of {SECTIONS:?}")));
    }
    let instances = params.usize_in("instances", 1000, 1, 10_000_000)?;
    let max_n = params.usize_in("max_n", 7, 1, 8)?;
    let triples = params.usize_in("triples", 100, 1, 1_000_000)?;
    let block = params.usize_in("block", 6, 1, 200)?;
    let points = params.usize_in("points", 17, 3, 4097)?;
    let p = params.f64_in("p", 2.0, 1.0, 1e3)?;
    let pairs = params.usize_in("pairs", 1000, 1, 10_000_000)?;
    let projection_points = params.usize_in("projection_points", 65, 3, 4097)?;
    let tol = params.f64_in("tol", 1e-10, 0.0, 1.0)?;
    params.finish()?;
    if !is_dyadic_grid(points) || !is_dyadic_grid(projection_points) {
        return Err(RunError::Config("parameters `points` and `projection_points` must be 2^j + 1".into()));
    }
    let has = |s: &str| sections.iter().any(|x| x == s);

    let mut table = Table::new(&CHECK_HEADER);
    let mut props = Vec::new();

    if has("assignment_oracle") {
        let failures = assignment_oracle(rng.substream(0), instances, max_n, &mut table)?;
        props.push(("assignment_equals_bruteforce", failures == 0, json!({"failures": failures, "instances": instances})));
    }

    if has("axioms") {
        let base = rng.substream(1);
        let spec = brownian(points, 2, 1.0)?;
        for (kind_index, (name, cost)) in ground_kinds(points - 1).into_iter().enumerate() {
            let kind_stream = base.substream(kind_index as u64);
            let reports = par::try_map_indexed(triples, |i| {
                let stream = kind_stream.substream(i as u64);
                if name == "euclidean" {
                    let mut g = stream.generator();
                    let pts: Vec<Vec<f64>> = (0..3 * block).map(|_| normals(&mut g, 2)).collect();
                    Ok::<_, RunError>(metric_axioms_check(&pts, &cost, p)?)
                } else {
                    let pts = (0..3 * block)
                        .map(|j| sample_path(&spec, stream.substream(j as u64)))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(metric_axioms_check(&pts, &cost, p)?)
                }
            })?;
            let mut failures = 0;
            for (i, r) in reports.iter().enumerate() {
                let holds = r.holds();
                failures += usize::from(!holds);
                let param = format!(
                    "axioms;cost={name};triple={i};symmetric={};identity={};d_ab={};d_bc={}",
                    r.symmetric,
                    r.identity,
                    num(r.d_ab),
                    num(r.d_bc)
                );
                table.push(check_row("metric-axioms", param, r.d_ac, r.d_ab + r.d_bc, holds));
            }
            props.push((
                match name {
                    "euclidean" => "axioms_euclidean",
                    "sup" => "axioms_sup",
                    "pvar" => "axioms_pvar",
                    "cm" => "axioms_cm",
                    _ => "axioms_projection",
                },
                failures == 0,
                json!({"failures": failures, "triples": triples}),
            ));
        }
    }

    if has("projection") {
        let base = rng.substream(2);
        let spec = brownian(projection_points, 2, 1.0)?;
        let times = spec.times();
        let full = projection_points - 1;
        let rows = par::try_map_indexed(pairs, |i| {
            let stream = base.substream(i as u64);
            let x = sample_path(&spec, stream.substream(0))?;
            let y = sample_path(&spec, stream.substream(1))?;
            let h = smooth_shift(stream.substream(2), &times, 2, 1.0)?;
            let mut prev = 0.0_f64;
            let mut monotone = true;
            for k in 1..=full {
                let d = projection_metric(&x, &y, k)?;
                monotone &= d >= prev;
                prev = d;
            }
            let shifted = x.add(&h)?;
            let h_norm = cm_norm(&h)?;
            let worst_shift = (1..=full)
                .map(|k| projection_metric(&shifted, &x, k))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(0.0_f64, f64::max);
            let at_full = projection_metric(&x, &y, full)?;
            let exact = cm_distance(&x, &y)?;
            Ok::<_, RunError>((monotone, worst_shift, h_norm, (at_full - exact).abs()))
        })?;
        let (mut non_monotone, mut shift_violations, mut worst_full) = (0usize, 0usize, 0.0_f64);
        for (i, (monotone, d, h_norm, full_gap)) in rows.into_iter().enumerate() {
            non_monotone += usize::from(!monotone);
            let bound_ok = d <= h_norm * (1.0 + 1e-12);
            shift_violations += usize::from(!bound_ok);
            worst_full = worst_full.max(full_gap);
            table.push(check_row("metric-axioms", format!("projection;pair={i};monotone={monotone}"), d, h_norm, bound_ok && monotone));
            table.push(check_row("metric-axioms", format!("projection_full;pair={i}"), full_gap, tol, full_gap <= tol));
        }
        props.push(("projection_monotone", non_monotone == 0, json!({"failures": non_monotone, "pairs": pairs})));
        props.push(("projection_below_cm_norm", shift_violations == 0, json!({"violations": shift_violations})));
        props.push(("projection_full_resolution", worst_full <= tol, json!({"max_abs_diff": worst_full, "tol": tol})));
    }

    let mut out = Outcome::new(table);
    for (name, holds, detail) in props {
        out.assert(name, holds, detail);
    }
    Ok(out)
}
