use rand::Rng;
use serde_json::json;
use tci_lab::par;
use tci_lab::roughlift::{chen_lift, translate, RoughPath2};
use tci_lab::SeededRng;

use super::common::random_walk;
use crate::config::Params;
use crate::error::RunError;
use crate::report::{check_row, Outcome, Table, CHECK_HEADER};

struct Residuals {
    chen: f64,
    weak: f64,
    sequential: f64,
}

/// Worst residuals over every grid triple and pair.
fn residuals(rp: &RoughPath2) -> Residuals {
    let n = rp.len();
    let mut r = Residuals {
        chen: 0.0,
        weak: 0.0,
        sequential: 0.0,
    };
    for s in 0..n {
        for t in s..n {
            r.weak = r.weak.max(rp.weak_geometric_residual(s, t));
            let direct = rp.level2(s, t);
            let seq = rp.level2_sequential(s, t);
            for (a, b) in direct.iter().zip(&seq) {
                r.sequential = r.sequential.max((a - b).abs());
            }
            for u in t..n {
                r.chen = r.chen.max(rp.chen_residual(s, t, u));
            }
        }
    }
    r
}

struct Section {
    worst: f64,
    failures: usize,
}

fn collect(table: &mut Table, rows: Vec<Vec<(Vec<String>, bool, f64)>>, names: &[&str]) -> Vec<Section> {
    let mut sections: Vec<Section> = names.iter().map(|_| Section { worst: 0.0, failures: 0 }).collect();
    for case in rows {
        for (k, (row, holds, value)) in case.into_iter().enumerate() {
            sections[k].worst = sections[k].worst.max(value);
            sections[k].failures += usize::from(!holds);
            table.push(row);
        }
    }
    sections
}

fn check(experiment: &str, case: usize, name: &str, value: f64, tol: f64) -> (Vec<String>, bool, f64) {
    let holds = value <= tol;
    (check_row(experiment, format!("case={case};{name}"), value, tol, holds), holds, value)
}

pub fn lift_consistency(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let cases = params.usize_in("cases", 1000, 1, 1_000_000)?;
    let max_points = params.usize_in("max_points", 24, 2, 256)?;
    let dim = params.usize_in("dim", 2, 1, 8)?;
    let tol = params.f64_in("tol", 1e-13, 0.0, 1.0)?;
    params.finish()?;

    let rows = par::try_map_indexed(cases, |i| {
        let mut g = rng.substream(i as u64).generator();
        let len = g.random_range(2..=max_points);
        let rp = chen_lift(&random_walk(&mut g, len, dim)?)?;
        let r = residuals(&rp);
        Ok::<_, RunError>(vec![
            check("lift-consistency", i, "chen", r.chen, tol),
            check("lift-consistency", i, "weak_geometric", r.weak, tol),
            check("lift-consistency", i, "sequential", r.sequential, tol),
        ])
    })?;
    let names = ["chen", "weak_geometric", "sequential"];
    let mut table = Table::new(&CHECK_HEADER);
    let sections = collect(&mut table, rows, &names);
    let mut out = Outcome::new(table);
    for (name, s) in names.iter().zip(sections) {
        out.assert(&format!("{name}_residual"), s.failures == 0, json!({"failures": s.failures, "max": s.worst, "tol": tol}));
    }
    Ok(out)
}

pub fn translate_consistency(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let cases = params.usize_in("cases", 1000, 1, 1_000_000)?;
    let max_points = params.usize_in("max_points", 24, 2, 256)?;
    let dim = params.usize_in("dim", 2, 1, 8)?;
    let tol = params.f64_in("tol", 1e-12, 0.0, 1.0)?;
    let residual_tol = params.f64_in("residual_tol", 1e-13, 0.0, 1.0)?;
    params.finish()?;

    let rows = par::try_map_indexed(cases, |i| {
        let mut g = rng.substream(i as u64).generator();
        let len = g.random_range(2..=max_points);
        let x = random_walk(&mut g, len, dim)?;
        let h = random_walk(&mut g, len, dim)?;
        let shifted = translate(&chen_lift(&x)?, &h)?;
        let direct = chen_lift(&x.add(&h)?)?;
        let mut gap = 0.0_f64;
        for s in 0..len {
            for (a, b) in shifted.base().value(s).iter().zip(direct.base().value(s)) {
                gap = gap.max((a - b).abs());
            }
            for t in s..len {
                for (a, b) in shifted.level2(s, t).iter().zip(&direct.level2(s, t)) {
                    gap = gap.max((a - b).abs());
                }
            }
        }
        let r = residuals(&shifted);
        Ok::<_, RunError>(vec![
            check("translate-consistency", i, "translate_vs_lift", gap, tol),
            check("translate-consistency", i, "chen", r.chen, residual_tol),
            check("translate-consistency", i, "weak_geometric", r.weak, residual_tol),
        ])
    })?;
    let names = ["translate_vs_lift", "chen", "weak_geometric"];
    let mut table = Table::new(&CHECK_HEADER);
    let sections = collect(&mut table, rows, &names);
    let mut out = Outcome::new(table);
    for ((name, s), t) in names.iter().zip(sections).zip([tol, residual_tol, residual_tol]) {
        out.assert(name, s.failures == 0, json!({"failures": s.failures, "max": s.worst, "tol": t}));
    }
    Ok(out)
}
