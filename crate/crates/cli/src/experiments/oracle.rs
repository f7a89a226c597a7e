use std::time::Instant;

use rand::Rng;
use tci_lab::par;
use tci_lab::paths::{p_variation, p_variation_bruteforce};
use tci_lab::SeededRng;

use super::common::random_walk;
use crate::config::Params;
use crate::error::RunError;
use crate::report::{check_row, Outcome, Table, CHECK_HEADER};

pub fn pvar_oracle(params: &Params, rng: SeededRng) -> Result<Outcome, RunError> {
    let cases = params.usize_in("cases", 1000, 1, 1_000_000)?;
    let max_points = params.usize_in("max_points", 12, 2, 16)?;
    let dim = params.usize_in("dim", 1, 1, 16)?;
    let p_values = params.f64_list("p_values", &[1.0, 1.5, 2.0, 2.5, 3.0])?;
    let tol = params.f64_in("tol", 1e-12, 0.0, 1.0)?;
    if let Some(p) = p_values.iter().find(|p| !(**p >= 1.0 && p.is_finite())) {
        return Err(RunError::Config(format!("parameter `p_values`: {p} must be >= 1")));
    }
    params.finish()?;

    let start = Instant::now();
    let rows = par::try_map_indexed(cases, |i| {
        let mut g = rng.substream(i as u64).generator();
        let len = g.random_range(2..=max_points);
        let path = random_walk(&mut g, len, dim)?;
        p_values
            .iter()
            .map(|&p| {
                let dp = p_variation(&path, p, path.full())?;
                let brute = p_variation_bruteforce(&path, p, path.full())?;
                let holds = (dp - brute).abs() <= tol;
                Ok((check_row("pvar-oracle", format!("case={i};p={p};points={len}"), dp, brute, holds), holds, (dp - brute).abs()))
            })
            .collect::<Result<Vec<_>, RunError>>()
    })?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut table = Table::new(&CHECK_HEADER);
    let mut worst = 0.0_f64;
    let mut failures = 0usize;
    for (row, holds, diff) in rows.into_iter().flatten() {
        worst = worst.max(diff);
        failures += usize::from(!holds);
        table.push(row);
    }
    let mut out = Outcome::new(table);
    out.assert("dp_equals_bruteforce", failures == 0, serde_json::json!({"failures": failures, "max_abs_diff": worst, "tol": tol}));
    out.measure("elapsed_seconds", elapsed);
    Ok(out)
}
