//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use serde_json::{json, Value};
use tci_lab_cli::experiments::EXPERIMENTS;
use tci_lab_cli::{execute, ExperimentConfig, Outcome};

const SEED: u64 = 0;

struct Run {
    outcome: Outcome,
    seconds: f64,
}

fn config(name: &str, params: Value, seed: u64, threads: Option<usize>) -> ExperimentConfig {
    ExperimentConfig {
        experiment: name.to_string(),
        params: params.as_object().cloned().unwrap_or_default(),
        seed,
        output: None,
        threads,
    }
}

fn exec(name: &str, params: Value) -> Result<Run, String> {
    let start = Instant::now();
    let outcome = execute(&config(name, params, SEED, None)).map_err(|e| format!("{name}: {e}"))?;
    Ok(Run {
        outcome,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Names of the listed properties that fail or are missing.
fn failing(run: &Run, names: &[&str]) -> Vec<String> {
    names
        .iter()
        .filter(|n| run.outcome.property(n).is_none_or(|p| !p.holds))
        .map(|n| match run.outcome.property(n) {
            Some(p) => format!("{n} {}", p.detail),
            None => format!("{n} missing"),
        })
        .collect()
}

fn all_failing(run: &Run) -> Vec<String> {
    run.outcome
        .properties
        .iter()
        .filter(|p| !p.holds)
        .map(|p| format!("{} {}", p.name, p.detail))
        .collect()
}

type Verdict = Result<String, String>;

fn verdict(fails: Vec<String>, detail: String) -> Verdict {
    if fails.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; failing: {}", fails.join("; ")))
    }
}

fn within(seconds: f64, limit: f64, fails: &mut Vec<String>) {
    if seconds >= limit {
        fails.push(format!("runtime {seconds:.1}s exceeds {limit}s"));
    }
}

fn criterion_1() -> Verdict {
    let r = exec(
        "pvar-oracle",
        json!({"cases": 1000, "max_points": 12, "p_values": [1.0, 1.5, 2.0, 2.5, 3.0], "tol": 1e-12}),
    )?;
    let mut fails = all_failing(&r);
    within(r.seconds, 10.0, &mut fails);
    let d = &r.outcome.property("dp_equals_bruteforce").unwrap().detail;
    verdict(fails, format!("max |dp - brute| = {}, {:.2}s", d["max_abs_diff"], r.seconds))
}

fn criterion_2() -> Verdict {
    let lift = exec("lift-consistency", json!({"cases": 1000, "tol": 1e-13}))?;
    let tr = exec("translate-consistency", json!({"cases": 1000, "tol": 1e-12, "residual_tol": 1e-13}))?;
    let mut fails = all_failing(&lift);
    fails.extend(all_failing(&tr));
    let max = |r: &Run, n: &str| r.outcome.property(n).map(|p| p.detail["max"].clone()).unwrap_or(Value::Null);
    verdict(
        fails,
        format!(
            "chen {} weak {} translate {} translated chen {}",
            max(&lift, "chen_residual"),
            max(&lift, "weak_geometric_residual"),
            max(&tr, "translate_vs_lift"),
            max(&tr, "chen"),
        ),
    )
}

fn criterion_3() -> Verdict {
    let r = exec(
        "t2-finite-dim",
        json!({
            "dims": [1, 2, 5, 20], "cases": 200, "family": "shift", "C": 2.0, "equality_tol": 1e-9,
            "empirical_n": 2000, "empirical_shifts": [0.5, 1.0, 2.0], "empirical_dim": 1, "empirical_tol": 0.05
        }),
    )?;
    let mut fails = all_failing(&r);
    within(r.seconds, 120.0, &mut fails);
    let gap = &r.outcome.property("equality_at_shifts").unwrap().detail["max_abs_gap"];
    let emp = &r.outcome.property("empirical_w2_matches_shift").unwrap().detail["max_relative_error"];
    // Independent draws, reported only: their sample-mean noise sqrt(2/n) is
    // 6% of the smallest shift, the same size as the tolerance.
    let iid = exec(
        "t2-finite-dim",
        json!({
            "k": 1, "cases": 1, "family": "shift", "empirical_n": 2000, "empirical_shifts": [0.5, 1.0, 2.0],
            "empirical_dim": 1, "empirical_sampling": "iid"
        }),
    )?;
    let iid_err = &iid.outcome.property("empirical_w2_matches_shift").unwrap().detail["max_relative_error"];
    verdict(
        fails,
        format!(
            "max equality gap {gap}, empirical W2 rel. error {emp} (Latin hypercube; iid draws {iid_err}), {:.1}s",
            r.seconds
        ),
    )
}

fn criterion_4() -> Verdict {
    let r = exec("t2-finite-dim", json!({"dims": [1, 2, 3, 5, 10, 20], "cases": 1000, "family": "general", "C": 2.0}))?;
    let fails = all_failing(&r);
    verdict(fails, format!("{} pairs, violations {}", 1000, r.outcome.property("t2_holds").unwrap().detail["violations"]))
}

fn criterion_5() -> Verdict {
    let mut fails = Vec::new();
    let mut total = 0.0;
    let mut worst = 0.0_f64;
    for drift in ["linear", "tanh"] {
        for q in [1.0, 2.0] {
            let r = exec("additive-lipschitz", json!({"drift": drift, "q": q, "trials": 10_000, "n": 512, "lambda": 1.0}))?;
            total += r.seconds;
            fails.extend(all_failing(&r).into_iter().map(|f| format!("{drift} q={q}: {f}")));
            let d = &r.outcome.property("lipschitz_bound").unwrap().detail;
            worst = worst.max(d["max_num_over_bound_den"].as_f64().unwrap_or(f64::NAN));
        }
    }
    within(total, 300.0, &mut fails);
    verdict(fails, format!("4 x 10^4 trials, max num/(bound den) = {worst:.4}, {total:.1}s"))
}

fn criterion_6() -> Verdict {
    let r = exec(
        "metric-axioms",
        json!({"sections": ["assignment_oracle", "axioms"], "instances": 1000, "max_n": 7, "triples": 100}),
    )?;
    let fails = all_failing(&r);
    verdict(fails, format!("{} properties checked", r.outcome.properties.len()))
}

fn criterion_7() -> Verdict {
    let r = exec("nalpha-tails", json!({"check": "shift_bound", "trials": 10_000, "n": 129, "p": 2.5, "q": 1.0}))?;
    let fails = all_failing(&r);
    let d = &r.outcome.property("shift_bound").unwrap().detail;
    verdict(fails, format!("alpha {}, min margin {}, violations {}", d["alpha"], d["min_margin"], d["violations"]))
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let sup = exec("fernique", json!({"functional": "sup", "n": 512, "dim": 1, "trials": 10_000}))?;
    let n1 = exec("nalpha-tails", json!({"check": "tails", "n": 512, "dim": 2, "p": 2.5, "trials": 10_000}))?;
    let seconds = start.elapsed().as_secs_f64();
    let mut fails = failing(&sup, &["reflection_scale"]);
    fails.extend(failing(&n1, &["tail_verdict"]));
    within(seconds, 600.0, &mut fails);
    let c = &sup.outcome.property("reflection_scale").unwrap().detail["comparison"];
    let fit = &n1.outcome.property("tail_verdict").unwrap().detail[0]["fit"];
    verdict(
        fails,
        format!(
            "sup-norm sigma2 {} vs reflection {}; N1 verdict {} r2 {} curvature {} (se {}); {seconds:.1}s",
            c["sigma2_fit"], c["sigma2_reflection"], fit["verdict"], fit["r2"], fit["curvature"], fit["curvature_se"]
        ),
    )
}

fn criterion_9() -> Verdict {
    let r = exec("rde-convergence", json!({"n": 4096, "tol": 1e-4, "refinements": 4}))?;
    let fails = all_failing(&r);
    let e = |n: &str| r.outcome.property(n).map(|p| p.detail["error"].clone()).unwrap_or(Value::Null);
    verdict(
        fails,
        format!(
            "scalar {} commuting {} refinements {}",
            e("scalar_exponential"),
            e("commuting_linear"),
            r.outcome.property("self_convergence_monotone").unwrap().detail["errors"]
        ),
    )
}

fn criterion_10() -> Verdict {
    let r = exec("t2-shift-path", json!({"h_scales": [0.25, 1.0, 4.0], "flow": "contractive", "lambda": -1.0}))?;
    let fails = all_failing(&r);
    verdict(fails, format!("implied_C {}", r.outcome.property("implied_c_finite").unwrap().detail["implied_c"]))
}

fn criterion_11() -> Verdict {
    let r = exec("metric-axioms", json!({"sections": ["projection"], "pairs": 1000, "projection_points": 65, "tol": 1e-10}))?;
    let fails = all_failing(&r);
    verdict(fails, format!("full-resolution gap {}", r.outcome.property("projection_full_resolution").unwrap().detail["max_abs_diff"]))
}

/// Small parameters for every registered experiment.
fn small_params(name: &str) -> Value {
    match name {
        "pvar-oracle" => json!({"cases": 50}),
        "lift-consistency" | "translate-consistency" => json!({"cases": 50}),
        "nalpha-tails" => json!({"n": 65, "trials": 10_000}),
        "additive-lipschitz" => json!({"trials": 100, "n": 129, "drift": "tanh"}),
        "sobolev-ratio" => json!({"trials": 10, "n": 65}),
        "rde-convergence" => json!({"n": 513, "tol": 1e-2}),
        "rde-shift" => json!({"trials": 50, "n": 65}),
        "t2-finite-dim" => json!({"cases": 100, "empirical_n": 200}),
        "t2-shift-path" => json!({"trials": 100, "n": 65}),
        "pushforward" => json!({"family_size": 4, "n": 300, "boot": 10}),
        "metric-axioms" => json!({"instances": 50, "triples": 3, "pairs": 20}),
        "empirical-concentration" => json!({"n_grid": [8, 32], "trials": 50}),
        "fernique" => json!({"n": 129, "trials": 10_000}),
        _ => json!({}),
    }
}

fn criterion_12() -> Verdict {
    let mut fails = Vec::new();
    for e in EXPERIMENTS {
        let params = small_params(e.name);
        let reports: Vec<String> = [Some(1), Some(4), Some(1)]
            .into_iter()
            .map(|threads| {
                execute(&config(e.name, params.clone(), 5, threads))
                    .map_err(|err| format!("{}: {err}", e.name))
                    .and_then(|o| o.report.to_csv_string().map_err(|err| err.to_string()))
            })
            .collect::<Result<_, _>>()?;
        if reports.windows(2).any(|w| w[0] != w[1]) {
            fails.push(e.name.to_string());
        }
    }
    verdict(fails, format!("{} experiments rerun with threads 1, 4, 1", EXPERIMENTS.len()))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("p-variation DP equals enumeration", criterion_1),
        ("Chen, weak geometricity and translation of lifts", criterion_2),
        ("Talagrand equality at Gaussian shifts", criterion_3),
        ("T2(2) on random Gaussian pairs", criterion_4),
        ("additive flow Lipschitz bound", criterion_5),
        ("assignment oracle and Wasserstein metric axioms", criterion_6),
        ("N_alpha growth under translation", criterion_7),
        ("Fernique and N_1 Gaussian tails", criterion_8),
        ("RDE closed forms and self-convergence", criterion_9),
        ("implied transport constant under shifts", criterion_10),
        ("projection pseudometrics", criterion_11),
        ("determinism across thread counts", criterion_12),
    ];
    let mut passed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => {
                passed += 1;
                println!("criterion {:>2} PASS  {title} [{secs:.1}s]: {detail}", i + 1);
            }
            Err(detail) => println!("criterion {:>2} FAIL  {title} [{secs:.1}s]: {detail}", i + 1),
        }
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed == criteria.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
