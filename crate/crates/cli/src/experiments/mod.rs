//! Registered experiments. Each one reads and range-checks all of its
//! parameters before computing anything.

mod common;
mod flow;
mod lift;
mod oracle;
mod tails;
mod transport;

use tci_lab::SeededRng;

use crate::config::Params;
use crate::error::RunError;
use crate::report::Outcome;

pub type Runner = fn(&Params, SeededRng) -> Result<Outcome, RunError>;

pub struct Experiment {
    pub name: &'static str,
    pub description: &'static str,
    pub run: Runner,
}

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment {
        name: "pvar-oracle",
        description: "p-variation dynamic programme against exhaustive partition enumeration",
        run: oracle::pvar_oracle,
    },
    Experiment {
        name: "lift-consistency",
        description: "Chen identity, weak geometricity and prefix-vs-sequential level-2 agreement of lifts",
        run: lift::lift_consistency,
    },
    Experiment {
        name: "translate-consistency",
        description: "translated lifts equal lifts of shifted paths and keep Chen and weak geometricity",
        run: lift::translate_consistency,
    },
    Experiment {
        name: "nalpha-tails",
        description: "Gaussian tails of the accumulation count N_1, or the growth bound for N_alpha under translation",
        run: tails::nalpha_tails,
    },
    Experiment {
        name: "additive-lipschitz",
        description: "additive-noise flow shifts stay below exp(LT) times the q-variation of the shift",
        run: flow::additive_lipschitz,
    },
    Experiment {
        name: "sobolev-ratio",
        description: "fractional Sobolev response of the additive-noise flow to Cameron-Martin shifts",
        run: flow::sobolev_ratio,
    },
    Experiment {
        name: "rde-convergence",
        description: "step-2 Euler RDE solver against closed forms and under dyadic refinement",
        run: flow::rde_convergence,
    },
    Experiment {
        name: "rde-shift",
        description: "response of RDE solutions to translations of the Brownian lift",
        run: flow::rde_shift,
    },
    Experiment {
        name: "t2-finite-dim",
        description: "Talagrand inequality for finite-dimensional Gaussians by closed forms and assignment",
        run: transport::t2_finite_dim,
    },
    Experiment {
        name: "t2-shift-path",
        description: "implied transport constant of a flow under Cameron-Martin shifts on path space",
        run: transport::t2_shift_path,
    },
    Experiment {
        name: "pushforward",
        description: "transport inequality for pushforwards under Lipschitz maps",
        run: transport::pushforward,
    },
    Experiment {
        name: "metric-axioms",
        description: "assignment solver against brute force, Wasserstein metric axioms and projection pseudometrics",
        run: transport::metric_axioms,
    },
    Experiment {
        name: "empirical-concentration",
        description: "median and Gaussian concentration of empirical Wasserstein distances",
        run: tails::empirical_concentration,
    },
    Experiment {
        name: "fernique",
        description: "Gaussian-tail fits for path functionals with the reflection-principle comparison",
        run: tails::fernique,
    },
];

/// Looks an experiment up by name, suggesting the closest registered name on failure.
pub fn find(name: &str) -> Result<&'static Experiment, RunError> {
    if let Some(e) = EXPERIMENTS.iter().find(|e| e.name == name) {
        return Ok(e);
    }
    let nearest = EXPERIMENTS
        .iter()
        .min_by_key(|e| strsim::levenshtein(e.name, name))
        .map(|e| e.name)
        .unwrap_or_default();
    Err(RunError::Config(format!(
        "unknown experiment `{name}`; did you mean `{nearest}`? (see `lab list`)"
    )))
}
