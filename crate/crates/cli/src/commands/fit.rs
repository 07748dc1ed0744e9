//! `fit`: run the estimator on an observed tensor file and store the
//! full result.

use std::path::Path;

use ordtensor::estimator::{bic_value, effective_params, fit};
use ordtensor::likelihood::log_likelihood;

use crate::commands::{fit_options, parse_cutoffs, parse_family, parse_rank, resolve_levels};
use crate::error::{CliError, CliResult};
use crate::io::{read_json, write_json, FitResultFile, TensorFile};
use crate::FitFlags;

pub fn run(input: &Path, rank: &str, flags: &FitFlags, out: &Path) -> CliResult<()> {
    let file: TensorFile = read_json(input)?;
    let (y, file_levels) = file.to_ordinal()?;
    let levels = resolve_levels(flags.levels, file_levels)?;
    let rank = parse_rank(rank)?;
    let family = parse_family(&flags.link)?;
    let opts = fit_options(flags)?;
    let initial = match &flags.cutoffs {
        Some(s) => Some(parse_cutoffs(s)?),
        None => None,
    };

    let res = fit(
        &y,
        &rank,
        family,
        flags.sigma,
        levels,
        &opts,
        initial.as_deref(),
    )
    .map_err(CliError::usage)?;
    if !res.final_objective.is_finite() {
        return Err(CliError::Numerical(format!(
            "objective is not finite: {}",
            res.final_objective
        )));
    }
    let spec = res.link_spec();
    let objective = log_likelihood(&y, &res.theta_hat, &spec).map_err(CliError::usage)?;
    let result = FitResultFile {
        dims: y.dims().to_vec(),
        rank: rank.clone(),
        family: family.to_string(),
        sigma: flags.sigma,
        levels,
        alpha: flags.alpha,
        seed: flags.seed,
        estimate_cutoffs: flags.estimate_cutoffs,
        cutoffs: res.cutoffs_hat.clone(),
        theta: res.theta_hat.values().to_vec(),
        objective_trace: res.objective_trace.clone(),
        final_objective: res.final_objective,
        converged: res.converged,
        iterations: res.iterations,
        p_e: effective_params(y.dims(), &rank),
        bic: bic_value(objective, y.dims(), &rank),
    };
    write_json(out, &result)?;
    eprintln!(
        "fit: objective {:.6}, {} iterations, converged {}",
        res.final_objective, res.iterations, res.converged
    );
    println!("{}", out.display());
    Ok(())
}
