pub mod cv;
pub mod experiment;
pub mod fit;
pub mod predict;
pub mod rank_select;
pub mod simulate;

use ordtensor::estimator::{FitOptions, InitStrategy};
use ordtensor::link::LinkFamily;

use crate::error::{CliError, CliResult};
use crate::FitFlags;

/// Parses a comma-separated list of positive integers ("2,2,2").
pub fn parse_rank(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("invalid rank component '{p}' in '{s}'")))
        })
        .collect()
}

pub fn parse_family(s: &str) -> CliResult<LinkFamily> {
    s.parse::<LinkFamily>().map_err(CliError::usage)
}

pub fn parse_cutoffs(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("invalid cut-off '{p}' in '{s}'")))
        })
        .collect()
}

/// Builds estimator options from the shared flags.
pub fn fit_options(flags: &FitFlags) -> CliResult<FitOptions> {
    let init = match flags.init.to_ascii_lowercase().as_str() {
        "hosvd" => InitStrategy::HosvdWarmStart,
        "random" => InitStrategy::Random,
        other => {
            return Err(CliError::Usage(format!(
                "unknown init '{other}' (expected 'hosvd' or 'random')"
            )))
        }
    };
    let mut opts = FitOptions::new(flags.alpha)
        .with_seed(flags.seed)
        .with_estimated_cutoffs(flags.estimate_cutoffs);
    opts.max_outer_iters = flags.max_outer;
    opts.inner_steps = flags.inner_steps;
    opts.tol = flags.tol;
    opts.init = init;
    Ok(opts)
}

/// Levels from the flag or the input file, with agreement checked.
pub fn resolve_levels(flag: Option<usize>, file_levels: usize) -> CliResult<usize> {
    match flag {
        None => Ok(file_levels),
        Some(l) if l == file_levels => Ok(l),
        Some(l) => Err(CliError::Usage(format!(
            "--levels {l} contradicts the input file's levels {file_levels}"
        ))),
    }
}
