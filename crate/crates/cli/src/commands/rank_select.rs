//! `rank-select`: BIC grid search; writes the table sorted by BIC with
//! the winning rank on the first row.

use std::path::Path;

use ordtensor::estimator::select_rank_bic;

use crate::commands::{fit_options, parse_cutoffs, parse_family, parse_rank, resolve_levels};
use crate::error::{CliError, CliResult};
use crate::io::{read_json, write_text, TensorFile};
use crate::FitFlags;

pub fn run(input: &Path, grid: &str, flags: &FitFlags, out: &Path) -> CliResult<()> {
    let file: TensorFile = read_json(input)?;
    let (y, file_levels) = file.to_ordinal()?;
    let levels = resolve_levels(flags.levels, file_levels)?;
    let family = parse_family(&flags.link)?;
    let opts = fit_options(flags)?;
    let initial = match &flags.cutoffs {
        Some(s) => Some(parse_cutoffs(s)?),
        None => None,
    };
    let grid: Vec<Vec<usize>> = grid
        .split(';')
        .map(parse_rank)
        .collect::<CliResult<_>>()?;

    let (best, mut rows) = select_rank_bic(
        &y,
        &grid,
        family,
        flags.sigma,
        levels,
        &opts,
        initial.as_deref(),
    )
    .map_err(CliError::usage)?;

    rows.sort_by(|a, b| {
        a.bic
            .partial_cmp(&b.bic)
            .expect("finite BIC")
            .then(a.p_e.cmp(&b.p_e))
            .then(a.rank.cmp(&b.rank))
    });
    let mut csv = String::from("rank,objective,p_e,bic\n");
    for row in &rows {
        let rank_str: Vec<String> = row.rank.iter().map(|r| r.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{}\n",
            rank_str.join("x"),
            row.objective,
            row.p_e,
            row.bic
        ));
    }
    write_text(out, &csv)?;

    let best_str: Vec<String> = best.iter().map(|r| r.to_string()).collect();
    println!("{}", best_str.join(","));
    eprintln!("rank-select: table written to {}", out.display());
    Ok(())
}
