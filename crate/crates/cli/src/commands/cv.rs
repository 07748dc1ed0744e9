//! `cv`: stratified K-fold cross-validation of held-out label
//! prediction, with optional repeated runs.
//!
//! Observed entries are grouped by label and dealt round-robin into
//! folds after a seeded shuffle, so fold sizes within each stratum
//! differ by at most one. Each fold is masked out, the model refitted,
//! and the held-out labels scored with MAD and MCR.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ordtensor::estimator::{fit, predict_labels, PredictionRule};
use ordtensor::likelihood::OrdinalTensor;
use ordtensor::metrics::{mad, mcr};

use crate::commands::{fit_options, parse_cutoffs, parse_family, parse_rank, resolve_levels};
use crate::error::{CliError, CliResult};
use crate::io::{read_json, write_text, TensorFile};
use crate::FitFlags;

struct FoldRow {
    run: usize,
    fold: usize,
    n_train: usize,
    n_test: usize,
    mad_train: f64,
    mcr_train: f64,
    mad_test: f64,
    mcr_test: f64,
}

/// Deals the observed entries of each label stratum into `folds` groups.
fn stratified_folds(
    y: &OrdinalTensor,
    levels: usize,
    folds: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Vec::new(); folds];
    for level in 1..=levels as u32 {
        let mut members: Vec<usize> = (0..y.len())
            .filter(|&i| y.mask()[i] && y.labels()[i] == level)
            .collect();
        members.shuffle(&mut rng);
        for (j, idx) in members.into_iter().enumerate() {
            assignment[j % folds].push(idx);
        }
    }
    assignment
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    input: &Path,
    rank: &str,
    folds: usize,
    runs: usize,
    rule: &str,
    flags: &FitFlags,
    out: &Path,
) -> CliResult<()> {
    if folds < 2 {
        return Err(CliError::Usage(format!("need at least 2 folds, got {folds}")));
    }
    if runs == 0 {
        return Err(CliError::Usage("need at least 1 run".into()));
    }
    let file: TensorFile = read_json(input)?;
    let (y, file_levels) = file.to_ordinal()?;
    let levels = resolve_levels(flags.levels, file_levels)?;
    let rank = parse_rank(rank)?;
    let family = parse_family(&flags.link)?;
    let rule: PredictionRule = rule.parse().map_err(CliError::usage)?;
    let initial = match &flags.cutoffs {
        Some(s) => Some(parse_cutoffs(s)?),
        None => None,
    };
    if y.observed_count() < 2 * folds {
        return Err(CliError::Data(format!(
            "only {} observed entries for {folds}-fold cross-validation",
            y.observed_count()
        )));
    }

    let mut rows = Vec::new();
    for run in 0..runs {
        let split = stratified_folds(&y, levels, folds, flags.seed.wrapping_add(run as u64));
        for (fold_id, fold) in split.iter().enumerate() {
            if fold.is_empty() {
                return Err(CliError::Data(format!(
                    "fold {fold_id} is empty; too few observations for {folds} folds"
                )));
            }
            let mut train_mask = y.mask().to_vec();
            for &i in fold {
                train_mask[i] = false;
            }
            let mut test_mask = vec![false; y.len()];
            for &i in fold {
                test_mask[i] = true;
            }
            let y_train = y.with_mask(train_mask).map_err(CliError::data)?;
            let y_test = y.with_mask(test_mask).map_err(CliError::data)?;

            let mut opts = fit_options(flags)?;
            opts.seed = flags.seed.wrapping_add((run * folds + fold_id) as u64);
            let res = fit(
                &y_train,
                &rank,
                family,
                flags.sigma,
                levels,
                &opts,
                initial.as_deref(),
            )
            .map_err(CliError::usage)?;
            let predicted = predict_labels(&res.theta_hat, &res.link_spec(), rule);

            rows.push(FoldRow {
                run,
                fold: fold_id,
                n_train: y_train.observed_count(),
                n_test: y_test.observed_count(),
                mad_train: mad(&predicted, &y_train).map_err(CliError::data)?,
                mcr_train: mcr(&predicted, &y_train).map_err(CliError::data)?,
                mad_test: mad(&predicted, &y_test).map_err(CliError::data)?,
                mcr_test: mcr(&predicted, &y_test).map_err(CliError::data)?,
            });
        }
    }

    let mut csv = String::from("run,fold,n_train,n_test,mad_train,mcr_train,mad_test,mcr_test\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.run, r.fold, r.n_train, r.n_test, r.mad_train, r.mcr_train, r.mad_test, r.mcr_test
        ));
    }
    let stats = |get: &dyn Fn(&FoldRow) -> f64| -> (f64, f64) {
        let n = rows.len() as f64;
        let mean = rows.iter().map(&get).sum::<f64>() / n;
        let var = rows.iter().map(|r| (get(r) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    };
    let (mad_tr_m, mad_tr_se) = stats(&|r| r.mad_train);
    let (mcr_tr_m, mcr_tr_se) = stats(&|r| r.mcr_train);
    let (mad_te_m, mad_te_se) = stats(&|r| r.mad_test);
    let (mcr_te_m, mcr_te_se) = stats(&|r| r.mcr_test);
    csv.push_str(&format!(
        "summary,mean,,,{mad_tr_m},{mcr_tr_m},{mad_te_m},{mcr_te_m}\n"
    ));
    csv.push_str(&format!(
        "summary,stderr,,,{mad_tr_se},{mcr_tr_se},{mad_te_se},{mcr_te_se}\n"
    ));
    write_text(out, &csv)?;
    println!("{}", out.display());
    eprintln!(
        "cv: held-out MAD {mad_te_m:.4} (se {mad_te_se:.4}), MCR {mcr_te_m:.4} (se {mcr_te_se:.4})"
    );
    Ok(())
}
