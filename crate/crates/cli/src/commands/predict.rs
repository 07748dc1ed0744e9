//! `predict`: label predictions from a stored fit result.

use std::path::Path;

use ordtensor::estimator::{predict_labels, PredictionRule};
use ordtensor::link::LinkSpec;
use ordtensor::tensor::DenseTensor;

use crate::commands::parse_family;
use crate::error::{CliError, CliResult};
use crate::io::{read_json, write_json, FitResultFile, TensorFile};

pub fn run(input: &Path, rule: &str, out: &Path) -> CliResult<()> {
    let fit: FitResultFile = read_json(input)?;
    let rule: PredictionRule = rule.parse().map_err(CliError::usage)?;
    let family = parse_family(&fit.family)?;
    let spec = LinkSpec::new(family, fit.sigma, fit.cutoffs.clone()).map_err(CliError::data)?;
    if spec.levels() != fit.levels {
        return Err(CliError::Data(format!(
            "fit file declares {} levels but has {} cut-offs",
            fit.levels,
            fit.cutoffs.len()
        )));
    }
    let theta = DenseTensor::new(fit.dims.clone(), fit.theta.clone()).map_err(CliError::data)?;
    let labels = predict_labels(&theta, &spec, rule);
    write_json(out, &TensorFile::from_ordinal(&labels, fit.levels))?;
    println!("{}", out.display());
    Ok(())
}
