//! `simulate`: generate a truth tensor, quantized observations, and a
//! manifest, all determined by the config's seed.

use std::path::Path;

use serde::Serialize;

use ordtensor::datagen::{quantize_latent, sample_mask, simulate_signal, SamplingPlan};
use ordtensor::link::LinkSpec;
use ordtensor::tensor::DenseTensor;

use crate::commands::parse_family;
use crate::error::{CliError, CliResult};
use crate::io::{read_json, write_json, SamplingConfig, SimulateConfig, TensorFile};

#[derive(Serialize)]
struct Manifest {
    config: SimulateConfig,
    cutoffs: Vec<f64>,
    truth_file: String,
    observed_file: String,
    observed_count: usize,
    total_entries: usize,
}

pub fn run(config_path: &Path, out_dir: &Path) -> CliResult<()> {
    let config: SimulateConfig = read_json(config_path)?;
    let family = parse_family(&config.link)?;
    let spec = LinkSpec::with_default_cutoffs(family, config.sigma, config.levels)
        .map_err(CliError::usage)?;

    let (_, theta) = simulate_signal(&config.dims, &config.rank, Some(config.alpha), config.seed)
        .map_err(CliError::usage)?;
    let y_full = quantize_latent(&theta, &spec, config.seed.wrapping_add(1_000_003));

    let plan = match &config.sampling {
        SamplingConfig::Full => SamplingPlan::Full,
        SamplingConfig::Bernoulli { rho } => SamplingPlan::BernoulliUniform { rho: *rho },
        SamplingConfig::WithReplacement { draws, pi_dense } => {
            let n: usize = config.dims.iter().product();
            let weights = match pi_dense {
                Some(w) => w.clone(),
                None => vec![1.0 / n as f64; n],
            };
            let pi = DenseTensor::new(config.dims.clone(), weights).map_err(CliError::usage)?;
            SamplingPlan::WithReplacement {
                pi_weights: pi,
                draws: *draws,
            }
        }
    };
    let mask = sample_mask(&config.dims, &plan, config.seed.wrapping_add(2_000_003))
        .map_err(CliError::usage)?;
    let y = y_full.with_mask(mask.mask).map_err(CliError::usage)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let truth_name = format!("{}_truth.json", config.output_prefix);
    let observed_name = format!("{}_observed.json", config.output_prefix);
    let manifest_name = format!("{}_manifest.json", config.output_prefix);

    write_json(&out_dir.join(&truth_name), &TensorFile::from_dense(&theta))?;
    write_json(
        &out_dir.join(&observed_name),
        &TensorFile::from_ordinal(&y, config.levels),
    )?;
    let manifest = Manifest {
        cutoffs: spec.cutoffs().to_vec(),
        truth_file: truth_name.clone(),
        observed_file: observed_name.clone(),
        observed_count: y.observed_count(),
        total_entries: y.len(),
        config,
    };
    write_json(&out_dir.join(&manifest_name), &manifest)?;

    println!("{}", out_dir.join(truth_name).display());
    println!("{}", out_dir.join(observed_name).display());
    println!("{}", out_dir.join(manifest_name).display());
    Ok(())
}
