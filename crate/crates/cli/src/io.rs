//! File schemas: tensors and fit results as JSON, configs for the
//! simulate and experiment commands.
//!
//! A tensor file holds `dims`, optionally `levels` (ordinal data), and
//! `entries` in one of two forms: `dense` (flat array, first index
//! fastest; for ordinal data a 0 marks an unobserved cell) or `long`
//! (records `{index, value}` with 1-based indices; absent cells are
//! unobserved). Writers pick dense when at least half the cells are
//! observed, long otherwise; readers accept both.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ordtensor::likelihood::OrdinalTensor;
use ordtensor::tensor::DenseTensor;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongEntry {
    pub index: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorEntries {
    Dense(Vec<f64>),
    Long(Vec<LongEntry>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    pub entries: TensorEntries,
}

impl TensorFile {
    pub fn from_dense(t: &DenseTensor) -> Self {
        Self {
            dims: t.dims().to_vec(),
            levels: None,
            entries: TensorEntries::Dense(t.values().to_vec()),
        }
    }

    pub fn from_ordinal(y: &OrdinalTensor, levels: usize) -> Self {
        let observed = y.observed_count();
        let entries = if 2 * observed >= y.len() {
            let dense = y
                .labels()
                .iter()
                .zip(y.mask())
                .map(|(&l, &m)| if m { l as f64 } else { 0.0 })
                .collect();
            TensorEntries::Dense(dense)
        } else {
            let strides = strides_of(y.dims());
            let long = (0..y.len())
                .filter(|&i| y.mask()[i])
                .map(|i| LongEntry {
                    index: unflatten(i, y.dims(), &strides),
                    value: y.labels()[i] as f64,
                })
                .collect();
            TensorEntries::Long(long)
        };
        Self {
            dims: y.dims().to_vec(),
            levels: Some(levels),
            entries,
        }
    }

    /// Ordinal view; requires `levels` and integer labels in range.
    pub fn to_ordinal(&self) -> CliResult<(OrdinalTensor, usize)> {
        let levels = self.levels.ok_or_else(|| {
            CliError::Data("ordinal tensor file must declare 'levels'".into())
        })?;
        if levels < 2 {
            return Err(CliError::Data(format!("levels must be >= 2, got {levels}")));
        }
        let n: usize = self.dims.iter().product();
        let mut labels = vec![0u32; n];
        let mut mask = vec![false; n];
        match &self.entries {
            TensorEntries::Dense(v) => {
                if v.len() != n {
                    return Err(CliError::Data(format!(
                        "dense entries have length {} but dims {:?} require {}",
                        v.len(),
                        self.dims,
                        n
                    )));
                }
                for (i, &val) in v.iter().enumerate() {
                    if val == 0.0 {
                        continue; // unobserved sentinel
                    }
                    labels[i] = parse_label(val, levels)?;
                    mask[i] = true;
                }
            }
            TensorEntries::Long(entries) => {
                let strides = strides_of(&self.dims);
                for e in entries {
                    let i = self.flatten(&e.index, &strides)?;
                    if mask[i] {
                        return Err(CliError::Data(format!(
                            "duplicate long-form index {:?}",
                            e.index
                        )));
                    }
                    labels[i] = parse_label(e.value, levels)?;
                    mask[i] = true;
                }
            }
        }
        let y = OrdinalTensor::new(self.dims.clone(), labels, mask).map_err(CliError::data)?;
        Ok((y, levels))
    }

    fn flatten(&self, index: &[usize], strides: &[usize]) -> CliResult<usize> {
        if index.len() != self.dims.len() {
            return Err(CliError::Data(format!(
                "index {:?} has {} coordinates, expected {}",
                index,
                index.len(),
                self.dims.len()
            )));
        }
        let mut flat = 0;
        for ((&i, &d), &s) in index.iter().zip(&self.dims).zip(strides) {
            if i < 1 || i > d {
                return Err(CliError::Data(format!(
                    "1-based index {:?} out of range for dims {:?}",
                    index, self.dims
                )));
            }
            flat += (i - 1) * s;
        }
        Ok(flat)
    }
}

fn parse_label(value: f64, levels: usize) -> CliResult<u32> {
    let rounded = value.round();
    if (value - rounded).abs() > 1e-9 || rounded < 1.0 || rounded > levels as f64 {
        return Err(CliError::Data(format!(
            "ordinal value {value} is not an integer label in 1..={levels}"
        )));
    }
    Ok(rounded as u32)
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(dims.len());
    let mut acc = 1;
    for &d in dims {
        s.push(acc);
        acc *= d;
    }
    s
}

fn unflatten(mut flat: usize, dims: &[usize], _strides: &[usize]) -> Vec<usize> {
    let mut idx = Vec::with_capacity(dims.len());
    for &d in dims {
        idx.push(flat % d + 1);
        flat /= d;
    }
    idx
}

/// Everything a fit produces, sufficient to reproduce predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResultFile {
    pub dims: Vec<usize>,
    pub rank: Vec<usize>,
    pub family: String,
    pub sigma: f64,
    pub levels: usize,
    pub alpha: f64,
    pub seed: u64,
    pub estimate_cutoffs: bool,
    pub cutoffs: Vec<f64>,
    /// Flat signal estimate, first index fastest.
    pub theta: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub p_e: usize,
    pub bic: f64,
}

/// Sampling block of the simulate config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingConfig {
    Full,
    Bernoulli { rho: f64 },
    WithReplacement {
        draws: usize,
        #[serde(default)]
        pi_dense: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub dims: Vec<usize>,
    pub rank: Vec<usize>,
    pub alpha: f64,
    pub link: String,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub levels: usize,
    pub sampling: SamplingConfig,
    pub seed: u64,
    #[serde(default = "default_prefix")]
    pub output_prefix: String,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_prefix() -> String {
    "sim".into()
}

/// Base parameters of an experiment run; the sweep axis overrides one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentBase {
    pub d: usize,
    pub rank: usize,
    pub alpha: f64,
    pub link: String,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub levels: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub estimate_cutoffs: bool,
}

fn default_rho() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct FitTuning {
    #[serde(default)]
    pub max_outer_iters: Option<usize>,
    #[serde(default)]
    pub inner_steps: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// One of `d`, `alpha`, `rho`, `levels` (alias `L`).
    pub axis: String,
    pub values: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub output: String,
    pub base: ExperimentBase,
    #[serde(default)]
    pub fit: FitTuning,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("cannot parse {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, text + "\n")
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}
