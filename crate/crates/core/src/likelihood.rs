//! The ordinal log-likelihood and its exact first and second derivatives
//! in the signal tensor and the cut-off points, over full or masked
//! observations.
//!
//! For an observed entry with label `l` and signal `theta`, the
//! contribution is `log g_l(theta)` with
//! `g_l(theta) = f(b_l - theta) - f(b_{l-1} - theta)`. Probabilities are
//! floored at [`crate::PROB_FLOOR`] before logs and denominators. The
//! Hessian in the signal tensor is diagonal, so only its diagonal is
//! materialized.

use crate::error::{Error, Result};
use crate::link::{floor_prob, LinkSpec};
use crate::tensor::DenseTensor;

/// Order-K array of ordinal labels plus an observation mask.
///
/// `labels[i]` must lie in `1..=L` wherever `mask[i]` is true; a 0 label
/// is permitted only at unobserved cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalTensor {
    dims: Vec<usize>,
    labels: Vec<u32>,
    mask: Vec<bool>,
}

impl OrdinalTensor {
    pub fn new(dims: Vec<usize>, labels: Vec<u32>, mask: Vec<bool>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::invalid("dims must be nonempty and positive"));
        }
        let n: usize = dims.iter().product();
        if labels.len() != n || mask.len() != n {
            return Err(Error::shape(format!(
                "dims {:?} require {} entries, got {} labels and {} mask flags",
                dims,
                n,
                labels.len(),
                mask.len()
            )));
        }
        if labels.iter().zip(&mask).any(|(&l, &m)| m && l == 0) {
            return Err(Error::invalid("observed entries must have labels >= 1"));
        }
        Ok(Self { dims, labels, mask })
    }

    /// Fully observed tensor.
    pub fn full(dims: Vec<usize>, labels: Vec<u32>) -> Result<Self> {
        let n = labels.len();
        Self::new(dims, labels, vec![true; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of observed entries.
    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Restricts the observation mask; the new mask must be a subset of
    /// positions with valid labels.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        Self::new(self.dims.clone(), self.labels.clone(), mask)
    }

    /// Checks every observed label against the level count.
    pub fn validate_levels(&self, levels: usize) -> Result<()> {
        for (&l, &m) in self.labels.iter().zip(&self.mask) {
            if m && (l as usize) > levels {
                return Err(Error::invalid(format!(
                    "observed label {l} exceeds level count {levels}"
                )));
            }
        }
        Ok(())
    }
}

fn check_dims(y: &OrdinalTensor, theta: &DenseTensor) -> Result<()> {
    if y.dims() != theta.dims() {
        return Err(Error::shape(format!(
            "observation dims {:?} != signal dims {:?}",
            y.dims(),
            theta.dims()
        )));
    }
    Ok(())
}

/// Per-entry log-probability of the observed label.
#[inline]
pub(crate) fn entry_loglik(spec: &LinkSpec, theta: f64, label: u32) -> f64 {
    floor_prob(
        spec.category_prob(theta, label as usize)
            .expect("label validated"),
    )
    .ln()
}

/// Per-entry score `g_l'(theta) / g_l(theta)` (floored denominator).
#[inline]
pub(crate) fn entry_score(spec: &LinkSpec, theta: f64, label: u32) -> f64 {
    let level = label as usize;
    let g = floor_prob(spec.category_prob(theta, level).expect("label validated"));
    spec.category_prob_deriv(theta, level) / g
}

/// Per-entry Hessian diagonal `g''/g - (g'/g)^2` (floored denominator).
#[inline]
pub(crate) fn entry_curvature(spec: &LinkSpec, theta: f64, label: u32) -> f64 {
    let level = label as usize;
    let g = floor_prob(spec.category_prob(theta, level).expect("label validated"));
    let gd = spec.category_prob_deriv(theta, level);
    spec.category_prob_second_deriv(theta, level) / g - (gd / g) * (gd / g)
}

/// Adds this entry's cut-off gradient into `out` (length L-1), scaled by
/// `w`. Label `l` touches `b_l` (if interior) and `b_{l-1}` (if present).
#[inline]
pub(crate) fn entry_cutoff_grad(
    spec: &LinkSpec,
    theta: f64,
    label: u32,
    w: f64,
    out: &mut [f64],
) {
    let level = label as usize;
    let g = floor_prob(spec.category_prob(theta, level).expect("label validated"));
    let cutoffs = spec.cutoffs();
    if level <= cutoffs.len() {
        out[level - 1] += w * spec.link_deriv(cutoffs[level - 1] - theta) / g;
    }
    if level >= 2 {
        out[level - 2] -= w * spec.link_deriv(cutoffs[level - 2] - theta) / g;
    }
}

/// Sum of observed log-probabilities; 0 when nothing is observed.
pub fn log_likelihood(y: &OrdinalTensor, theta: &DenseTensor, spec: &LinkSpec) -> Result<f64> {
    check_dims(y, theta)?;
    y.validate_levels(spec.levels())?;
    let mut acc = 0.0;
    for ((&l, &m), &t) in y.labels().iter().zip(y.mask()).zip(theta.values()) {
        if m {
            acc += entry_loglik(spec, t, l);
        }
    }
    Ok(acc)
}

/// Log-likelihood with per-entry multiplicities (draw counts from
/// with-replacement sampling); entries with count 0 are ignored.
pub fn log_likelihood_weighted(
    y: &OrdinalTensor,
    counts: &[u32],
    theta: &DenseTensor,
    spec: &LinkSpec,
) -> Result<f64> {
    check_dims(y, theta)?;
    y.validate_levels(spec.levels())?;
    if counts.len() != y.len() {
        return Err(Error::shape("counts length != tensor length"));
    }
    let mut acc = 0.0;
    for (((&l, &m), &t), &c) in y
        .labels()
        .iter()
        .zip(y.mask())
        .zip(theta.values())
        .zip(counts)
    {
        if m && c > 0 {
            acc += c as f64 * entry_loglik(spec, t, l);
        }
    }
    Ok(acc)
}

/// Entrywise score tensor; zero at unobserved entries. Each entry is
/// bounded in magnitude by the score constant `U_alpha` whenever
/// `|theta| <= alpha`.
pub fn grad_theta(y: &OrdinalTensor, theta: &DenseTensor, spec: &LinkSpec) -> Result<DenseTensor> {
    check_dims(y, theta)?;
    y.validate_levels(spec.levels())?;
    let mut out = DenseTensor::zeros(theta.dims())?;
    for (i, ((&l, &m), &t)) in y
        .labels()
        .iter()
        .zip(y.mask())
        .zip(theta.values())
        .enumerate()
    {
        if m {
            out.values_mut()[i] = entry_score(spec, t, l);
        }
    }
    Ok(out)
}

/// Gradient of the log-likelihood in the cut-off vector, summed over
/// observed entries.
pub fn grad_cutoffs(y: &OrdinalTensor, theta: &DenseTensor, spec: &LinkSpec) -> Result<Vec<f64>> {
    check_dims(y, theta)?;
    y.validate_levels(spec.levels())?;
    let mut out = vec![0.0; spec.levels() - 1];
    for ((&l, &m), &t) in y.labels().iter().zip(y.mask()).zip(theta.values()) {
        if m {
            entry_cutoff_grad(spec, t, l, 1.0, &mut out);
        }
    }
    Ok(out)
}

/// Diagonal of the Hessian in the signal tensor (the Hessian has no
/// off-diagonal terms); zero at unobserved entries, and at most
/// `-L_alpha` at observed ones whenever `|theta| <= alpha`.
pub fn hessian_theta_diag(
    y: &OrdinalTensor,
    theta: &DenseTensor,
    spec: &LinkSpec,
) -> Result<DenseTensor> {
    check_dims(y, theta)?;
    y.validate_levels(spec.levels())?;
    let mut out = DenseTensor::zeros(theta.dims())?;
    for (i, ((&l, &m), &t)) in y
        .labels()
        .iter()
        .zip(y.mask())
        .zip(theta.values())
        .enumerate()
    {
        if m {
            out.values_mut()[i] = entry_curvature(spec, t, l);
        }
    }
    Ok(out)
}
