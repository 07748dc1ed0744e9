//! Seeded generative simulator: random low-rank signal tensors, latent
//! additive-noise quantization, and observation masks under full,
//! Bernoulli, or with-replacement sampling.
//!
//! All randomness flows from an explicit 64-bit seed through a
//! counter-based generator (ChaCha8), and noise is drawn by inverse-CDF
//! so the stream is stable across platforms.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::likelihood::OrdinalTensor;
use crate::link::{family_quantile, LinkSpec};
use crate::tensor::{qr_thin, DenseTensor, TuckerFactors};

/// How observed entries are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPlan {
    /// Every entry observed.
    Full,
    /// Each entry observed independently with probability `rho`.
    BernoulliUniform { rho: f64 },
    /// `draws` indices sampled with replacement from the distribution
    /// `pi_weights` (nonnegative, summing to 1).
    WithReplacement {
        pi_weights: DenseTensor,
        draws: usize,
    },
}

/// Observation mask plus per-entry draw multiplicities.
///
/// For [`SamplingPlan::Full`] and [`SamplingPlan::BernoulliUniform`] the
/// counts are 0/1; with-replacement sampling retains how often each cell
/// was drawn so the likelihood can weight repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSample {
    pub mask: Vec<bool>,
    pub counts: Vec<u32>,
}

/// Uniform draw from the open interval (0, 1).
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Random Tucker signal: core entries iid standard normal, factors drawn
/// from the orthogonal-columns Haar measure (QR of a Gaussian matrix with
/// the R-diagonal sign fix). If `alpha` is given the composition is
/// rescaled so its infinity norm equals `alpha` exactly.
pub fn simulate_signal(
    dims: &[usize],
    rank: &[usize],
    alpha: Option<f64>,
    seed: u64,
) -> Result<(TuckerFactors, DenseTensor)> {
    if rank.len() != dims.len() {
        return Err(Error::shape(format!(
            "{} ranks for {} dims",
            rank.len(),
            dims.len()
        )));
    }
    for (k, (&r, &d)) in rank.iter().zip(dims).enumerate() {
        if r == 0 || r > d {
            return Err(Error::RankOutOfRange {
                mode: k,
                rank: r,
                dim: d,
            });
        }
    }
    if let Some(a) = alpha {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::invalid("alpha rescale target must be positive"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| {
        family_quantile(crate::link::LinkFamily::Probit, 1.0, open_unit(rng))
    };

    let core_len: usize = rank.iter().product();
    let core_values: Vec<f64> = (0..core_len).map(|_| normal(&mut rng)).collect();
    let mut core = DenseTensor::new(rank.to_vec(), core_values)?;

    let mut factors = Vec::with_capacity(dims.len());
    for (&d, &r) in dims.iter().zip(rank) {
        let g = DMatrix::from_fn(d, r, |_, _| normal(&mut rng));
        factors.push(qr_thin(&g).0);
    }
    let tf = TuckerFactors::new(core.clone(), factors.clone())?;
    let mut theta = tf.compose();
    if let Some(a) = alpha {
        let inf = theta.infinity_norm();
        if inf > 0.0 {
            let s = a / inf;
            core.scale(s);
            theta.scale(s);
        }
    }
    Ok((TuckerFactors::new(core, factors)?, theta))
}

/// Draws a latent tensor `theta + noise` and bins it by the cut-offs
/// (`y = l` iff the latent value falls in `(b_{l-1}, b_l]`). The noise law
/// matches the spec's link: logistic with scale sigma, or `N(0, sigma^2)`.
pub fn quantize_latent(theta: &DenseTensor, spec: &LinkSpec, seed: u64) -> OrdinalTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u32> = theta
        .values()
        .iter()
        .map(|&t| {
            let eps = family_quantile(spec.family(), spec.sigma(), open_unit(&mut rng));
            bin_by_cutoffs(t + eps, spec.cutoffs())
        })
        .collect();
    OrdinalTensor::full(theta.dims().to_vec(), labels).expect("dims match by construction")
}

/// Noise-free quantization (the sigma -> 0 limit): bins `theta` itself.
pub fn quantize_noiseless(theta: &DenseTensor, spec: &LinkSpec) -> OrdinalTensor {
    let labels: Vec<u32> = theta
        .values()
        .iter()
        .map(|&t| bin_by_cutoffs(t, spec.cutoffs()))
        .collect();
    OrdinalTensor::full(theta.dims().to_vec(), labels).expect("dims match by construction")
}

#[inline]
fn bin_by_cutoffs(latent: f64, cutoffs: &[f64]) -> u32 {
    let mut label = 1u32;
    for &b in cutoffs {
        if latent > b {
            label += 1;
        } else {
            break;
        }
    }
    label
}

/// Samples an observation mask for the given dimensions.
pub fn sample_mask(dims: &[usize], plan: &SamplingPlan, seed: u64) -> Result<MaskSample> {
    let n: usize = dims.iter().product();
    if n == 0 {
        return Err(Error::invalid("dims must be nonempty and positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match plan {
        SamplingPlan::Full => Ok(MaskSample {
            mask: vec![true; n],
            counts: vec![1; n],
        }),
        SamplingPlan::BernoulliUniform { rho } => {
            if !rho.is_finite() || *rho <= 0.0 || *rho > 1.0 {
                return Err(Error::invalid(format!(
                    "rho must lie in (0, 1], got {rho}"
                )));
            }
            let mut mask = vec![false; n];
            let mut counts = vec![0u32; n];
            for i in 0..n {
                if rng.random::<f64>() < *rho {
                    mask[i] = true;
                    counts[i] = 1;
                }
            }
            Ok(MaskSample { mask, counts })
        }
        SamplingPlan::WithReplacement { pi_weights, draws } => {
            if pi_weights.len() != n {
                return Err(Error::shape(format!(
                    "pi has {} entries but dims {:?} require {}",
                    pi_weights.len(),
                    dims,
                    n
                )));
            }
            if *draws == 0 {
                return Err(Error::invalid("draw count must be at least 1"));
            }
            if pi_weights.values().iter().any(|&w| w < 0.0 || !w.is_finite()) {
                return Err(Error::invalid("pi weights must be nonnegative"));
            }
            let total: f64 = pi_weights.values().iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "pi weights must sum to 1 (got {total})"
                )));
            }
            // cumulative table + binary search per draw
            let mut cum = Vec::with_capacity(n);
            let mut acc = 0.0;
            for &w in pi_weights.values() {
                acc += w;
                cum.push(acc);
            }
            let mut counts = vec![0u32; n];
            for _ in 0..*draws {
                let u: f64 = rng.random::<f64>() * acc;
                let idx = cum.partition_point(|&c| c < u).min(n - 1);
                counts[idx] += 1;
            }
            let mask = counts.iter().map(|&c| c > 0).collect();
            Ok(MaskSample { mask, counts })
        }
    }
}
