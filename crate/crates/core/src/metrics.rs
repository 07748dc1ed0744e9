//! Error metrics for signal recovery and label prediction, plus K-means
//! clustering of Tucker principal components.


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::likelihood::OrdinalTensor;
use crate::link::{floor_prob, LinkSpec};
use crate::tensor::{unfold, DenseTensor, TuckerFactors};

fn check_dims(a: &DenseTensor, b: &DenseTensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!(
            "dims {:?} != {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Mean squared error `(1/N) * ||a - b||_F^2`, accumulated with the same
/// summation order as [`weighted_error`] under uniform weights.
pub fn mse(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    check_dims(a, b)?;
    let w = 1.0 / a.len() as f64;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| w * (x - y) * (x - y))
        .sum())
}

/// Relative squared error `||a - b||_F^2 / ||b||_F^2`; `b` is the
/// reference and must be nonzero.
pub fn relative_mse(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    check_dims(a, b)?;
    let denom: f64 = b.values().iter().map(|&v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::invalid("reference tensor is zero"));
    }
    let num: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(num / denom)
}

/// Sampling-weighted squared error `sum_w pi_w * (a_w - b_w)^2`; equals
/// [`mse`] under uniform weights.
pub fn weighted_error(a: &DenseTensor, b: &DenseTensor, pi: &DenseTensor) -> Result<f64> {
    check_dims(a, b)?;
    check_dims(a, pi)?;
    if pi.values().iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::invalid("pi weights must be nonnegative"));
    }
    let total: f64 = pi.values().iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "pi weights must sum to 1 (got {total})"
        )));
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .zip(pi.values())
        .map(|((&x, &y), &w)| w * (x - y) * (x - y))
        .sum())
}

fn joint_observed<'a>(
    a: &'a OrdinalTensor,
    b: &'a OrdinalTensor,
) -> Result<impl Iterator<Item = (u32, u32)> + 'a> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!(
            "dims {:?} != {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(a.labels()
        .iter()
        .zip(a.mask())
        .zip(b.labels().iter().zip(b.mask()))
        .filter(|((_, &ma), (_, &mb))| ma && mb)
        .map(|((&la, _), (&lb, _))| (la, lb)))
}

/// Mean absolute deviation between two label tensors, averaged over the
/// jointly observed entries (all entries under full masks).
pub fn mad(a: &OrdinalTensor, b: &OrdinalTensor) -> Result<f64> {
    let mut count = 0usize;
    let mut acc = 0.0;
    for (la, lb) in joint_observed(a, b)? {
        acc += (la as f64 - lb as f64).abs();
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("no jointly observed entries"));
    }
    Ok(acc / count as f64)
}

/// Misclassification rate between two label tensors over the jointly
/// observed entries.
pub fn mcr(a: &OrdinalTensor, b: &OrdinalTensor) -> Result<f64> {
    let mut count = 0usize;
    let mut wrong = 0usize;
    for (la, lb) in joint_observed(a, b)? {
        if la != lb {
            wrong += 1;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("no jointly observed entries"));
    }
    Ok(wrong as f64 / count as f64)
}

/// Total KL divergence between the entrywise categorical distributions
/// induced by two signal tensors under the same link spec.
pub fn kl_categorical(
    theta_a: &DenseTensor,
    theta_b: &DenseTensor,
    spec: &LinkSpec,
) -> Result<f64> {
    check_dims(theta_a, theta_b)?;
    let mut total = 0.0;
    for (&ta, &tb) in theta_a.values().iter().zip(theta_b.values()) {
        let mut entry = 0.0;
        for level in 1..=spec.levels() {
            let p = floor_prob(spec.category_prob(ta, level)?);
            let q = floor_prob(spec.category_prob(tb, level)?);
            entry += p * (p / q).ln();
        }
        // per-entry KL is nonnegative; the floor can leave ~1e-16 dust
        total += entry.max(0.0);
    }
    Ok(total)
}

/// Summary of recovery and prediction errors for one fitted tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mse: f64,
    pub relative_mse: f64,
    pub mad: f64,
    pub mcr: f64,
    pub kl_total: f64,
    /// Present when a sampling distribution was supplied.
    pub weighted_error: Option<f64>,
}

/// Computes the full metric set for an estimate against the truth. Label
/// metrics compare most-likely-label predictions from both tensors under
/// the same link spec.
pub fn report(
    theta_hat: &DenseTensor,
    theta_true: &DenseTensor,
    spec: &LinkSpec,
    pi: Option<&DenseTensor>,
) -> Result<MetricReport> {
    use crate::estimator::{predict_labels, PredictionRule};
    let labels_hat = predict_labels(theta_hat, spec, PredictionRule::Mode);
    let labels_true = predict_labels(theta_true, spec, PredictionRule::Mode);
    Ok(MetricReport {
        mse: mse(theta_hat, theta_true)?,
        relative_mse: relative_mse(theta_hat, theta_true)?,
        mad: mad(&labels_hat, &labels_true)?,
        mcr: mcr(&labels_hat, &labels_true)?,
        kl_total: kl_categorical(theta_true, theta_hat, spec)?,
        weighted_error: match pi {
            Some(p) => Some(weighted_error(theta_hat, theta_true, p)?),
            None => None,
        },
    })
}

/// Cluster assignment of the mode-`k` slices plus the within-cluster sum
/// of squares of the best restart (for elbow analysis).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub within_ss: f64,
}

/// K-means over the rows of the mode-`mode` principal component matrix
/// `M_mode * C_(mode)` (shape `d_mode x prod_{i != mode} r_i`).
///
/// Lloyd iterations with k-means++ seeding, 50 seeded restarts, at most
/// 100 iterations each; the restart with the lowest within-cluster sum of
/// squares wins.
pub fn cluster_mode(
    factors: &TuckerFactors,
    mode: usize,
    k_clusters: usize,
    seed: u64,
) -> Result<ClusterResult> {
    let dims = factors.dims();
    if mode >= dims.len() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: dims.len(),
        });
    }
    let d_mode = dims[mode];
    if k_clusters == 0 || k_clusters > d_mode {
        return Err(Error::invalid(format!(
            "k_clusters {} out of range 1..={}",
            k_clusters, d_mode
        )));
    }
    let core_unf = unfold(factors.core(), mode)?;
    let pc = factors.factor(mode) * core_unf; // d_mode x prod_other r
    let points: Vec<Vec<f64>> = (0..pc.nrows())
        .map(|i| (0..pc.ncols()).map(|j| pc[(i, j)]).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterResult> = None;
    for _ in 0..50 {
        let restart_seed: u64 = rng.random();
        let (candidate, _) = lloyd_once(&points, k_clusters, restart_seed);
        if best
            .as_ref()
            .map(|b| candidate.within_ss < b.within_ss)
            .unwrap_or(true)
        {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// One seeded k-means++ / Lloyd run; also returns the objective after
/// each iteration (non-increasing unless an empty cluster was re-seeded).
fn lloyd_once(points: &[Vec<f64>], k: usize, seed: u64) -> (ClusterResult, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let dim = points[0].len();

    // k-means++ seeding; falls back to unused points when all remaining
    // distances are zero (duplicate points)
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    centers.push(points[first].clone());
    chosen[first] = true;
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| sq_dist(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            (0..n).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[next] = true;
        centers.push(points[next].clone());
    }

    let mut assignments = vec![0usize; n];
    let mut objective_trace = Vec::new();
    for _ in 0..100 {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            if assignments[i] != best_c {
                assignments[i] = best_c;
                moved = true;
            }
        }
        // recompute centers; re-seed empty clusters from the farthest point
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignments[i]] += 1;
            for (s, &v) in sums[assignments[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[assignments[a]])
                            .partial_cmp(&sq_dist(&points[b], &centers[assignments[b]]))
                            .expect("finite distances")
                    })
                    .expect("nonempty points");
                centers[c] = points[far].clone();
                assignments[far] = c;
                moved = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centers[c][j] = s / counts[c] as f64;
                }
            }
        }
        objective_trace.push(
            points
                .iter()
                .zip(&assignments)
                .map(|(p, &c)| sq_dist(p, &centers[c]))
                .sum(),
        );
        if !moved {
            break;
        }
    }
    let within_ss = *objective_trace.last().expect("at least one iteration");
    (
        ClusterResult {
            assignments,
            within_ss,
        },
        objective_trace,
    )
}
