//! Block alternating maximum-likelihood estimation of a low-Tucker-rank
//! signal tensor from ordinal observations, with BIC rank selection,
//! label prediction, and a continuous Tucker baseline.
//!
//! One outer iteration sweeps the blocks in order `M_1..M_K`, core, then
//! the cut-offs (when estimated). Each block takes a few projected
//! gradient ascent steps with a backtracking (halving) line search along
//! the normalized block gradient; a candidate that fails the sufficient
//! increase test is discarded, so the objective trace is non-decreasing
//! by construction. Feasibility `||Theta||_inf <= alpha` is restored by
//! rescaling the core (rescaling preserves the Tucker rank, entrywise
//! clipping would not); cut-offs are projected onto the ordered set with
//! minimum gap `delta` and bound `beta` by pool-adjacent-violators plus a
//! bound-respecting clamp. Factors are re-orthonormalized by QR after
//! every factor update, with R absorbed into the core so the composition
//! is unchanged.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::likelihood::{
    entry_cutoff_grad, entry_loglik, entry_score, log_likelihood, OrdinalTensor,
};
use crate::link::{default_cutoffs, LinkFamily, LinkSpec};
use crate::tensor::{
    hosvd, mode_multiply, qr_thin, refold, top_left_singular_vectors, unfold, DenseTensor,
    TuckerFactors,
};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
const GRAD_EPS: f64 = 1e-12;

/// How the blocks are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// HOSVD of a surrogate continuous tensor (observed labels centered
    /// to mean zero, missing entries zero).
    HosvdWarmStart,
    /// Haar-random factors and a Gaussian core, drawn from the seed.
    Random,
}

/// Tuning knobs of the estimator; `new` fills in the defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Entrywise bound on the signal tensor.
    pub alpha: f64,
    /// Bound on the cut-off magnitudes (default `2 * alpha`).
    pub beta: f64,
    /// Minimum gap between consecutive cut-offs.
    pub delta: f64,
    pub max_outer_iters: usize,
    /// Gradient steps per block per outer iteration.
    pub inner_steps: usize,
    /// Relative objective-change stopping threshold.
    pub tol: f64,
    pub seed: u64,
    /// Jointly estimate the cut-offs.
    pub estimate_cutoffs: bool,
    /// Report the signal centered to zero total sum, shifting the
    /// cut-offs accordingly (the identifiability normalization for the
    /// unknown-cut-off problem).
    pub identifiability_centering: bool,
    pub init: InitStrategy,
}

impl FitOptions {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            beta: 2.0 * alpha,
            delta: 1e-3,
            max_outer_iters: 200,
            inner_steps: 5,
            tol: 1e-6,
            seed: 0,
            estimate_cutoffs: false,
            identifiability_centering: false,
            init: InitStrategy::HosvdWarmStart,
        }
    }

    /// Turns joint cut-off estimation on (with the centering that makes
    /// the pair identifiable) or off.
    pub fn with_estimated_cutoffs(mut self, on: bool) -> Self {
        self.estimate_cutoffs = on;
        self.identifiability_centering = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, levels: usize) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::invalid("alpha must be positive and finite"));
        }
        if [self.beta, self.delta, self.tol]
            .iter()
            .any(|v| !v.is_finite() || *v <= 0.0)
        {
            return Err(Error::invalid("beta, delta, and tol must be positive"));
        }
        if self.inner_steps == 0 || self.max_outer_iters == 0 {
            return Err(Error::invalid(
                "inner_steps and max_outer_iters must be at least 1",
            ));
        }
        if (levels as f64 - 2.0) * self.delta > 2.0 * self.beta {
            return Err(Error::invalid(
                "cut-off feasible set is empty: (L-2)*delta exceeds 2*beta",
            ));
        }
        Ok(())
    }
}

/// Output of [`fit`]: the estimated Tucker representation, the (possibly
/// centered) signal tensor, cut-offs, and convergence metadata.
///
/// With identifiability centering the reported `theta_hat` equals the
/// composition of `factors` minus its grand mean, and `cutoffs_hat` live
/// in the same centered frame.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub factors: TuckerFactors,
    pub theta_hat: DenseTensor,
    pub cutoffs_hat: Vec<f64>,
    /// Objective after initialization and after each outer iteration;
    /// non-decreasing.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
    pub family: LinkFamily,
    pub sigma: f64,
}

impl FitResult {
    /// Link spec matching the fitted cut-offs.
    pub fn link_spec(&self) -> LinkSpec {
        LinkSpec::new(self.family, self.sigma, self.cutoffs_hat.clone())
            .expect("fitted cut-offs are valid")
    }
}

/// Maximizes the ordinal log-likelihood over the rank-constrained,
/// entrywise-bounded parameter set (and the ordered cut-off set when
/// `opts.estimate_cutoffs`): see the module docs for the block scheme.
pub fn fit(
    y: &OrdinalTensor,
    rank: &[usize],
    family: LinkFamily,
    sigma: f64,
    levels: usize,
    opts: &FitOptions,
    initial_cutoffs: Option<&[f64]>,
) -> Result<FitResult> {
    let weights: Vec<f64> = y.mask().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    fit_impl(y, weights, rank, family, sigma, levels, opts, initial_cutoffs)
}

/// Like [`fit`], but weights each entry by a draw multiplicity (counts
/// from with-replacement sampling). Entries with count 0 are ignored even
/// if masked observed.
#[allow(clippy::too_many_arguments)]
pub fn fit_weighted(
    y: &OrdinalTensor,
    counts: &[u32],
    rank: &[usize],
    family: LinkFamily,
    sigma: f64,
    levels: usize,
    opts: &FitOptions,
    initial_cutoffs: Option<&[f64]>,
) -> Result<FitResult> {
    if counts.len() != y.len() {
        return Err(Error::shape("counts length != tensor length"));
    }
    let weights: Vec<f64> = y
        .mask()
        .iter()
        .zip(counts)
        .map(|(&m, &c)| if m { c as f64 } else { 0.0 })
        .collect();
    fit_impl(y, weights, rank, family, sigma, levels, opts, initial_cutoffs)
}

#[allow(clippy::too_many_arguments)]
fn fit_impl(
    y: &OrdinalTensor,
    weights: Vec<f64>,
    rank: &[usize],
    family: LinkFamily,
    sigma: f64,
    levels: usize,
    opts: &FitOptions,
    initial_cutoffs: Option<&[f64]>,
) -> Result<FitResult> {
    let dims = y.dims().to_vec();
    if rank.len() != dims.len() {
        return Err(Error::shape(format!(
            "{} ranks for {} dims",
            rank.len(),
            dims.len()
        )));
    }
    for (k, (&r, &d)) in rank.iter().zip(&dims).enumerate() {
        if r == 0 || r > d {
            return Err(Error::RankOutOfRange {
                mode: k,
                rank: r,
                dim: d,
            });
        }
    }
    if levels < 2 {
        return Err(Error::invalid("need at least 2 ordinal levels"));
    }
    opts.validate(levels)?;
    y.validate_levels(levels)?;
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::invalid("no observed entries to fit"));
    }

    let cutoffs = match initial_cutoffs {
        Some(b) => {
            if b.len() != levels - 1 {
                return Err(Error::invalid(format!(
                    "expected {} initial cut-offs, got {}",
                    levels - 1,
                    b.len()
                )));
            }
            if b.windows(2).any(|w| w[1] <= w[0]) || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    "initial cut-offs must be finite and strictly increasing",
                ));
            }
            b.to_vec()
        }
        None => default_cutoffs(family, sigma, levels)?,
    };

    let mut opt = Optimizer::init(
        y, weights, rank, family, sigma, cutoffs, opts,
    )?;

    let mut trace = vec![opt.obj];
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=opts.max_outer_iters {
        let before = opt.obj;
        for k in 0..dims.len() {
            opt.update_factor_block(k)?;
        }
        opt.update_core_block()?;
        if opts.estimate_cutoffs {
            opt.update_cutoff_block();
        }
        trace.push(opt.obj);
        iterations = t;
        if (opt.obj - before).abs() <= opts.tol * before.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    let theta_full = opt.compose();
    let shift = if opt.centered { mean(theta_full.values()) } else { 0.0 };
    let mut theta_hat = theta_full;
    if shift != 0.0 {
        for v in theta_hat.values_mut() {
            *v -= shift;
        }
    }
    let final_objective = *trace.last().expect("trace has the initial value");
    Ok(FitResult {
        factors: TuckerFactors::new(opt.core, opt.factors)?,
        theta_hat,
        cutoffs_hat: opt.cutoffs,
        objective_trace: trace,
        converged,
        iterations,
        final_objective,
        family,
        sigma,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

struct Accepted {
    step: f64,
    scale: f64,
    theta: Vec<f64>,
    obj: f64,
}

pub(crate) struct Optimizer {
    dims: Vec<usize>,
    labels: Vec<u32>,
    weights: Vec<f64>,
    family: LinkFamily,
    sigma: f64,
    alpha: f64,
    beta: f64,
    delta: f64,
    inner_steps: usize,
    centered: bool,
    pub(crate) core: DenseTensor,
    pub(crate) factors: Vec<DMatrix<f64>>,
    pub(crate) cutoffs: Vec<f64>,
    spec: LinkSpec,
    pub(crate) theta: Vec<f64>,
    pub(crate) obj: f64,
}

impl Optimizer {
    fn init(
        y: &OrdinalTensor,
        weights: Vec<f64>,
        rank: &[usize],
        family: LinkFamily,
        sigma: f64,
        mut cutoffs: Vec<f64>,
        opts: &FitOptions,
    ) -> Result<Self> {
        let dims = y.dims().to_vec();
        if opts.estimate_cutoffs {
            cutoffs = project_cutoffs(&cutoffs, opts.beta, opts.delta);
        }
        let spec = LinkSpec::new(family, sigma, cutoffs.clone())?;

        let (core, factors) = match opts.init {
            InitStrategy::HosvdWarmStart => {
                let observed: Vec<f64> = y
                    .labels()
                    .iter()
                    .zip(&weights)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&l, _)| l as f64)
                    .collect();
                let center = mean(&observed);
                let surrogate_values: Vec<f64> = y
                    .labels()
                    .iter()
                    .zip(&weights)
                    .map(|(&l, &w)| if w > 0.0 { l as f64 - center } else { 0.0 })
                    .collect();
                let surrogate = DenseTensor::new(dims.clone(), surrogate_values)?;
                let tf = hosvd(&surrogate, rank)?;
                let (core, factors) = (tf.core().clone(), tf.factors().to_vec());
                (core, factors)
            }
            InitStrategy::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                let normal = |rng: &mut ChaCha8Rng| -> f64 {
                    let u = loop {
                        let u: f64 = rng.random();
                        if u > 0.0 {
                            break u;
                        }
                    };
                    crate::link::family_quantile(LinkFamily::Probit, 1.0, u)
                };
                let core_len: usize = rank.iter().product();
                let core_values: Vec<f64> = (0..core_len).map(|_| normal(&mut rng)).collect();
                let core = DenseTensor::new(rank.to_vec(), core_values)?;
                let factors: Vec<DMatrix<f64>> = dims
                    .iter()
                    .zip(rank)
                    .map(|(&d, &r)| {
                        let g = DMatrix::from_fn(d, r, |_, _| normal(&mut rng));
                        qr_thin(&g).0
                    })
                    .collect();
                (core, factors)
            }
        };

        let mut opt = Self {
            dims,
            labels: y.labels().to_vec(),
            weights,
            family,
            sigma,
            alpha: opts.alpha,
            beta: opts.beta,
            delta: opts.delta,
            inner_steps: opts.inner_steps,
            centered: opts.estimate_cutoffs && opts.identifiability_centering,
            core,
            factors,
            cutoffs,
            spec,
            theta: Vec::new(),
            obj: 0.0,
        };
        opt.theta = opt.compose().into_values();
        opt.ensure_feasible();
        opt.obj = opt.objective_with(&opt.theta, &opt.spec);
        Ok(opt)
    }

    pub(crate) fn compose(&self) -> DenseTensor {
        let mut t = self.core.clone();
        for (k, f) in self.factors.iter().enumerate() {
            t = mode_multiply(&t, f, k).expect("consistent optimizer state");
        }
        t
    }

    fn shift_of(&self, theta: &[f64]) -> f64 {
        if self.centered {
            mean(theta)
        } else {
            0.0
        }
    }

    /// Rescales the core (and the cached composition) when the current
    /// iterate violates the entrywise bound; a no-op on the feasible
    /// iterates the fit loop produces.
    pub(crate) fn ensure_feasible(&mut self) {
        let shift = self.shift_of(&self.theta);
        let inf = self
            .theta
            .iter()
            .fold(0.0f64, |m, &v| m.max((v - shift).abs()));
        if inf > self.alpha * (1.0 + 1e-12) {
            let s = self.alpha / inf;
            self.core.scale(s);
            for v in &mut self.theta {
                *v *= s;
            }
            self.obj = self.objective_with(&self.theta, &self.spec);
        }
    }

    fn objective_with(&self, theta: &[f64], spec: &LinkSpec) -> f64 {
        let shift = self.shift_of(theta);
        let mut acc = 0.0;
        for ((&w, &l), &t) in self.weights.iter().zip(&self.labels).zip(theta) {
            if w > 0.0 {
                acc += w * entry_loglik(spec, t - shift, l);
            }
        }
        acc
    }

    /// Weighted entrywise score at the current iterate, adjusted for the
    /// centering reparameterization when active (the grand-mean term
    /// makes the adjusted gradient dense).
    fn score_values(&self) -> Vec<f64> {
        let shift = self.shift_of(&self.theta);
        let n = self.theta.len();
        let mut g = vec![0.0; n];
        let mut total = 0.0;
        for (((out, &w), &t), &l) in g
            .iter_mut()
            .zip(&self.weights)
            .zip(&self.theta)
            .zip(&self.labels)
        {
            if w > 0.0 {
                let s = w * entry_score(&self.spec, t - shift, l);
                *out = s;
                total += s;
            }
        }
        if self.centered {
            let adj = total / n as f64;
            for v in &mut g {
                *v -= adj;
            }
        }
        g
    }

    /// Backtracking line search along `delta` (the image in signal space
    /// of a unit-norm block direction with directional derivative
    /// `grad_norm`). Each candidate is projected onto the entrywise
    /// bound by rescaling before evaluation.
    fn line_search(&self, delta: &[f64], grad_norm: f64) -> Option<Accepted> {
        let mut step = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let mut cand: Vec<f64> = self
                .theta
                .iter()
                .zip(delta)
                .map(|(&t, &d)| t + step * d)
                .collect();
            let shift = self.shift_of(&cand);
            let inf = cand.iter().fold(0.0f64, |m, &v| m.max((v - shift).abs()));
            let scale = if inf > self.alpha { self.alpha / inf } else { 1.0 };
            if scale != 1.0 {
                for v in &mut cand {
                    *v *= scale;
                }
            }
            let obj = self.objective_with(&cand, &self.spec);
            if obj >= self.obj + ARMIJO_C * step * grad_norm {
                return Some(Accepted {
                    step,
                    scale,
                    theta: cand,
                    obj,
                });
            }
            step *= 0.5;
        }
        None
    }

    /// Composition with mode `skip` left unexpanded (identity factor).
    fn compose_skipping(&self, skip: usize) -> DenseTensor {
        let mut t = self.core.clone();
        for (k, f) in self.factors.iter().enumerate() {
            if k != skip {
                t = mode_multiply(&t, f, k).expect("consistent optimizer state");
            }
        }
        t
    }

    pub(crate) fn update_factor_block(&mut self, k: usize) -> Result<()> {
        self.ensure_feasible();
        let partial = self.compose_skipping(k);
        let mut b_mat = unfold(&partial, k)?; // r_k x prod_{i != k} d_i
        for _ in 0..self.inner_steps {
            let g = DenseTensor::new(self.dims.clone(), self.score_values())?;
            let g_unf = unfold(&g, k)?;
            let grad_m = &g_unf * b_mat.transpose(); // d_k x r_k
            let gn = grad_m.norm();
            if gn <= GRAD_EPS {
                break;
            }
            let dir = grad_m.unscale(gn);
            let delta = refold(&(&dir * &b_mat), k, &self.dims)?;
            match self.line_search(delta.values(), gn) {
                Some(acc) => {
                    self.factors[k] += dir * acc.step;
                    if acc.scale != 1.0 {
                        self.core.scale(acc.scale);
                        b_mat *= acc.scale;
                    }
                    self.theta = acc.theta;
                    self.obj = acc.obj;
                }
                None => break,
            }
        }
        // restore orthonormal columns; R moves into the core so the
        // composition is unchanged
        let (q, r) = qr_thin(&self.factors[k]);
        self.factors[k] = q;
        self.core = mode_multiply(&self.core, &r, k)?;
        Ok(())
    }

    pub(crate) fn update_core_block(&mut self) -> Result<()> {
        self.ensure_feasible();
        for _ in 0..self.inner_steps {
            let g = DenseTensor::new(self.dims.clone(), self.score_values())?;
            let mut grad_core = g;
            for (k, f) in self.factors.iter().enumerate() {
                grad_core = mode_multiply(&grad_core, &f.transpose(), k)?;
            }
            let gn = grad_core.frobenius_norm();
            if gn <= GRAD_EPS {
                break;
            }
            grad_core.scale(1.0 / gn);
            let mut delta = grad_core.clone();
            for (k, f) in self.factors.iter().enumerate() {
                delta = mode_multiply(&delta, f, k)?;
            }
            match self.line_search(delta.values(), gn) {
                Some(acc) => {
                    for (c, d) in self
                        .core
                        .values_mut()
                        .iter_mut()
                        .zip(grad_core.values())
                    {
                        *c = (*c + acc.step * d) * acc.scale;
                    }
                    self.theta = acc.theta;
                    self.obj = acc.obj;
                }
                None => break,
            }
        }
        Ok(())
    }

    pub(crate) fn update_cutoff_block(&mut self) {
        let shift = self.shift_of(&self.theta);
        for _ in 0..self.inner_steps {
            let mut grad = vec![0.0; self.cutoffs.len()];
            for ((&w, &l), &t) in self.weights.iter().zip(&self.labels).zip(&self.theta) {
                if w > 0.0 {
                    entry_cutoff_grad(&self.spec, t - shift, l, w, &mut grad);
                }
            }
            let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gn <= GRAD_EPS {
                break;
            }
            let mut accepted = false;
            let mut step = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let cand: Vec<f64> = self
                    .cutoffs
                    .iter()
                    .zip(&grad)
                    .map(|(&b, &g)| b + step * g / gn)
                    .collect();
                let cand = project_cutoffs(&cand, self.beta, self.delta);
                let spec = LinkSpec::new(self.family, self.sigma, cand.clone())
                    .expect("projection keeps cut-offs valid");
                let obj = self.objective_with(&self.theta, &spec);
                if obj >= self.obj + ARMIJO_C * step * gn {
                    self.cutoffs = cand;
                    self.spec = spec;
                    self.obj = obj;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
}

/// Projects a cut-off vector onto `{b : gaps >= delta, |b| <= beta}`:
/// pool-adjacent-violators on the gap-shifted sequence, then a clamp that
/// walks forward keeping both constraints.
pub(crate) fn project_cutoffs(b: &[f64], beta: f64, delta: f64) -> Vec<f64> {
    let m = b.len();
    // isotonic projection of b_i - i*delta, unit weights
    let mut level: Vec<f64> = b
        .iter()
        .enumerate()
        .map(|(i, &v)| v - i as f64 * delta)
        .collect();
    let mut weight = vec![1.0; m];
    let mut len = 0usize;
    for i in 0..m {
        level[len] = level[i];
        weight[len] = 1.0;
        len += 1;
        while len > 1 && level[len - 2] > level[len - 1] {
            let w = weight[len - 2] + weight[len - 1];
            level[len - 2] = (weight[len - 2] * level[len - 2]
                + weight[len - 1] * level[len - 1])
                / w;
            weight[len - 2] = w;
            len -= 1;
        }
    }
    let mut iso = Vec::with_capacity(m);
    for j in 0..len {
        for _ in 0..weight[j] as usize {
            iso.push(level[j]);
        }
    }
    let mut out = vec![0.0; m];
    let mut prev = f64::NEG_INFINITY;
    for i in 0..m {
        let v = iso[i] + i as f64 * delta;
        let hi = beta - (m - 1 - i) as f64 * delta;
        let lo = -beta;
        let mut x = if prev == f64::NEG_INFINITY { v } else { v.max(prev + delta) };
        x = x.clamp(lo.min(hi), hi);
        out[i] = x;
        prev = x;
    }
    out
}

/// Effective parameter count `sum_k (d_k - r_k) r_k + prod_k r_k`.
pub fn effective_params(dims: &[usize], rank: &[usize]) -> usize {
    dims.iter()
        .zip(rank)
        .map(|(&d, &r)| (d - r) * r)
        .sum::<usize>()
        + rank.iter().product::<usize>()
}

/// BIC from an already-computed log-likelihood.
pub fn bic_value(objective: f64, dims: &[usize], rank: &[usize]) -> f64 {
    let n: usize = dims.iter().product();
    -2.0 * objective + effective_params(dims, rank) as f64 * (n as f64).ln()
}

/// BIC of a fitted model on `y`: `-2 L + p_e(r) log(prod_k d_k)`, with the
/// log-likelihood recomputed at the reported estimate.
pub fn bic_score(y: &OrdinalTensor, fit: &FitResult, rank: &[usize]) -> Result<f64> {
    let spec = fit.link_spec();
    let obj = log_likelihood(y, &fit.theta_hat, &spec)?;
    Ok(bic_value(obj, y.dims(), rank))
}

/// One row of the BIC rank-selection table.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSelection {
    pub rank: Vec<usize>,
    pub objective: f64,
    pub p_e: usize,
    pub bic: f64,
}

/// Index of the best row: smallest BIC, ties broken toward smaller `p_e`,
/// then lexicographically smaller rank.
pub(crate) fn pick_best(rows: &[RankSelection]) -> usize {
    let mut best = 0;
    for i in 1..rows.len() {
        let a = &rows[i];
        let b = &rows[best];
        let better = match a.bic.partial_cmp(&b.bic).expect("finite BIC") {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => match a.p_e.cmp(&b.p_e) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => a.rank < b.rank,
            },
        };
        if better {
            best = i;
        }
    }
    best
}

/// Fits every rank in the grid with the same seed and returns the
/// BIC-minimizing rank together with the full table (in grid order).
#[allow(clippy::too_many_arguments)]
pub fn select_rank_bic(
    y: &OrdinalTensor,
    rank_grid: &[Vec<usize>],
    family: LinkFamily,
    sigma: f64,
    levels: usize,
    opts: &FitOptions,
    initial_cutoffs: Option<&[f64]>,
) -> Result<(Vec<usize>, Vec<RankSelection>)> {
    if rank_grid.is_empty() {
        return Err(Error::invalid("rank grid must be non-empty"));
    }
    let mut rows = Vec::with_capacity(rank_grid.len());
    for rank in rank_grid {
        let fitted = fit(y, rank, family, sigma, levels, opts, initial_cutoffs)?;
        let spec = fitted.link_spec();
        let objective = log_likelihood(y, &fitted.theta_hat, &spec)?;
        rows.push(RankSelection {
            rank: rank.clone(),
            objective,
            p_e: effective_params(y.dims(), rank),
            bic: bic_value(objective, y.dims(), rank),
        });
    }
    let best = pick_best(&rows);
    Ok((rows[best].rank.clone(), rows))
}

/// Label prediction rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionRule {
    /// Most likely label; ties (within 1e-12) resolve to the smallest level.
    Mode,
    /// Smallest level whose cumulative probability reaches 1/2; equals
    /// the noise-free quantization of theta for symmetric links.
    Median,
}

impl std::str::FromStr for PredictionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mode" => Ok(PredictionRule::Mode),
            "median" => Ok(PredictionRule::Median),
            other => Err(Error::invalid(format!(
                "unknown prediction rule '{other}' (expected 'mode' or 'median')"
            ))),
        }
    }
}

/// Predicts a fully observed label tensor from a signal tensor.
pub fn predict_labels(theta: &DenseTensor, spec: &LinkSpec, rule: PredictionRule) -> OrdinalTensor {
    let levels = spec.levels();
    let labels: Vec<u32> = theta
        .values()
        .iter()
        .map(|&t| match rule {
            PredictionRule::Mode => {
                let mut best_level = 1u32;
                let mut best_p = spec.category_prob(t, 1).expect("level valid");
                for l in 2..=levels {
                    let p = spec.category_prob(t, l).expect("level valid");
                    if p > best_p + 1e-12 {
                        best_p = p;
                        best_level = l as u32;
                    }
                }
                best_level
            }
            PredictionRule::Median => {
                let mut label = levels as u32;
                for l in 1..levels {
                    if spec.cumulative_prob(t, l).expect("level valid") >= 0.5 {
                        label = l as u32;
                        break;
                    }
                }
                label
            }
        })
        .collect();
    OrdinalTensor::full(theta.dims().to_vec(), labels).expect("dims match")
}

/// Least-squares Tucker approximation of the raw label values (missing
/// entries imputed with the observed mean), refined by alternating
/// subspace iteration: 50 sweeps or relative squared-error change below
/// 1e-8. Returns the reconstruction.
pub fn continuous_tucker_fit(y: &OrdinalTensor, rank: &[usize]) -> Result<DenseTensor> {
    let (tf, _) = hooi_label_fit(y, rank)?;
    Ok(tf.compose())
}

pub(crate) fn hooi_label_fit(
    y: &OrdinalTensor,
    rank: &[usize],
) -> Result<(TuckerFactors, Vec<f64>)> {
    let dims = y.dims().to_vec();
    for (k, (&r, &d)) in rank.iter().zip(&dims).enumerate() {
        if r == 0 || r > d {
            return Err(Error::RankOutOfRange {
                mode: k,
                rank: r,
                dim: d,
            });
        }
    }
    let observed: Vec<f64> = y
        .labels()
        .iter()
        .zip(y.mask())
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l as f64)
        .collect();
    if observed.is_empty() {
        return Err(Error::invalid("no observed entries to fit"));
    }
    let fill = mean(&observed);
    let values: Vec<f64> = y
        .labels()
        .iter()
        .zip(y.mask())
        .map(|(&l, &m)| if m { l as f64 } else { fill })
        .collect();
    let x = DenseTensor::new(dims.clone(), values)?;

    let init = hosvd(&x, rank)?;
    let mut factors = init.factors().to_vec();
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..50 {
        for k in 0..dims.len() {
            let mut w = x.clone();
            for (i, f) in factors.iter().enumerate() {
                if i != k {
                    w = mode_multiply(&w, &f.transpose(), i)?;
                }
            }
            factors[k] = top_left_singular_vectors(&unfold(&w, k)?, rank[k]);
        }
        let mut core = x.clone();
        for (k, f) in factors.iter().enumerate() {
            core = mode_multiply(&core, &f.transpose(), k)?;
        }
        let recon = TuckerFactors::new(core, factors.clone())?.compose();
        let err: f64 = recon
            .values()
            .iter()
            .zip(x.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        trace.push(err);
        if (prev - err).abs() <= 1e-8 * prev.abs().max(1e-300) {
            break;
        }
        prev = err;
    }
    let mut core = x.clone();
    for (k, f) in factors.iter().enumerate() {
        core = mode_multiply(&core, &f.transpose(), k)?;
    }
    Ok((TuckerFactors::new(core, factors)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{quantize_latent, quantize_noiseless, simulate_signal};
    use crate::tensor::orthonormality_defect;

    fn probit(levels: usize) -> LinkSpec {
        LinkSpec::with_default_cutoffs(LinkFamily::Probit, 1.0, levels).unwrap()
    }

    fn simulated_instance(
        d: usize,
        r: usize,
        alpha: f64,
        levels: usize,
        seed: u64,
    ) -> (DenseTensor, OrdinalTensor, LinkSpec) {
        let dims = vec![d, d, d];
        let rank = vec![r, r, r];
        let spec = probit(levels);
        let (_, theta) = simulate_signal(&dims, &rank, Some(alpha), seed).unwrap();
        let y = quantize_latent(&theta, &spec, seed + 10_000);
        (theta, y, spec)
    }

    #[test]
    fn fit_validates_inputs() {
        let (_, y, _) = simulated_instance(4, 2, 2.0, 3, 1);
        let opts = FitOptions::new(2.0);
        assert!(fit(&y, &[5, 2, 2], LinkFamily::Probit, 1.0, 3, &opts, None).is_err());
        assert!(fit(&y, &[2, 2], LinkFamily::Probit, 1.0, 3, &opts, None).is_err());
        assert!(fit(
            &y,
            &[2, 2, 2],
            LinkFamily::Probit,
            1.0,
            3,
            &opts,
            Some(&[0.5, 0.2])
        )
        .is_err());
        assert!(fit(&y, &[2, 2, 2], LinkFamily::Probit, 1.0, 3, &opts, Some(&[0.5])).is_err());

        let empty = OrdinalTensor::new(vec![2, 2, 2], vec![0; 8], vec![false; 8]).unwrap();
        assert!(fit(&empty, &[1, 1, 1], LinkFamily::Probit, 1.0, 3, &opts, None).is_err());
    }

    #[test]
    fn fit_is_deterministic_and_monotone() {
        let (_, y, _) = simulated_instance(6, 2, 2.0, 3, 2);
        let opts = FitOptions {
            max_outer_iters: 20,
            ..FitOptions::new(2.0)
        };
        let a = fit(&y, &[2, 2, 2], LinkFamily::Probit, 1.0, 3, &opts, None).unwrap();
        let b = fit(&y, &[2, 2, 2], LinkFamily::Probit, 1.0, 3, &opts, None).unwrap();
        assert_eq!(a.objective_trace, b.objective_trace);
        assert_eq!(a.final_objective, b.final_objective);
        for w in a.objective_trace.windows(2) {
            assert!(w[1] >= w[0], "trace must be non-decreasing: {w:?}");
        }
        assert_eq!(a.iterations + 1, a.objective_trace.len());
    }

    #[test]
    fn fit_respects_feasibility() {
        let (_, y, _) = simulated_instance(6, 2, 3.0, 5, 3);
        let opts = FitOptions {
            max_outer_iters: 15,
            ..FitOptions::new(1.5).with_estimated_cutoffs(true)
        };
        let res = fit(&y, &[2, 2, 2], LinkFamily::Probit, 1.0, 5, &opts, None).unwrap();
        assert!(res.theta_hat.infinity_norm() <= 1.5 + 1e-9);
        for w in res.cutoffs_hat.windows(2) {
            assert!(w[1] - w[0] >= opts.delta - 1e-12);
        }
        for b in &res.cutoffs_hat {
            assert!(b.abs() <= opts.beta + 1e-12);
        }
        for f in res.factors.factors() {
            assert!(orthonormality_defect(f) < 1e-8);
        }
        // centered reporting: total sum is (numerically) zero
        let total: f64 = res.theta_hat.values().iter().sum();
        assert!(total.abs() <= 1e-9 * res.theta_hat.len() as f64);
    }

    #[test]
    fn random_init_matches_contracts_too() {
        let (_, y, _) = simulated_instance(5, 1, 2.0, 3, 4);
        let opts = FitOptions {
            init: InitStrategy::Random,
            max_outer_iters: 15,
            seed: 9,
            ..FitOptions::new(2.0)
        };
        let res = fit(&y, &[1, 1, 1], LinkFamily::Probit, 1.0, 3, &opts, None).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(res.theta_hat.infinity_norm() <= 2.0 + 1e-9);
    }

    fn test_optimizer(seed: u64, alpha: f64) -> Optimizer {
        let (_, y, _) = simulated_instance(5, 2, alpha, 3, seed);
        let weights: Vec<f64> = y.mask().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        let opts = FitOptions::new(alpha);
        Optimizer::init(
            &y,
            weights,
            &[2, 2, 2],
            LinkFamily::Probit,
            1.0,
            default_cutoffs(LinkFamily::Probit, 1.0, 3).unwrap(),
            &opts,
        )
        .unwrap()
    }

    #[test]
    fn zero_block_gradient_leaves_block_unchanged() {
        let mut opt = test_optimizer(5, 2.0);
        // a zero core makes every factor-block gradient vanish
        opt.core = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        opt.theta = opt.compose().into_values();
        opt.obj = opt.objective_with(&opt.theta, &opt.spec);
        let before_factor = opt.factors[0].clone();
        let before_obj = opt.obj;
        opt.update_factor_block(0).unwrap();
        assert_eq!(opt.obj, before_obj);
        // QR of an already-orthonormal factor is itself up to fp noise
        let diff = (&opt.factors[0] - &before_factor).norm();
        assert!(diff < 1e-12);
    }

    #[test]
    fn single_core_step_strictly_increases() {
        let mut opt = test_optimizer(6, 2.0);
        opt.inner_steps = 1;
        let g = DenseTensor::new(opt.dims.clone(), opt.score_values()).unwrap();
        let mut grad_core = g;
        for (k, f) in opt.factors.iter().enumerate() {
            grad_core = mode_multiply(&grad_core, &f.transpose(), k).unwrap();
        }
        assert!(grad_core.frobenius_norm() > 1e-6);
        let before = opt.obj;
        opt.update_core_block().unwrap();
        assert!(opt.obj > before);
    }

    #[test]
    fn infeasible_state_is_projected() {
        let mut opt = test_optimizer(7, 1.0);
        // inflate the core so the composition violates the bound by 1.5x
        let inf = opt
            .theta
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        let blow = 1.5 * opt.alpha / inf;
        opt.core.scale(blow);
        opt.theta = opt.compose().into_values();
        opt.obj = opt.objective_with(&opt.theta, &opt.spec);
        let inf_before = opt.theta.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!((inf_before - 1.5 * opt.alpha).abs() < 1e-9);
        opt.update_core_block().unwrap();
        let inf_after = opt.theta.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(inf_after <= opt.alpha + 1e-9);
    }

    #[test]
    fn cutoff_projection_contract() {
        // violates order and gap; projection restores both within bounds
        let b = project_cutoffs(&[0.5, 0.5, -0.2], 2.0, 0.1);
        for w in b.windows(2) {
            assert!(w[1] - w[0] >= 0.1 - 1e-12);
        }
        assert!(b.iter().all(|v| v.abs() <= 2.0 + 1e-12));
        // already-feasible input is unchanged
        let ok = project_cutoffs(&[-1.0, 0.0, 1.0], 2.0, 0.1);
        assert!(ok
            .iter()
            .zip(&[-1.0, 0.0, 1.0])
            .all(|(a, b)| (a - b).abs() < 1e-12));
        // clamp respects gaps near the boundary
        let tight = project_cutoffs(&[5.0, 6.0, 7.0], 1.0, 0.25);
        assert!(tight.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        for w in tight.windows(2) {
            assert!(w[1] - w[0] >= 0.25 - 1e-12);
        }
    }

    #[test]
    fn effective_params_formula() {
        assert_eq!(effective_params(&[20, 20, 20], &[3, 3, 3]), 180);
        assert_eq!(
            effective_params(&[7, 9, 11], &[1, 1, 1]),
            (6 + 8 + 10) + 1
        );
    }

    #[test]
    fn bic_penalty_monotone_in_rank() {
        let obj = -1234.5;
        let dims = [12, 12, 12];
        assert!(bic_value(obj, &dims, &[3, 3, 3]) > bic_value(obj, &dims, &[2, 2, 2]));
    }

    #[test]
    fn pick_best_tie_breaks() {
        let rows = vec![
            RankSelection {
                rank: vec![3, 1, 1],
                objective: -10.0,
                p_e: 30,
                bic: 100.0,
            },
            RankSelection {
                rank: vec![1, 2, 1],
                objective: -10.0,
                p_e: 20,
                bic: 100.0,
            },
            RankSelection {
                rank: vec![1, 1, 2],
                objective: -10.0,
                p_e: 20,
                bic: 100.0,
            },
        ];
        // equal BIC: smaller p_e wins, then lexicographically smaller rank
        assert_eq!(pick_best(&rows), 2);
        let mut with_lower = rows;
        with_lower.push(RankSelection {
            rank: vec![2, 2, 2],
            objective: -5.0,
            p_e: 40,
            bic: 90.0,
        });
        assert_eq!(pick_best(&with_lower), 3);
    }

    #[test]
    fn select_rank_single_element_grid() {
        let (_, y, _) = simulated_instance(5, 1, 2.0, 3, 8);
        let opts = FitOptions {
            max_outer_iters: 10,
            ..FitOptions::new(2.0)
        };
        let (best, table) = select_rank_bic(
            &y,
            &[vec![1, 1, 1]],
            LinkFamily::Probit,
            1.0,
            3,
            &opts,
            None,
        )
        .unwrap();
        assert_eq!(best, vec![1, 1, 1]);
        assert_eq!(table.len(), 1);
        assert!(
            (table[0].bic - bic_value(table[0].objective, y.dims(), &[1, 1, 1])).abs() < 1e-12
        );
        assert!(select_rank_bic(&y, &[], LinkFamily::Probit, 1.0, 3, &opts, None).is_err());
    }

    #[test]
    fn mode_prediction_tie_and_saturation() {
        let spec = probit(5);
        let theta = DenseTensor::new(vec![3], vec![0.0, 100.0, -100.0]).unwrap();
        let modes = predict_labels(&theta, &spec, PredictionRule::Mode);
        // equiprobable levels at zero: smallest level wins the tie
        assert_eq!(modes.labels()[0], 1);
        assert_eq!(modes.labels()[1], 5);
        assert_eq!(modes.labels()[2], 1);
        let medians = predict_labels(&theta, &spec, PredictionRule::Median);
        assert_eq!(medians.labels()[0], 3);
        assert_eq!(medians.labels()[1], 5);
        assert_eq!(medians.labels()[2], 1);
    }

    #[test]
    fn median_equals_noiseless_quantization() {
        let spec = probit(5);
        let (_, theta) = simulate_signal(&[6, 5, 4], &[2, 2, 2], Some(3.0), 11).unwrap();
        let medians = predict_labels(&theta, &spec, PredictionRule::Median);
        let quantized = quantize_noiseless(&theta, &spec);
        assert_eq!(medians.labels(), quantized.labels());
    }

    #[test]
    fn mode_beats_other_levels_generically() {
        let spec = probit(4);
        let theta = DenseTensor::new(vec![1], vec![0.7]).unwrap();
        let label = predict_labels(&theta, &spec, PredictionRule::Mode).labels()[0] as usize;
        for l in 1..=4 {
            assert!(
                spec.category_prob(0.7, label).unwrap()
                    >= spec.category_prob(0.7, l).unwrap() - 1e-12
            );
        }
    }

    #[test]
    fn continuous_fit_exact_on_low_rank() {
        let (_, theta) = simulate_signal(&[7, 6, 5], &[2, 2, 2], Some(2.0), 13).unwrap();
        // shift to positive integers so the "labels" are plausible, then
        // treat the values themselves as a low-rank continuous tensor
        let labels: Vec<u32> = vec![1; theta.len()];
        let y = OrdinalTensor::full(theta.dims().to_vec(), labels).unwrap();
        let rec = continuous_tucker_fit(&y, &[1, 1, 1]).unwrap();
        // all-constant labels: rank-(1,1,1) reproduces them exactly
        assert!(rec.values().iter().all(|&v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn continuous_fit_recovers_exact_label_structure() {
        // labels themselves form an exactly rank-(1,1,1) tensor
        let dims = vec![4, 4, 4];
        let mut labels = Vec::new();
        for k in 0..4u32 {
            for _j in 0..4 {
                for _i in 0..4 {
                    labels.push(if k < 2 { 1 } else { 3 });
                }
            }
        }
        // that tensor is rank-1 along mode 2 only; use full rank to be exact
        let y = OrdinalTensor::full(dims, labels).unwrap();
        let rec = continuous_tucker_fit(&y, &[1, 1, 2]).unwrap();
        for (r, l) in rec.values().iter().zip(y.labels()) {
            assert!((r - *l as f64).abs() < 1e-8);
        }
        assert!(continuous_tucker_fit(&y, &[5, 1, 1]).is_err());
    }

    #[test]
    fn hooi_objective_non_increasing() {
        let spec = probit(5);
        let (_, theta) = simulate_signal(&[8, 8, 8], &[3, 3, 3], Some(2.0), 17).unwrap();
        let y = quantize_latent(&theta, &spec, 18);
        let (_, trace) = hooi_label_fit(&y, &[2, 2, 2]).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "sweep error must not increase: {w:?}");
        }
    }

    #[test]
    fn weighted_fit_runs_and_is_monotone() {
        let (_, y, _) = simulated_instance(5, 1, 2.0, 3, 19);
        let counts: Vec<u32> = (0..y.len() as u32).map(|i| 1 + (i % 3)).collect();
        let opts = FitOptions {
            max_outer_iters: 10,
            ..FitOptions::new(2.0)
        };
        let res = fit_weighted(
            &y,
            &counts,
            &[1, 1, 1],
            LinkFamily::Probit,
            1.0,
            3,
            &opts,
            None,
        )
        .unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}
