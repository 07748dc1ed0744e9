//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `--nocapture` to see them as they complete).
//!
//! Heavier criteria parallelize replicates over a worker pool; every
//! replicate derives its own seed, so results do not depend on the
//! schedule.

use ordtensor::datagen::{quantize_latent, sample_mask, simulate_signal, SamplingPlan};
use ordtensor::estimator::{
    continuous_tucker_fit, fit, predict_labels, select_rank_bic, FitOptions, FitResult,
    InitStrategy, PredictionRule,
};
use ordtensor::likelihood::{
    grad_cutoffs, grad_theta, hessian_theta_diag, log_likelihood, OrdinalTensor,
};
use ordtensor::link::{LinkFamily, LinkSpec};
use ordtensor::metrics::{cluster_mode, kl_categorical, mcr, relative_mse, weighted_error};
use ordtensor::tensor::{DenseTensor, TuckerFactors};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {id:02} {name}: {verdict} ({detail})");
    assert!(pass, "ACCEPTANCE {id:02} {name}: FAIL ({detail})");
}

/// Uniform entries in [-bound, bound].
fn random_theta(dims: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> DenseTensor {
    let n: usize = dims.iter().product();
    let values = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    DenseTensor::new(dims.to_vec(), values).unwrap()
}

/// Labels drawn from the model at each entry.
fn model_labels(theta: &DenseTensor, spec: &LinkSpec, rng: &mut ChaCha8Rng) -> OrdinalTensor {
    let labels: Vec<u32> = theta
        .values()
        .iter()
        .map(|&t| {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            for l in 1..=spec.levels() {
                cum += spec.category_prob(t, l).unwrap();
                if u <= cum {
                    return l as u32;
                }
            }
            spec.levels() as u32
        })
        .collect();
    OrdinalTensor::full(theta.dims().to_vec(), labels).unwrap()
}

fn family_of(i: usize) -> LinkFamily {
    if i.is_multiple_of(2) {
        LinkFamily::Probit
    } else {
        LinkFamily::Logistic
    }
}

#[test]
fn criterion_01_gradient_correctness() {
    let dims = [4, 4, 4];
    let h = 1e-5;
    let tol = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..50usize {
        let family = family_of(i);
        let levels = [2, 3, 5][i % 3];
        let spec = LinkSpec::with_default_cutoffs(family, 1.0, levels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + i as u64);
        let theta = random_theta(&dims, 2.0, &mut rng);
        let y = model_labels(&theta, &spec, &mut rng);

        let g = grad_theta(&y, &theta, &spec).unwrap();
        for j in 0..theta.len() {
            let mut plus = theta.clone();
            plus.values_mut()[j] += h;
            let mut minus = theta.clone();
            minus.values_mut()[j] -= h;
            let fd = (log_likelihood(&y, &plus, &spec).unwrap()
                - log_likelihood(&y, &minus, &spec).unwrap())
                / (2.0 * h);
            let err = (fd - g.values()[j]).abs() / g.values()[j].abs().max(1.0);
            worst = worst.max(err);
        }

        let gb = grad_cutoffs(&y, &theta, &spec).unwrap();
        for j in 0..levels - 1 {
            let mut up = spec.cutoffs().to_vec();
            up[j] += h;
            let mut dn = spec.cutoffs().to_vec();
            dn[j] -= h;
            let fd = (log_likelihood(&y, &theta, &LinkSpec::new(family, 1.0, up).unwrap())
                .unwrap()
                - log_likelihood(&y, &theta, &LinkSpec::new(family, 1.0, dn).unwrap()).unwrap())
                / (2.0 * h);
            let err = (fd - gb[j]).abs() / gb[j].abs().max(1.0);
            worst = worst.max(err);
        }
    }
    report(
        1,
        "gradient-correctness",
        worst <= tol,
        &format!("worst relative deviation {worst:.2e} <= {tol:.0e}"),
    );
}

#[test]
fn criterion_02_joint_concavity() {
    let dims = [4, 4, 4];
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100usize {
        let family = family_of(i);
        let levels = [2, 3, 5][i % 3];
        let spec0 = LinkSpec::with_default_cutoffs(family, 1.0, levels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11_000 + i as u64);
        let theta0 = random_theta(&dims, 2.0, &mut rng);
        let y = model_labels(&theta0, &spec0, &mut rng);
        let n = theta0.len();
        let dir_theta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dir_b: Vec<f64> = (0..levels - 1)
            .map(|_| rng.random_range(-0.05..0.05))
            .collect();
        // cut-offs stay strictly increasing across t in [0, 1]: the gaps
        // are linear in t, so checking both endpoints suffices
        for t in [0.0, 1.0] {
            let b: Vec<f64> = spec0
                .cutoffs()
                .iter()
                .zip(&dir_b)
                .map(|(&b0, &d)| b0 + t * d)
                .collect();
            assert!(b.windows(2).all(|w| w[1] > w[0]));
        }
        let eval = |t: f64| {
            let values: Vec<f64> = theta0
                .values()
                .iter()
                .zip(&dir_theta)
                .map(|(&v, &d)| v + t * d)
                .collect();
            let theta = DenseTensor::new(theta0.dims().to_vec(), values).unwrap();
            let b: Vec<f64> = spec0
                .cutoffs()
                .iter()
                .zip(&dir_b)
                .map(|(&b0, &d)| b0 + t * d)
                .collect();
            log_likelihood(&y, &theta, &LinkSpec::new(family, 1.0, b).unwrap()).unwrap()
        };
        let h = 0.01;
        let second = (eval(0.5 + h) - 2.0 * eval(0.5) + eval(0.5 - h)) / (h * h);
        worst = worst.max(second);
    }
    report(
        2,
        "joint-concavity",
        worst <= 1e-8,
        &format!("largest second-order difference {worst:.2e} <= 1e-8"),
    );
}

#[test]
fn criterion_03_score_and_hessian_bounds() {
    let dims = [4, 4, 4];
    let mut pass = true;
    let mut detail = String::new();
    let mut worst_score_slack = f64::NEG_INFINITY;
    let mut worst_hess_slack = f64::NEG_INFINITY;
    for i in 0..50usize {
        let family = family_of(i);
        let levels = [2, 3, 5][i % 3];
        let alpha = [1.0, 1.5, 2.0][(i / 3) % 3];
        let spec = LinkSpec::with_default_cutoffs(family, 1.0, levels).unwrap();
        let consts = spec.link_constants(alpha).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13_000 + i as u64);
        let theta = random_theta(&dims, alpha, &mut rng);
        let y = model_labels(&theta, &spec, &mut rng);
        let g = grad_theta(&y, &theta, &spec).unwrap();
        let hdiag = hessian_theta_diag(&y, &theta, &spec).unwrap();
        for j in 0..theta.len() {
            worst_score_slack = worst_score_slack.max(g.values()[j].abs() - consts.u_alpha);
            worst_hess_slack = worst_hess_slack.max(hdiag.values()[j] + consts.l_alpha);
        }
    }
    if worst_score_slack > 1e-9 || worst_hess_slack > 1e-9 {
        pass = false;
    }
    detail.push_str(&format!(
        "max score excess {worst_score_slack:.2e}, max curvature excess {worst_hess_slack:.2e} (allowed 1e-9)"
    ));
    report(3, "score-hessian-bounds", pass, &detail);
}

#[test]
fn criterion_04_generative_equivalence() {
    let n = 100_000usize;
    let mut worst_sigmas: f64 = 0.0;
    for (fi, family) in [LinkFamily::Probit, LinkFamily::Logistic].iter().enumerate() {
        let spec = LinkSpec::with_default_cutoffs(*family, 1.0, 5).unwrap();
        for (ti, &tval) in [-1.0, 0.0, 1.0].iter().enumerate() {
            let theta = DenseTensor::new(vec![n], vec![tval; n]).unwrap();
            let y = quantize_latent(&theta, &spec, 500 + (fi * 10 + ti) as u64);
            for l in 1..=4usize {
                let p = spec.cumulative_prob(tval, l).unwrap();
                let freq =
                    y.labels().iter().filter(|&&lab| (lab as usize) <= l).count() as f64
                        / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                worst_sigmas = worst_sigmas.max((freq - p).abs() / se);
            }
        }
    }
    report(
        4,
        "generative-equivalence",
        worst_sigmas <= 3.0,
        &format!("worst |freq - f(b_l - theta)| = {worst_sigmas:.2} binomial SEs (allowed 3)"),
    );
}

#[test]
fn criterion_05_monotone_ascent() {
    let configs: Vec<u64> = (0..30).collect();
    let violations: usize = configs
        .par_iter()
        .map(|&i| {
            let d = [6, 8, 10][(i % 3) as usize];
            let r = [1, 2, 2][(i % 3) as usize];
            let levels = [2, 3, 5][(i % 5 % 3) as usize];
            let family = family_of(i as usize);
            let rho = if i % 4 == 0 { 0.6 } else { 1.0 };
            let estimate_b = i % 3 == 1;
            let init = if i % 5 == 0 {
                InitStrategy::Random
            } else {
                InitStrategy::HosvdWarmStart
            };
            let dims = vec![d, d, d];
            let rank = vec![r, r, r];
            let spec = LinkSpec::with_default_cutoffs(family, 1.0, levels).unwrap();
            let (_, theta) = simulate_signal(&dims, &rank, Some(2.5), 700 + i).unwrap();
            let y_full = quantize_latent(&theta, &spec, 800 + i);
            let y = if rho < 1.0 {
                let m = sample_mask(&dims, &SamplingPlan::BernoulliUniform { rho }, 900 + i)
                    .unwrap();
                y_full.with_mask(m.mask).unwrap()
            } else {
                y_full
            };
            let opts = FitOptions {
                init,
                max_outer_iters: 40,
                ..FitOptions::new(2.5)
                    .with_seed(i)
                    .with_estimated_cutoffs(estimate_b)
            };
            let res = fit(&y, &rank, family, 1.0, levels, &opts, None).unwrap();
            res.objective_trace
                .windows(2)
                .filter(|w| w[1] < w[0])
                .count()
        })
        .sum();
    report(
        5,
        "monotone-ascent",
        violations == 0,
        &format!("{violations} trace decreases across 30 mixed-config fits"),
    );
}

fn fit_probit5(y: &OrdinalTensor, rank: &[usize], alpha: f64, seed: u64) -> FitResult {
    let opts = FitOptions::new(alpha).with_seed(seed);
    fit(y, rank, LinkFamily::Probit, 1.0, 5, &opts, None).unwrap()
}

#[test]
fn criterion_06_dimension_decay_trend() {
    let spec = LinkSpec::with_default_cutoffs(LinkFamily::Probit, 1.0, 5).unwrap();
    let mut pts = Vec::new();
    for &d in &[15usize, 20, 25, 30] {
        let dims = vec![d, d, d];
        let rank = vec![3, 3, 3];
        let mses: Vec<f64> = (0..10u64)
            .into_par_iter()
            .map(|rep| {
                let seed = 2_000 + rep;
                let (_, theta) = simulate_signal(&dims, &rank, Some(10.0), seed).unwrap();
                let y = quantize_latent(&theta, &spec, seed + 5_000);
                let res = fit_probit5(&y, &rank, 10.0, seed);
                ordtensor::metrics::mse(&res.theta_hat, &theta).unwrap()
            })
            .collect();
        let mean = mses.iter().sum::<f64>() / mses.len() as f64;
        pts.push(((d as f64).ln(), mean.ln()));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    report(
        6,
        "dimension-decay-trend",
        (-2.6..=-1.4).contains(&slope),
        &format!("log-log OLS slope {slope:.3} within [-2.6, -1.4]"),
    );
}

#[test]
fn criterion_07_signal_level_non_monotonicity() {
    let dims = vec![20usize, 20, 20];
    let rank = vec![5usize, 5, 5];
    let spec = LinkSpec::with_default_cutoffs(LinkFamily::Probit, 1.0, 5).unwrap();
    let rows: Vec<(f64, f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|rep| {
            let rel = |alpha: f64| {
                let (_, theta) =
                    simulate_signal(&dims, &rank, Some(alpha), 3_000 + rep).unwrap();
                let y = quantize_latent(&theta, &spec, 3_100 + rep);
                let res = fit_probit5(&y, &rank, alpha, rep);
                relative_mse(&res.theta_hat, &theta).unwrap()
            };
            (rel(1.0), rel(5.0), rel(15.0))
        })
        .collect();
    let hits = rows
        .iter()
        .filter(|(r1, r5, r15)| r1 > r5 && r15 > r5)
        .count();
    let mean = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).sum::<f64>() / 10.0;
    report(
        7,
        "signal-level-non-monotonicity",
        hits >= 7,
        &format!(
            "U-shape in {hits}/10 replicates (need 7); mean relative MSE alpha=1: {:.3}, alpha=5: {:.3}, alpha=15: {:.3}",
            mean(|r| r.0),
            mean(|r| r.1),
            mean(|r| r.2)
        ),
    );
}

#[test]
fn criterion_08_ordinal_level_benefit() {
    let dims = vec![20usize, 20, 20];
    let rank = vec![5usize, 5, 5];
    let rels: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|rep| {
            let go = |levels: usize| {
                let spec =
                    LinkSpec::with_default_cutoffs(LinkFamily::Probit, 1.0, levels).unwrap();
                let (_, theta) = simulate_signal(&dims, &rank, Some(10.0), 300 + rep).unwrap();
                let y_full = quantize_latent(&theta, &spec, 400 + rep);
                let m = sample_mask(
                    &dims,
                    &SamplingPlan::BernoulliUniform { rho: 0.5 },
                    500 + rep,
                )
                .unwrap();
                let y = y_full.with_mask(m.mask).unwrap();
                let opts = FitOptions::new(10.0).with_seed(rep);
                let res = fit(&y, &rank, LinkFamily::Probit, 1.0, levels, &opts, None).unwrap();
                relative_mse(&res.theta_hat, &theta).unwrap()
            };
            (go(5), go(2))
        })
        .collect();
    let m5: f64 = rels.iter().map(|r| r.0).sum::<f64>() / 10.0;
    let m2: f64 = rels.iter().map(|r| r.1).sum::<f64>() / 10.0;
    report(
        8,
        "ordinal-level-benefit",
        m5 < m2,
        &format!("mean relative MSE at L=5 is {m5:.4} vs {m2:.4} at L=2"),
    );
}

#[test]
fn criterion_09_bic_rank_recovery() {
    let dims = vec![20usize, 20, 20];
    let rank_true = vec![2usize, 2, 2];
    let grid: Vec<Vec<usize>> = (1..=3).map(|r| vec![r, r, r]).collect();
    let spec = LinkSpec::with_default_cutoffs(LinkFamily::Probit, 1.0, 5).unwrap();
    let picks: Vec<Vec<usize>> = (0..10u64)
        .into_par_iter()
        .map(|rep| {
            let (_, theta) = simulate_signal(&dims, &rank_true, Some(10.0), 600 + rep).unwrap();
            let y = quantize_latent(&theta, &spec, 700 + rep);
            let opts = FitOptions::new(10.0).with_seed(rep);
            select_rank_bic(&y, &grid, LinkFamily::Probit, 1.0, 5, &opts, None)
                .unwrap()
                .0
        })
        .collect();
    let hits = picks.iter().filter(|p| **p == rank_true).count();
    report(
        9,
        "bic-rank-recovery",
        hits >= 7,
        &format!("true rank selected in {hits}/10 replicates (need 7)"),
    );
}

#[test]
fn criterion_10_kl_fnorm_bound() {
    let dims = [4, 4, 4];
    let alpha = 2.0;
    let mut violations = 0usize;
    let mut worst_margin = f64::NEG_INFINITY;
    for i in 0..100usize {
        let family = family_of(i);
        let levels = [2, 3, 5][i % 3];
        let spec = LinkSpec::with_default_cutoffs(family, 1.0, levels).unwrap();
        let consts = spec.link_constants(alpha).unwrap();
        let coef =
            2.0 * (2.0 * levels as f64 - 3.0) / consts.a_alpha * spec.link_deriv(0.0).powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(15_000 + i as u64);
        let a = random_theta(&dims, alpha, &mut rng);
        let b = random_theta(&dims, alpha, &mut rng);
        let kl = kl_categorical(&a, &b, &spec).unwrap();
        let diff2: f64 = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let margin = kl - coef * diff2;
        worst_margin = worst_margin.max(margin);
        if margin > 1e-9 {
            violations += 1;
        }
    }
    report(
        10,
        "kl-fnorm-bound",
        violations == 0,
        &format!("0 required violations; worst margin {worst_margin:.2e} (allowed 1e-9)"),
    );
}

#[test]
fn criterion_11_baseline_comparison() {
    let dims = vec![15usize, 15, 15];
    let rank = vec![3usize, 3, 3];
    let spec = LinkSpec::with_default_cutoffs(LinkFamily::Probit, 1.0, 5).unwrap();
    let pairs: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|rep| {
            let (_, theta) = simulate_signal(&dims, &rank, Some(10.0), 800 + rep).unwrap();
            let y = quantize_latent(&theta, &spec, 900 + rep);
            let truth_labels = predict_labels(&theta, &spec, PredictionRule::Mode);
            let res = fit_probit5(&y, &rank, 10.0, rep);
            let est_labels = predict_labels(&res.theta_hat, &res.link_spec(), PredictionRule::Mode);
            let ordinal = mcr(&est_labels, &truth_labels).unwrap();
            let recon = continuous_tucker_fit(&y, &rank).unwrap();
            let rounded: Vec<u32> = recon
                .values()
                .iter()
                .map(|&v| v.round().clamp(1.0, 5.0) as u32)
                .collect();
            let cont_labels = OrdinalTensor::full(dims.clone(), rounded).unwrap();
            let continuous = mcr(&cont_labels, &truth_labels).unwrap();
            (ordinal, continuous)
        })
        .collect();
    let mo: f64 = pairs.iter().map(|p| p.0).sum::<f64>() / 10.0;
    let mc: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / 10.0;
    report(
        11,
        "baseline-comparison",
        mo <= mc,
        &format!("mean mode-label MCR: ordinal {mo:.4} <= continuous(rounded) {mc:.4}"),
    );
}

#[test]
fn criterion_12_completion_consistency_trend() {
    let dims = vec![20usize, 20, 20];
    let rank = vec![2usize, 2, 2];
    let n: usize = dims.iter().product();
    let uniform = DenseTensor::new(dims.clone(), vec![1.0 / n as f64; n]).unwrap();
    let spec = LinkSpec::with_default_cutoffs(LinkFamily::Probit, 1.0, 5).unwrap();
    let means: Vec<f64> = [0.2, 0.4, 0.8]
        .iter()
        .map(|&rho| {
            let errs: Vec<f64> = (0..10u64)
                .into_par_iter()
                .map(|rep| {
                    let (_, theta) =
                        simulate_signal(&dims, &rank, Some(10.0), 1_000 + rep).unwrap();
                    let y_full = quantize_latent(&theta, &spec, 1_100 + rep);
                    let m = sample_mask(
                        &dims,
                        &SamplingPlan::BernoulliUniform { rho },
                        1_200 + rep,
                    )
                    .unwrap();
                    let y = y_full.with_mask(m.mask).unwrap();
                    let res = fit_probit5(&y, &rank, 10.0, rep);
                    weighted_error(&res.theta_hat, &theta, &uniform).unwrap()
                })
                .collect();
            errs.iter().sum::<f64>() / errs.len() as f64
        })
        .collect();
    report(
        12,
        "completion-consistency-trend",
        means[0] > means[1] && means[1] > means[2],
        &format!(
            "mean weighted error over rho {{0.2, 0.4, 0.8}}: {:.4} > {:.4} > {:.4}",
            means[0], means[1], means[2]
        ),
    );
}

#[test]
fn criterion_13_clustering_recovery() {
    let mut hits = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(17_000 + seed);
        let d0 = 12;
        let group_a = [0.55, 0.12];
        let group_b = [-0.08, 0.5];
        let mut f0 = nalgebra::DMatrix::zeros(d0, 2);
        for i in 0..d0 {
            let base = if i < 6 { group_a } else { group_b };
            f0[(i, 0)] = base[0] + 1e-4 * rng.random_range(-1.0..1.0);
            f0[(i, 1)] = base[1] + 1e-4 * rng.random_range(-1.0..1.0);
        }
        let (f1, _) = simulate_signal(&[8], &[2], None, 18_000 + seed)
            .map(|(tf, _)| (tf.factor(0).clone(), ()))
            .unwrap();
        let core_vals: Vec<f64> = (0..4).map(|_| rng.random_range(0.5..1.5)).collect();
        let core = DenseTensor::new(vec![2, 2], core_vals).unwrap();
        let tf = TuckerFactors::new(core, vec![f0, f1]).unwrap();
        let result = cluster_mode(&tf, 0, 2, seed).unwrap();
        let first = result.assignments[0];
        let ok = result.assignments[..6].iter().all(|&c| c == first)
            && result.assignments[6..].iter().all(|&c| c != first);
        if ok {
            hits += 1;
        }
    }
    report(
        13,
        "clustering-recovery",
        hits == 10,
        &format!("planted partition recovered in {hits}/10 seeded runs"),
    );
}
