//! Link functions, cut-off points, per-category probabilities, and the
//! geometry constants of the bounded-signal regime.
//!
//! A link is a strictly increasing CDF-like map `f: R -> (0,1)`. With
//! cut-offs `b_1 < ... < b_{L-1}` (and the conventions `b_0 = -inf`,
//! `b_L = +inf`), category `l` at signal `theta` has probability
//! `g_l(theta) = f(b_l - theta) - f(b_{l-1} - theta)`.

use std::fmt;
use std::str::FromStr;

use statrs::function::erf;

use crate::error::{Error, Result};
use crate::PROB_FLOOR;

/// Built-in link families. Both have symmetric, strictly log-concave
/// densities, so all geometry constants below are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkFamily {
    /// `f(x) = 1 / (1 + exp(-x/sigma))`; noise is logistic with scale sigma.
    Logistic,
    /// `f(x) = Phi(x/sigma)`; noise is `N(0, sigma^2)`.
    Probit,
}

impl fmt::Display for LinkFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkFamily::Logistic => write!(f, "logistic"),
            LinkFamily::Probit => write!(f, "probit"),
        }
    }
}

impl FromStr for LinkFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" => Ok(LinkFamily::Logistic),
            "probit" => Ok(LinkFamily::Probit),
            other => Err(Error::invalid(format!(
                "unknown link family '{other}' (expected 'logistic' or 'probit')"
            ))),
        }
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    if !z.is_finite() {
        return 0.0;
    }
    (-0.5 * z * z).exp() * INV_SQRT_2PI
}

/// Standard normal quantile: rational initial guess refined by two
/// Newton steps against the high-accuracy CDF above.
pub(crate) fn std_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    // Acklam-style rational approximation, |error| < 1.2e-9 before refinement.
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        let pdf = std_normal_pdf(x);
        if pdf > 0.0 {
            x -= (std_normal_cdf(x) - p) / pdf;
        }
    }
    x
}

pub(crate) fn family_cdf(family: LinkFamily, sigma: f64, x: f64) -> f64 {
    let t = x / sigma;
    match family {
        LinkFamily::Logistic => 1.0 / (1.0 + (-t).exp()),
        LinkFamily::Probit => std_normal_cdf(t),
    }
}

pub(crate) fn family_pdf(family: LinkFamily, sigma: f64, x: f64) -> f64 {
    let t = x / sigma;
    match family {
        LinkFamily::Logistic => {
            // symmetric stable form, valid for t of either sign
            let e = (-t.abs()).exp();
            e / (sigma * (1.0 + e) * (1.0 + e))
        }
        LinkFamily::Probit => std_normal_pdf(t) / sigma,
    }
}

pub(crate) fn family_pdf_deriv(family: LinkFamily, sigma: f64, x: f64) -> f64 {
    let t = x / sigma;
    if !t.is_finite() {
        return 0.0;
    }
    match family {
        LinkFamily::Logistic => {
            let f = 1.0 / (1.0 + (-t).exp());
            family_pdf(family, sigma, x) * (1.0 - 2.0 * f) / sigma
        }
        LinkFamily::Probit => -t * std_normal_pdf(t) / (sigma * sigma),
    }
}

pub(crate) fn family_quantile(family: LinkFamily, sigma: f64, p: f64) -> f64 {
    match family {
        LinkFamily::Logistic => sigma * (p / (1.0 - p)).ln(),
        LinkFamily::Probit => sigma * std_normal_quantile(p),
    }
}

/// Evenly spaced cut-offs `f^{-1}(l/L)` for `l = 1..L-1`, mirrored so the
/// vector is exactly antisymmetric about zero.
pub fn default_cutoffs(family: LinkFamily, sigma: f64, levels: usize) -> Result<Vec<f64>> {
    if levels < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 ordinal levels, got {levels}"
        )));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::invalid("sigma must be positive"));
    }
    let l = levels as f64;
    let mut b = vec![0.0; levels - 1];
    for i in 0..levels - 1 {
        let ell = i + 1;
        if 2 * ell < levels {
            b[i] = family_quantile(family, sigma, ell as f64 / l);
        } else if 2 * ell == levels {
            b[i] = 0.0;
        } else {
            b[i] = -b[levels - 1 - ell];
        }
    }
    Ok(b)
}

/// Link family, scale, cut-off points, and the number of ordinal levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    family: LinkFamily,
    sigma: f64,
    cutoffs: Vec<f64>,
    levels: usize,
}

impl LinkSpec {
    /// Builds a spec from explicit cut-offs (`L = cutoffs.len() + 1`).
    pub fn new(family: LinkFamily, sigma: f64, cutoffs: Vec<f64>) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid("sigma must be positive and finite"));
        }
        if cutoffs.is_empty() {
            return Err(Error::invalid(
                "at least one cut-off is required (L >= 2)",
            ));
        }
        if cutoffs.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("cut-offs must be finite"));
        }
        if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "cut-offs must be strictly increasing",
            ));
        }
        let levels = cutoffs.len() + 1;
        Ok(Self {
            family,
            sigma,
            cutoffs,
            levels,
        })
    }

    /// Builds a spec with the evenly spaced default cut-offs.
    pub fn with_default_cutoffs(family: LinkFamily, sigma: f64, levels: usize) -> Result<Self> {
        let cutoffs = default_cutoffs(family, sigma, levels)?;
        Self::new(family, sigma, cutoffs)
    }

    pub fn family(&self) -> LinkFamily {
        self.family
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cutoffs(&self) -> &[f64] {
        &self.cutoffs
    }

    /// Number of ordinal levels L.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// The link function `f`; strictly increasing from 0 to 1.
    pub fn link_eval(&self, x: f64) -> f64 {
        family_cdf(self.family, self.sigma, x)
    }

    /// Pointwise derivative of the link.
    pub fn link_deriv(&self, x: f64) -> f64 {
        family_pdf(self.family, self.sigma, x)
    }

    /// Second derivative of the link.
    pub fn link_second_deriv(&self, x: f64) -> f64 {
        family_pdf_deriv(self.family, self.sigma, x)
    }

    /// Inverse link; requires `p` strictly inside (0, 1).
    pub fn link_inverse(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!(
                "link_inverse requires p in (0,1), got {p}"
            )));
        }
        Ok(family_quantile(self.family, self.sigma, p))
    }

    /// Upper cut-off of category `level` (1-based); `+inf` for `level = L`.
    fn upper_cutoff(&self, level: usize) -> f64 {
        if level >= self.levels {
            f64::INFINITY
        } else {
            self.cutoffs[level - 1]
        }
    }

    /// Lower cut-off of category `level`; `-inf` for `level = 1`.
    fn lower_cutoff(&self, level: usize) -> f64 {
        if level <= 1 {
            f64::NEG_INFINITY
        } else {
            self.cutoffs[level - 2]
        }
    }

    /// `P(y = level | theta) = f(b_level - theta) - f(b_{level-1} - theta)`.
    pub fn category_prob(&self, theta: f64, level: usize) -> Result<f64> {
        if level < 1 || level > self.levels {
            return Err(Error::invalid(format!(
                "level {} out of range 1..={}",
                level, self.levels
            )));
        }
        let hi = self.upper_cutoff(level) - theta;
        let lo = self.lower_cutoff(level) - theta;
        let p = self.link_eval(hi) - self.link_eval(lo);
        Ok(p.clamp(0.0, 1.0))
    }

    /// `P(y <= level | theta)`; equals 1 for `level = L`.
    pub fn cumulative_prob(&self, theta: f64, level: usize) -> Result<f64> {
        if level < 1 || level > self.levels {
            return Err(Error::invalid(format!(
                "level {} out of range 1..={}",
                level, self.levels
            )));
        }
        Ok(self.link_eval(self.upper_cutoff(level) - theta))
    }

    /// Category probability derivative in theta:
    /// `g_l'(theta) = fdot(b_{l-1} - theta) - fdot(b_l - theta)`.
    pub(crate) fn category_prob_deriv(&self, theta: f64, level: usize) -> f64 {
        self.link_deriv(self.lower_cutoff(level) - theta)
            - self.link_deriv(self.upper_cutoff(level) - theta)
    }

    /// Second derivative of the category probability in theta.
    pub(crate) fn category_prob_second_deriv(&self, theta: f64, level: usize) -> f64 {
        self.link_second_deriv(self.upper_cutoff(level) - theta)
            - self.link_second_deriv(self.lower_cutoff(level) - theta)
    }

    /// Geometry constants of the link over `|theta| <= alpha`:
    /// the category-probability floor `A`, the score bound `U`, and the
    /// curvature floor `L`. Extrema are located by a dense grid (step
    /// `1e-3 * alpha`, endpoints included) and sharpened by golden-section
    /// refinement around the best bracket, so the reported values are
    /// accurate to well below the tolerances used by the diagnostics.
    pub fn link_constants(&self, alpha: f64) -> Result<LinkConstants> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid("alpha must be positive and finite"));
        }
        let step = 1e-3 * alpha;
        let n_steps = 2000usize;
        let grid: Vec<f64> = (0..=n_steps)
            .map(|i| -alpha + i as f64 * step)
            .collect();

        let mut a_min = f64::INFINITY;
        let mut u_max = f64::NEG_INFINITY;
        let mut l_min = f64::INFINITY;
        for level in 1..=self.levels {
            let g = |t: f64| self.category_prob(t, level).expect("level valid");
            let u = |t: f64| {
                let denom = g(t).max(f64::MIN_POSITIVE);
                self.category_prob_deriv(t, level).abs() / denom
            };
            let ell = |t: f64| {
                let denom = g(t).max(f64::MIN_POSITIVE);
                let gd = self.category_prob_deriv(t, level);
                let gdd = self.category_prob_second_deriv(t, level);
                (gd / denom) * (gd / denom) - gdd / denom
            };
            a_min = a_min.min(grid_extremum(&grid, step, alpha, &g, false));
            u_max = u_max.max(grid_extremum(&grid, step, alpha, &u, true));
            l_min = l_min.min(grid_extremum(&grid, step, alpha, &ell, false));
        }
        Ok(LinkConstants {
            a_alpha: a_min,
            u_alpha: u_max,
            l_alpha: l_min,
            alpha,
        })
    }
}

/// Grid scan plus golden-section refinement around the best grid point.
fn grid_extremum(
    grid: &[f64],
    step: f64,
    alpha: f64,
    f: &dyn Fn(f64) -> f64,
    maximize: bool,
) -> f64 {
    let sign = if maximize { -1.0 } else { 1.0 };
    let obj = |t: f64| sign * f(t);
    let mut best_i = 0;
    let mut best = obj(grid[0]);
    for (i, &t) in grid.iter().enumerate().skip(1) {
        let v = obj(t);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let lo = (grid[best_i] - step).max(-alpha);
    let hi = (grid[best_i] + step).min(alpha);
    let refined = golden_min(&obj, lo, hi, 120);
    sign * best.min(refined)
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    fc.min(fd)
}

/// Link-geometry constants over the bounded-signal region `|theta| <= alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConstants {
    /// Minimum category probability.
    pub a_alpha: f64,
    /// Maximum score magnitude `|g'_l| / g_l`.
    pub u_alpha: f64,
    /// Minimum curvature `(g'_l/g_l)^2 - g''_l/g_l`.
    pub l_alpha: f64,
    /// The bound the constants were computed for.
    pub alpha: f64,
}

/// Floors a probability before it enters a logarithm or denominator.
#[inline]
pub(crate) fn floor_prob(p: f64) -> f64 {
    p.max(PROB_FLOOR)
}
