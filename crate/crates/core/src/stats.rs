//! Increment statistics and the Monte Carlo convergence studies built on them.
//!
//! Every limit here is a mixture over the mixing variable `Y`. Each replica
//! records its own `Y`, so targets are pinned per path and laws are compared
//! after studentizing by the recorded `Y`.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::paths::{FbmGenerator, SamplePath, TimeGrid};
use crate::quad::{integrate, integrate_to_infinity, QuadConfig};
use crate::sampling::RngStream;
use crate::specfun::GreyParams;

/// Sorted sample with CDF, moment and Kolmogorov–Smirnov evaluators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalLaw {
    sorted: Vec<f64>,
}

impl EmpiricalLaw {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Precondition(
                "empirical law needs a non-empty sample".into(),
            ));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition(
                "sample contains non-finite values".into(),
            ));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let m = self.mean();
        self.sorted.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    pub fn standard_error(&self) -> f64 {
        (self.variance() / self.len() as f64).sqrt()
    }

    pub fn raw_moment(&self, k: i32) -> f64 {
        self.sorted.iter().map(|x| x.powi(k)).sum::<f64>() / self.len() as f64
    }

    fn central(&self, k: i32) -> f64 {
        let m = self.mean();
        self.sorted.iter().map(|x| (x - m).powi(k)).sum::<f64>() / self.len() as f64
    }

    pub fn skewness(&self) -> f64 {
        self.central(3) / self.central(2).powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        self.central(4) / self.central(2).powi(2) - 3.0
    }

    /// `sup_x |F_n(x) − F(x)|`.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
            })
            .fold(0.0, f64::max)
    }

    /// KS distance with the supremum taken only over `x ∉ (lo, hi)`.
    pub fn ks_distance_outside(&self, cdf: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let n = self.len() as f64;
        let mut worst = 0.0f64;
        for (i, &x) in self.sorted.iter().enumerate() {
            if x > lo && x < hi {
                continue;
            }
            let f = cdf(x);
            worst = worst.max(((i + 1) as f64 / n - f).abs());
            if x <= lo || x > hi {
                worst = worst.max((f - i as f64 / n).abs());
            }
        }
        for edge in [lo, hi] {
            worst = worst.max((self.cdf(edge) - cdf(edge)).abs());
        }
        worst
    }

    /// Two-sample KS statistic `sup_x |F_n(x) − G_m(x)|`.
    pub fn ks_two_sample(&self, other: &EmpiricalLaw) -> f64 {
        let (a, b) = (&self.sorted, &other.sorted);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j, mut worst) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            worst = worst.max((i as f64 / na - j as f64 / nb).abs());
        }
        worst
    }
}

/// 1% critical value of the one-sample KS statistic, with the
/// Stephens finite-sample correction `√n + 0.12 + 0.11/√n`.
pub fn ks_critical_value(n: f64) -> f64 {
    let r = n.sqrt();
    1.628 / (r + 0.12 + 0.11 / r)
}

/// 1% critical value for a two-sample KS test, via the effective size `nm/(n+m)`.
pub fn ks_two_sample_critical_value(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_critical_value(n * m / (n + m))
}

/// CDF of the centered Gaussian with the given variance.
pub fn normal_cdf(x: f64, variance: f64) -> f64 {
    0.5 * erfc(-x / (2.0 * variance).sqrt())
}

/// `E N^k` for standard Gaussian `N`: `(k−1)!!` for even `k`, else 0.
pub fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(|j| j as f64).product()
}

/// `E|N|^p = 2^{p/2} Γ((p+1)/2) / √π`.
pub fn gaussian_abs_moment(p: f64) -> f64 {
    2f64.powf(0.5 * p) * gamma(0.5 * (p + 1.0)) / std::f64::consts::PI.sqrt()
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `Z_ε(t) = ε^{−α/2}(B(t+ε) − B(t))` on the core grid.
pub fn z_increments(path: &SamplePath, epsilon: f64) -> Result<Vec<f64>> {
    let grid = path.grid;
    let lag = grid.steps_for(epsilon)?;
    if lag > grid.ext_steps() {
        return Err(Error::Precondition(format!(
            "epsilon {epsilon} reaches beyond the grid extension {}",
            grid.ext()
        )));
    }
    let scale = (lag as f64 * grid.step()).powf(-0.5 * path.params.alpha());
    Ok(grid
        .core_range()
        .map(|i| scale * (path.values[i + lag] - path.values[i]))
        .collect())
}

/// Trapezoid rule for `∫₀ᵗ` over the leading core samples; `t` must be a grid time.
pub fn integral_to(samples: &[f64], step: f64, t: f64) -> Result<f64> {
    let r = t / step;
    let last = r.round();
    if (r - last).abs() > 1e-8 * r.max(1.0) || last as usize >= samples.len() || t < 0.0 {
        return Err(Error::Precondition(format!(
            "t = {t} is not a core grid time"
        )));
    }
    let last = last as usize;
    if last == 0 {
        return Ok(0.0);
    }
    let inner: f64 = samples[1..last].iter().sum();
    Ok(step * (inner + 0.5 * (samples[0] + samples[last])))
}

/// `a_{k,m}` with `x^k = Σ_m a_{k,m} He_m(x)` (probabilists' Hermite).
///
/// `a_{k,m} = k! / (m! 2^j j!)` for `k − m = 2j`, zero otherwise.
pub fn hermite_coefficients(k: u32) -> Vec<f64> {
    let mut out = vec![0.0; k as usize + 1];
    for m in (k % 2..=k).step_by(2) {
        let j = (k - m) / 2;
        out[m as usize] = factorial(k) / (factorial(m) * 2f64.powi(j as i32) * factorial(j));
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `(x+1)^α + |x−1|^α − 2x^α`, twice the correlation of unit-lag fBm increments at lag `x`.
pub fn second_difference(alpha: f64, x: f64) -> f64 {
    if x < 64.0 {
        return (x + 1.0).powf(alpha) + (x - 1.0).abs().powf(alpha) - 2.0 * x.powf(alpha);
    }
    // x^α Σ_{j even ≥ 2} 2·binom(α, j)·x^{−j}; the direct form cancels here.
    let h2 = x.powi(-2);
    let mut binom = 1.0;
    let mut power = 1.0;
    let mut sum = 0.0;
    for j in 1..=12 {
        binom *= (alpha - (j - 1) as f64) / j as f64;
        if j % 2 == 0 {
            power *= h2;
            sum += 2.0 * binom * power;
        }
    }
    x.powf(alpha) * sum
}

/// Cut-off beyond which the `m`-th power term is bounded analytically.
const TAIL_START: f64 = 200.0;

/// Bound on `∫_L^∞ |second_difference|^m dx` from
/// `|second_difference(x)| ≤ |α(α−1)| x^{α−2} / (1 − x^{−2})` for `α ∈ (0, 1)`.
pub fn c_k_alpha_tail_bound(alpha: f64, m: u32, cutoff: f64) -> f64 {
    let m = m as f64;
    let lead = (alpha * (1.0 - alpha) / (1.0 - cutoff.powi(-2))).powf(m);
    let decay = (2.0 - alpha) * m - 1.0;
    lead * cutoff.powf(-decay) / decay
}

/// `∫₀^∞ second_difference(x)^m dx` for odd `m`, `α ∈ (0, 1)`.
///
/// For `m = 1` the antiderivative is a second difference of `x^{α+1}` that
/// vanishes at 0 and at infinity, so the term is exactly 0. Larger `m` use
/// adaptive quadrature on `[0, 1] ∪ [1, L]` with the tail bounded separately.
pub fn hermite_power_integral(alpha: f64, m: u32, cfg: &QuadConfig) -> Result<f64> {
    if m == 1 {
        return Ok(0.0);
    }
    let f = |x: f64| second_difference(alpha, x).powi(m as i32);
    let near = integrate(f, 0.0, 1.0, cfg)?;
    let mut far = 0.0;
    let mut a = 1.0;
    while a < TAIL_START {
        let b = (2.0 * a).min(TAIL_START);
        far += integrate(f, a, b, cfg)?.value;
        a = b;
    }
    let bound = c_k_alpha_tail_bound(alpha, m, TAIL_START);
    if bound > 1e-8 {
        return Err(Error::eval(
            "hermite_power_integral",
            alpha,
            format!("tail bound {bound:e} past x = {TAIL_START} exceeds 1e-8"),
        ));
    }
    Ok(near.value + far)
}

fn check_k_alpha(k: u32, alpha: f64) -> Result<()> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::Precondition(format!(
            "k must be odd and >= 3, got {k}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!(
            "alpha must lie in (0, 1) for the odd-power Brownian limit, got {alpha}"
        )));
    }
    Ok(())
}

/// Asymptotic variance constant of `ε^{−1/2}∫₀ᵗ Z^k ds` per unit time:
/// `2 Σ_m a²_{k,m} m! ∫₀^∞ ρ(x)^m dx` with `ρ = second_difference/2` the
/// increment correlation (Breuer–Major).
pub fn c_k_alpha(k: u32, alpha: f64, cfg: &QuadConfig) -> Result<f64> {
    check_k_alpha(k, alpha)?;
    let a = hermite_coefficients(k);
    let mut total = 0.0;
    for m in (1..=k).step_by(2) {
        let weight = a[m as usize].powi(2) * factorial(m) / 2f64.powi(m as i32);
        total += weight * hermite_power_integral(alpha, m, cfg)?;
    }
    Ok(2.0 * total)
}

/// The constant with the weights `a²_{k,m}/k` applied to powers of the
/// unhalved second difference, reported next to [`c_k_alpha`] for comparison.
pub fn c_k_alpha_displayed(k: u32, alpha: f64, cfg: &QuadConfig) -> Result<f64> {
    check_k_alpha(k, alpha)?;
    let a = hermite_coefficients(k);
    let mut total = 0.0;
    for m in (1..=k).step_by(2) {
        total += a[m as usize].powi(2) / k as f64 * hermite_power_integral(alpha, m, cfg)?;
    }
    Ok(2.0 * total)
}

/// Independent evaluation of `∫₀^∞ second_difference^m` without cut-off:
/// `[0,1]` directly and `[1,∞)` through `x = 1 + s/(1−s)`.
pub fn hermite_power_integral_mapped(alpha: f64, m: u32, cfg: &QuadConfig) -> Result<f64> {
    let f = |x: f64| second_difference(alpha, x).powi(m as i32);
    let near = integrate(f, 0.0, 1.0, cfg)?.value;
    let far = integrate_to_infinity(f, 1.0, cfg)?.value;
    Ok(near + far)
}

/// Exact variance of `ε^{−1/2}∫₀ᵗ Z^k ds` at a fixed `ε` for fBm (`Y = 1`):
/// `2 ∫₀^{t/ε} (t − εx) Σ_m a²_{k,m} m! ρ(x)^m dx`, `ρ = second_difference/2`.
/// Approaches `c_{k,α}·t` as `ε → 0`; the `m = 1` term decays only like `ε^{1−α}`.
pub fn odd_power_variance_at(
    k: u32,
    alpha: f64,
    epsilon: f64,
    t: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    check_k_alpha(k, alpha)?;
    let a = hermite_coefficients(k);
    let upper = t / epsilon;
    let f = |x: f64| {
        let rho = 0.5 * second_difference(alpha, x);
        let series: f64 = (1..=k)
            .step_by(2)
            .map(|m| a[m as usize].powi(2) * factorial(m) * rho.powi(m as i32))
            .sum();
        (t - epsilon * x) * series
    };
    let mut total = integrate(f, 0.0, upper.min(1.0), cfg)?.value;
    let mut lo = 1.0;
    while lo < upper {
        let hi = (2.0 * lo).min(upper);
        total += integrate(f, lo, hi, cfg)?.value;
        lo = hi;
    }
    Ok(2.0 * total)
}

/// Normalization applied to a power-variation sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerScaling {
    SqrtN,
    NPow1MinusAlpha,
    NPowNegAlphaHalf,
}

impl PowerScaling {
    fn factor(self, n: f64, alpha: f64) -> f64 {
        match self {
            PowerScaling::SqrtN => n.powf(-0.5),
            PowerScaling::NPow1MinusAlpha => n.powf(1.0 - alpha),
            PowerScaling::NPowNegAlphaHalf => n.powf(-0.5 * alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerVariationResult {
    pub k: u32,
    pub n: usize,
    pub statistic: f64,
    pub scaling: PowerScaling,
    pub mixing: f64,
    /// Whether `m_k(N) Y^{k/2}` was subtracted from each term.
    pub centered: bool,
}

/// `scale(n) · Σ_{m<n} [n^{kα/2} (ΔB(m/n))^k − c]`, where `c = m_k(N) Y^{k/2}`
/// for even `k` under `√n` or `n^{1−α}` scaling and `c = 0` otherwise.
/// With `n^{−α/2}` the sum is taken uncentered, as displayed for the even
/// long-range case; that statistic grows like `n^{1−α/2}`.
pub fn power_variation(
    path: &SamplePath,
    k: u32,
    scaling: PowerScaling,
) -> Result<PowerVariationResult> {
    if k == 0 {
        return Err(Error::Precondition("k must be >= 1".into()));
    }
    let grid = path.grid;
    if (grid.horizon() - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(
            "power variation needs a path on [0, 1] sampled at m/n".into(),
        ));
    }
    let n = grid.n() - 1;
    let alpha = path.params.alpha();
    let y = path.mixing_value();
    let centered = k % 2 == 0 && scaling != PowerScaling::NPowNegAlphaHalf;
    let centre = if centered {
        gaussian_moment(k) * y.powf(0.5 * k as f64)
    } else {
        0.0
    };
    let nf = n as f64;
    let amplify = nf.powf(0.5 * k as f64 * alpha);
    let sum: f64 = path
        .core_values()
        .windows(2)
        .map(|w| amplify * (w[1] - w[0]).powi(k as i32) - centre)
        .sum();
    Ok(PowerVariationResult {
        k,
        n,
        statistic: scaling.factor(nf, alpha) * sum,
        scaling,
        mixing: y,
        centered,
    })
}

/// Replicated gBm paths with one RNG stream per replica.
#[derive(Debug, Clone, Copy)]
pub struct Ensemble {
    pub params: GreyParams,
    pub grid: TimeGrid,
    pub replicas: usize,
    pub seed: u64,
}

impl Ensemble {
    /// Applies `f` to each replica in parallel; output order is replica order.
    pub fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &SamplePath) -> Result<T> + Sync,
    {
        let generator = FbmGenerator::new(self.params.hurst(), self.grid)?;
        (0..self.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(self.seed, r as u64).rng();
                let path = generator.sample_gbm(self.params, &mut rng)?;
                f(r, &path)
            })
            .collect()
    }
}

/// One replica's value and target at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderPoint {
    pub epsilon: f64,
    pub value: f64,
    pub target: f64,
    /// Secondary statistic; meaning depends on the study, NaN when unused.
    pub extra: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRun {
    pub replica: usize,
    pub mixing: f64,
    pub points: Vec<LadderPoint>,
}

impl LadderRun {
    pub fn relative_gaps(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| ((p.value - p.target) / p.target).abs())
            .collect()
    }
}

fn ladder<F>(ens: &Ensemble, ladder: &[f64], point: F) -> Result<Vec<LadderRun>>
where
    F: Fn(&SamplePath, f64) -> Result<LadderPoint> + Sync,
{
    if ladder.is_empty() {
        return Err(Error::InvalidParameter("epsilon ladder is empty".into()));
    }
    ens.map(|replica, path| {
        let points = ladder
            .iter()
            .map(|&e| point(path, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(LadderRun {
            replica,
            mixing: path.mixing_value(),
            points,
        })
    })
}

/// `∫₀ᵗ Z^k ds` against `t Y^{k/2} E N^k`.
pub fn moment_convergence_experiment(
    ens: &Ensemble,
    k: u32,
    t: f64,
    eps: &[f64],
) -> Result<Vec<LadderRun>> {
    if k == 0 {
        return Err(Error::Precondition("k must be >= 1".into()));
    }
    let step = ens.grid.step();
    ladder(ens, eps, |path, e| {
        let z = z_increments(path, e)?;
        let zk: Vec<f64> = z.iter().map(|v| v.powi(k as i32)).collect();
        let target = t * path.mixing_value().powf(0.5 * k as f64) * gaussian_moment(k);
        Ok(LadderPoint {
            epsilon: e,
            value: integral_to(&zk, step, t)?,
            target,
            extra: f64::NAN,
        })
    })
}

/// `∫₀ᵗ |Z|^p ds` against `t Y^{p/2} E|N|^p`.
pub fn lp_moduli_experiment(ens: &Ensemble, p: f64, t: f64, eps: &[f64]) -> Result<Vec<LadderRun>> {
    check_p(p)?;
    let step = ens.grid.step();
    ladder(ens, eps, |path, e| {
        let z = z_increments(path, e)?;
        let zp: Vec<f64> = z.iter().map(|v| v.abs().powf(p)).collect();
        let target = t * path.mixing_value().powf(0.5 * p) * gaussian_abs_moment(p);
        Ok(LadderPoint {
            epsilon: e,
            value: integral_to(&zp, step, t)?,
            target,
            extra: f64::NAN,
        })
    })
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

fn squared_increments(path: &SamplePath, epsilon: f64) -> Result<Vec<f64>> {
    let grid = path.grid;
    let lag = grid.steps_for(epsilon)?;
    if lag > grid.ext_steps() {
        return Err(Error::Precondition(format!(
            "epsilon {epsilon} reaches beyond the grid extension {}",
            grid.ext()
        )));
    }
    Ok(grid
        .core_range()
        .map(|i| path.values[i + lag].powi(2) - path.values[i].powi(2))
        .collect())
}

/// `∫₀ᵗ ε^{−pα/2} |B²(s+ε) − B²(s)|^p ds` against
/// `2^p Y^{p/2} E|N|^p ∫₀ᵗ |B(s)|^p ds`; `extra` holds the same integral
/// with the factor `ε^{−α/2}` in place of `ε^{−pα/2}`.
pub fn squared_moduli_experiment(
    ens: &Ensemble,
    p: f64,
    t: f64,
    eps: &[f64],
) -> Result<Vec<LadderRun>> {
    check_p(p)?;
    let step = ens.grid.step();
    let alpha = ens.params.alpha();
    ladder(ens, eps, |path, e| {
        let d = squared_increments(path, e)?;
        let raw: Vec<f64> = d.iter().map(|v| v.abs().powf(p)).collect();
        let base = integral_to(&raw, step, t)?;
        let abs_path: Vec<f64> = path.core_values().iter().map(|v| v.abs().powf(p)).collect();
        let target = 2f64.powf(p)
            * path.mixing_value().powf(0.5 * p)
            * gaussian_abs_moment(p)
            * integral_to(&abs_path, step, t)?;
        let e = grid_epsilon(&ens.grid, e)?;
        Ok(LadderPoint {
            epsilon: e,
            value: e.powf(-0.5 * p * alpha) * base,
            target,
            extra: e.powf(-0.5 * alpha) * base,
        })
    })
}

/// `∫₀ᵗ ε^{−α/2} (B²(s+ε) − B²(s))^k ds`, target 0; `extra` holds the
/// same integral scaled by `ε^{−kα/2}`.
pub fn odd_squared_moment_experiment(
    ens: &Ensemble,
    k: u32,
    t: f64,
    eps: &[f64],
) -> Result<Vec<LadderRun>> {
    if k % 2 == 0 {
        return Err(Error::Precondition(format!("k must be odd, got {k}")));
    }
    let step = ens.grid.step();
    let alpha = ens.params.alpha();
    ladder(ens, eps, |path, e| {
        let d = squared_increments(path, e)?;
        let powered: Vec<f64> = d.iter().map(|v| v.powi(k as i32)).collect();
        let base = integral_to(&powered, step, t)?;
        let e = grid_epsilon(&ens.grid, e)?;
        Ok(LadderPoint {
            epsilon: e,
            value: e.powf(-0.5 * alpha) * base,
            target: 0.0,
            extra: e.powf(-0.5 * k as f64 * alpha) * base,
        })
    })
}

fn grid_epsilon(grid: &TimeGrid, e: f64) -> Result<f64> {
    Ok(grid.steps_for(e)? as f64 * grid.step())
}

/// Per-replica `ε^{−1/2} ∫₀ᵗ Z^k ds`, recorded `Y`, and the law of the
/// studentized values `stat / √(c_{k,α} Y^k t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrownianLimit {
    pub statistic: Vec<f64>,
    pub mixing: Vec<f64>,
    pub c_k_alpha: f64,
    pub studentized: EmpiricalLaw,
}

pub fn brownian_limit_experiment(
    ens: &Ensemble,
    k: u32,
    t: f64,
    epsilon: f64,
) -> Result<BrownianLimit> {
    let alpha = ens.params.alpha();
    let c = c_k_alpha(k, alpha, &QuadConfig::with_abs_tol(1e-12))?;
    let step = ens.grid.step();
    let rows = ens.map(|_, path| {
        let z = z_increments(path, epsilon)?;
        let zk: Vec<f64> = z.iter().map(|v| v.powi(k as i32)).collect();
        let e = grid_epsilon(&path.grid, epsilon)?;
        Ok((integral_to(&zk, step, t)? / e.sqrt(), path.mixing_value()))
    })?;
    let (statistic, mixing): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let studentized = if t > 0.0 {
        statistic
            .iter()
            .zip(&mixing)
            .map(|(s, y)| s / (c * y.powi(k as i32) * t).sqrt())
            .collect()
    } else {
        statistic.clone()
    };
    Ok(BrownianLimit {
        statistic,
        mixing,
        c_k_alpha: c,
        studentized: EmpiricalLaw::new(studentized)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::ProcessTag;
    use crate::sampling::MixingVariable;

    fn law(v: &[f64]) -> EmpiricalLaw {
        EmpiricalLaw::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empirical_law_basics() {
        let l = law(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(l.sorted(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(l.cdf(0.0), 0.0);
        assert_eq!(l.cdf(2.5), 0.5);
        assert_eq!(l.cdf(4.0), 1.0);
        assert_eq!(l.mean(), 2.5);
        assert!((l.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert!(l.skewness().abs() < 1e-15);
        assert!(EmpiricalLaw::new(vec![]).is_err());
        assert!(EmpiricalLaw::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn ks_against_own_cdf_is_zero() {
        let l = law(&[0.3, -1.2, 2.0, 0.7, 0.1]);
        let copy = l.clone();
        assert_eq!(l.ks_two_sample(&copy), 0.0);
        // against a continuous CDF matching at the jumps, the sup is the jump size
        assert!((l.ks_distance(|x| copy.cdf(x)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ks_uniform_grid_sample() {
        let n = 100;
        let l = law(&(0..n)
            .map(|i| (i as f64 + 0.5) / n as f64)
            .collect::<Vec<_>>());
        let d = l.ks_distance(|x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
        assert!(l.ks_distance_outside(|x| x.clamp(0.0, 1.0), 0.2, 0.4) <= d + 1e-15);
    }

    #[test]
    fn ks_critical_values() {
        assert!((ks_critical_value(1024.0) - 1.628 / (32.0 + 0.12 + 0.11 / 32.0)).abs() < 1e-15);
        assert!((ks_two_sample_critical_value(100, 100) - ks_critical_value(50.0)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(gaussian_moment(1), 0.0);
        assert_eq!(gaussian_moment(2), 1.0);
        assert_eq!(gaussian_moment(4), 3.0);
        assert_eq!(gaussian_moment(6), 15.0);
        assert!((gaussian_abs_moment(1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((gaussian_abs_moment(2.0) - 1.0).abs() < 1e-14);
        assert!((normal_cdf(0.0, 3.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn slope_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x - 2.0).collect();
        let (s, c) = fit_slope(&xs, &ys);
        assert!((s - 0.5).abs() < 1e-15 && (c + 2.0).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    fn linear_path(alpha: f64, grid: TimeGrid, slope: f64) -> SamplePath {
        let values = (0..grid.len()).map(|i| slope * grid.time(i)).collect();
        let params = GreyParams::new(alpha, 0.5).unwrap();
        let mixing = Some(MixingVariable {
            value: 1.7,
            beta: 0.5,
        });
        SamplePath::new(grid, values, ProcessTag::Gbm, params, mixing).unwrap()
    }

    #[test]
    fn z_of_linear_path() {
        let grid = TimeGrid::new(1.0, 65, 8).unwrap();
        let p = linear_path(1.2, grid, 1.0);
        let eps = 4.0 * grid.step();
        let z = z_increments(&p, eps).unwrap();
        assert_eq!(z.len(), 65);
        for v in z {
            assert!((v - eps.powf(0.4)).abs() < 1e-14);
        }
        assert!(z_increments(&p, 16.0 * grid.step()).is_err());
    }

    #[test]
    fn integral_to_matches_trapezoid() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(integral_to(&v, 0.25, 1.0).unwrap(), 2.0);
        assert_eq!(integral_to(&v, 0.25, 0.5).unwrap(), 0.5);
        assert_eq!(integral_to(&v, 0.25, 0.0).unwrap(), 0.0);
        assert!(integral_to(&v, 0.25, 0.3).is_err());
        assert!(integral_to(&v, 0.25, 2.0).is_err());
    }

    #[test]
    fn hermite_cubic() {
        let a = hermite_coefficients(3);
        assert_eq!(a, vec![0.0, 3.0, 0.0, 1.0]);
        let a = hermite_coefficients(4);
        assert_eq!(a, vec![3.0, 0.0, 6.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_increment_power_variation() {
        // B(m/n) = m/n: each increment is 1/n
        let n = 16usize;
        let grid = TimeGrid::new(1.0, n + 1, 0).unwrap();
        let p = linear_path(1.0, grid, 1.0);
        let r = power_variation(&p, 2, PowerScaling::SqrtN).unwrap();
        let nf = n as f64;
        // n^{α}·n^{-2} − Y per term, α = 1
        let expected = (nf * (1.0 / nf - 1.7)) / nf.sqrt();
        assert!((r.statistic - expected).abs() < 1e-12);
        assert!(r.centered);
        let r = power_variation(&p, 2, PowerScaling::NPowNegAlphaHalf).unwrap();
        assert!(!r.centered);
        let r = power_variation(&p, 3, PowerScaling::SqrtN).unwrap();
        assert!(!r.centered);
    }

    #[test]
    fn c_k_alpha_rejections() {
        let cfg = QuadConfig::default();
        assert!(c_k_alpha(3, 1.0, &cfg).is_err());
        assert!(c_k_alpha(4, 0.5, &cfg).is_err());
        assert!(c_k_alpha(1, 0.5, &cfg).is_err());
    }
}
