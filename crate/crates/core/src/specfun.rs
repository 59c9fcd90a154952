//! Mittag-Leffler function, M-Wright density and the densities built on them.
//!
//! `E_β(x) = Σ xⁿ/Γ(βn+1)` is summed directly when cancellation is harmless.
//! Otherwise, for negative arguments and `0 < β < 1`, the spectral representation
//!
//! ```text
//! E_β(−x) = sin(βπ)/(βπ) ∫₀^∞ exp(−(xv)^{1/β}) / (v² + 2v·cos βπ + 1) dv
//! ```
//!
//! is integrated; it is positive by construction and behaves like `1/(x·Γ(1−β))`
//! for large `x`.
//!
//! The M-Wright density uses the standard series
//!
//! ```text
//! M_β(τ) = Σ_{n≥0} (−τ)ⁿ / (n!·Γ(1−β−βn)) = (1/π) Σ_{n≥0} (−τ)ⁿ/n! · Γ(β(n+1))·sin(πβ(n+1))
//! ```
//!
//! (the second form is the first after `1/Γ(z) = Γ(1−z)·sin(πz)/π`). Where the
//! series cancels badly it switches to the Kanter form: with
//! `a(u) = sin(βπu)^{β/(1−β)}·sin((1−β)πu) / sin(πu)^{1/(1−β)}` and `s = τ^{1/(1−β)}`,
//!
//! ```text
//! M_β(τ) = τ^{β/(1−β)}/(1−β) ∫₀¹ a(u)·exp(−a(u)·s) du,
//! ```
//!
//! which is the density of `S^{−β}` for a one-sided stable `S` with
//! `E e^{−λS} = e^{−λ^β}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};

/// Index pair `(α, β)` of a grey Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreyParams {
    alpha: f64,
    beta: f64,
}

impl GreyParams {
    /// Requires `0 < α < 2` and `0 < β ≤ 1`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 2), got {alpha}"
            )));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Hurst index `H = α/2` of the underlying fBm.
    pub fn hurst(&self) -> f64 {
        0.5 * self.alpha
    }
}

/// Accuracy controls for special-function evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Absolute accuracy target.
    pub abs_tol: f64,
    /// Largest `|x|` (or `τ`) at which the power series is attempted.
    pub series_radius: f64,
    pub max_terms: usize,
    /// Upper end of the validated `τ` range for `m_wright_density`.
    pub tau_max: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            series_radius: 5.0,
            max_terms: 1000,
            tau_max: 1e4,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0)
            || !(self.series_radius > 0.0)
            || self.max_terms < 1
            || !(self.tau_max > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "bad evaluation config {self:?}"
            )));
        }
        Ok(())
    }

    fn quad(&self, abs_tol: f64) -> QuadConfig {
        QuadConfig {
            abs_tol,
            rel_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

/// `sin(πx)`, exact at integers.
pub(crate) fn sinpi(x: f64) -> f64 {
    let mut r = x - 2.0 * (x / 2.0).floor();
    let mut sign = 1.0;
    if r >= 1.0 {
        r -= 1.0;
        sign = -1.0;
    }
    if r > 0.5 {
        r = 1.0 - r;
    }
    sign * (PI * r).sin()
}

fn check_beta_open(function: &'static str, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Precondition(format!(
            "{function}: beta must lie in (0, 1), got {beta}"
        )));
    }
    Ok(())
}

/// Mittag-Leffler function `E_β(x)` for `0 < β ≤ 1`.
pub fn mittag_leffler(beta: f64, x: f64, cfg: &EvalConfig) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Precondition(format!(
            "mittag_leffler: beta must lie in (0, 1], got {beta}"
        )));
    }
    if !x.is_finite() {
        return Err(Error::Precondition(format!(
            "mittag_leffler: x must be finite, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if beta == 1.0 {
        return Ok(x.exp());
    }
    if x > 0.0 {
        return ml_series_positive(beta, x, cfg);
    }
    if -x <= cfg.series_radius {
        if let Some(v) = ml_series_negative(beta, x, cfg) {
            return Ok(v);
        }
    }
    ml_spectral(beta, -x, cfg)
}

fn ml_series_positive(beta: f64, x: f64, cfg: &EvalConfig) -> Result<f64> {
    let lx = x.ln();
    let mut sum = 1.0;
    let mut prev = 1.0;
    for n in 1..cfg.max_terms {
        let nf = n as f64;
        let term = (nf * lx - ln_gamma(beta * nf + 1.0)).exp();
        sum += term;
        if !sum.is_finite() {
            return Err(Error::eval("mittag_leffler", x, "series overflow"));
        }
        if term < prev && term <= (0.01 * cfg.abs_tol).max(1e-17 * sum) {
            return Ok(sum);
        }
        prev = term;
    }
    Err(Error::eval(
        "mittag_leffler",
        x,
        format!("series did not converge within {} terms", cfg.max_terms),
    ))
}

/// Alternating series; `None` when rounding in the partial sums could exceed the
/// tolerance or the terms have not died out by `max_terms`.
pub(crate) fn ml_series_negative(beta: f64, x: f64, cfg: &EvalConfig) -> Option<f64> {
    let lx = x.abs().ln();
    let mut sum = 1.0;
    let mut mass = 1.0;
    let mut prev = 1.0;
    for n in 1..cfg.max_terms {
        let nf = n as f64;
        let mag = (nf * lx - ln_gamma(beta * nf + 1.0)).exp();
        let term = if n % 2 == 0 { mag } else { -mag };
        sum += term;
        mass += mag;
        if mag < prev && mag <= 0.01 * cfg.abs_tol {
            let rounding = 8.0 * f64::EPSILON * mass * (nf + 1.0).sqrt();
            return (rounding <= 0.1 * cfg.abs_tol).then_some(sum);
        }
        prev = mag;
    }
    None
}

/// `E_β(−x)` for `x > 0` by the spectral integral in the scaled variable
/// `w = x·v`, on dyadic pieces with a breakpoint at the kernel peak.
pub(crate) fn ml_spectral(beta: f64, x: f64, cfg: &EvalConfig) -> Result<f64> {
    let (s, c) = (sinpi(beta), (PI * beta).cos());
    let pref = s / (beta * PI);
    let inv_beta = 1.0 / beta;
    let integrand = |w: f64| -> f64 {
        let e = (-w.powf(inv_beta)).exp();
        if e == 0.0 {
            return 0.0;
        }
        let v = w / x;
        e / ((v + c) * (v + c) + s * s)
    };
    let upper = 750f64.powf(beta);
    let mut points = vec![0.0];
    let mut w = 1.0f64.min(upper);
    while w < upper {
        points.push(w);
        w *= 2.0;
    }
    let peak = -c * x;
    if peak > 0.0 && peak < upper {
        points.push(peak);
    }
    points.push(upper);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let q = cfg.quad(0.25 * cfg.abs_tol * x / pref);
    let total = quad::try_integrate_pieces(|w| Ok::<f64, Error>(integrand(w)), &points, &q)
        .map_err(|e| Error::eval("mittag_leffler", -x, e.to_string()))?;
    Ok(pref * total.value / x)
}

/// M-Wright density `M_β(τ)` for `0 < β < 1`, `τ ≥ 0`.
pub fn m_wright_density(beta: f64, tau: f64, cfg: &EvalConfig) -> Result<f64> {
    check_beta_open("m_wright_density", beta)?;
    if !(tau >= 0.0) {
        return Err(Error::Precondition(format!(
            "m_wright_density: tau must be >= 0, got {tau}"
        )));
    }
    if tau > cfg.tau_max || !tau.is_finite() {
        return Err(Error::eval(
            "m_wright_density",
            tau,
            format!("outside the validated range [0, {}]", cfg.tau_max),
        ));
    }
    m_wright_unchecked(beta, tau, cfg)
}

fn m_wright_unchecked(beta: f64, tau: f64, cfg: &EvalConfig) -> Result<f64> {
    if tau == 0.0 {
        return Ok(1.0 / gamma(1.0 - beta));
    }
    if tau <= cfg.series_radius {
        if let Some(v) = m_wright_series(beta, tau, cfg) {
            return Ok(v.max(0.0));
        }
    }
    m_wright_kanter(beta, tau, cfg)
}

/// `M_β` with the tail beyond `tau_max` replaced by zero. `M_β(τ)` decays like
/// `exp(−c·τ^{1/(1−β)})` with `c ≥ 0.3` for every `β`, so at the default
/// `tau_max = 1e4` the discarded mass is far below `f64` resolution.
pub(crate) fn m_wright_truncated(beta: f64, tau: f64, cfg: &EvalConfig) -> Result<f64> {
    if tau > cfg.tau_max {
        Ok(0.0)
    } else {
        m_wright_unchecked(beta, tau, cfg)
    }
}

fn m_wright_series(beta: f64, tau: f64, cfg: &EvalConfig) -> Option<f64> {
    let lt = tau.ln();
    let mut sum = 0.0;
    let mut mass = 0.0;
    let mut prev = f64::INFINITY;
    for n in 0..cfg.max_terms {
        let nf = n as f64;
        let g = beta * (nf + 1.0);
        // Magnitude bound without the sine factor, so vanishing terms do not stop the loop early.
        let mag = (nf * lt - ln_gamma(nf + 1.0) + ln_gamma(g)).exp() / PI;
        let s = sinpi(g);
        let term = if n % 2 == 0 { mag * s } else { -mag * s };
        sum += term;
        mass += mag;
        if n > 0 && mag < prev && mag <= 0.01 * cfg.abs_tol {
            let rounding = 8.0 * f64::EPSILON * mass * (nf + 1.0).sqrt();
            return (rounding <= 0.1 * cfg.abs_tol).then_some(sum);
        }
        prev = mag;
    }
    None
}

/// Kanter's function `a(u)` on `(0, 1)`.
pub(crate) fn kanter_a(beta: f64, u: f64) -> f64 {
    let s_beta = sinpi(beta * u);
    let s_one = sinpi(u);
    let s_rest = sinpi((1.0 - beta) * u);
    (s_beta / s_one).powf(1.0 / (1.0 - beta)) * s_rest / s_beta
}

fn m_wright_kanter(beta: f64, tau: f64, cfg: &EvalConfig) -> Result<f64> {
    let inv = 1.0 / (1.0 - beta);
    let s = tau.powf(inv);
    let pref = inv * tau.powf(beta * inv);
    let integrand = |u: f64| {
        let a = kanter_a(beta, u);
        let e = (-a * s).exp();
        if e == 0.0 {
            0.0
        } else {
            a * e
        }
    };
    let q = cfg.quad(0.5 * cfg.abs_tol / pref);
    let est = quad::integrate(integrand, 0.0, 1.0, &q)
        .map_err(|e| Error::eval("m_wright_density", tau, e.to_string()))?;
    Ok((pref * est.value).max(0.0))
}

/// One-dimensional density of `B_{α,β}(t)`:
/// `f(x, t) = t^{−α/2}/√2 · M_{β/2}(√2·|x|·t^{−α/2})`.
pub fn marginal_density(params: GreyParams, x: f64, t: f64, cfg: &EvalConfig) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!(
            "marginal_density: t must be > 0, got {t}"
        )));
    }
    let scale = t.powf(-0.5 * params.alpha());
    let z = std::f64::consts::SQRT_2 * x.abs() * scale;
    Ok(scale / std::f64::consts::SQRT_2 * m_wright_density(0.5 * params.beta(), z, cfg)?)
}

/// Density generator of the elliptical law of `(B_{α,β}(t₁), …, B_{α,β}(t_n))`:
/// `g_β(x) = (2π)^{−n/2} ∫₀^∞ τ^{−n/2} e^{−x/τ} M_β(τ) dτ`.
pub fn density_generator(beta: f64, n: u32, x: f64, cfg: &EvalConfig) -> Result<f64> {
    if n < 1 {
        return Err(Error::Precondition(
            "density_generator: n must be >= 1".into(),
        ));
    }
    if !(x >= 0.0) {
        return Err(Error::Precondition(format!(
            "density_generator: x must be >= 0, got {x}"
        )));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Precondition(format!(
            "density_generator: beta must lie in (0, 1], got {beta}"
        )));
    }
    let half_n = 0.5 * n as f64;
    let norm = (2.0 * PI).powf(-half_n);
    if beta == 1.0 {
        return Ok(norm * (-x).exp());
    }
    if x == 0.0 && n >= 2 {
        return Err(Error::eval(
            "density_generator",
            x,
            "integral diverges at x = 0 for n >= 2",
        ));
    }
    let integrand = |tau: f64| -> Result<f64> {
        if tau == 0.0 {
            return Ok(0.0);
        }
        let damp = (-x / tau).exp();
        if damp == 0.0 {
            return Ok(0.0);
        }
        Ok(tau.powf(-half_n) * damp * m_wright_truncated(beta, tau, cfg)?)
    };
    let q = cfg.quad(0.25 * cfg.abs_tol / norm);
    let head = quad::try_integrate(integrand, 0.0, 1.0, &q)?;
    let tail = quad::try_integrate_to_infinity(integrand, 1.0, &q)?;
    Ok(norm * (head.value + tail.value))
}
