//! Occupation densities, level crossings and the functionals linking them.
//!
//! Paths are read as linear interpolants of their grid values
//! ([`LinearPath`]). Under that reading time-in-bin and crossing counts are
//! exact, so `∫L dx = |I|` and the Banach–Kac identity
//! `∫ f(x) C(x, I) dx = ∫_I f(b(t)) |b'(t)| dt` hold up to quadrature of `f`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::paths::SamplePath;
use crate::quad::{gauss_legendre5, integrate, integrate_to_infinity, try_integrate, QuadConfig};
use crate::regularize::{c_psi, regularize_path, Kernel, RegularizedPath};
use crate::specfun::{mittag_leffler, EvalConfig, GreyParams};

/// Values on the uniform grid `start + i·step`, joined linearly.
#[derive(Debug, Clone, Copy)]
pub struct LinearPath<'a> {
    pub start: f64,
    pub step: f64,
    pub values: &'a [f64],
}

impl<'a> LinearPath<'a> {
    pub fn new(start: f64, step: f64, values: &'a [f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Precondition("need at least two grid points".into()));
        }
        if !(step > 0.0) {
            return Err(Error::Precondition(format!(
                "grid step must be > 0, got {step}"
            )));
        }
        Ok(Self {
            start,
            step,
            values,
        })
    }

    /// Core part `[0, T]` of a sample path.
    pub fn core(path: &'a SamplePath) -> Self {
        Self {
            start: 0.0,
            step: path.grid.step(),
            values: path.core_values(),
        }
    }

    /// Smoothed values of a regularized path on `[0, T]`.
    pub fn smoothed(reg: &'a RegularizedPath) -> Self {
        Self {
            start: 0.0,
            step: reg.base.grid.step(),
            values: &reg.values,
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (
            self.start,
            self.start + self.step * (self.values.len() - 1) as f64,
        )
    }

    pub fn duration(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    /// Sub-path on `[a, b]`; both ends must be grid times.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        let (lo, hi) = (self.index_of(a)?, self.index_of(b)?);
        if hi <= lo {
            return Err(Error::Precondition(format!("interval [{a}, {b}] is empty")));
        }
        Ok(Self {
            start: self.start + lo as f64 * self.step,
            step: self.step,
            values: &self.values[lo..=hi],
        })
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        let r = (t - self.start) / self.step;
        let i = r.round();
        if (r - i).abs() > 1e-8 * r.abs().max(1.0) || i < 0.0 || i as usize >= self.values.len() {
            return Err(Error::Precondition(format!(
                "time {t} is not a grid point of the path"
            )));
        }
        Ok(i as usize)
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.windows(2).map(|w| (w[0], w[1]))
    }
}

/// How to choose histogram bins.
#[derive(Debug, Clone, PartialEq)]
pub enum Bins {
    /// `⌈range / (2·sd of increments)⌉`, clamped to `[16, 512]`.
    Auto,
    Count(usize),
    Edges(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationDensity {
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    pub interval: (f64, f64),
}

impl OccupationDensity {
    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|e| e[1] - e[0])
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1]))
    }

    /// `Σ density·width`; equals the interval length.
    pub fn total_mass(&self) -> f64 {
        self.density
            .iter()
            .zip(self.widths())
            .map(|(d, w)| d * w)
            .sum()
    }

    pub fn max_width(&self) -> f64 {
        self.widths().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,density")?;
        for (x, d) in self.midpoints().zip(&self.density) {
            writeln!(out, "{x:?},{d:?}")?;
        }
        Ok(())
    }
}

fn auto_bin_count(path: &LinearPath, range: f64) -> usize {
    let incs: Vec<f64> = path.segments().map(|(a, b)| b - a).collect();
    let mean = incs.iter().sum::<f64>() / incs.len() as f64;
    let var = incs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / incs.len() as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return 16;
    }
    ((range / (2.0 * sd)).ceil() as usize).clamp(16, 512)
}

/// Histogram estimate of the local time `L(x, I)` of the interpolated path.
pub fn occupation_density(path: LinearPath, bins: &Bins) -> Result<OccupationDensity> {
    let lo = path.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = path
        .values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Precondition(
            "path contains non-finite values".into(),
        ));
    }
    if hi == lo {
        return Err(Error::NoDensity(format!(
            "path is constant at {lo}; its occupation measure is a point mass"
        )));
    }
    let edges = match bins {
        Bins::Auto | Bins::Count(_) => {
            let count = match bins {
                Bins::Count(c) => *c,
                _ => auto_bin_count(&path, hi - lo),
            };
            if count == 0 {
                return Err(Error::InvalidParameter("bin count must be >= 1".into()));
            }
            let width = (hi - lo) / count as f64;
            let mut e: Vec<f64> = (0..=count).map(|i| lo + i as f64 * width).collect();
            e[count] = hi;
            e
        }
        Bins::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParameter(
                    "bin edges must be strictly increasing".into(),
                ));
            }
            if e[0] > lo || e[e.len() - 1] < hi {
                return Err(Error::InvalidParameter(format!(
                    "bin edges [{}, {}] do not cover the path range [{lo}, {hi}]",
                    e[0],
                    e[e.len() - 1]
                )));
            }
            e.clone()
        }
    };

    let nbins = edges.len() - 1;
    let bin_of = |v: f64| edges.partition_point(|&e| e <= v).clamp(1, nbins) - 1;
    let mut time = vec![0.0; nbins];
    for (a, b) in path.segments() {
        if a == b {
            time[bin_of(a)] += path.step;
            continue;
        }
        let (s, e) = if a < b { (a, b) } else { (b, a) };
        let rate = path.step / (e - s);
        for (k, t) in time
            .iter_mut()
            .enumerate()
            .take(bin_of(e) + 1)
            .skip(bin_of(s))
        {
            let overlap = e.min(edges[k + 1]) - s.max(edges[k]);
            if overlap > 0.0 {
                *t += overlap * rate;
            }
        }
    }
    let density = time
        .iter()
        .zip(edges.windows(2))
        .map(|(t, e)| t / (e[1] - e[0]))
        .collect();
    Ok(OccupationDensity {
        bin_edges: edges,
        density,
        interval: path.interval(),
    })
}

/// Both sides of `∫_I f(b(s)) ds = ∫ f(x) L(x, I) dx`.
///
/// The left side is the trapezoid rule along the path, the right side pairs
/// `f` at bin midpoints with the histogram.
pub fn occupation_formula_check(
    path: LinearPath,
    f: impl Fn(f64) -> f64,
    bins: &Bins,
) -> Result<(f64, f64, OccupationDensity)> {
    let lhs = trapezoid(path.values.iter().map(|&v| f(v)), path.step);
    let occ = occupation_density(path, bins)?;
    let rhs = occ
        .midpoints()
        .zip(occ.widths())
        .zip(&occ.density)
        .map(|((x, w), d)| f(x) * d * w)
        .sum();
    Ok((lhs, rhs, occ))
}

/// Trapezoid rule for uniformly spaced samples.
pub fn trapezoid(samples: impl IntoIterator<Item = f64>, step: f64) -> f64 {
    let mut it = samples.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    let mut sum = 0.5 * first;
    let mut last = first;
    let mut count = 1usize;
    for v in it {
        sum += v;
        last = v;
        count += 1;
    }
    if count == 1 {
        return 0.0;
    }
    (sum - 0.5 * last) * step
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingCount {
    pub level: f64,
    pub count: u64,
    pub interval: (f64, f64),
}

/// Solutions of `b(t) = level` on the interpolated path.
///
/// Counts sign changes of `b − level` after dropping exact zeros: a vertex on
/// the level counts once only when the sign strictly changes across it, a
/// tangential touch counts zero, and a flat run on the level counts once
/// when the path leaves it on the other side.
pub fn count_crossings(path: LinearPath, level: f64) -> CrossingCount {
    let mut count = 0;
    let mut previous = 0.0f64;
    for &v in path.values {
        let sign = if v > level {
            1.0
        } else if v < level {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 {
            if previous != 0.0 && sign != previous {
                count += 1;
            }
            previous = sign;
        }
    }
    CrossingCount {
        level,
        count,
        interval: path.interval(),
    }
}

pub fn write_crossings_csv<W: Write>(counts: &[CrossingCount], mut out: W) -> Result<()> {
    writeln!(out, "x,count")?;
    for c in counts {
        writeln!(out, "{},{}", c.level, c.count)?;
    }
    Ok(())
}

/// `∫ f(x) C(x, I) dx`, integrating the piecewise-constant crossing count
/// between consecutive vertex levels with 5-point Gauss–Legendre.
pub fn level_side_functional(path: LinearPath, f: impl Fn(f64) -> f64) -> f64 {
    let mut levels: Vec<f64> = path.values.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() < 2 {
        return 0.0;
    }
    // Each rising or falling segment covers a contiguous run of level gaps.
    let mut cover = vec![0i64; levels.len()];
    for (a, b) in path.segments() {
        if a == b {
            continue;
        }
        let lo = levels.partition_point(|&x| x < a.min(b));
        let hi = levels.partition_point(|&x| x < a.max(b));
        cover[lo] += 1;
        cover[hi] -= 1;
    }
    let mut total = 0.0;
    let mut running = 0;
    for k in 0..levels.len() - 1 {
        running += cover[k];
        if running != 0 {
            total += running as f64 * gauss_legendre5(&f, levels[k], levels[k + 1]);
        }
    }
    total
}

/// `∫_I f(b(t)) |b'(t)| dt` for the interpolated path, exact per segment up
/// to 5-point Gauss–Legendre in `f`.
pub fn linear_banach_kac(path: LinearPath, f: impl Fn(f64) -> f64) -> f64 {
    path.segments()
        .map(|(a, b)| {
            let slope = (b - a) / path.step;
            gauss_legendre5(|s| f(a + slope * s), 0.0, path.step) * slope.abs()
        })
        .sum()
}

/// `∫_I f(B^ε(t)) |d/dt B^ε(t)| dt` by the trapezoid rule on the core grid.
pub fn banach_kac_functional(
    reg: &RegularizedPath,
    f: impl Fn(f64) -> f64,
    interval: Option<(f64, f64)>,
) -> Result<f64> {
    let step = reg.base.grid.step();
    let (lo, hi) = match interval {
        None => (0, reg.values.len() - 1),
        Some((a, b)) => {
            let whole = LinearPath::new(0.0, step, &reg.values)?;
            let sub = whole.restrict(a, b)?;
            let lo = ((sub.start) / step).round() as usize;
            (lo, lo + sub.values.len() - 1)
        }
    };
    let samples = (lo..=hi).map(|i| f(reg.values[i]) * reg.derivative[i].abs());
    Ok(trapezoid(samples, step))
}

/// `∫₀¹∫₀¹ |t − s|^{−α/2} ds dt = 8 / ((2 − α)(4 − α))`.
pub fn berman_time_integral(alpha: f64) -> f64 {
    8.0 / ((2.0 - alpha) * (4.0 - alpha))
}

/// The same double integral by nested adaptive quadrature. The inner integral
/// is split at the diagonal and each side mapped by `|t − s| = w⁴`.
pub fn berman_time_integral_quadrature(alpha: f64, abs_tol: f64) -> Result<f64> {
    let inner_cfg = QuadConfig::with_abs_tol(abs_tol * 0.1);
    let outer_cfg = QuadConfig::with_abs_tol(abs_tol);
    let side = |len: f64| -> Result<f64> {
        if len <= 0.0 {
            return Ok(0.0);
        }
        let f = |w: f64| 4.0 * w.powi(3) * w.powi(4).powf(-0.5 * alpha);
        Ok(integrate(f, 0.0, len.powf(0.25), &inner_cfg)?.value)
    };
    let inner = |t: f64| -> Result<f64> { Ok(side(t)? + side(1.0 - t)?) };
    Ok(try_integrate(inner, 0.0, 1.0, &outer_cfg)?.value)
}

/// `√2 · ∫_ℝ E_β(−r²) dr · 8/((2−α)(4−α))`, finite for every admissible
/// `(α, β)`, which certifies square-integrable local times.
pub fn berman_existence_value(params: GreyParams, cfg: &EvalConfig) -> Result<f64> {
    let quad = QuadConfig::with_abs_tol(cfg.abs_tol.max(1e-10));
    let half = integrate_to_infinity(
        |r| mittag_leffler(params.beta(), -r * r, cfg).unwrap_or(f64::NAN),
        0.0,
        &quad,
    )?;
    Ok(2f64.sqrt() * 2.0 * half.value * berman_time_integral(params.alpha()))
}

/// Crossings-based estimate and its local-time target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingsApprox {
    /// `ε^{1−α/2} √(π/2) / C_ψ · ∫ f(x) C^{B^ε}(x, I) dx`.
    pub scaled_crossings: f64,
    /// `√Y · ∫_I f(B(t)) dt`.
    pub target: f64,
}

pub fn crossings_local_time_approx(
    path: &SamplePath,
    kernel: &Kernel,
    epsilon: f64,
    f: impl Fn(f64) -> f64,
    interval: (f64, f64),
) -> Result<CrossingsApprox> {
    let alpha = path.params.alpha();
    let reg = regularize_path(path, kernel, epsilon)?;
    let bk = banach_kac_functional(&reg, &f, Some(interval))?;
    let scale = reg.epsilon.powf(1.0 - 0.5 * alpha) * (std::f64::consts::FRAC_PI_2).sqrt()
        / c_psi(kernel, alpha)?;
    let base = LinearPath::core(path).restrict(interval.0, interval.1)?;
    let occupation = trapezoid(base.values.iter().map(|&v| f(v)), base.step);
    Ok(CrossingsApprox {
        scaled_crossings: scale * bk,
        target: path.mixing_value().sqrt() * occupation,
    })
}
