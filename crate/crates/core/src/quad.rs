//! Adaptive Gauss–Kronrod quadrature.
//!
//! Global subdivision: the interval with the largest error estimate is bisected
//! until the summed estimate falls under `max(abs_tol, rel_tol·|I|)`. Semi-infinite
//! ranges are mapped onto `[0, 1)` with `x = a + u/(1−u)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

impl QuadConfig {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Five-point Gauss–Legendre nodes and weights on `[-1, 1]`; exact for degree ≤ 9.
#[allow(clippy::excessive_precision)]
pub const GL5: [(f64, f64); 5] = [
    (
        -0.906_179_845_938_663_992_797_626_878_299_4,
        0.236_926_885_056_189_087_514_264_040_719_9,
    ),
    (
        -0.538_469_310_105_683_091_036_314_420_700_2,
        0.478_628_670_499_366_468_041_291_514_835_6,
    ),
    (0.0, 0.568_888_888_888_888_888_888_888_888_888_9),
    (
        0.538_469_310_105_683_091_036_314_420_700_2,
        0.478_628_670_499_366_468_041_291_514_835_6,
    ),
    (
        0.906_179_845_938_663_992_797_626_878_299_4,
        0.236_926_885_056_189_087_514_264_040_719_9,
    ),
];

/// Fixed five-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre5(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    h * GL5.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>()
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn kronrod21<F, E>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<Error>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    let mut eval = |x: f64| -> Result<f64, E> {
        let y = f(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::eval("quadrature", x, format!("integrand returned {y}")).into())
        }
    };

    let fc = eval(center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();

    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let (y1, y2) = (eval(center - dx)?, eval(center + dx)?);
        fv1[jtw] = y1;
        fv2[jtw] = y2;
        res_g += WG[j] * (y1 + y2);
        res_k += WGK[jtw] * (y1 + y2);
        res_abs += WGK[jtw] * (y1.abs() + y2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let (y1, y2) = (eval(center - dx)?, eval(center + dx)?);
        fv1[jtwm1] = y1;
        fv2[jtwm1] = y2;
        res_k += WGK[jtwm1] * (y1 + y2);
        res_abs += WGK[jtwm1] * (y1.abs() + y2.abs());
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * half;
    let abs_half = half.abs();
    Ok((
        res_k * half,
        rescale_error(err, res_abs * abs_half, res_asc * abs_half),
    ))
}

/// Integrates a fallible integrand over the finite interval `[a, b]`.
pub fn try_integrate<F, E>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<Error>,
{
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error) = kronrod21(&mut f, a, b)?;
    let mut evaluations = 21;
    let mut total_value = value;
    let mut total_error = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    // Segments too narrow to bisect further; their error stays in the total.
    let mut frozen_error = 0.0;
    let mut frozen_value = 0.0;

    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total_value.abs());
        if total_error <= tol {
            break;
        }
        if heap.len() >= cfg.max_intervals {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: total_error,
                tolerance: tol,
            }
            .into());
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: total_error,
                tolerance: tol,
            }
            .into());
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            frozen_error += worst.error;
            frozen_value += worst.value;
            if heap.is_empty() {
                return Err(Error::Quadrature {
                    a,
                    b,
                    estimate: total_error,
                    tolerance: tol,
                }
                .into());
            }
            continue;
        }
        let (v1, e1) = kronrod21(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod21(&mut f, mid, worst.b)?;
        evaluations += 42;
        total_value += v1 + v2 - worst.value;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        total_error += e1 + e2 - worst.error;
        if evaluations % (42 * 64) == 21 {
            total_error = frozen_error + heap.iter().map(|s| s.error).sum::<f64>();
        }
    }

    // Re-sum to limit drift from the running update.
    let value = frozen_value + heap.iter().map(|s| s.value).sum::<f64>();
    Ok(Estimate {
        value,
        error: total_error,
        evaluations,
    })
}

pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate> {
    let mut f = f;
    try_integrate(|x| Ok::<_, Error>(f(x)), a, b, cfg)
}

/// Integrates over `[a, ∞)` via `x = a + u/(1−u)`.
pub fn try_integrate_to_infinity<F, E>(mut f: F, a: f64, cfg: &QuadConfig) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<Error>,
{
    try_integrate(
        |u: f64| {
            let w = 1.0 - u;
            let x = a + u / w;
            if !x.is_finite() {
                return Ok(0.0);
            }
            let y = f(x)?;
            Ok(if y == 0.0 { 0.0 } else { y / (w * w) })
        },
        0.0,
        1.0,
        cfg,
    )
}

pub fn integrate_to_infinity(
    f: impl FnMut(f64) -> f64,
    a: f64,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    let mut f = f;
    try_integrate_to_infinity(|x| Ok::<_, Error>(f(x)), a, cfg)
}

/// Sums finite-interval integrals over consecutive `points`, giving each piece an
/// equal share of the absolute tolerance.
pub fn try_integrate_pieces<F, E>(mut f: F, points: &[f64], cfg: &QuadConfig) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<Error>,
{
    let pieces = points.len().saturating_sub(1).max(1) as f64;
    let sub = QuadConfig {
        abs_tol: cfg.abs_tol / pieces,
        ..*cfg
    };
    let mut out = Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in points.windows(2) {
        let e = try_integrate(&mut f, w[0], w[1], &sub)?;
        out.value += e.value;
        out.error += e.error;
        out.evaluations += e.evaluations;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let e = integrate(
            |x| x.powi(5) - 3.0 * x * x,
            -1.0,
            2.0,
            &QuadConfig::default(),
        )
        .unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((e.value - exact).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_converges() {
        // ∫_0^1 x^{-3/4} dx = 4
        let cfg = QuadConfig::with_abs_tol(1e-10);
        let e = integrate(|x| x.powf(-0.75), 0.0, 1.0, &cfg).unwrap();
        assert!((e.value - 4.0).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn semi_infinite_gaussian() {
        let e = integrate_to_infinity(|x| (-x * x).exp(), 0.0, &QuadConfig::with_abs_tol(1e-12))
            .unwrap();
        assert!((e.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let cfg = QuadConfig::default();
        let fwd = integrate(f64::cos, 0.0, 1.0, &cfg).unwrap().value;
        let rev = integrate(f64::cos, 1.0, 0.0, &cfg).unwrap().value;
        assert!((fwd + rev).abs() < 1e-14);
    }

    #[test]
    fn nonfinite_integrand_is_an_error() {
        let r = integrate(|x| 1.0 / (x - 0.5), 0.0, 1.0, &QuadConfig::default());
        // The midpoint is a GK node, so the first panel hits the pole.
        assert!(r.is_err());
    }

    #[test]
    fn exhausting_intervals_reports_failure() {
        let cfg = QuadConfig {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_intervals: 3,
        };
        let r = integrate(|x| (50.0 * x).sin() / x.sqrt(), 1e-9, 10.0, &cfg);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn gauss_legendre5_degree_nine() {
        let v = gauss_legendre5(|x| x.powi(9) + x.powi(8), 0.0, 1.0);
        assert!((v - (0.1 + 1.0 / 9.0)).abs() < 1e-14);
    }
}
