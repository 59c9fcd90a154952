//! Uniform time grids, fBm and gBm sample paths, and the closed-form
//! second-order structure of gBm.
//!
//! fBm is produced from fractional Gaussian noise by circulant embedding
//! (Davies–Harte). When the embedding spectrum is not numerically PSD the
//! generator falls back to a Cholesky factor of the noise covariance.
//! Paths are generated on `[−ext, T + ext]` and pinned to zero at `t = 0`.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::sampling::{
    sample_d_beta, sample_inverse_subordinator, sample_y_beta, MixingVariable, RngStream,
};
use crate::specfun::{mittag_leffler, EvalConfig, GreyParams};

/// Eigenvalues of the embedding above this (negative) threshold are clipped to zero.
pub const EIGEN_CLIP: f64 = -1e-9;

/// Grid `t_i = (i − ext_steps)·Δ`, `Δ = T/(n−1)`, covering `[−ext, T + ext]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n: usize,
    ext_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n: usize, ext_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs n >= 2 points, got {n}"
            )));
        }
        Ok(Self {
            horizon,
            n,
            ext_steps,
        })
    }

    /// Grid whose margin `ext` (in time units) must be a multiple of the spacing.
    pub fn with_margin(horizon: f64, n: usize, ext: f64) -> Result<Self> {
        let grid = Self::new(horizon, n, 0)?;
        let ext_steps = grid
            .steps_for(ext)
            .or_else(|e| if ext == 0.0 { Ok(0) } else { Err(e) })?;
        Ok(Self { ext_steps, ..grid })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of points on the core interval `[0, T]`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ext_steps(&self) -> usize {
        self.ext_steps
    }

    pub fn step(&self) -> f64 {
        self.horizon / (self.n - 1) as f64
    }

    pub fn ext(&self) -> f64 {
        self.ext_steps as f64 * self.step()
    }

    /// Total point count including both margins.
    pub fn len(&self) -> usize {
        self.n + 2 * self.ext_steps
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `t = 0`.
    pub fn zero_index(&self) -> usize {
        self.ext_steps
    }

    pub fn core_range(&self) -> std::ops::Range<usize> {
        self.ext_steps..self.ext_steps + self.n
    }

    pub fn time(&self, index: usize) -> f64 {
        (index as f64 - self.ext_steps as f64) * self.step()
    }

    /// Converts a positive time lag into a whole number of steps.
    pub fn steps_for(&self, lag: f64) -> Result<usize> {
        let ratio = lag / self.step();
        let steps = ratio.round();
        if !(lag > 0.0) || steps < 1.0 || (ratio - steps).abs() > 1e-8 * ratio.max(1.0) {
            return Err(Error::Precondition(format!(
                "{lag} is not a positive multiple of the grid spacing {}",
                self.step()
            )));
        }
        Ok(steps as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessTag {
    Fbm,
    Gbm,
    Regularized,
}

impl ProcessTag {
    fn code(self) -> u8 {
        match self {
            ProcessTag::Fbm => 0,
            ProcessTag::Gbm => 1,
            ProcessTag::Regularized => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ProcessTag::Fbm),
            1 => Ok(ProcessTag::Gbm),
            2 => Ok(ProcessTag::Regularized),
            other => Err(Error::Format(format!("unknown process tag {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub tag: ProcessTag,
    pub params: GreyParams,
    pub mixing: Option<MixingVariable>,
}

impl SamplePath {
    pub fn new(
        grid: TimeGrid,
        values: Vec<f64>,
        tag: ProcessTag,
        params: GreyParams,
        mixing: Option<MixingVariable>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "path has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            tag,
            params,
            mixing,
        })
    }

    /// Values on `[0, T]`.
    pub fn core_values(&self) -> &[f64] {
        &self.values[self.grid.core_range()]
    }

    /// Recorded `Y`, or 1 when none was drawn.
    pub fn mixing_value(&self) -> f64 {
        self.mixing.map_or(1.0, |m| m.value)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid.len()).map(|i| self.grid.time(i))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,value")?;
        for (t, v) in self.times().zip(&self.values) {
            writeln!(out, "{t:?},{v:?}")?;
        }
        Ok(())
    }

    /// Little-endian layout: `b"GBMP"`, u16 version, u8 tag, u8 reserved,
    /// u64 n, f64 Δ, u64 ext steps, f64 α, f64 β, f64 Y (NaN when absent),
    /// u64 value count, then the values as f64.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        out.write_all(&[self.tag.code(), 0])?;
        out.write_all(&(self.grid.n as u64).to_le_bytes())?;
        out.write_all(&self.grid.step().to_le_bytes())?;
        out.write_all(&(self.grid.ext_steps as u64).to_le_bytes())?;
        out.write_all(&self.params.alpha().to_le_bytes())?;
        out.write_all(&self.params.beta().to_le_bytes())?;
        let y = self.mixing.map_or(f64::NAN, |m| m.value);
        out.write_all(&y.to_le_bytes())?;
        out.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a path file (bad magic)".into()));
        }
        let mut two = [0u8; 2];
        input.read_exact(&mut two)?;
        let version = u16::from_le_bytes(two);
        if version != BINARY_VERSION {
            return Err(Error::Format(format!(
                "unsupported path file version {version}"
            )));
        }
        input.read_exact(&mut two)?;
        let tag = ProcessTag::from_code(two[0])?;
        let n = read_u64(&mut input)? as usize;
        let step = read_f64(&mut input)?;
        let ext_steps = read_u64(&mut input)? as usize;
        let alpha = read_f64(&mut input)?;
        let beta = read_f64(&mut input)?;
        let y = read_f64(&mut input)?;
        let count = read_u64(&mut input)? as usize;
        let grid = TimeGrid::new(step * (n.max(2) - 1) as f64, n, ext_steps)?;
        if count != grid.len() {
            return Err(Error::Format(format!(
                "value count {count} does not match grid length {}",
                grid.len()
            )));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(read_f64(&mut input)?);
        }
        let mixing = (!y.is_nan()).then_some(MixingVariable { value: y, beta });
        Self::new(grid, values, tag, GreyParams::new(alpha, beta)?, mixing)
    }
}

const BINARY_MAGIC: &[u8; 4] = b"GBMP";
const BINARY_VERSION: u16 = 1;

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

/// `Cov(B(t), B(s)) = (|t|^α + |s|^α − |t−s|^α) / (2Γ(β+1))`.
pub fn covariance(params: GreyParams, t: f64, s: f64) -> f64 {
    let a = params.alpha();
    (t.abs().powf(a) + s.abs().powf(a) - (t - s).abs().powf(a)) / (2.0 * gamma(params.beta() + 1.0))
}

/// `E B(t)^{2n} = (2n)! / (2^n Γ(βn+1)) · t^{nα}`.
pub fn even_moment(params: GreyParams, n: u32, t: f64) -> f64 {
    let nf = n as f64;
    let factorial_2n = gamma(2.0 * nf + 1.0);
    factorial_2n / (2f64.powi(n as i32) * gamma(params.beta() * nf + 1.0))
        * t.abs().powf(nf * params.alpha())
}

/// `E exp(iθ(B(t) − B(s))) = E_β(−θ²|t−s|^α / 2)`.
pub fn char_increment(
    params: GreyParams,
    theta: f64,
    t: f64,
    s: f64,
    cfg: &EvalConfig,
) -> Result<f64> {
    let x = -0.5 * theta * theta * (t - s).abs().powf(params.alpha());
    mittag_leffler(params.beta(), x, cfg)
}

/// Autocovariance of unit-spaced fractional Gaussian noise at lag `k`.
fn fgn_autocov(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

#[derive(Clone)]
enum Method {
    Circulant {
        /// `√(λ_j / M)` for the size-`M` embedding.
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Dense {
        lower: DMatrix<f64>,
    },
}

/// Reusable fBm generator for a fixed Hurst index and grid.
///
/// The embedding spectrum or Cholesky factor is computed once and shared
/// read-only between replicas.
#[derive(Clone)]
pub struct FbmGenerator {
    hurst: f64,
    grid: TimeGrid,
    method: Method,
    clipped: usize,
}

impl std::fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmGenerator")
            .field("hurst", &self.hurst)
            .field("grid", &self.grid)
            .field("circulant", &self.is_circulant())
            .field("clipped", &self.clipped)
            .finish()
    }
}

impl FbmGenerator {
    pub fn new(hurst: f64, grid: TimeGrid) -> Result<Self> {
        check_hurst(hurst)?;
        let m = grid.len() - 1;
        let size = 2 * m;
        let mut row: Vec<Complex64> = (0..size)
            .map(|j| {
                let lag = if j <= m { j } else { size - j };
                Complex64::new(fgn_autocov(hurst, lag), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut row);

        let mut clipped = 0;
        let mut scale = Vec::with_capacity(size);
        for c in &row {
            let mut lambda = c.re;
            if lambda < EIGEN_CLIP {
                return Self::dense(hurst, grid);
            }
            if lambda < 0.0 {
                lambda = 0.0;
                clipped += 1;
            }
            scale.push((lambda / size as f64).sqrt());
        }
        Ok(Self {
            hurst,
            grid,
            method: Method::Circulant { scale, fft },
            clipped,
        })
    }

    /// Cholesky factor of the full noise covariance; exact, cubic cost.
    pub fn dense(hurst: f64, grid: TimeGrid) -> Result<Self> {
        check_hurst(hurst)?;
        let m = grid.len() - 1;
        let cov = DMatrix::from_fn(m, m, |i, j| fgn_autocov(hurst, i.abs_diff(j)));
        let lower = cov
            .cholesky()
            .ok_or_else(|| {
                Error::eval("fbm_dense", hurst, "noise covariance not positive definite")
            })?
            .l();
        Ok(Self {
            hurst,
            grid,
            method: Method::Dense { lower },
            clipped: 0,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn is_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    /// Number of slightly negative embedding eigenvalues set to zero.
    pub fn clipped_eigenvalues(&self) -> usize {
        self.clipped
    }

    /// fBm values on every grid point, exactly 0 at `t = 0`.
    pub fn sample_values<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.grid.len() - 1;
        let noise: Vec<f64> = match &self.method {
            Method::Circulant { scale, fft } => {
                let mut buf: Vec<Complex64> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..m].iter().map(|c| c.re).collect()
            }
            Method::Dense { lower } => {
                let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
                (lower * z).iter().copied().collect()
            }
        };
        let step_scale = self.grid.step().powf(self.hurst);
        let mut values = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for x in noise {
            acc += x * step_scale;
            values.push(acc);
        }
        let zero = self.grid.zero_index();
        let origin = values[zero];
        for v in &mut values {
            *v -= origin;
        }
        values[zero] = 0.0;
        values
    }

    pub fn sample_fbm<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SamplePath> {
        let params = GreyParams::new(2.0 * self.hurst, 1.0)?;
        SamplePath::new(
            self.grid,
            self.sample_values(rng),
            ProcessTag::Fbm,
            params,
            None,
        )
    }

    /// `√Y · B_H`; `Y` is drawn first so that `β = 1` reproduces the fBm path.
    pub fn sample_gbm<R: Rng + ?Sized>(
        &self,
        params: GreyParams,
        rng: &mut R,
    ) -> Result<SamplePath> {
        if (params.hurst() - self.hurst).abs() > 1e-15 {
            return Err(Error::Precondition(format!(
                "generator built for H = {} but alpha/2 = {}",
                self.hurst,
                params.hurst()
            )));
        }
        let mixing = sample_y_beta(params.beta(), rng)?;
        let root = mixing.value.sqrt();
        let mut values = self.sample_values(rng);
        for v in &mut values {
            *v *= root;
        }
        SamplePath::new(self.grid, values, ProcessTag::Gbm, params, Some(mixing))
    }
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Precondition(format!(
            "Hurst index must lie in (0, 1), got {hurst}"
        )));
    }
    Ok(())
}

pub fn generate_fbm(hurst: f64, grid: TimeGrid, stream: RngStream) -> Result<SamplePath> {
    FbmGenerator::new(hurst, grid)?.sample_fbm(&mut stream.rng())
}

pub fn generate_gbm(params: GreyParams, grid: TimeGrid, stream: RngStream) -> Result<SamplePath> {
    FbmGenerator::new(params.hurst(), grid)?.sample_gbm(params, &mut stream.rng())
}

/// Which one-dimensional subordination identity to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubordinationVariant {
    /// `B(E(t^{α/β}))` with `B` a Brownian motion.
    BmInverseSubordinator,
    /// `B_H(D_β(t^{α/β})^{1/α})`.
    FbmDBeta,
}

/// One draw from the law of `B_{α,β}(t)` through a subordinated representation.
pub fn sample_gbm_marginal_subordinated<R: Rng + ?Sized>(
    params: GreyParams,
    t: f64,
    variant: SubordinationVariant,
    rng: &mut R,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("t must be > 0, got {t}")));
    }
    let (alpha, beta) = (params.alpha(), params.beta());
    let clock = t.powf(alpha / beta);
    let normal: f64 = rng.sample(StandardNormal);
    let value = match variant {
        SubordinationVariant::BmInverseSubordinator => {
            let time = if beta == 1.0 {
                clock
            } else {
                sample_inverse_subordinator(beta, clock, rng)?
            };
            time.sqrt() * normal
        }
        SubordinationVariant::FbmDBeta => {
            let d = if beta == 1.0 {
                clock
            } else {
                sample_d_beta(beta, clock, rng)?
            };
            d.powf(1.0 / alpha).powf(params.hurst()) * normal
        }
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64) -> GreyParams {
        GreyParams::new(a, b).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = TimeGrid::with_margin(1.0, 11, 0.2).unwrap();
        assert_eq!(g.ext_steps(), 2);
        assert_eq!(g.len(), 15);
        assert_eq!(g.zero_index(), 2);
        assert!((g.time(0) + 0.2).abs() < 1e-15);
        assert!((g.time(14) - 1.2).abs() < 1e-15);
        assert_eq!(g.steps_for(0.3).unwrap(), 3);
        assert!(g.steps_for(0.25).is_err());
        assert!(TimeGrid::with_margin(1.0, 11, 0.15).is_err());
        assert!(TimeGrid::new(1.0, 1, 0).is_err());
    }

    #[test]
    fn covariance_examples() {
        assert!((covariance(params(1.0, 1.0), 2.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(covariance(params(0.7, 0.3), 2.0, 0.0), 0.0);
        let v = covariance(params(1.5, 0.5), 1.0, 1.0);
        assert!((v - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn even_moment_examples() {
        assert!((even_moment(params(1.0, 1.0), 1, 1.0) - 1.0).abs() < 1e-14);
        assert!((even_moment(params(0.8, 0.5), 2, 1.0) - 6.0).abs() < 1e-13);
        assert_eq!(even_moment(params(0.8, 0.5), 3, 0.0), 0.0);
    }

    #[test]
    fn char_increment_examples() {
        let cfg = EvalConfig::default();
        assert_eq!(
            char_increment(params(1.2, 0.6), 0.0, 3.0, 1.0, &cfg).unwrap(),
            1.0
        );
        let g = char_increment(params(1.0, 1.0), 1.0, 1.0, 0.0, &cfg).unwrap();
        assert!((g - (-0.5f64).exp()).abs() < 1e-14);
        let v = char_increment(params(1.2, 0.6), 2.0, 3.0, 1.0, &cfg).unwrap();
        let direct = mittag_leffler(0.6, -2.0 * 2f64.powf(1.2), &cfg).unwrap();
        assert_eq!(v, direct);
    }

    #[test]
    fn fbm_is_pinned_and_reproducible() {
        let grid = TimeGrid::new(1.0, 65, 8).unwrap();
        let a = generate_fbm(0.7, grid, RngStream::new(3, 1)).unwrap();
        let b = generate_fbm(0.7, grid, RngStream::new(3, 1)).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values[grid.zero_index()], 0.0);
        assert_eq!(a.values.len(), grid.len());
    }

    #[test]
    fn circulant_embedding_is_psd_for_common_hurst() {
        for &h in &[0.05, 0.3, 0.5, 0.7, 0.95] {
            let g = FbmGenerator::new(h, TimeGrid::new(1.0, 1025, 16).unwrap()).unwrap();
            assert!(g.is_circulant(), "H = {h}");
        }
    }

    #[test]
    fn gbm_with_unit_beta_is_the_fbm_path() {
        let grid = TimeGrid::new(2.0, 33, 4).unwrap();
        let stream = RngStream::new(9, 2);
        let f = generate_fbm(0.6, grid, stream).unwrap();
        let g = generate_gbm(params(1.2, 1.0), grid, stream).unwrap();
        assert_eq!(f.values, g.values);
        assert_eq!(g.mixing.unwrap().value, 1.0);
    }

    #[test]
    fn gbm_scales_by_root_mixing() {
        let grid = TimeGrid::new(1.0, 33, 0).unwrap();
        let gen = FbmGenerator::new(0.6, grid).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        let g = gen.sample_gbm(params(1.2, 0.6), &mut rng).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        let y = sample_y_beta(0.6, &mut rng).unwrap().value;
        let f = gen.sample_values(&mut rng);
        assert_eq!(g.mixing.unwrap().value, y);
        for (gv, fv) in g.values.iter().zip(&f) {
            assert_eq!(*gv, y.sqrt() * fv);
        }
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let grid = TimeGrid::new(1.0, 9, 2).unwrap();
        let p = generate_gbm(params(1.2, 0.6), grid, RngStream::new(1, 1)).unwrap();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        let q = SamplePath::read_binary(buf.as_slice()).unwrap();
        assert_eq!(p.values, q.values);
        assert_eq!(p.mixing, q.mixing);
        assert_eq!(p.tag, q.tag);
        assert_eq!(q.grid.n(), 9);
        assert_eq!(q.grid.ext_steps(), 2);
        assert!(SamplePath::read_binary(&b"XXXX"[..]).is_err());

        let mut csv = Vec::new();
        p.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("time,value\n"));
        assert_eq!(text.lines().count(), grid.len() + 1);
    }

    #[test]
    fn subordinated_sampler_rejects_nonpositive_time() {
        let mut rng = RngStream::new(1, 0).rng();
        let p = params(1.2, 0.6);
        assert!(
            sample_gbm_marginal_subordinated(p, 0.0, SubordinationVariant::FbmDBeta, &mut rng)
                .is_err()
        );
    }
}
