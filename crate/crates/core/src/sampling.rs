//! Random variates: one-sided stable `S(1)`, the mixing variable `Y_β`, and the
//! marginals of the inverse stable subordinator and of `D_β(t)`.
//!
//! All samplers draw from a caller-owned generator. [`RngStream`] names a
//! reproducible ChaCha8 stream; distinct `stream_id`s under one seed are
//! independent, which is how Monte Carlo replicas are split across threads.
//!
//! The stable sampler is Kanter's representation: for `U ~ Uniform(0,1)` and
//! `E ~ Exp(1)` independent, `S = (a(U)/E)^{(1−β)/β}` has `E e^{−λS} = e^{−λ^β}`.
//! Hence `Y_β = S^{−β} = (E/a(U))^{1−β}` exactly, with no rejection step.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::kanter_a;

/// Generator type handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Stream `offset` places further along under the same seed.
    pub fn offset(&self, offset: u64) -> Self {
        Self::new(self.seed, self.stream_id.wrapping_add(offset))
    }
}

/// A realized value of `Y_β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingVariable {
    pub value: f64,
    pub beta: f64,
}

fn check_open(function: &str, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Precondition(format!(
            "{function}: beta must lie in (0, 1), got {beta}"
        )));
    }
    Ok(())
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let e: f64 = rng.sample(Exp1);
        if e > 0.0 {
            return e;
        }
    }
}

/// `(E/a(U))`, shared by the stable and mixing samplers.
fn kanter_ratio<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let e = exp1(rng);
    e / kanter_a(beta, u)
}

/// `S(1)` of a β-stable subordinator, `E e^{−λS(1)} = e^{−λ^β}`.
pub fn sample_stable_subordinator<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> Result<f64> {
    check_open("sample_stable_subordinator", beta)?;
    Ok(kanter_ratio(beta, rng).powf(-(1.0 - beta) / beta))
}

/// `Y_β` with density `M_β`; exactly 1 when `β = 1` (no randomness consumed).
pub fn sample_y_beta<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> Result<MixingVariable> {
    if beta == 1.0 {
        return Ok(MixingVariable { value: 1.0, beta });
    }
    check_open("sample_y_beta", beta)?;
    Ok(MixingVariable {
        value: kanter_ratio(beta, rng).powf(1.0 - beta),
        beta,
    })
}

/// Marginal of the inverse subordinator, `E(x) = (S(1)/x)^{−β}` in law.
pub fn sample_inverse_subordinator<R: Rng + ?Sized>(beta: f64, x: f64, rng: &mut R) -> Result<f64> {
    check_open("sample_inverse_subordinator", beta)?;
    if !(x > 0.0) {
        return Err(Error::Precondition(format!(
            "sample_inverse_subordinator: x must be > 0, got {x}"
        )));
    }
    let s = sample_stable_subordinator(beta, rng)?;
    Ok((s / x).powf(-beta))
}

/// Marginal of `D_β(t)`, density `t^{−β} M_β(x t^{−β})`, i.e. `t^β·Y_β` in law.
pub fn sample_d_beta<R: Rng + ?Sized>(beta: f64, t: f64, rng: &mut R) -> Result<f64> {
    check_open("sample_d_beta", beta)?;
    if !(t > 0.0) {
        return Err(Error::Precondition(format!(
            "sample_d_beta: t must be > 0, got {t}"
        )));
    }
    Ok(t.powf(beta) * sample_y_beta(beta, rng)?.value)
}
