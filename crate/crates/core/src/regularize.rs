//! Convolution smoothing `B^ε = ψ_ε * B` of grid paths and the constant `C_ψ`.
//!
//! A kernel is stored through its Stieltjes measure `dψ`: a list of atoms
//! (jumps of `ψ`) plus a continuous piecewise-linear part given by
//! breakpoints. So `ψ(u) = Σ_{x_a ≤ u} jump_a + pl(u)`, with `pl = 0` outside
//! its first and last breakpoints.
//!
//! The grid path is read as its linear interpolant. Its convolution with
//! `ψ_ε` at grid times is then a finite stencil, and so is the derivative
//! `(1/ε)∫B(t − εu) dψ(u)`. Both stencils are computed exactly.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::paths::{ProcessTag, SamplePath, TimeGrid};
use crate::quad::{try_integrate, try_integrate_pieces, QuadConfig};

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel {
    name: String,
    /// `(location, jump)` pairs, sorted by location.
    atoms: Vec<(f64, f64)>,
    /// `(breakpoint, value)` pairs, strictly increasing breakpoints.
    breakpoints: Vec<(f64, f64)>,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name {}", self.name)?;
        for (x, w) in &self.atoms {
            writeln!(f, "atom {x} {w}")?;
        }
        for (b, v) in &self.breakpoints {
            writeln!(f, "pl {b} {v}")?;
        }
        Ok(())
    }
}

impl Kernel {
    pub fn new(
        name: impl Into<String>,
        mut atoms: Vec<(f64, f64)>,
        breakpoints: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let name = name.into();
        let fail = |reason: String| Error::Kernel {
            name: name.clone(),
            reason,
        };
        if atoms.is_empty() && breakpoints.is_empty() {
            return Err(fail("kernel has neither atoms nor breakpoints".into()));
        }
        for &(x, w) in atoms.iter().chain(&breakpoints) {
            if !(x.is_finite() && w.is_finite()) {
                return Err(fail(format!("non-finite entry ({x}, {w})")));
            }
            if !(-1.0..=1.0).contains(&x) {
                return Err(fail(format!("location {x} outside [-1, 1]")));
            }
        }
        if breakpoints.len() == 1 {
            return Err(fail(
                "piecewise-linear part needs at least two breakpoints".into(),
            ));
        }
        if breakpoints.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(fail("breakpoints must be strictly increasing".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let net_jump: f64 = atoms.iter().map(|a| a.1).sum();
        if net_jump.abs() > NORMALIZATION_TOL {
            return Err(fail(format!(
                "atom jumps sum to {net_jump}, so psi does not vanish past 1"
            )));
        }
        let kernel = Self {
            name: name.clone(),
            atoms,
            breakpoints,
        };
        let total = kernel.integral();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(fail(format!("integral is {total}, expected 1")));
        }
        Ok(kernel)
    }

    /// `½·1_{[−1,1]}`.
    pub fn rectangular() -> Self {
        Self::new("rectangular", vec![(-1.0, 0.5), (1.0, -0.5)], vec![]).expect("valid kernel")
    }

    /// `1 − |u|` on `[−1, 1]`.
    pub fn triangular() -> Self {
        Self::new(
            "triangular",
            vec![],
            vec![(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)],
        )
        .expect("valid kernel")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "rectangular" | "rect" => Some(Self::rectangular()),
            "triangular" | "tri" => Some(Self::triangular()),
            _ => None,
        }
    }

    /// Parses lines `atom <loc> <jump>`, `pl <breakpoint> <value>` and an
    /// optional `name <text>`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::from("custom");
        let mut atoms = Vec::new();
        let mut breakpoints = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let keyword = fields.next().unwrap_or_default();
            let rest: Vec<&str> = fields.collect();
            let bad =
                |what: &str| Error::Format(format!("kernel line {}: {what}: `{raw}`", lineno + 1));
            match keyword {
                "name" => name = rest.join(" "),
                "atom" | "pl" => {
                    if rest.len() != 2 {
                        return Err(bad("expected two numbers"));
                    }
                    let a: f64 = rest[0].parse().map_err(|_| bad("not a number"))?;
                    let b: f64 = rest[1].parse().map_err(|_| bad("not a number"))?;
                    if keyword == "atom" {
                        atoms.push((a, b));
                    } else {
                        breakpoints.push((a, b));
                    }
                }
                _ => return Err(bad("unknown keyword")),
            }
        }
        Self::new(name, atoms, breakpoints)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    fn pl(&self, u: f64) -> f64 {
        let bp = &self.breakpoints;
        if bp.is_empty() || u < bp[0].0 || u > bp[bp.len() - 1].0 {
            return 0.0;
        }
        let i = bp.partition_point(|p| p.0 <= u).clamp(1, bp.len() - 1);
        let (x0, y0) = bp[i - 1];
        let (x1, y1) = bp[i];
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }

    /// Right-continuous value `ψ(u)`.
    pub fn psi(&self, u: f64) -> f64 {
        let steps: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.0 <= u)
            .map(|a| a.1)
            .sum();
        steps + self.pl(u)
    }

    pub fn integral(&self) -> f64 {
        let atom_part: f64 = self.atoms.iter().map(|(x, w)| w * (1.0 - x)).sum();
        let pl_part: f64 = self
            .breakpoints
            .windows(2)
            .map(|p| 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0))
            .sum();
        atom_part + pl_part
    }

    /// `∫ u ψ(u) du`.
    pub fn first_moment(&self) -> f64 {
        let atom_part: f64 = self
            .atoms
            .iter()
            .map(|(x, w)| w * 0.5 * (1.0 - x * x))
            .sum();
        let pl_part: f64 = self
            .breakpoints
            .windows(2)
            .map(|p| {
                let ((x0, y0), (x1, y1)) = (p[0], p[1]);
                (x1 - x0) * (x0 * (2.0 * y0 + y1) + x1 * (y0 + 2.0 * y1)) / 6.0
            })
            .sum();
        atom_part + pl_part
    }

    /// Point masses of `dψ`: explicit atoms plus the end jumps of the linear part.
    pub fn measure_atoms(&self) -> Vec<(f64, f64)> {
        let mut out = self.atoms.clone();
        if let (Some(&(x0, y0)), Some(&(x1, y1))) =
            (self.breakpoints.first(), self.breakpoints.last())
        {
            if y0 != 0.0 {
                out.push((x0, y0));
            }
            if y1 != 0.0 {
                out.push((x1, -y1));
            }
        }
        out
    }

    /// Absolutely continuous part of `dψ` as `(start, end, density)` pieces.
    pub fn measure_segments(&self) -> Vec<(f64, f64, f64)> {
        self.breakpoints
            .windows(2)
            .map(|p| (p[0].0, p[1].0, (p[1].1 - p[0].1) / (p[1].0 - p[0].0)))
            .filter(|s| s.2 != 0.0)
            .collect()
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.measure_segments().is_empty()
    }
}

/// `C_ψ = (−½ ∫∫ |u − v|^α dψ(u) dψ(v))^{1/2}`.
///
/// Every block of the double integral has a closed form: with
/// `G(w) = |w|^{α+2}/((α+1)(α+2))`, `G'' = |w|^α`.
pub fn c_psi(kernel: &Kernel, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 2), got {alpha}"
        )));
    }
    let g = |w: f64| w.abs().powf(alpha + 2.0) / ((alpha + 1.0) * (alpha + 2.0));
    let dg = |w: f64| w.signum() * w.abs().powf(alpha + 1.0) / (alpha + 1.0);

    let atoms = kernel.measure_atoms();
    let segments = kernel.measure_segments();
    let mut total = 0.0;
    for &(x, m) in &atoms {
        for &(y, n) in &atoms {
            total += m * n * (x - y).abs().powf(alpha);
        }
        for &(b0, b1, s) in &segments {
            total += 2.0 * m * s * (dg(x - b0) - dg(x - b1));
        }
    }
    for &(a0, a1, s) in &segments {
        for &(b0, b1, r) in &segments {
            total += s * r * (g(a1 - b0) - g(a0 - b0) - g(a1 - b1) + g(a0 - b1));
        }
    }
    let squared = -0.5 * total;
    if !(squared > 0.0) {
        return Err(Error::Kernel {
            name: kernel.name.clone(),
            reason: format!("C_psi^2 = {squared} is not positive for alpha = {alpha}"),
        });
    }
    Ok(squared.sqrt())
}

/// `C_ψ` by brute-force adaptive quadrature of every block of the double
/// Stieltjes integral; a check on [`c_psi`].
pub fn c_psi_quadrature(kernel: &Kernel, alpha: f64, abs_tol: f64) -> Result<f64> {
    let inner_cfg = QuadConfig::with_abs_tol(abs_tol * 0.1);
    let outer_cfg = QuadConfig::with_abs_tol(abs_tol);
    let pow = |w: f64| w.abs().powf(alpha);
    // ∫_a^b |u − v|^α dv, split at the kink v = u
    let line = |u: f64, a: f64, b: f64| -> Result<f64> {
        let mut pts = vec![a];
        if u > a && u < b {
            pts.push(u);
        }
        pts.push(b);
        Ok(try_integrate_pieces(|v| Ok::<f64, Error>(pow(u - v)), &pts, &inner_cfg)?.value)
    };
    let atoms = kernel.measure_atoms();
    let segments = kernel.measure_segments();
    let mut total = 0.0;
    for &(x, m) in &atoms {
        for &(y, n) in &atoms {
            total += m * n * pow(x - y);
        }
        for &(a, b, s) in &segments {
            total += 2.0 * m * s * line(x, a, b)?;
        }
    }
    for &(a0, a1, s) in &segments {
        for &(b0, b1, r) in &segments {
            let outer = try_integrate(|u| line(u, b0, b1), a0, a1, &outer_cfg)?;
            total += s * r * outer.value;
        }
    }
    let squared = -0.5 * total;
    if !(squared > 0.0) {
        return Err(Error::Kernel {
            name: kernel.name.clone(),
            reason: format!("C_psi^2 = {squared}"),
        });
    }
    Ok(squared.sqrt())
}

/// Stencils for one kernel at `ε = steps·Δ`: `B^ε_i = Σ_k value[k] B_{i−k}` and
/// `(B^ε)'_i = Σ_k slope[k] B_{i−k}`, indices `k = −steps..=steps` stored at `k + steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub steps: usize,
    pub epsilon: f64,
    pub value: Vec<f64>,
    pub slope: Vec<f64>,
}

impl Stencil {
    pub fn new(kernel: &Kernel, grid: &TimeGrid, epsilon: f64) -> Result<Self> {
        let steps = grid.steps_for(epsilon)?;
        let epsilon = steps as f64 * grid.step();
        let j = steps as f64;
        let width = 2 * steps + 1;
        let node = |k: usize| k as f64 / j - 1.0;
        // Hat function centred at node k, evaluated at u.
        let hat = |k: usize, u: f64| (1.0 - (u - node(k)).abs() * j).max(0.0);

        let mut cuts: Vec<f64> = (0..width).map(node).collect();
        cuts.extend(kernel.atoms.iter().map(|a| a.0));
        cuts.extend(kernel.breakpoints.iter().map(|b| b.0));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        // Two-point Gauss–Legendre is exact: ψ is linear and the hats are linear on each cut.
        let gl = 0.5 / 3f64.sqrt();
        let mut value = vec![0.0; width];
        for c in cuts.windows(2) {
            let (p, q) = (c[0], c[1]);
            let left = ((p - node(0)) * j).floor().clamp(0.0, (width - 2) as f64) as usize;
            for &offset in &[0.5 - gl, 0.5 + gl] {
                let u = p + offset * (q - p);
                let weight = 0.5 * (q - p) * kernel.psi(u);
                value[left] += weight * hat(left, u);
                value[left + 1] += weight * hat(left + 1, u);
            }
        }

        let mut slope = vec![0.0; width];
        for (x, m) in kernel.measure_atoms() {
            let left = ((x - node(0)) * j).floor().clamp(0.0, (width - 2) as f64) as usize;
            slope[left] += m * hat(left, x);
            slope[left + 1] += m * hat(left + 1, x);
        }
        for (a, b, s) in kernel.measure_segments() {
            for k in 0..width {
                let lo = a.max(node(k) - 1.0 / j);
                let hi = b.min(node(k) + 1.0 / j);
                if hi > lo {
                    let mid = node(k).clamp(lo, hi);
                    // hat is linear on [lo, mid] and [mid, hi]
                    let part = |x0: f64, x1: f64| 0.5 * (x1 - x0) * (hat(k, x0) + hat(k, x1));
                    slope[k] += s * (part(lo, mid) + part(mid, hi));
                }
            }
        }
        for w in &mut slope {
            *w /= epsilon;
        }
        // Stencil index k + steps multiplies B_{i−k}; node(k) runs over u ∈ [−1, 1].
        Ok(Self {
            steps,
            epsilon,
            value,
            slope,
        })
    }

    fn apply(weights: &[f64], values: &[f64], grid: &TimeGrid) -> Vec<f64> {
        let steps = (weights.len() - 1) / 2;
        let nonzero: Vec<(usize, f64)> = weights
            .iter()
            .copied()
            .enumerate()
            .filter(|w| w.1 != 0.0)
            .collect();
        grid.core_range()
            .map(|i| {
                nonzero
                    .iter()
                    .map(|&(k, w)| w * values[i + steps - k])
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedPath {
    pub base: SamplePath,
    pub kernel_name: String,
    pub epsilon: f64,
    /// `B^ε` on the core grid `[0, T]`.
    pub values: Vec<f64>,
    /// `d/dt B^ε` on the core grid.
    pub derivative: Vec<f64>,
}

impl RegularizedPath {
    /// The smoothed values as a margin-free sample path.
    pub fn to_sample_path(&self) -> Result<SamplePath> {
        let g = self.base.grid;
        let grid = TimeGrid::new(g.horizon(), g.n(), 0)?;
        SamplePath::new(
            grid,
            self.values.clone(),
            ProcessTag::Regularized,
            self.base.params,
            self.base.mixing,
        )
    }
}

pub fn regularize_path(
    path: &SamplePath,
    kernel: &Kernel,
    epsilon: f64,
) -> Result<RegularizedPath> {
    let stencil = Stencil::new(kernel, &path.grid, epsilon)?;
    regularize_with(path, kernel.name(), &stencil)
}

/// As [`regularize_path`] with a precomputed stencil.
pub fn regularize_with(
    path: &SamplePath,
    kernel_name: &str,
    stencil: &Stencil,
) -> Result<RegularizedPath> {
    let grid = path.grid;
    if stencil.steps > grid.ext_steps() {
        return Err(Error::Precondition(format!(
            "epsilon {} exceeds the grid extension {}",
            stencil.epsilon,
            grid.ext()
        )));
    }
    Ok(RegularizedPath {
        base: path.clone(),
        kernel_name: kernel_name.to_string(),
        epsilon: stencil.epsilon,
        values: Stencil::apply(&stencil.value, &path.values, &grid),
        derivative: Stencil::apply(&stencil.slope, &path.values, &grid),
    })
}

/// `ε^{1−α/2} · d/dt B^ε` on the core grid.
pub fn z_tilde(reg: &RegularizedPath, alpha: f64) -> Vec<f64> {
    let scale = reg.epsilon.powf(1.0 - 0.5 * alpha);
    reg.derivative.iter().map(|d| scale * d).collect()
}
