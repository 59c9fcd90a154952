//! Named numerical and Monte Carlo studies.
//!
//! Each study reads an [`ExperimentConfig`], fills unset fields from its own
//! defaults and returns a [`Report`]: a CSV table, a JSON summary and a list
//! of pass/fail gates. The CLI and the acceptance suite both drive this module.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::occupation::{
    berman_existence_value, berman_time_integral, berman_time_integral_quadrature,
    crossings_local_time_approx, level_side_functional, linear_banach_kac, occupation_density,
    occupation_formula_check, Bins, LinearPath,
};
use crate::paths::{
    covariance, even_moment, sample_gbm_marginal_subordinated, SubordinationVariant, TimeGrid,
};
use crate::quad::{try_integrate_pieces, QuadConfig};
use crate::regularize::{c_psi, c_psi_quadrature, regularize_path, z_tilde, Kernel};
use crate::sampling::{sample_y_beta, RngStream};
use crate::specfun::{m_wright_density, mittag_leffler, EvalConfig, GreyParams};
use crate::stats::{
    brownian_limit_experiment, c_k_alpha_displayed, fit_slope, ks_critical_value,
    ks_two_sample_critical_value, lp_moduli_experiment, median, moment_convergence_experiment,
    normal_cdf, odd_power_variance_at, odd_squared_moment_experiment, power_variation,
    squared_moduli_experiment, z_increments, EmpiricalLaw, Ensemble, LadderRun, PowerScaling,
};

/// User-supplied settings; `None` means "use the experiment's default".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub horizon: Option<f64>,
    pub grid_n: Option<usize>,
    /// Grid extension beyond the horizon, in time units.
    pub ext: Option<f64>,
    /// Single `ε` as a fraction of the horizon.
    pub eps: Option<f64>,
    /// `ε` ladder as fractions of the horizon, largest first.
    pub eps_ladder: Option<Vec<f64>>,
    pub kernel: Option<String>,
    pub replicas: Option<usize>,
    pub seed: u64,
    pub k: Option<u32>,
    pub p: Option<f64>,
    pub t: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: None,
            horizon: None,
            grid_n: None,
            ext: None,
            eps: None,
            eps_ladder: None,
            kernel: None,
            replicas: None,
            seed: 1,
            k: None,
            p: None,
            t: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse '{value}'")))
}

/// A number or a power of two written `2^-k` / `2^k`.
pub fn parse_scalar(value: &str) -> Result<f64> {
    let v = value.trim();
    if let Some(exp) = v.strip_prefix("2^") {
        let e: i32 = parse_num("exponent", exp)?;
        return Ok(2f64.powi(e));
    }
    parse_num("value", v)
}

/// `2^-a..2^-b` expands to every power of two between the ends; otherwise a
/// comma-separated list of scalars.
pub fn parse_ladder(value: &str) -> Result<Vec<f64>> {
    let v = value.trim();
    if let Some((lo, hi)) = v.split_once("..") {
        let exp = |s: &str| -> Result<i32> {
            let s = s.trim();
            let e = s.strip_prefix("2^").ok_or_else(|| {
                Error::InvalidParameter(format!("eps-ladder: expected 2^k, got '{s}'"))
            })?;
            parse_num("eps-ladder exponent", e)
        };
        let (a, b) = (exp(lo)?, exp(hi)?);
        let step = if b >= a { 1 } else { -1 };
        let mut out = Vec::new();
        let mut e = a;
        loop {
            out.push(2f64.powi(e));
            if e == b {
                break;
            }
            e += step;
        }
        return Ok(out);
    }
    let out = v.split(',').map(parse_scalar).collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::InvalidParameter("eps-ladder is empty".into()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Sets one field from its textual form. Keys use either `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim().replace('-', "_").as_str() {
            "alpha" => self.alpha = Some(parse_num(key, value)?),
            "beta" => self.beta = Some(parse_num(key, value)?),
            "horizon" => self.horizon = Some(parse_num(key, value)?),
            "grid_n" => self.grid_n = Some(parse_num(key, value)?),
            "ext" => self.ext = Some(parse_scalar(value)?),
            "eps" => self.eps = Some(parse_scalar(value)?),
            "eps_ladder" => self.eps_ladder = Some(parse_ladder(value)?),
            "kernel" => self.kernel = Some(value.trim().to_string()),
            "replicas" => self.replicas = Some(parse_num(key, value)?),
            "seed" => self.seed = parse_num(key, value)?,
            "k" => self.k = Some(parse_num(key, value)?),
            "p" => self.p = Some(parse_num(key, value)?),
            "t" => self.t = Some(parse_num(key, value)?),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key '{other}'"
                )))
            }
        }
        Ok(())
    }

    /// Flat `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("config line {}: expected key = value", no + 1))
            })?;
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy)]
struct Defaults {
    alpha: f64,
    beta: f64,
    grid_n: usize,
    eps_exp: i32,
    ladder: (i32, i32),
    replicas: usize,
    k: u32,
    p: f64,
    t: f64,
    /// Whether paths need an extension covering the largest `ε`.
    margin: bool,
}

const BASE: Defaults = Defaults {
    alpha: 1.2,
    beta: 0.6,
    grid_n: 4097,
    eps_exp: 6,
    ladder: (5, 9),
    replicas: 20,
    k: 2,
    p: 1.0,
    t: 1.0,
    margin: true,
};

/// Fully resolved settings for one run.
#[derive(Debug, Clone, Serialize)]
pub struct Setup {
    pub params: GreyParams,
    pub grid: TimeGrid,
    /// Absolute `ε`.
    pub eps: f64,
    /// Absolute `ε` ladder.
    pub ladder: Vec<f64>,
    pub kernel: Kernel,
    pub replicas: usize,
    pub seed: u64,
    pub k: u32,
    pub p: f64,
    pub t: f64,
}

fn load_kernel(spec: &str) -> Result<Kernel> {
    if let Some(k) = Kernel::by_name(spec) {
        return Ok(k);
    }
    let path = Path::new(spec);
    if path.exists() {
        return Kernel::parse(&std::fs::read_to_string(path)?);
    }
    Err(Error::InvalidParameter(format!(
        "kernel '{spec}' is neither a builtin (rectangular, triangular) nor a readable file"
    )))
}

impl Setup {
    fn resolve(cfg: &ExperimentConfig, d: Defaults) -> Result<Self> {
        let params = GreyParams::new(cfg.alpha.unwrap_or(d.alpha), cfg.beta.unwrap_or(d.beta))?;
        let horizon = cfg.horizon.unwrap_or(1.0);
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        let eps = horizon * cfg.eps.unwrap_or(2f64.powi(-d.eps_exp));
        let ladder: Vec<f64> = match &cfg.eps_ladder {
            Some(l) => l.iter().map(|e| horizon * e).collect(),
            None => (d.ladder.0..=d.ladder.1)
                .map(|e| horizon * 2f64.powi(-e))
                .collect(),
        };
        if !(eps > 0.0) || ladder.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidParameter("epsilon values must be > 0".into()));
        }
        let widest = ladder.iter().copied().fold(eps, f64::max);
        let ext = cfg.ext.unwrap_or(if d.margin { widest } else { 0.0 });
        let grid = TimeGrid::with_margin(horizon, cfg.grid_n.unwrap_or(d.grid_n), ext)?;
        if d.margin {
            for &e in ladder.iter().chain(std::iter::once(&eps)) {
                let steps = grid.steps_for(e)?;
                if steps > grid.ext_steps() {
                    return Err(Error::InvalidParameter(format!(
                        "epsilon {e} exceeds the grid extension {}",
                        grid.ext()
                    )));
                }
            }
        }
        let replicas = cfg.replicas.unwrap_or(d.replicas);
        if replicas == 0 {
            return Err(Error::InvalidParameter("replicas must be >= 1".into()));
        }
        let kernel = load_kernel(cfg.kernel.as_deref().unwrap_or("rectangular"))?;
        let t = cfg.t.unwrap_or(d.t);
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::InvalidParameter(format!(
                "t must lie in [0, {horizon}], got {t}"
            )));
        }
        Ok(Self {
            params,
            grid,
            eps,
            ladder,
            kernel,
            replicas,
            seed: cfg.seed,
            k: cfg.k.unwrap_or(d.k),
            p: cfg.p.unwrap_or(d.p),
            t,
        })
    }

    fn ensemble(&self) -> Ensemble {
        Ensemble {
            params: self.params,
            grid: self.grid,
            replicas: self.replicas,
            seed: self.seed,
        }
    }
}

/// One pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub criterion: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub reference: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Map<String, Value>,
    pub gates: Vec<Gate>,
    pub notes: Vec<String>,
    /// Single line printed by the CLI after the gates.
    pub headline: Option<String>,
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

impl Report {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            experiment: name.to_string(),
            reference: find(name)
                .map(|e| e.reference.to_string())
                .unwrap_or_default(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Map::new(),
            gates: Vec::new(),
            notes: Vec::new(),
            headline: None,
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    fn gate(&mut self, name: &str, criterion: impl Into<String>, value: f64, passed: bool) {
        self.gates.push(Gate {
            name: name.to_string(),
            criterion: criterion.into(),
            value,
            passed,
        });
    }

    /// True iff every gate passed.
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.csv().as_bytes())?;
        Ok(())
    }

    /// JSON summary with the configuration echo, software version and wall time.
    pub fn json(&self, config: &ExperimentConfig, wall_seconds: f64) -> Value {
        json!({
            "experiment": self.experiment,
            "reference": self.reference,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "wall_seconds": wall_seconds,
            "summary": self.summary,
            "gates": self.gates,
            "passed": self.passed(),
            "notes": self.notes,
            "headline": self.headline,
        })
    }

    /// Human-readable gate lines plus the headline.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let _ = writeln!(
                out,
                "{} {}: {} (value {:.6e})",
                if g.passed { "PASS" } else { "FAIL" },
                g.name,
                g.criterion,
                g.value
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        if let Some(h) = &self.headline {
            let _ = writeln!(out, "{h}");
        }
        out
    }
}

pub struct ExperimentInfo {
    pub name: &'static str,
    pub reference: &'static str,
    pub run: fn(&ExperimentConfig) -> Result<Report>,
}

pub const EXPERIMENTS: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "specfun-golden",
        reference: "§1",
        run: specfun_golden,
    },
    ExperimentInfo {
        name: "moments",
        reference: "§1",
        run: moments,
    },
    ExperimentInfo {
        name: "gbm-law",
        reference: "§1, §2.1",
        run: gbm_law,
    },
    ExperimentInfo {
        name: "c-psi",
        reference: "§3.1",
        run: c_psi_study,
    },
    ExperimentInfo {
        name: "berman",
        reference: "§4.1",
        run: berman,
    },
    ExperimentInfo {
        name: "occupation",
        reference: "§4.1",
        run: occupation,
    },
    ExperimentInfo {
        name: "crossings-lt",
        reference: "Thm. 4.3",
        run: crossings_lt,
    },
    ExperimentInfo {
        name: "increment-law",
        reference: "Thm. 3.3, Thm. 3.5",
        run: increment_law,
    },
    ExperimentInfo {
        name: "moment-convergence",
        reference: "Prop. 3.2, Lemma 3.1",
        run: moment_convergence,
    },
    ExperimentInfo {
        name: "lp-moduli",
        reference: "Cor. moduli-cont",
        run: lp_moduli,
    },
    ExperimentInfo {
        name: "squared-moduli",
        reference: "Cor. conv-p",
        run: squared_moduli,
    },
    ExperimentInfo {
        name: "odd-squared",
        reference: "Appendix A",
        run: odd_squared,
    },
    ExperimentInfo {
        name: "power-variation",
        reference: "Thm. 3.6",
        run: power_variation_study,
    },
    ExperimentInfo {
        name: "brownian-limit",
        reference: "Thm. 3.7",
        run: brownian_limit,
    },
];

pub fn find(name: &str) -> Option<&'static ExperimentInfo> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

/// One line per experiment: `name  (reference)`.
pub fn list_experiments() -> String {
    EXPERIMENTS
        .iter()
        .map(|e| format!("{}  ({})\n", e.name, e.reference))
        .collect()
}

pub fn run(name: &str, cfg: &ExperimentConfig) -> Result<Report> {
    let info = find(name).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "unknown experiment '{name}'; see `list` for the available names"
        ))
    })?;
    (info.run)(cfg)
}

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn specfun_golden(_cfg: &ExperimentConfig) -> Result<Report> {
    let ec = EvalConfig::default();
    let mut r = Report::new(
        "specfun-golden",
        &["function", "argument", "computed", "reference", "abs_error"],
    );
    let mut worst = [0f64; 3];
    let mut record = |r: &mut Report, slot: usize, name: &str, x: f64, c: f64, reference: f64| {
        let err = (c - reference).abs();
        worst[slot] = worst[slot].max(err);
        r.row(vec![name.into(), num(x), num(c), num(reference), num(err)]);
    };
    for i in 0..=40 {
        let x = -10.0 + 0.5 * i as f64;
        record(&mut r, 0, "E_1", x, mittag_leffler(1.0, x, &ec)?, x.exp());
    }
    for i in 0..=24 {
        let x = 0.125 * i as f64;
        let x2 = x * x;
        record(
            &mut r,
            1,
            "E_1/2(-x^2)",
            x,
            mittag_leffler(0.5, -x2, &ec)?,
            (x2 * x2).exp() * erfc(x2),
        );
    }
    for i in 0..=24 {
        let tau = 0.25 * i as f64;
        let reference = (-tau * tau / 4.0).exp() / std::f64::consts::PI.sqrt();
        record(
            &mut r,
            2,
            "M_1/2",
            tau,
            m_wright_density(0.5, tau, &ec)?,
            reference,
        );
    }
    r.gate(
        "E_1 vs exp on [-10, 10]",
        "max abs error <= 1e-12",
        worst[0],
        worst[0] <= 1e-12,
    );
    r.gate(
        "E_1/2(-x^2) vs exp(x^4) erfc(x^2)",
        "max abs error <= 1e-9",
        worst[1],
        worst[1] <= 1e-9,
    );
    r.gate(
        "M_1/2 vs exp(-tau^2/4)/sqrt(pi) on [0, 6]",
        "max abs error <= 1e-8",
        worst[2],
        worst[2] <= 1e-8,
    );
    r.put("max_error_e1", worst[0]);
    r.put("max_error_e_half", worst[1]);
    r.put("max_error_m_half", worst[2]);
    Ok(r)
}

fn moments(cfg: &ExperimentConfig) -> Result<Report> {
    let samples = cfg.replicas.unwrap_or(1_000_000);
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "moments needs at least 2 samples".into(),
        ));
    }
    let betas: Vec<f64> = match cfg.beta {
        Some(b) if b > 0.0 && b < 1.0 => vec![b],
        Some(b) => {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0, 1), got {b}"
            )))
        }
        None => vec![0.3, 0.5, 0.8],
    };
    let ec = EvalConfig::default();
    let qc = QuadConfig::with_abs_tol(1e-10);
    let pieces = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let mut r = Report::new(
        "moments",
        &[
            "beta",
            "k",
            "method",
            "value",
            "reference",
            "abs_error",
            "standard_error",
        ],
    );
    let mut quad_worst = 0f64;
    let mut mc_worst = 0f64;
    for (bi, &beta) in betas.iter().enumerate() {
        for k in 0..=4u32 {
            let reference = gamma(k as f64 + 1.0) / gamma(beta * k as f64 + 1.0);
            let value = try_integrate_pieces(
                |tau: f64| Ok::<f64, Error>(tau.powi(k as i32) * m_wright_density(beta, tau, &ec)?),
                &pieces,
                &qc,
            )?
            .value;
            let err = (value - reference).abs();
            quad_worst = quad_worst.max(err);
            r.row(vec![
                num(beta),
                k.to_string(),
                "quadrature".into(),
                num(value),
                num(reference),
                num(err),
                "".into(),
            ]);
        }
        let mut rng = RngStream::new(cfg.seed, bi as u64).rng();
        let ys = (0..samples)
            .map(|_| Ok(sample_y_beta(beta, &mut rng)?.value))
            .collect::<Result<Vec<f64>>>()?;
        for k in 1..=3i32 {
            let powered = EmpiricalLaw::new(ys.iter().map(|y| y.powi(k)).collect())?;
            let reference = gamma(k as f64 + 1.0) / gamma(beta * k as f64 + 1.0);
            let se = powered.standard_error();
            let err = (powered.mean() - reference).abs();
            mc_worst = mc_worst.max(err / se);
            r.row(vec![
                num(beta),
                k.to_string(),
                "monte_carlo".into(),
                num(powered.mean()),
                num(reference),
                num(err),
                num(se),
            ]);
        }
    }
    r.gate(
        "quadrature of tau^k M_beta, k <= 4",
        "max abs error <= 1e-6",
        quad_worst,
        quad_worst <= 1e-6,
    );
    r.gate(
        "empirical moments of Y, k <= 3",
        "max |error| / SE <= 4",
        mc_worst,
        mc_worst <= 4.0,
    );
    r.put("samples", samples);
    Ok(r)
}

fn gbm_law(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        grid_n: 17,
        replicas: 100_000,
        margin: false,
        ..BASE
    };
    let base = Setup::resolve(cfg, d)?;
    let pairs = if cfg.alpha.is_some() || cfg.beta.is_some() {
        vec![base.params]
    } else {
        vec![
            GreyParams::new(1.2, 0.6)?,
            GreyParams::new(1.0, 0.5)?,
            GreyParams::new(0.8, 0.9)?,
        ]
    };
    let horizon = base.grid.horizon();
    let times = [0.5 * horizon, horizon];
    let offsets = times
        .iter()
        .map(|&t| base.grid.steps_for(t))
        .collect::<Result<Vec<_>>>()?;
    let mut r = Report::new(
        "gbm-law",
        &[
            "alpha",
            "beta",
            "t",
            "statistic",
            "empirical",
            "reference",
            "standard_error",
            "z_score",
        ],
    );
    let mut worst_z = 0f64;
    let mut ks_pass = true;
    let mut worst_ks_ratio = 0f64;
    for (pi, &params) in pairs.iter().enumerate() {
        let ens = Ensemble {
            params,
            ..base.ensemble()
        };
        let zero = base.grid.zero_index();
        let values = ens.map(|_, path| {
            Ok([
                path.values[zero + offsets[0]],
                path.values[zero + offsets[1]],
            ])
        })?;
        for (ti, &t) in times.iter().enumerate() {
            for (order, reference) in [
                (2u32, covariance(params, t, t)),
                (4, even_moment(params, 2, t)),
            ] {
                let law =
                    EmpiricalLaw::new(values.iter().map(|v| v[ti].powi(order as i32)).collect())?;
                let se = law.standard_error();
                let z = (law.mean() - reference) / se;
                worst_z = worst_z.max(z.abs());
                r.row(vec![
                    num(params.alpha()),
                    num(params.beta()),
                    num(t),
                    format!("B^{order}"),
                    num(law.mean()),
                    num(reference),
                    num(se),
                    num(z),
                ]);
            }
        }
        let mixture = EmpiricalLaw::new(values.iter().map(|v| v[1]).collect())?;
        for (vi, variant) in [
            SubordinationVariant::BmInverseSubordinator,
            SubordinationVariant::FbmDBeta,
        ]
        .into_iter()
        .enumerate()
        {
            let mut rng = RngStream::new(cfg.seed, (1u64 << 40) + 2 * pi as u64 + vi as u64).rng();
            let draws = (0..base.replicas)
                .map(|_| sample_gbm_marginal_subordinated(params, horizon, variant, &mut rng))
                .collect::<Result<Vec<f64>>>()?;
            let law = EmpiricalLaw::new(draws)?;
            let ks = mixture.ks_two_sample(&law);
            let crit = ks_two_sample_critical_value(mixture.len(), law.len());
            ks_pass &= ks <= crit;
            worst_ks_ratio = worst_ks_ratio.max(ks / crit);
            let label = match variant {
                SubordinationVariant::BmInverseSubordinator => "ks_bm_inverse_subordinator",
                SubordinationVariant::FbmDBeta => "ks_fbm_d_beta",
            };
            r.row(vec![
                num(params.alpha()),
                num(params.beta()),
                num(horizon),
                label.into(),
                num(ks),
                num(crit),
                "".into(),
                "".into(),
            ]);
        }
    }
    r.gate(
        "E B^2 and E B^4 at t = T/2, T",
        "max |z| <= 4",
        worst_z,
        worst_z <= 4.0,
    );
    r.gate(
        "subordinated marginals vs mixture at t = T",
        "two-sample KS <= 1% critical value",
        worst_ks_ratio,
        ks_pass,
    );
    r.put("paths", base.replicas);
    r.put("max_abs_z", worst_z);
    r.put("max_ks_over_critical", worst_ks_ratio);
    Ok(r)
}

fn c_psi_study(cfg: &ExperimentConfig) -> Result<Report> {
    let mut alphas = vec![0.5, 1.0, 1.5];
    if let Some(a) = cfg.alpha {
        if !alphas.contains(&a) {
            alphas.push(a);
        }
    }
    let mut kernels = vec![Kernel::rectangular(), Kernel::triangular()];
    if let Some(spec) = &cfg.kernel {
        let k = load_kernel(spec)?;
        if !kernels.iter().any(|x| x.name() == k.name()) {
            kernels.push(k);
        }
    }
    let mut r = Report::new(
        "c-psi",
        &["kernel", "alpha", "closed_form", "reference", "abs_error"],
    );
    let mut rect_worst = 0f64;
    let mut quad_worst = 0f64;
    for kernel in &kernels {
        for &alpha in &alphas {
            let value = c_psi(kernel, alpha)?;
            let rectangular = kernel.name() == "rectangular";
            let reference = if rectangular {
                2f64.powf(0.5 * (alpha - 2.0))
            } else {
                c_psi_quadrature(kernel, alpha, 1e-10)?
            };
            let err = (value - reference).abs();
            if rectangular {
                rect_worst = rect_worst.max(err);
            } else {
                quad_worst = quad_worst.max(err);
            }
            r.row(vec![
                kernel.name().into(),
                num(alpha),
                num(value),
                num(reference),
                num(err),
            ]);
        }
    }
    r.gate(
        "rectangular vs 2^((alpha-2)/2)",
        "max abs error <= 1e-12",
        rect_worst,
        rect_worst <= 1e-12,
    );
    r.gate(
        "other kernels vs 2D quadrature",
        "max abs error <= 1e-6",
        quad_worst,
        quad_worst <= 1e-6,
    );
    Ok(r)
}

fn berman(cfg: &ExperimentConfig) -> Result<Report> {
    let ec = EvalConfig::default();
    let mut r = Report::new(
        "berman",
        &[
            "quantity",
            "alpha",
            "beta",
            "value",
            "reference",
            "abs_error",
        ],
    );
    let mut time_worst = 0f64;
    for alpha in [0.5, 1.0, 1.5] {
        let value = berman_time_integral(alpha);
        let reference = berman_time_integral_quadrature(alpha, 1e-10)?;
        let err = (value - reference).abs();
        time_worst = time_worst.max(err);
        r.row(vec![
            "time_integral".into(),
            num(alpha),
            "".into(),
            num(value),
            num(reference),
            num(err),
        ]);
    }
    r.gate(
        "time integral closed form vs 2D quadrature",
        "max abs error <= 1e-6",
        time_worst,
        time_worst <= 1e-6,
    );
    let oracle = |p: GreyParams| {
        2f64.sqrt() * std::f64::consts::PI / gamma(1.0 - 0.5 * p.beta())
            * berman_time_integral(p.alpha())
    };
    let mut all_ok = true;
    let mut oracle_worst = 0f64;
    for alpha in [0.5, 1.0, 1.5] {
        for beta in [0.3, 0.6, 1.0] {
            let p = GreyParams::new(alpha, beta)?;
            let value = berman_existence_value(p, &ec)?;
            let reference = oracle(p);
            all_ok &= value.is_finite() && value > 0.0;
            let err = (value - reference).abs();
            oracle_worst = oracle_worst.max(err / reference);
            r.row(vec![
                "existence_value".into(),
                num(alpha),
                num(beta),
                num(value),
                num(reference),
                num(err),
            ]);
        }
    }
    r.gate(
        "existence value on the (alpha, beta) grid",
        "finite and positive",
        oracle_worst,
        all_ok,
    );
    let params = GreyParams::new(cfg.alpha.unwrap_or(1.0), cfg.beta.unwrap_or(1.0))?;
    let value = berman_existence_value(params, &ec)?;
    r.row(vec![
        "existence_value".into(),
        num(params.alpha()),
        num(params.beta()),
        num(value),
        num(oracle(params)),
        num((value - oracle(params)).abs()),
    ]);
    r.put("existence_value", value);
    r.put("max_relative_error_vs_mellin", oracle_worst);
    r.headline = Some(format!(
        "existence value (alpha = {}, beta = {}): {value:.6}",
        params.alpha(),
        params.beta()
    ));
    Ok(r)
}

fn occupation(cfg: &ExperimentConfig) -> Result<Report> {
    let s = Setup::resolve(cfg, BASE)?;
    let horizon = s.grid.horizon();
    let gauss = |x: f64| (-x * x).exp();
    let rows = s.ensemble().map(|replica, path| {
        let core = LinearPath::core(path);
        let occ = occupation_density(core, &Bins::Auto)?;
        let mass_err = (occ.total_mass() - horizon).abs();
        let (lhs, rhs, occ_cos) = occupation_formula_check(core, f64::cos, &Bins::Auto)?;
        let bound = occ_cos.max_width() * horizon;
        let reg = regularize_path(path, &s.kernel, s.eps)?;
        let smooth = LinearPath::smoothed(&reg);
        let mut bk_worst = 0f64;
        let (mut level, mut deriv) = (0.0, 0.0);
        for f in [&(|_: f64| 1.0) as &dyn Fn(f64) -> f64, &gauss] {
            let l = level_side_functional(smooth, f);
            let d = linear_banach_kac(smooth, f);
            bk_worst = bk_worst.max((l - d).abs() / d.abs());
            if level == 0.0 {
                (level, deriv) = (l, d);
            }
        }
        Ok((
            replica,
            path.mixing_value(),
            mass_err,
            lhs,
            rhs,
            bound,
            level,
            deriv,
            bk_worst,
        ))
    })?;
    let mut r = Report::new(
        "occupation",
        &[
            "replica",
            "y",
            "mass_error",
            "formula_lhs",
            "formula_rhs",
            "binning_bound",
            "bk_level_side",
            "bk_derivative_side",
            "bk_rel_error",
        ],
    );
    let (mut mass_worst, mut bk_worst, mut formula_ok, mut formula_ratio) =
        (0f64, 0f64, true, 0f64);
    for (replica, y, mass, lhs, rhs, bound, level, deriv, bk) in rows {
        mass_worst = mass_worst.max(mass);
        bk_worst = bk_worst.max(bk);
        let gap = (lhs - rhs).abs();
        formula_ok &= gap <= bound;
        formula_ratio = formula_ratio.max(gap / bound);
        r.row(vec![
            replica.to_string(),
            num(y),
            num(mass),
            num(lhs),
            num(rhs),
            num(bound),
            num(level),
            num(deriv),
            num(bk),
        ]);
    }
    r.gate(
        "occupation mass equals |I|",
        "max abs error <= 1e-9",
        mass_worst,
        mass_worst <= 1e-9,
    );
    r.gate(
        "Banach-Kac identity on smoothed paths",
        "max rel error <= 1e-8",
        bk_worst,
        bk_worst <= 1e-8,
    );
    r.gate(
        "occupation formula for cos",
        "gap <= binning bound",
        formula_ratio,
        formula_ok,
    );
    Ok(r)
}

fn crossings_lt(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        ladder: (4, 7),
        replicas: 50,
        ..BASE
    };
    let s = Setup::resolve(cfg, d)?;
    let interval = (0.0, s.grid.horizon());
    let runs = s.ensemble().map(|_, path| {
        s.ladder
            .iter()
            .map(|&e| crossings_local_time_approx(path, &s.kernel, e, |_| 1.0, interval))
            .collect::<Result<Vec<_>>>()
            .map(|v| (path.mixing_value(), v))
    })?;
    let mut r = Report::new(
        "crossings-lt",
        &[
            "epsilon",
            "replica",
            "y",
            "scaled_crossings",
            "target",
            "gap",
        ],
    );
    let mut medians = Vec::new();
    for (ei, &e) in s.ladder.iter().enumerate() {
        let mut gaps = Vec::with_capacity(runs.len());
        for (replica, (y, approx)) in runs.iter().enumerate() {
            let a = approx[ei];
            let gap = ((a.scaled_crossings - a.target) / a.target).abs();
            gaps.push(gap);
            r.row(vec![
                num(e),
                replica.to_string(),
                num(*y),
                num(a.scaled_crossings),
                num(a.target),
                num(gap),
            ]);
        }
        medians.push(median(&gaps));
    }
    let last = *medians.last().unwrap_or(&f64::NAN);
    r.gate(
        "median gap decreases along the ladder",
        "strictly decreasing",
        last,
        strictly_decreasing(&medians),
    );
    r.gate(
        "median gap at the smallest epsilon",
        "< 0.1",
        last,
        last < 0.1,
    );
    r.put("epsilon", s.ladder.clone());
    r.put("median_gap", medians);
    Ok(r)
}

fn increment_law(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        grid_n: 16385,
        eps_exp: 10,
        ladder: (10, 10),
        ..BASE
    };
    let s = Setup::resolve(cfg, d)?;
    let alpha = s.params.alpha();
    let c = c_psi(&s.kernel, alpha)?;
    let crit = 1.5 * ks_critical_value(s.grid.horizon() / s.eps);
    let rows = s.ensemble().map(|replica, path| {
        let y = path.mixing_value();
        let z = EmpiricalLaw::new(z_increments(path, s.eps)?)?;
        let hole = 0.05 * y.sqrt();
        let ks_z = z.ks_distance_outside(|x| normal_cdf(x, y), -hole, hole);
        let reg = regularize_path(path, &s.kernel, s.eps)?;
        let zt = EmpiricalLaw::new(z_tilde(&reg, alpha))?;
        let variance = y * c * c;
        let ks_zt = zt.ks_distance(|x| normal_cdf(x, variance));
        Ok((replica, y, ks_z, ks_zt, zt.variance() / variance))
    })?;
    let mut r = Report::new(
        "increment-law",
        &[
            "replica",
            "y",
            "ks_z",
            "ks_z_tilde",
            "z_tilde_variance_ratio",
        ],
    );
    let (mut hits_z, mut hits_zt) = (0, 0);
    let mut ratios = Vec::new();
    for (replica, y, kz, kzt, ratio) in &rows {
        hits_z += usize::from(*kz <= crit);
        hits_zt += usize::from(*kzt <= crit);
        ratios.push(*ratio);
        r.row(vec![
            replica.to_string(),
            num(*y),
            num(*kz),
            num(*kzt),
            num(*ratio),
        ]);
    }
    let (fz, fzt) = (fraction(hits_z, rows.len()), fraction(hits_zt, rows.len()));
    let criterion = format!(
        "fraction of replicas with KS <= 1.5 x {} is >= 0.9",
        crit / 1.5
    );
    r.gate("Z vs N(0, Y) away from 0", criterion.clone(), fz, fz >= 0.9);
    r.gate(
        "regularized Z vs N(0, Y C_psi^2)",
        criterion,
        fzt,
        fzt >= 0.9,
    );
    r.put("critical_value", crit / 1.5);
    r.put("effective_sample_size", s.grid.horizon() / s.eps);
    r.put("c_psi", c);
    r.put("median_z_tilde_variance_ratio", median(&ratios));
    Ok(r)
}

/// Fits `log gap` against `log ε` over the ladder.
fn log_slope(eps: &[f64], gaps: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    fit_slope(&xs, &ys).0
}

fn moment_convergence(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        alpha: 1.0,
        beta: 0.8,
        replicas: 200,
        ..BASE
    };
    let s = Setup::resolve(cfg, d)?;
    let runs = moment_convergence_experiment(&s.ensemble(), s.k, s.t, &s.ladder)?;
    let mut r = Report::new(
        "moment-convergence",
        &[
            "epsilon",
            "mean_value",
            "mean_target",
            "mean_square_gap",
            "rms_gap",
        ],
    );
    let mut ms = Vec::new();
    for (ei, &e) in s.ladder.iter().enumerate() {
        let n = runs.len() as f64;
        let mean_value = runs.iter().map(|run| run.points[ei].value).sum::<f64>() / n;
        let mean_target = runs.iter().map(|run| run.points[ei].target).sum::<f64>() / n;
        let gap = runs
            .iter()
            .map(|run| (run.points[ei].value - run.points[ei].target).powi(2))
            .sum::<f64>()
            / n;
        ms.push(gap);
        r.row(vec![
            num(e),
            num(mean_value),
            num(mean_target),
            num(gap),
            num(gap.sqrt()),
        ]);
    }
    let ms_slope = log_slope(&s.ladder, &ms);
    let rms: Vec<f64> = ms.iter().map(|g| g.sqrt()).collect();
    let rms_slope = log_slope(&s.ladder, &rms);
    r.gate(
        "mean-square gap slope against log epsilon",
        "within [0.4, 0.7]",
        ms_slope,
        (0.4..=0.7).contains(&ms_slope),
    );
    r.put("mean_square_slope", ms_slope);
    r.put("rms_slope", rms_slope);
    r.notes
        .push(format!("root-mean-square gap slope {rms_slope}"));
    Ok(r)
}

fn ladder_rows(r: &mut Report, runs: &[LadderRun], gaps: bool) {
    for run in runs {
        let rel = run.relative_gaps();
        for (pi, p) in run.points.iter().enumerate() {
            let mut row = vec![
                run.replica.to_string(),
                num(run.mixing),
                num(p.epsilon),
                num(p.value),
            ];
            if gaps {
                row.push(num(p.target));
                row.push(num(rel[pi]));
            }
            row.push(num(p.extra));
            r.row(row);
        }
    }
}

fn median_gaps(runs: &[LadderRun], points: usize) -> Vec<f64> {
    let gaps: Vec<Vec<f64>> = runs.iter().map(|r| r.relative_gaps()).collect();
    (0..points)
        .map(|i| median(&gaps.iter().map(|g| g[i]).collect::<Vec<_>>()))
        .collect()
}

fn lp_moduli(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        grid_n: 16385,
        replicas: 1,
        ..BASE
    };
    let s = Setup::resolve(cfg, d)?;
    let runs = lp_moduli_experiment(&s.ensemble(), s.p, s.t, &s.ladder)?;
    let mut r = Report::new(
        "lp-moduli",
        &[
            "replica", "y", "epsilon", "value", "target", "rel_gap", "extra",
        ],
    );
    ladder_rows(&mut r, &runs, true);
    let medians = median_gaps(&runs, s.ladder.len());
    let last = *medians.last().unwrap_or(&f64::NAN);
    r.gate(
        "relative gap at the smallest epsilon",
        "median < 0.05",
        last,
        last < 0.05,
    );
    r.put("median_rel_gap", medians);
    Ok(r)
}

fn squared_moduli(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        alpha: 1.0,
        beta: 0.8,
        grid_n: 16385,
        ..BASE
    };
    let s = Setup::resolve(cfg, d)?;
    let runs = squared_moduli_experiment(&s.ensemble(), s.p, s.t, &s.ladder)?;
    let mut r = Report::new(
        "squared-moduli",
        &[
            "replica",
            "y",
            "epsilon",
            "value",
            "target",
            "rel_gap",
            "printed_scaling_value",
        ],
    );
    ladder_rows(&mut r, &runs, true);
    let medians = median_gaps(&runs, s.ladder.len());
    let last = *medians.last().unwrap_or(&f64::NAN);
    r.gate(
        "median relative gap along the ladder",
        "strictly decreasing",
        last,
        strictly_decreasing(&medians),
    );
    r.put("median_rel_gap", medians);
    if s.p != 1.0 {
        r.notes.push(
            "printed_scaling_value uses eps^(-alpha/2) and matches the target only for p = 1"
                .into(),
        );
    }
    Ok(r)
}

fn odd_squared(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        k: 3,
        replicas: 100,
        ..BASE
    };
    let s = Setup::resolve(cfg, d)?;
    let runs = odd_squared_moment_experiment(&s.ensemble(), s.k, s.t, &s.ladder)?;
    let mut r = Report::new(
        "odd-squared",
        &["replica", "y", "epsilon", "value", "k_scaled_value"],
    );
    ladder_rows(&mut r, &runs, false);
    let n = runs.len();
    let decayed = runs
        .iter()
        .filter(|run| run.points.last().unwrap().value.abs() < run.points[0].value.abs())
        .count();
    let monotone = runs
        .iter()
        .filter(|run| {
            strictly_decreasing(&run.points.iter().map(|p| p.value.abs()).collect::<Vec<_>>())
        })
        .count();
    let f = fraction(decayed, n);
    r.gate(
        "|value| at the smallest epsilon below the largest",
        "fraction of replicas >= 0.9",
        f,
        f >= 0.9,
    );
    r.put("decayed_fraction", f);
    r.put("monotone_fraction", fraction(monotone, n));
    Ok(r)
}

fn power_variation_study(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        alpha: 1.0,
        beta: 0.6,
        grid_n: 16385,
        replicas: 2000,
        margin: false,
        ..BASE
    };
    let s = Setup::resolve(cfg, d)?;
    let alpha = s.params.alpha();
    let (case, scaling) = match (s.k % 2 == 0, alpha) {
        (true, a) if a < 1.5 => ("even-short-range", PowerScaling::SqrtN),
        (true, a) if a > 1.5 => ("rosenblatt", PowerScaling::NPow1MinusAlpha),
        (false, a) if a < 1.0 => ("odd", PowerScaling::SqrtN),
        _ => ("no-limit-regime", PowerScaling::SqrtN),
    };
    let mut r = Report::new(
        "power-variation",
        &[
            "case",
            "alpha",
            "beta",
            "k",
            "replica",
            "y",
            "statistic",
            "studentized",
        ],
    );
    let record =
        |r: &mut Report, label: &str, ens: &Ensemble, k: u32, scaling| -> Result<EmpiricalLaw> {
            let rows = ens.map(|_, path| power_variation(path, k, scaling))?;
            let mut stud = Vec::with_capacity(rows.len());
            for (replica, pv) in rows.iter().enumerate() {
                let st = pv.statistic / pv.mixing.powf(0.5 * k as f64);
                stud.push(st);
                r.row(vec![
                    label.into(),
                    num(ens.params.alpha()),
                    num(ens.params.beta()),
                    k.to_string(),
                    replica.to_string(),
                    num(pv.mixing),
                    num(pv.statistic),
                    num(st),
                ]);
            }
            let law = EmpiricalLaw::new(stud)?;
            r.put(&format!("{label}_mean"), law.mean());
            r.put(&format!("{label}_standard_error"), law.standard_error());
            r.put(&format!("{label}_variance"), law.variance());
            r.put(&format!("{label}_skewness"), law.skewness());
            r.put(&format!("{label}_excess_kurtosis"), law.excess_kurtosis());
            Ok(law)
        };

    let primary = record(&mut r, case, &s.ensemble(), s.k, scaling)?;
    if case == "even-short-range" {
        let (skew, kurt) = (primary.skewness(), primary.excess_kurtosis());
        r.gate(
            "studentized skewness",
            "|skew| < 0.15",
            skew,
            skew.abs() < 0.15,
        );
        r.gate(
            "studentized excess kurtosis",
            "|excess kurtosis| < 0.3",
            kurt,
            kurt.abs() < 0.3,
        );
    } else {
        r.notes.push(format!(
            "primary case '{case}' is recorded without a distributional gate"
        ));
    }

    let side = s.replicas.min(2000);
    let bm = Ensemble {
        params: GreyParams::new(1.0, 1.0)?,
        grid: TimeGrid::new(1.0, 1025, 0)?,
        replicas: side,
        seed: s.seed.wrapping_add(1),
    };
    let law = record(&mut r, "brownian", &bm, 2, PowerScaling::SqrtN)?;
    let ratio = law.variance() / 2.0;
    r.gate(
        "Brownian quadratic variation variance",
        "within 10% of 2",
        law.variance(),
        (ratio - 1.0).abs() <= 0.1,
    );

    let small = s.replicas.min(200);
    let grid = TimeGrid::new(1.0, 4097, 0)?;
    let extra = [
        (
            "rosenblatt-reference",
            1.8,
            2,
            PowerScaling::NPow1MinusAlpha,
        ),
        ("odd-reference", 0.6, 3, PowerScaling::SqrtN),
        (
            "even-long-range-as-displayed",
            1.6,
            2,
            PowerScaling::NPowNegAlphaHalf,
        ),
    ];
    for (i, (label, a, k, sc)) in extra.into_iter().enumerate() {
        let ens = Ensemble {
            params: GreyParams::new(a, 0.6)?,
            grid,
            replicas: small,
            seed: s.seed.wrapping_add(2 + i as u64),
        };
        record(&mut r, label, &ens, k, sc)?;
    }
    r.notes
        .push("Rosenblatt case recorded only: no desk-scale oracle for its law".into());
    r.notes.push(
        "even-long-range-as-displayed: labelled k even, but the displayed statistic is uncentered; \
         implemented verbatim, so it grows like n^(1 - alpha/2)"
            .into(),
    );
    Ok(r)
}

fn brownian_limit(cfg: &ExperimentConfig) -> Result<Report> {
    let d = Defaults {
        alpha: 0.6,
        beta: 0.8,
        grid_n: 16385,
        eps_exp: 9,
        ladder: (9, 9),
        replicas: 1000,
        k: 3,
        ..BASE
    };
    let s = Setup::resolve(cfg, d)?;
    if s.k % 2 == 0 || s.params.alpha() >= 1.0 {
        return Err(Error::InvalidParameter(
            "brownian-limit needs odd k and alpha < 1".into(),
        ));
    }
    if s.t <= 0.0 {
        return Err(Error::InvalidParameter("brownian-limit needs t > 0".into()));
    }
    let ens = s.ensemble();
    let at_t = brownian_limit_experiment(&ens, s.k, s.t, s.eps)?;
    let half = 0.5 * s.t;
    let at_half = brownian_limit_experiment(&ens, s.k, half, s.eps)?;
    let mut r = Report::new(
        "brownian-limit",
        &[
            "replica",
            "y",
            "statistic",
            "studentized",
            "statistic_half_t",
        ],
    );
    let stud: Vec<f64> = at_t
        .statistic
        .iter()
        .zip(&at_t.mixing)
        .map(|(st, y)| st / (at_t.c_k_alpha * y.powi(s.k as i32) * s.t).sqrt())
        .collect();
    for (i, st) in at_t.statistic.iter().enumerate() {
        r.row(vec![
            i.to_string(),
            num(at_t.mixing[i]),
            num(*st),
            num(stud[i]),
            num(at_half.statistic[i]),
        ]);
    }
    let law = &at_t.studentized;
    let ks = law.ks_distance(|x| normal_cdf(x, 1.0));
    let crit = ks_critical_value(law.len() as f64);
    r.gate(
        "studentized statistic vs N(0, 1)",
        format!("KS <= {crit}"),
        ks,
        ks <= crit,
    );
    let qc = QuadConfig::with_abs_tol(1e-12);
    let alpha = s.params.alpha();
    let mean_sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let predicted = odd_power_variance_at(s.k, alpha, s.eps, s.t, &qc)? / (at_t.c_k_alpha * s.t);
    r.put("c_k_alpha", at_t.c_k_alpha);
    r.put("c_k_alpha_displayed", c_k_alpha_displayed(s.k, alpha, &qc)?);
    r.put("ks", ks);
    r.put("critical_value", crit);
    r.put("studentized_variance", law.variance());
    r.put("predicted_variance_at_epsilon", predicted);
    r.put(
        "variance_ratio_t_over_half_t",
        mean_sq(&at_t.statistic) / mean_sq(&at_half.statistic),
    );
    r.notes.push(format!(
        "variance of the studentized statistic predicted at this epsilon: {predicted} (limit 1)"
    ));
    Ok(r)
}
