mod args;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use greybm::experiments::{self, ExperimentConfig, Report};
use greybm::paths::{generate_gbm, sample_gbm_marginal_subordinated, SubordinationVariant};
use greybm::sampling::{sample_stable_subordinator, sample_y_beta};
use greybm::specfun::{m_wright_density, marginal_density, mittag_leffler};
use greybm::{Error, EvalConfig, GreyParams, Result, RngStream, TimeGrid};

use args::{Cli, Command, EvalArgs, Format, Function, RunArgs, SampleArgs, SampleKind};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_GATE: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let outcome = match cli.command {
        Command::List => {
            print!("{}", experiments::list_experiments());
            Ok(true)
        }
        Command::Eval(a) => eval(&a).map(|_| true),
        Command::Sample(a) => sample(&a).map(|_| true),
        Command::Run(a) => run(&a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_GATE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            })
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn eval(a: &EvalArgs) -> Result<()> {
    let cfg = EvalConfig::default();
    let xs =
        a.x.iter()
            .map(|v| experiments::parse_scalar(v))
            .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let value = match a.function {
            Function::Ml => mittag_leffler(a.beta, x, &cfg)?,
            Function::Mwright => m_wright_density(a.beta, x, &cfg)?,
            Function::Marginal => {
                let alpha = a
                    .alpha
                    .ok_or_else(|| Error::InvalidParameter("marginal needs --alpha".into()))?;
                marginal_density(GreyParams::new(alpha, a.beta)?, x, a.t, &cfg)?
            }
        };
        rows.push((x, value));
    }
    let mut out = output(None)?;
    match a.format {
        Format::Json => {
            let values: Vec<_> = rows
                .iter()
                .map(|(x, v)| serde_json::json!({ "x": x, "value": v }))
                .collect();
            let doc = serde_json::json!({
                "function": a.function.name(),
                "alpha": a.alpha,
                "beta": a.beta,
                "t": a.t,
                "values": values,
            });
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?
            )?;
        }
        _ => {
            writeln!(out, "x,value")?;
            for (x, v) in rows {
                writeln!(out, "{x:?},{v:?}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn sample(a: &SampleArgs) -> Result<()> {
    let cfg = a.common.config()?;
    let alpha = cfg.alpha.unwrap_or(1.0);
    let beta = cfg.beta.unwrap_or(1.0);
    let params = GreyParams::new(alpha, beta)?;
    let horizon = cfg.horizon.unwrap_or(1.0);
    let replicas = cfg.replicas.unwrap_or(1);
    if replicas == 0 {
        return Err(Error::InvalidParameter(
            "replicas must be at least 1".into(),
        ));
    }
    let mut out = output(a.common.out.as_deref())?;
    match a.kind {
        SampleKind::Path => {
            if replicas != 1 {
                return Err(Error::InvalidParameter(
                    "sample path writes a single path; use --seed for others".into(),
                ));
            }
            let ext = cfg.ext.unwrap_or(0.0) * horizon;
            let grid = TimeGrid::with_margin(horizon, cfg.grid_n.unwrap_or(1025), ext)?;
            let path = generate_gbm(params, grid, RngStream::new(cfg.seed, 0))?;
            match a.common.format {
                Format::Binary => path.write_binary(&mut out)?,
                Format::Csv => path.write_csv(&mut out)?,
                Format::Json => {
                    return Err(Error::InvalidParameter(
                        "sample path supports csv or binary".into(),
                    ))
                }
            }
        }
        kind => {
            let mut rng = RngStream::new(cfg.seed, 0).rng();
            let mut values = Vec::with_capacity(replicas);
            for _ in 0..replicas {
                values.push(match kind {
                    SampleKind::Mixing => sample_y_beta(beta, &mut rng)?.value,
                    SampleKind::Stable => sample_stable_subordinator(beta, &mut rng)?,
                    _ => sample_gbm_marginal_subordinated(
                        params,
                        horizon,
                        SubordinationVariant::BmInverseSubordinator,
                        &mut rng,
                    )?,
                });
            }
            match a.common.format {
                Format::Csv => {
                    writeln!(out, "value")?;
                    for v in values {
                        writeln!(out, "{v:?}")?;
                    }
                }
                Format::Json => writeln!(
                    out,
                    "{}",
                    serde_json::json!({ "kind": kind.name(), "values": values })
                )?,
                Format::Binary => {
                    for v in values {
                        out.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn write_artifacts(report: &Report, cfg: &ExperimentConfig, dir: &Path, wall: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    report.write_csv(BufWriter::new(File::create(
        dir.join(format!("{}.csv", report.experiment)),
    )?))?;
    let json = serde_json::to_string_pretty(&report.json(cfg, wall))
        .map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join(format!("{}.json", report.experiment)), json + "\n")?;
    Ok(())
}

fn run(a: &RunArgs) -> Result<bool> {
    let cfg = a.common.config()?;
    if experiments::find(&a.experiment).is_none() {
        return Err(Error::InvalidParameter(format!(
            "unknown experiment '{}'; available:\n{}",
            a.experiment,
            experiments::list_experiments()
        )));
    }
    let start = Instant::now();
    let report = experiments::run(&a.experiment, &cfg)?;
    let wall = start.elapsed().as_secs_f64();
    match &a.common.out {
        Some(dir) => write_artifacts(&report, &cfg, dir, wall)?,
        None => {
            let mut out = output(None)?;
            match a.common.format {
                Format::Json => {
                    let json = serde_json::to_string_pretty(&report.json(&cfg, wall))
                        .map_err(|e| Error::Format(e.to_string()))?;
                    writeln!(out, "{json}")?;
                }
                Format::Csv => report.write_csv(&mut out)?,
                Format::Binary => {
                    return Err(Error::InvalidParameter("run supports csv or json".into()))
                }
            }
            out.flush()?;
        }
    }
    eprint!("{}", report.text());
    Ok(report.passed())
}
