use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use thetageo_cli::config::ExperimentConfig;
use thetageo_cli::{run, write_artifacts, Kind, RunOptions};

/// Run a thetageo experiment and write its report and CSV tables.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Experiment kind.
    #[arg(value_enum)]
    kind: Kind,
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplies the quadrature resolution.
    #[arg(long)]
    quadrature_scale: Option<f64>,
    /// Rerun at doubled resolution and compare every reported quantity.
    #[arg(long)]
    verify: bool,
}

fn main_inner(args: Args) -> Result<bool> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = ExperimentConfig::load(&args.config)?;
    let result = run(
        args.kind,
        &cfg,
        RunOptions {
            quadrature_scale: args.quadrature_scale,
            verify: args.verify,
        },
    )?;
    write_artifacts(&result, &args.out)?;
    let r = &result.report;
    for c in &r.criteria {
        println!(
            "{} {}: {:e} (threshold {:e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    if let Some(v) = &r.verify {
        let worst = v
            .rows
            .iter()
            .map(|row| row.deviation / row.tol)
            .fold(0.0, f64::max);
        println!(
            "{} verify: {} quantities, worst deviation/tolerance {worst:e}",
            if v.pass { "PASS" } else { "FAIL" },
            v.rows.len()
        );
    }
    Ok(r.pass)
}

fn main() -> ExitCode {
    match main_inner(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
