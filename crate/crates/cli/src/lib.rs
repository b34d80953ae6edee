//! Deterministic experiment runner for the `thetageo` library.
//!
//! Each experiment kind reads one section of a TOML config, runs the
//! corresponding pipeline and produces a JSON report plus CSV tables.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;

use anyhow::{Context as _, Result};
use clap::ValueEnum;

use config::ExperimentConfig;
use experiments::{Context, Outcome};
use report::{Report, Table, Verification};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Geodesic,
    ExpansionFit,
    Bernstein,
    RiemannSum,
    Density,
    GramCheck,
    Regularity,
    Harmonic,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Geodesic => "geodesic",
            Kind::ExpansionFit => "expansion-fit",
            Kind::Bernstein => "bernstein",
            Kind::RiemannSum => "riemann-sum",
            Kind::Density => "density",
            Kind::GramCheck => "gram-check",
            Kind::Regularity => "regularity",
            Kind::Harmonic => "harmonic",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Multiplies the configured quadrature scale.
    pub quadrature_scale: Option<f64>,
    /// Repeat the run at doubled resolution and compare every metric.
    pub verify: bool,
}

/// A finished run: the report and the tables to write next to it.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: Report,
    pub tables: Vec<Table>,
}

fn dispatch(kind: Kind, cfg: &ExperimentConfig) -> Result<Outcome> {
    let ctx = Context::new(cfg)?;
    match kind {
        Kind::Geodesic => experiments::geodesic::run(&ctx),
        Kind::ExpansionFit => experiments::expansion::run(&ctx),
        Kind::Bernstein => experiments::bernstein::run(&ctx),
        Kind::RiemannSum => experiments::riemann::run(&ctx),
        Kind::Density => experiments::density::run(&ctx),
        Kind::GramCheck => experiments::gram::run(&ctx),
        Kind::Regularity => experiments::regularity::run(&ctx),
        Kind::Harmonic => experiments::harmonic::run(&ctx),
    }
}

pub fn run(kind: Kind, cfg: &ExperimentConfig, opts: RunOptions) -> Result<Run> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.quadrature_scale {
        anyhow::ensure!(
            s.is_finite() && s > 0.0,
            "quadrature scale must be positive"
        );
        cfg.quadrature.scale *= s;
    }
    let base = dispatch(kind, &cfg).with_context(|| format!("{} run failed", kind.name()))?;
    let verify = if opts.verify {
        let refined = dispatch(kind, &cfg.refined())
            .with_context(|| format!("{} verification run failed", kind.name()))?;
        Some(Verification::compare(&base.metrics, &refined.metrics))
    } else {
        None
    };
    let pass = base.criteria.iter().all(|c| c.pass) && verify.as_ref().is_none_or(|v| v.pass);
    let report = Report {
        kind: kind.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        pass,
        criteria: base.criteria,
        metrics: base.metrics,
        details: base.details,
        verify,
    };
    Ok(Run {
        report,
        tables: base.tables,
    })
}

/// Writes the report and tables into `dir`, creating it if needed.
pub fn write_artifacts(run: &Run, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let out = &run.report.config.output;
    let prefix = out
        .prefix
        .clone()
        .unwrap_or_else(|| run.report.kind.clone());
    for t in &run.tables {
        t.write(dir, &prefix)?;
    }
    let path = dir.join(&out.report);
    std::fs::write(&path, run.report.to_json()?)
        .with_context(|| format!("writing {}", path.display()))
}
