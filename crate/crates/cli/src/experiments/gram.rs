//! Orthogonality of the theta basis and the flat closed form of the norming constants.

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use thetageo::norming::{
    flat_norming_constant, gram_matrix, log_norming_constants, max_normalized_off_diagonal,
    QuadratureSpec,
};
use thetageo::KahlerPotential;

use super::{Context, Outcome};
use crate::report::{names, Cell, Criterion, Metric, Table};

#[derive(Debug, Clone, Serialize)]
struct GramRow {
    case: String,
    m: usize,
    k: u32,
    points: usize,
    max_off_diagonal: f64,
}

#[derive(Debug, Clone, Serialize)]
struct FlatRow {
    m: usize,
    k: u32,
    closed_form: f64,
    max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Details {
    gram: Vec<GramRow>,
    flat: Vec<FlatRow>,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.section(&ctx.cfg.gram_check, "gram-check")?;
    let scale = ctx.plan.scale;

    let mut gram = Vec::new();
    for case in &c.cases {
        let lat = case
            .lattice
            .build()
            .with_context(|| format!("case {:?}", case.name))?;
        let pot = ctx.cfg.potential_on(&case.potential, &lat)?;
        let rows = case
            .ks
            .par_iter()
            .map(|&k| {
                let mut q = ctx.spec(k);
                if let Some(p) = case.points {
                    q = QuadratureSpec {
                        points_per_dim: (p as f64 * scale).ceil() as usize,
                        ..q
                    };
                }
                let g = gram_matrix(&pot, k, &q)
                    .with_context(|| format!("case {:?}, k = {k}", case.name))?;
                Ok(GramRow {
                    case: case.name.clone(),
                    m: lat.dim(),
                    k,
                    points: q.points_per_dim,
                    max_off_diagonal: max_normalized_off_diagonal(&g),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        gram.extend(rows);
    }

    let mut flat = Vec::new();
    for case in &c.flat {
        let lat = case.lattice.build()?;
        let pot = KahlerPotential::flat(lat.clone());
        let rows = case
            .ks
            .par_iter()
            .map(|&k| {
                let exact = flat_norming_constant(&lat, k);
                let logs = log_norming_constants(&pot, k, &ctx.spec(k))
                    .with_context(|| format!("flat m = {}, k = {k}", lat.dim()))?;
                let err = logs
                    .iter()
                    .map(|l| (l.exp() / exact - 1.0).abs())
                    .fold(0.0, f64::max);
                Ok(FlatRow {
                    m: lat.dim(),
                    k,
                    closed_form: exact,
                    max_relative_error: err,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        flat.extend(rows);
    }

    let mut gram_table = Table::new(
        "gram",
        names(&["case", "m", "k", "points", "max_off_diagonal"]),
    );
    for (i, r) in gram.iter().enumerate() {
        let case = c.cases.iter().position(|cs| cs.name == r.case).unwrap_or(i);
        gram_table.push(vec![
            Cell::from(case),
            Cell::from(r.m),
            Cell::from(r.k),
            Cell::from(r.points),
            Cell::from(r.max_off_diagonal),
        ]);
    }
    let mut flat_table = Table::new(
        "flat",
        names(&["m", "k", "closed_form", "max_relative_error"]),
    );
    for r in &flat {
        flat_table.push(vec![
            Cell::from(r.m),
            Cell::from(r.k),
            Cell::from(r.closed_form),
            Cell::from(r.max_relative_error),
        ]);
    }

    let worst_gram = gram.iter().map(|r| r.max_off_diagonal).fold(0.0, f64::max);
    let worst_flat = flat
        .iter()
        .map(|r| r.max_relative_error)
        .fold(0.0, f64::max);
    let mut out = Outcome::new(Details {
        gram: gram.clone(),
        flat: flat.clone(),
    })?;
    if !gram.is_empty() {
        out.criteria.push(Criterion::at_most(
            "gram-orthogonality",
            "largest normalized off-diagonal Gram entry",
            worst_gram,
            c.off_diagonal_tol,
        ));
    }
    if !flat.is_empty() {
        out.criteria.push(Criterion::at_most(
            "flat-closed-form",
            "largest relative error of rho_k(j) against (4 pi)^m sqrt(det X) / (2k)^(m/2)",
            worst_flat,
            c.flat_tol,
        ));
    }
    out.metrics
        .push(Metric::new("max_off_diagonal", worst_gram, 1e-10));
    out.metrics
        .push(Metric::new("max_flat_error", worst_flat, 1e-11));
    out.tables = vec![gram_table, flat_table];
    Ok(out)
}
