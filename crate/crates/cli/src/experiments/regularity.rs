//! Convergence of the norming ratios `R_k(j, t)` to `R_inf`.

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use thetageo::fit::power_law;
use thetageo::lattice::theta_basis;
use thetageo::norming::{compare_ratios, regularity_check};

use super::{check_len, Context, Outcome};
use crate::report::{columns, floats, header, names, Cell, Criterion, Metric, Table};

#[derive(Debug, Clone, Serialize)]
struct LevelRow {
    k: u32,
    max_abs_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Tracked {
    nu_star: Vec<f64>,
    indices: Vec<Vec<u32>>,
    relative_deviation: Vec<f64>,
    coefficients: Vec<f64>,
    slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Details {
    t: f64,
    levels: Vec<LevelRow>,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    tracked: Vec<Tracked>,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.section(&ctx.cfg.regularity, "regularity")?;
    let m = ctx.lattice.dim();
    let seg = ctx.segment(&c.psi0, &c.psi1)?;
    let comparisons = c
        .ladder
        .par_iter()
        .map(|&k| {
            compare_ratios(&seg, k, c.t, &ctx.spec(k))
                .with_context(|| format!("k = {k}, t = {}", c.t))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(
        "norming",
        header(&[
            &names(&["k"]),
            &columns("j", m),
            &names(&["t", "rho", "Rk", "Rinf"]),
        ]),
    );
    let mut levels = Vec::new();
    for cmp in &comparisons {
        for (i, idx) in theta_basis(&ctx.lattice, cmp.k)?.iter().enumerate() {
            let mut cells = vec![Cell::from(cmp.k)];
            cells.extend(idx.components().iter().map(|&j| Cell::from(j)));
            cells.extend(floats(&[
                c.t,
                cmp.log_rho[1][i].exp(),
                cmp.rk[i],
                cmp.rinf[i],
            ]));
            table.push(cells);
        }
        levels.push(LevelRow {
            k: cmp.k,
            max_abs_deviation: cmp.max_abs_deviation(),
        });
    }
    let devs: Vec<f64> = levels.iter().map(|l| l.max_abs_deviation).collect();
    let law = power_law(&c.ladder, &devs).context("power-law fit of max_j |R_k - R_inf|")?;

    let tracked = c
        .nu_star
        .iter()
        .map(|nu| {
            check_len("nu_star", nu, m)?;
            let r = regularity_check(&seg, &c.ladder, c.t, nu, &ctx.plan)
                .with_context(|| format!("nu* = {nu:?}, t = {}", c.t))?;
            Ok(Tracked {
                nu_star: nu.clone(),
                indices: r.indices.iter().map(|i| i.components().to_vec()).collect(),
                relative_deviation: r.relative_deviation.clone(),
                coefficients: r.fit.coefficients.clone(),
                slope: r.decay.map(|d| d.slope),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Outcome::new(Details {
        t: c.t,
        levels: levels.clone(),
        slope: law.slope,
        intercept: law.intercept,
        r_squared: law.r_squared,
        tracked: tracked.clone(),
    })?;
    out.criteria.push(Criterion::at_most(
        "regularity-slope",
        "distance of the log-log slope of max_j |R_k - R_inf| from the target",
        (law.slope - c.slope).abs(),
        c.slope_tol,
    ));
    out.criteria.push(Criterion::holds(
        "regularity-r-squared",
        "coefficient of determination of the log-log fit",
        law.r_squared,
        c.r_squared_min,
        law.r_squared > c.r_squared_min,
    ));
    for l in &levels {
        out.metrics.push(Metric::new(
            format!("max_abs_deviation[k={}]", l.k),
            l.max_abs_deviation,
            1e-9,
        ));
    }
    out.metrics.push(Metric::new("slope", law.slope, 1e-4));
    out.metrics
        .push(Metric::new("r_squared", law.r_squared, 1e-4));
    out.tables = vec![table];
    Ok(out)
}
