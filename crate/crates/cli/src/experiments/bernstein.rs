//! Generalized Bernstein sums against `f(nu(y))`, and the `f = 1` density check.

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use thetageo::bergman::{bernstein_point, BergmanKernel};
use thetageo::fit::power_law;
use thetageo::TrigPolynomial;

use super::{check_len, Context, Outcome};
use crate::report::{columns, floats, header, names, Cell, Criterion, Metric, Table};

#[derive(Debug, Clone, Serialize)]
struct Decay {
    function: String,
    y: Vec<f64>,
    target: f64,
    errors: Vec<f64>,
    slope: f64,
    r_squared: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Details {
    ladder: Vec<u32>,
    decays: Vec<Decay>,
    max_consistency_gap: f64,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.section(&ctx.cfg.bernstein, "bernstein")?;
    let m = ctx.lattice.dim();
    let pot = ctx.cfg.potential_on(&c.potential, &ctx.lattice)?;
    let x = ctx.x_or_zero(&c.x)?;
    for y in &c.y {
        check_len("y", y, m)?;
    }
    let funcs = c
        .functions
        .iter()
        .map(|f| f.polynomial(m))
        .collect::<Result<Vec<_>>>()?;
    let one = TrigPolynomial::from_terms(m, &[thetageo::FourierTerm::new(vec![0; m], 1.0, 0.0)])?;

    // sums[k][y][f], plus the f = 1 gap per (k, y)
    let rows = c
        .ladder
        .par_iter()
        .map(|&k| -> Result<Vec<(Vec<f64>, f64)>> {
            let kernel = BergmanKernel::new(&pot, k, &ctx.spec(k), ctx.policy)
                .with_context(|| format!("k = {k}"))?;
            c.y.iter()
                .map(|y| {
                    let msg = || format!("k = {k}, x = {x:?}, y = {y:?}");
                    let z = ctx.lattice.point(&x, y);
                    let sums = funcs
                        .iter()
                        .map(|f| kernel.bernstein(f, &z).with_context(msg))
                        .collect::<Result<Vec<f64>>>()?;
                    let unit = kernel.bernstein(&one, &z).with_context(msg)?;
                    let density = kernel.density(&z).with_context(msg)? / (k as f64).powi(m as i32);
                    Ok((sums, (unit - density).abs()))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(
        "sums",
        header(&[
            &names(&["k", "function"]),
            &columns("y", m),
            &columns("nu", m),
            &names(&["sum", "target", "error"]),
        ]),
    );
    let nus: Vec<Vec<f64>> = c.y.iter().map(|y| bernstein_point(&pot, y)).collect();
    let mut decays = Vec::new();
    for (fi, (spec, f)) in c.functions.iter().zip(&funcs).enumerate() {
        for (yi, y) in c.y.iter().enumerate() {
            let target = f.eval(&nus[yi]);
            let errors: Vec<f64> = rows.iter().map(|r| (r[yi].0[fi] - target).abs()).collect();
            for ((&k, r), e) in c.ladder.iter().zip(&rows).zip(&errors) {
                let mut cells = vec![Cell::from(k), Cell::from(fi)];
                cells.extend(floats(y));
                cells.extend(floats(&nus[yi]));
                cells.extend(floats(&[r[yi].0[fi], target, *e]));
                table.push(cells);
            }
            let law = power_law(&c.ladder, &errors)
                .with_context(|| format!("decay of {:?} at y = {y:?}", spec.name))?;
            decays.push(Decay {
                function: spec.name.clone(),
                y: y.clone(),
                target,
                errors,
                slope: law.slope,
                r_squared: law.r_squared,
            });
        }
    }
    let gap = rows
        .iter()
        .flat_map(|r| r.iter().map(|v| v.1))
        .fold(0.0, f64::max);
    let worst_slope = decays
        .iter()
        .map(|d| d.slope)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut out = Outcome::new(Details {
        ladder: c.ladder.clone(),
        decays: decays.clone(),
        max_consistency_gap: gap,
    })?;
    out.criteria.push(Criterion::at_most(
        "bernstein-decay",
        "largest log-log slope of |sum - f(nu(y))| along the ladder",
        worst_slope,
        c.max_slope,
    ));
    out.criteria.push(Criterion::at_most(
        "bernstein-unit",
        "largest |B_k(1) - k^-m Pi_k(z, z)|",
        gap,
        c.consistency_tol,
    ));
    for (i, d) in decays.iter().enumerate() {
        out.metrics
            .push(Metric::new(format!("slope[{i}]"), d.slope, 1e-4));
        out.metrics.push(Metric::new(
            format!("error[{i}][k={}]", c.ladder[c.ladder.len() - 1]),
            *d.errors.last().unwrap(),
            1e-9,
        ));
    }
    out.tables = vec![table];
    Ok(out)
}
