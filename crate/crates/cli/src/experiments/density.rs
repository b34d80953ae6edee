//! Bergman density `k^-m Pi_k(z, z)` on a lattice grid.

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use thetageo::bergman::BergmanKernel;
use thetageo::KahlerPotential;

use super::{Context, Outcome};
use crate::report::{columns, floats, header, names, Cell, Criterion, Metric, Table};

#[derive(Debug, Clone, Serialize)]
struct LevelSummary {
    k: u32,
    max_deviation: f64,
    /// `k * max |k^-m Pi_k - 1|`.
    scaled: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Details {
    grid_points: usize,
    curved: Vec<LevelSummary>,
    flat: Vec<LevelSummary>,
}

/// Grid of lattice coordinates `(x, y)` with `n` nodes per direction.
fn grid(m: usize, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let total = n.pow(2 * m as u32);
    (0..total)
        .map(|mut i| {
            let mut c = vec![0.0; 2 * m];
            for v in c.iter_mut().rev() {
                *v = (i % n) as f64 / n as f64;
                i /= n;
            }
            (c[..m].to_vec(), c[m..].to_vec())
        })
        .collect()
}

fn sweep(
    ctx: &Context,
    pot: &KahlerPotential,
    ladder: &[u32],
    nodes: &[(Vec<f64>, Vec<f64>)],
    label: &str,
    table: &mut Table,
) -> Result<Vec<LevelSummary>> {
    let m = pot.lattice().dim();
    let values = ladder
        .par_iter()
        .map(|&k| -> Result<Vec<f64>> {
            let kernel = BergmanKernel::new(pot, k, &ctx.spec(k), ctx.policy)
                .with_context(|| format!("{label} k = {k}"))?;
            nodes
                .iter()
                .map(|(x, y)| {
                    let z = pot.lattice().point(x, y);
                    Ok(kernel
                        .density(&z)
                        .with_context(|| format!("{label} k = {k}, z = {z:?}"))?
                        / (k as f64).powi(m as i32))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (&k, row) in ladder.iter().zip(&values) {
        let mut worst: f64 = 0.0;
        for ((x, y), d) in nodes.iter().zip(row) {
            worst = worst.max((d - 1.0).abs());
            let mut cells = vec![
                Cell::Int(if label == "flat" { 1 } else { 0 }),
                Cell::from(k),
            ];
            cells.extend(floats(x));
            cells.extend(floats(y));
            cells.extend(floats(&[*d, d - 1.0]));
            table.push(cells);
        }
        out.push(LevelSummary {
            k,
            max_deviation: worst,
            scaled: worst * k as f64,
        });
    }
    Ok(out)
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.section(&ctx.cfg.density, "density")?;
    let m = ctx.lattice.dim();
    let pot = ctx.cfg.potential_on(&c.potential, &ctx.lattice)?;
    let nodes = grid(m, c.points);
    let mut table = Table::new(
        "density",
        header(&[
            &names(&["flat", "k"]),
            &columns("x", m),
            &columns("y", m),
            &names(&["density", "deviation"]),
        ]),
    );
    let curved = sweep(ctx, &pot, &c.ladder, &nodes, "curved", &mut table)?;
    let flat_pot = KahlerPotential::flat(ctx.lattice.clone());
    let flat = sweep(ctx, &flat_pot, &c.flat_ladder, &nodes, "flat", &mut table)?;

    let worst_scaled = curved.iter().map(|s| s.scaled).fold(0.0, f64::max);
    let worst_flat = flat.iter().map(|s| s.max_deviation).fold(0.0, f64::max);
    let mut out = Outcome::new(Details {
        grid_points: nodes.len(),
        curved: curved.clone(),
        flat: flat.clone(),
    })?;
    out.criteria.push(Criterion::at_most(
        "density-curved",
        "largest k |k^-m Pi_k(z, z) - 1| over the grid and ladder",
        worst_scaled,
        c.constant,
    ));
    if !flat.is_empty() {
        out.criteria.push(Criterion::at_most(
            "density-flat",
            "largest |k^-m Pi_k(z, z) - 1| for the flat metric",
            worst_flat,
            c.flat_tol,
        ));
    }
    for s in &curved {
        out.metrics.push(Metric::new(
            format!("curved[k={}]", s.k),
            s.max_deviation,
            1e-9,
        ));
    }
    for s in &flat {
        out.metrics.push(Metric::new(
            format!("flat[k={}]", s.k),
            s.max_deviation,
            1e-9,
        ));
    }
    out.tables = vec![table];
    Ok(out)
}
