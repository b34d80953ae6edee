//! Error field of the Bergman geodesic, its finite-difference derivatives, the
//! norming-constant table and the geodesic equation residual.

use anyhow::{ensure, Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use thetageo::bergman::BergmanGeodesic;
use thetageo::lattice::theta_basis;
use thetageo::legendre::geodesic_check;
use thetageo::norming::{index_moment, NormingTable};

use super::{check_len, max_abs, Context, Outcome};
use crate::report::{columns, floats, header, names, Cell, Criterion, Metric, Table};

#[derive(Debug, Clone, Serialize)]
struct LevelSummary {
    k: u32,
    sup_diff: f64,
    /// `sup |phi_k - phi_t - (m/k) ln k|`.
    sup_reduced: f64,
    sup_dt: f64,
    sup_dy: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Details {
    levels: Vec<LevelSummary>,
    max_pde_residual: f64,
}

struct Sample {
    phi_k: f64,
    phi_t: f64,
    diff: f64,
    dt: f64,
    dy: Vec<f64>,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.section(&ctx.cfg.geodesic, "geodesic")?;
    let m = ctx.lattice.dim();
    let seg = ctx.segment(&c.psi0, &c.psi1)?;
    let x = ctx.x_or_zero(&c.x)?;
    for y in &c.y {
        check_len("y", y, m)?;
    }
    let h = c.fd_step;
    for &t in &c.t {
        ensure!(
            t - h >= 0.0 && t + h <= 1.0,
            "t = {t} leaves no room for step {h}"
        );
    }

    let per_level = c
        .ladder
        .par_iter()
        .map(|&k| -> Result<Vec<Vec<Sample>>> {
            let bg = BergmanGeodesic::new(&seg, k, ctx.spec(k), ctx.policy)
                .with_context(|| format!("k = {k}"))?;
            c.t.iter()
                .map(|&t| {
                    let at = |s: f64| bg.slice(s).with_context(|| format!("k = {k}, t = {s}"));
                    let (mid, minus, plus) = (at(t)?, at(t - h)?, at(t + h)?);
                    c.y.iter()
                        .map(|y| {
                            let ctx_msg = || format!("k = {k}, t = {t}, x = {x:?}, y = {y:?}");
                            let v = mid.eval_at(&x, y).with_context(ctx_msg)?;
                            let dt = (plus.eval_at(&x, y).with_context(ctx_msg)?.diff
                                - minus.eval_at(&x, y).with_context(ctx_msg)?.diff)
                                / (2.0 * h);
                            let dy = (0..m)
                                .map(|a| {
                                    let mut yp = y.clone();
                                    let mut ym = y.clone();
                                    yp[a] += h;
                                    ym[a] -= h;
                                    let ep = mid.eval_at(&x, &yp).with_context(ctx_msg)?.diff;
                                    let em = mid.eval_at(&x, &ym).with_context(ctx_msg)?.diff;
                                    Ok((ep - em) / (2.0 * h))
                                })
                                .collect::<Result<Vec<f64>>>()?;
                            Ok(Sample {
                                phi_k: v.phi_k,
                                phi_t: v.phi_t,
                                diff: v.diff,
                                dt,
                                dy,
                            })
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let tables = c
        .ladder
        .par_iter()
        .map(|&k| {
            NormingTable::build(&seg, k, &c.norming_t, &ctx.spec(k))
                .with_context(|| format!("k = {k}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut field = Table::new(
        "error_field",
        header(&[
            &names(&["k", "t"]),
            &columns("y", m),
            &columns("x", m),
            &names(&["phi_k", "phi_t", "diff", "d_t", "d_y_max"]),
        ]),
    );
    let mut levels = Vec::new();
    for (k, samples) in c.ladder.iter().zip(&per_level) {
        let shift = m as f64 * (*k as f64).ln() / *k as f64;
        let mut s = LevelSummary {
            k: *k,
            sup_diff: 0.0,
            sup_reduced: 0.0,
            sup_dt: 0.0,
            sup_dy: 0.0,
        };
        for (t, row) in c.t.iter().zip(samples) {
            for (y, v) in c.y.iter().zip(row) {
                let dy = max_abs(v.dy.iter().copied());
                s.sup_diff = s.sup_diff.max(v.diff.abs());
                s.sup_reduced = s.sup_reduced.max((v.diff - shift).abs());
                s.sup_dt = s.sup_dt.max(v.dt.abs());
                s.sup_dy = s.sup_dy.max(dy);
                let mut cells = vec![Cell::from(*k), Cell::from(*t)];
                cells.extend(floats(y));
                cells.extend(floats(&x));
                cells.extend(floats(&[v.phi_k, v.phi_t, v.diff, v.dt, dy]));
                field.push(cells);
            }
        }
        levels.push(s);
    }

    let mut norming = Table::new(
        "norming",
        header(&[
            &names(&["k"]),
            &columns("j", m),
            &names(&["t", "rho", "Rk", "Rinf"]),
        ]),
    );
    for table in &tables {
        let k = table.k;
        for idx in theta_basis(&ctx.lattice, k)? {
            let mu = index_moment(&ctx.lattice, &idx);
            for &t in &c.norming_t {
                let ctx_msg = || format!("k = {k}, j = {:?}, t = {t}", idx.components());
                let rho = table.rho(&idx, t).with_context(ctx_msg)?;
                let rk = table.ratio_rk(&idx, t).with_context(ctx_msg)?;
                let rinf = seg.ratio_rinf(&mu, t).with_context(ctx_msg)?;
                let mut cells = vec![Cell::from(k)];
                cells.extend(idx.components().iter().map(|&j| Cell::from(j)));
                cells.extend(floats(&[t, rho, rk, rinf]));
                norming.push(cells);
            }
        }
    }

    let residuals = c
        .t
        .iter()
        .flat_map(|&t| c.y.iter().map(move |y| (t, y)))
        .map(|(t, y)| {
            geodesic_check(&seg, t, y, c.pde_step).with_context(|| format!("t = {t}, y = {y:?}"))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_pde_residual = max_abs(residuals.iter().copied());

    let decreasing = |f: fn(&LevelSummary) -> f64| levels.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let monotone = decreasing(|s| s.sup_dt) && decreasing(|s| s.sup_dy);
    let last = levels.last().context("empty ladder")?;
    let final_sup = last.sup_dt.max(last.sup_dy);

    let mut out = Outcome::new(Details {
        levels: levels.clone(),
        max_pde_residual,
    })?;
    out.criteria.push(Criterion::holds(
        "cinf-facets",
        "finite-difference d_t and d_y of phi_k - phi_t decrease along the ladder and end below the bound",
        final_sup,
        c.derivative_max,
        monotone && final_sup < c.derivative_max,
    ));
    out.criteria.push(Criterion::at_most(
        "geodesic-equation",
        "finite-difference residual of the geodesic equation on the sample grid",
        max_pde_residual,
        c.pde_tol,
    ));
    for s in &levels {
        out.metrics.push(Metric::new(
            format!("sup_diff[k={}]", s.k),
            s.sup_diff,
            1e-9,
        ));
        out.metrics
            .push(Metric::new(format!("sup_dt[k={}]", s.k), s.sup_dt, 1e-6));
        out.metrics
            .push(Metric::new(format!("sup_dy[k={}]", s.k), s.sup_dy, 1e-6));
    }
    out.metrics
        .push(Metric::new("max_pde_residual", max_pde_residual, 1e-6));
    out.tables = vec![field, norming];
    Ok(out)
}
