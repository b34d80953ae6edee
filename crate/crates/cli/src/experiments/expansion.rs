//! Ladder fits of the error field in powers of `1/k` at fixed points.

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use thetageo::bergman::{BergmanGeodesic, ErrorFieldSlice};
use thetageo::fit::{default_order, fit_inverse_powers, power_law};

use super::{check_len, Context, Outcome};
use crate::report::{columns, floats, header, names, Cell, Criterion, Metric, Table};

#[derive(Debug, Clone, Serialize)]
pub struct PointFit {
    pub t: f64,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    /// `phi_k - phi_t - (m/k) ln k` along the ladder.
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub condition: f64,
    /// `ln R_inf(mu_t(y), t)`.
    pub target: f64,
    pub first_order_gap: f64,
    pub residual_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Details {
    ladder: Vec<u32>,
    order: usize,
    points: Vec<PointFit>,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.section(&ctx.cfg.expansion_fit, "expansion-fit")?;
    let m = ctx.lattice.dim();
    let seg = ctx.segment(&c.psi0, &c.psi1)?;
    let mut times: Vec<f64> = Vec::new();
    let mut points = Vec::new();
    for p in &c.points {
        check_len("y", &p.y, m)?;
        if !times.contains(&p.t) {
            times.push(p.t);
        }
        points.push((p.t, ctx.x_or_zero(&p.x)?, p.y.clone()));
    }

    let geodesics = c
        .ladder
        .par_iter()
        .map(|&k| {
            BergmanGeodesic::new(&seg, k, ctx.spec(k), ctx.policy)
                .with_context(|| format!("k = {k}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let slices: Vec<Vec<ErrorFieldSlice>> = geodesics
        .par_iter()
        .map(|bg| {
            times
                .iter()
                .map(|&t| {
                    bg.slice(t)
                        .with_context(|| format!("k = {}, t = {t}", bg.level()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let order = default_order(c.ladder.len());
    let fits = points
        .par_iter()
        .map(|(t, x, y)| -> Result<PointFit> {
            let ti = times.iter().position(|s| s == t).unwrap();
            let values = c
                .ladder
                .iter()
                .zip(&slices)
                .map(|(&k, row)| {
                    let v = row[ti]
                        .eval_at(x, y)
                        .with_context(|| format!("k = {k}, t = {t}, x = {x:?}, y = {y:?}"))?;
                    Ok(v.diff - m as f64 * (k as f64).ln() / k as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let fit = fit_inverse_powers(&c.ladder, &values, order)
                .with_context(|| format!("fit at t = {t}, y = {y:?}"))?;
            let blend = seg.blend(*t)?;
            let mu: Vec<f64> = blend.inverse(y)?.mu.iter().copied().collect();
            let target = blend.ln_det_ratio(&mu)?;
            let slope = power_law(&c.ladder, &fit.beyond_first_order())
                .map(|p| p.slope)
                .unwrap_or(f64::NAN);
            Ok(PointFit {
                t: *t,
                y: y.clone(),
                x: x.clone(),
                mu,
                first_order_gap: (fit.coefficient(1) - target).abs(),
                coefficients: fit.coefficients.clone(),
                condition: fit.condition,
                values,
                target,
                residual_slope: slope,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Table::new(
        "values",
        header(&[
            &names(&["k", "t"]),
            &columns("y", m),
            &columns("x", m),
            &names(&["value"]),
        ]),
    );
    for p in &fits {
        for (&k, v) in c.ladder.iter().zip(&p.values) {
            let mut cells = vec![Cell::from(k), Cell::from(p.t)];
            cells.extend(floats(&p.y));
            cells.extend(floats(&p.x));
            cells.push(Cell::from(*v));
            values.push(cells);
        }
    }
    let coeff_names: Vec<String> = (0..=order).map(|q| format!("c{q}")).collect();
    let mut coeffs = Table::new(
        "fits",
        header(&[
            &names(&["t"]),
            &columns("y", m),
            &columns("x", m),
            &coeff_names,
            &names(&["target", "gap", "residual_slope"]),
        ]),
    );
    for p in &fits {
        let mut cells = vec![Cell::from(p.t)];
        cells.extend(floats(&p.y));
        cells.extend(floats(&p.x));
        cells.extend(floats(&p.coefficients));
        cells.extend(floats(&[p.target, p.first_order_gap, p.residual_slope]));
        coeffs.push(cells);
    }

    let worst_gap = fits.iter().map(|p| p.first_order_gap).fold(0.0, f64::max);
    let worst_c0 = fits
        .iter()
        .map(|p| p.coefficients[0].abs())
        .fold(0.0, f64::max);
    let worst_slope = fits
        .iter()
        .map(|p| (p.residual_slope - c.residual_slope).abs())
        .fold(
            0.0,
            |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) },
        );

    let mut out = Outcome::new(Details {
        ladder: c.ladder.clone(),
        order,
        points: fits.clone(),
    })?;
    out.criteria.push(Criterion::at_most(
        "expansion-first-order",
        "fitted 1/k coefficient against ln R_inf(mu_t(y), t)",
        worst_gap,
        c.coeff_tol,
    ));
    out.criteria.push(Criterion::at_most(
        "expansion-constant",
        "fitted constant term after removing (m/k) ln k",
        worst_c0,
        c.constant_tol,
    ));
    out.criteria.push(Criterion::at_most(
        "expansion-residual-slope",
        "distance of the log-log slope of the beyond-first-order residual from the target",
        worst_slope,
        c.residual_slope_tol,
    ));
    for (i, p) in fits.iter().enumerate() {
        out.metrics
            .push(Metric::new(format!("c1[{i}]"), p.coefficients[1], 1e-6));
        out.metrics
            .push(Metric::new(format!("target[{i}]"), p.target, 1e-9));
        out.metrics
            .push(Metric::new(format!("c0[{i}]"), p.coefficients[0], 1e-8));
    }
    out.tables = vec![values, coeffs];
    Ok(out)
}
