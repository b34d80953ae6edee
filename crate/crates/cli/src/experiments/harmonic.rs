//! Harmonic Bergman approximants: interval reduction to the geodesic and
//! ladder fits on the disk.

use anyhow::{ensure, Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use thetageo::bergman::BergmanGeodesic;
use thetageo::fit::{default_order, fit_inverse_powers};
use thetageo::harmonic::{smoothed_half_disk, BoundaryData, DomainPoint, HarmonicBergman};
use thetageo::num_complex::Complex64;

use super::{check_len, kronecker, Context, Outcome};
use crate::config::{DiskCheck, IntervalCheck};
use crate::report::{columns, floats, header, names, Cell, Criterion, Metric, Table};

#[derive(Debug, Clone, Serialize)]
struct IntervalSummary {
    k: u32,
    points: usize,
    max_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
struct DiskFit {
    q: [f64; 2],
    y: Vec<f64>,
    mu: Vec<f64>,
    values: Vec<f64>,
    coefficients: Vec<f64>,
    /// `ln K_inf(q, mu)`.
    target: f64,
    gap: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Details {
    interval: Option<IntervalSummary>,
    disk: Vec<DiskFit>,
}

fn interval(ctx: &Context, c: &IntervalCheck, out: &mut Outcome) -> Result<IntervalSummary> {
    let m = ctx.lattice.dim();
    let phi0 = ctx.cfg.potential_on(&c.psi0, &ctx.lattice)?;
    let phi1 = ctx.cfg.potential_on(&c.psi1, &ctx.lattice)?;
    let bd = BoundaryData::interval(phi0, phi1, ctx.newton)?;
    let seg = ctx.segment(&c.psi0, &c.psi1)?;
    let k = c.k;
    let hb = HarmonicBergman::new(&bd, k, ctx.spec(k), ctx.policy)
        .with_context(|| format!("k = {k}"))?;
    let bg = BergmanGeodesic::new(&seg, k, ctx.spec(k), ctx.policy)
        .with_context(|| format!("k = {k}"))?;
    let mut table = Table::new(
        "interval",
        header(&[
            &names(&["k", "t"]),
            &columns("x", m),
            &columns("y", m),
            &names(&["harmonic", "geodesic", "difference"]),
        ]),
    );
    let rows = (0..c.points)
        .into_par_iter()
        .map(|i| {
            let p = kronecker(i, 2 * m + 1);
            let (t, x, y) = (p[0], p[1..=m].to_vec(), p[m + 1..].to_vec());
            let z = ctx.lattice.point(&x, &y);
            let msg = || format!("k = {k}, t = {t}, z = {z:?}");
            let a = hb
                .bergman_harmonic(DomainPoint::Interval(t), &z)
                .with_context(msg)?;
            let b = bg.bergman_potential(t, &z).with_context(msg)?;
            Ok((t, x, y, a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for (t, x, y, a, b) in rows {
        worst = worst.max((a - b).abs());
        let mut cells = vec![Cell::from(k), Cell::from(t)];
        cells.extend(floats(&x));
        cells.extend(floats(&y));
        cells.extend(floats(&[a, b, a - b]));
        table.push(cells);
    }
    out.tables.push(table);
    out.criteria.push(Criterion::at_most(
        "harmonic-interval",
        "largest |interval bergman_harmonic - bergman_potential| over the sample points",
        worst,
        c.tol,
    ));
    out.metrics
        .push(Metric::new("interval_max_difference", worst, 1e-10));
    Ok(IntervalSummary {
        k,
        points: c.points,
        max_difference: worst,
    })
}

fn disk(ctx: &Context, c: &DiskCheck, out: &mut Outcome) -> Result<Vec<DiskFit>> {
    let m = ctx.lattice.dim();
    for y in &c.y {
        check_len("y", y, m)?;
    }
    let qs: Vec<Complex64> = c.q.iter().map(|q| Complex64::new(q[0], q[1])).collect();
    ensure!(
        qs.iter().all(|q| q.norm() < 1.0),
        "disk points must lie inside the unit disk"
    );
    let psi = ctx.cfg.potential_on(&c.psi, &ctx.lattice)?;
    let bd = smoothed_half_disk(&psi, c.samples, c.kappa, ctx.newton)?;
    let x = vec![0.0; m];

    // values[k][q][y]
    let values = c
        .ladder
        .par_iter()
        .map(|&k| -> Result<Vec<Vec<(f64, f64, f64)>>> {
            let hb = HarmonicBergman::new(&bd, k, ctx.spec(k), ctx.policy)
                .with_context(|| format!("k = {k}"))?;
            qs.iter()
                .map(|&q| {
                    let slice = hb
                        .slice(DomainPoint::Disk(q))
                        .with_context(|| format!("k = {k}, q = {q}"))?;
                    c.y.iter()
                        .map(|y| {
                            let v = slice
                                .eval_at(&x, y)
                                .with_context(|| format!("k = {k}, q = {q}, y = {y:?}"))?;
                            Ok((v.phi_k, v.phi, v.diff))
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(
        "disk",
        header(&[
            &names(&["k", "q_re", "q_im"]),
            &columns("y", m),
            &names(&["phi_k", "phi", "diff"]),
        ]),
    );
    for (&k, per_q) in c.ladder.iter().zip(&values) {
        for (qi, per_y) in per_q.iter().enumerate() {
            for (y, v) in c.y.iter().zip(per_y) {
                let mut cells = vec![
                    Cell::from(k),
                    Cell::from(c.q[qi][0]),
                    Cell::from(c.q[qi][1]),
                ];
                cells.extend(floats(y));
                cells.extend(floats(&[v.0, v.1, v.2]));
                table.push(cells);
            }
        }
    }
    out.tables.push(table);

    let order = default_order(c.ladder.len());
    let mut fits = Vec::new();
    for (qi, &q) in qs.iter().enumerate() {
        let blend = bd.blend(DomainPoint::Disk(q))?;
        for (yi, y) in c.y.iter().enumerate() {
            let reduced: Vec<f64> = c
                .ladder
                .iter()
                .zip(&values)
                .map(|(&k, v)| v[qi][yi].2 - m as f64 * (k as f64).ln() / k as f64)
                .collect();
            let fit = fit_inverse_powers(&c.ladder, &reduced, order)
                .with_context(|| format!("fit at q = {q}, y = {y:?}"))?;
            let mu: Vec<f64> = blend.inverse(y)?.mu.iter().copied().collect();
            let target = blend.ln_det_ratio(&mu)?;
            fits.push(DiskFit {
                q: c.q[qi],
                y: y.clone(),
                mu,
                gap: (fit.coefficient(1) - target).abs(),
                values: reduced,
                coefficients: fit.coefficients,
                target,
            });
        }
    }
    let worst = fits.iter().map(|f| f.gap).fold(0.0, f64::max);
    out.criteria.push(Criterion::at_most(
        "harmonic-disk",
        "fitted 1/k coefficient against ln K_inf(q, mu) on the disk",
        worst,
        c.coeff_tol,
    ));
    for (i, f) in fits.iter().enumerate() {
        out.metrics.push(Metric::new(
            format!("disk_c1[{i}]"),
            f.coefficients[1],
            1e-5,
        ));
        out.metrics
            .push(Metric::new(format!("disk_target[{i}]"), f.target, 1e-6));
    }
    Ok(fits)
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.section(&ctx.cfg.harmonic, "harmonic")?;
    ensure!(
        c.interval.is_some() || c.disk.is_some(),
        "[harmonic] needs an interval or a disk check"
    );
    let mut out = Outcome::new(())?;
    let interval = c
        .interval
        .as_ref()
        .map(|i| interval(ctx, i, &mut out))
        .transpose()?;
    let disk = c
        .disk
        .as_ref()
        .map(|d| disk(ctx, d, &mut out))
        .transpose()?
        .unwrap_or_default();
    out.details = serde_json::to_value(Details { interval, disk })?;
    Ok(out)
}
