//! Equispaced Riemann sums of trigonometric polynomials.

use anyhow::{Context as _, Result};
use serde::Serialize;
use thetageo::bergman::{riemann_sum, riemann_sum_aliased};

use super::{Context, Outcome};
use crate::report::{names, Cell, Criterion, Metric, Table};

#[derive(Debug, Clone, Serialize)]
struct FunctionSummary {
    name: String,
    degree: i64,
    mean: f64,
    /// Worst `|sum - f_hat(0)|` over levels `k > degree`.
    max_exact_error: f64,
    /// Worst `|sum - sum_n f_hat(kn)|` over all levels.
    max_alias_error: f64,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let c = ctx.section(&ctx.cfg.riemann_sum, "riemann-sum")?;
    let mut table = Table::new(
        "sums",
        names(&[
            "function",
            "k",
            "degree",
            "sum",
            "mean",
            "aliased",
            "exact_error",
            "alias_error",
        ]),
    );
    let mut summaries = Vec::new();
    for (fi, spec) in c.functions.iter().enumerate() {
        let f = spec.polynomial(c.m)?;
        let degree = f.degree();
        let mean = f.coefficients().get(&vec![0; c.m]).map_or(0.0, |v| v.re);
        let mut s = FunctionSummary {
            name: spec.name.clone(),
            degree,
            mean,
            max_exact_error: 0.0,
            max_alias_error: 0.0,
        };
        for k in c.k_min..=c.k_max {
            let sum = riemann_sum(&f, k).with_context(|| format!("{:?} at k = {k}", spec.name))?;
            let aliased = riemann_sum_aliased(&f, k);
            let exact_error = (sum - mean).abs();
            let alias_error = (sum - aliased).abs();
            if (k as i64) > degree {
                s.max_exact_error = s.max_exact_error.max(exact_error);
            }
            s.max_alias_error = s.max_alias_error.max(alias_error);
            table.push(vec![
                Cell::from(fi),
                Cell::from(k),
                Cell::Int(degree),
                Cell::from(sum),
                Cell::from(mean),
                Cell::from(aliased),
                Cell::from(exact_error),
                Cell::from(alias_error),
            ]);
        }
        summaries.push(s);
    }
    let exact = summaries
        .iter()
        .map(|s| s.max_exact_error)
        .fold(0.0, f64::max);
    let alias = summaries
        .iter()
        .map(|s| s.max_alias_error)
        .fold(0.0, f64::max);
    let mut out = Outcome::new(&summaries)?;
    out.criteria.push(Criterion::at_most(
        "riemann-exact",
        "|sum - f_hat(0)| for levels above the degree",
        exact,
        c.tol,
    ));
    out.criteria.push(Criterion::at_most(
        "riemann-aliasing",
        "|sum - sum_n f_hat(kn)| for every level",
        alias,
        c.tol,
    ));
    out.metrics
        .push(Metric::new("max_exact_error", exact, 1e-13));
    out.metrics
        .push(Metric::new("max_alias_error", alias, 1e-13));
    out.tables = vec![table];
    Ok(out)
}
