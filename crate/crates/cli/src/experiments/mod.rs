//! One runner per experiment kind.

use anyhow::{Context as _, Result};
use serde::Serialize;
use thetageo::legendre::{GeodesicSegment, NewtonOptions};
use thetageo::norming::{QuadraturePlan, QuadratureSpec};
use thetageo::{Lattice, PotentialPath, TruncationPolicy};

use crate::config::ExperimentConfig;
use crate::report::{Criterion, Metric, Table};

pub mod bernstein;
pub mod density;
pub mod expansion;
pub mod geodesic;
pub mod gram;
pub mod harmonic;
pub mod regularity;
pub mod riemann;

/// Everything an experiment produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub criteria: Vec<Criterion>,
    pub metrics: Vec<Metric>,
    pub details: serde_json::Value,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn new(details: impl Serialize) -> Result<Self> {
        Ok(Self {
            criteria: Vec::new(),
            metrics: Vec::new(),
            details: serde_json::to_value(details)?,
            tables: Vec::new(),
        })
    }
}

/// Resolved numerical settings shared by all runners.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub lattice: Lattice,
    pub plan: QuadraturePlan,
    pub policy: TruncationPolicy,
    pub newton: NewtonOptions,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            lattice: cfg.lattice.build()?,
            plan: QuadraturePlan {
                scale: cfg.quadrature.scale,
            },
            policy: cfg.truncation.policy()?,
            newton: cfg.newton.options(),
        })
    }

    pub fn spec(&self, k: u32) -> QuadratureSpec {
        self.plan.spec(k)
    }

    pub fn segment(&self, psi0: &str, psi1: &str) -> Result<GeodesicSegment> {
        let phi0 = self.cfg.potential_on(psi0, &self.lattice)?;
        let phi1 = self.cfg.potential_on(psi1, &self.lattice)?;
        Ok(GeodesicSegment::new(
            PotentialPath::new(phi0, phi1)?,
            self.newton,
        )?)
    }

    pub fn section<T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section
            .as_ref()
            .with_context(|| format!("config has no [{name}] section"))
    }

    /// The shared `x` coordinate, zero when unset.
    pub fn x_or_zero(&self, x: &Option<Vec<f64>>) -> Result<Vec<f64>> {
        let m = self.lattice.dim();
        let x = x.clone().unwrap_or_else(|| vec![0.0; m]);
        check_len("x", &x, m)?;
        Ok(x)
    }
}

pub fn check_len(what: &str, v: &[f64], m: usize) -> Result<()> {
    anyhow::ensure!(v.len() == m, "{what} = {v:?} must have {m} components");
    Ok(())
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// The `i`-th point of a Kronecker sequence in `[0, 1)^d`.
pub fn kronecker(i: usize, d: usize) -> Vec<f64> {
    // Generalized golden ratio: the positive root of x^(d+1) = x + 1.
    let mut g = 2.0_f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d)
        .map(|a| (0.5 + (i + 1) as f64 / g.powi(a as i32)).fract())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_points_fill_the_cube() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| kronecker(i, 3)).collect();
        assert!(pts.iter().flatten().all(|&v| (0.0..1.0).contains(&v)));
        for a in 0..3 {
            let mean: f64 = pts.iter().map(|p| p[a]).sum::<f64>() / 20.0;
            assert!((mean - 0.5).abs() < 0.1);
        }
        assert_eq!(kronecker(4, 2), kronecker(4, 2));
    }
}
