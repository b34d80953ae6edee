//! Harmonic maps from the interval or the unit disk into invariant metrics,
//! built as Poisson integrals of the boundary Legendre duals, and their
//! Bergman approximants.
//!
//! Disk boundary data is a list of potentials at equispaced angles; boundary
//! integrals use the trapezoid rule over that list with no interpolation.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{reduced_log_norms, Lattice, TruncationPolicy};
use crate::legendre::{DualBlend, NewtonOptions};
use crate::norming::{log_norming_constants, QuadraturePlan, QuadratureSpec};
use crate::numeric::LogSumExp;
use crate::potential::KahlerPotential;

/// Minimum number of disk boundary samples.
pub const MIN_DISK_SAMPLES: usize = 16;
/// Grid points per dimension on which the blended dual is certified convex.
pub const BLEND_CERT_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Interval,
    Disk,
}

/// Interior point of a domain: `t in (0, 1)` or `|q| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainPoint {
    Interval(f64),
    Disk(Complex64),
}

/// Poisson kernel `-d_nu G(p, q)` of the supported domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonKernel {
    pub domain: Domain,
}

impl PoissonKernel {
    /// Disk density `(1 - |q|^2) / (2 pi |p - q|^2)` with `p = e^{i angle}`.
    pub fn disk_density(angle: f64, q: Complex64) -> f64 {
        let p = Complex64::from_polar(1.0, angle);
        (1.0 - q.norm_sqr()) / (2.0 * PI * (p - q).norm_sqr())
    }

    /// Trapezoid weights `P(p_i, q) * 2 pi / Q` at `Q` equispaced angles.
    pub fn disk_trapezoid_weights(samples: usize, q: Complex64) -> Vec<f64> {
        let h = 2.0 * PI / samples as f64;
        (0..samples)
            .map(|i| Self::disk_density(i as f64 * h, q) * h)
            .collect()
    }
}

/// Boundary potentials of a harmonic-map problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    domain: Domain,
    potentials: Vec<KahlerPotential>,
    opts: NewtonOptions,
}

impl BoundaryData {
    pub fn interval(
        phi0: KahlerPotential,
        phi1: KahlerPotential,
        opts: NewtonOptions,
    ) -> Result<Self> {
        Self::build(Domain::Interval, vec![phi0, phi1], opts)
    }

    /// Potentials at angles `2 pi i / Q`, `i = 0..Q`.
    pub fn disk(potentials: Vec<KahlerPotential>, opts: NewtonOptions) -> Result<Self> {
        if potentials.len() < MIN_DISK_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "disk boundary needs at least {MIN_DISK_SAMPLES} samples, got {}",
                potentials.len()
            )));
        }
        Self::build(Domain::Disk, potentials, opts)
    }

    fn build(
        domain: Domain,
        potentials: Vec<KahlerPotential>,
        opts: NewtonOptions,
    ) -> Result<Self> {
        let lat = potentials[0].lattice();
        if potentials.iter().any(|p| p.lattice() != lat) {
            return Err(Error::InvalidInput(
                "boundary potentials live on different lattices".into(),
            ));
        }
        Ok(Self {
            domain,
            potentials,
            opts,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn potentials(&self) -> &[KahlerPotential] {
        &self.potentials
    }

    pub fn lattice(&self) -> &Lattice {
        self.potentials[0].lattice()
    }

    /// Boundary angle of disk sample `i`.
    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.potentials.len() as f64
    }

    /// Quadrature weights of the Poisson integral at `q`.
    ///
    /// Disk weights are the trapezoid weights rescaled to unit mass; the
    /// rescaling is below rounding in the interior and keeps the integral a
    /// convex combination as `q` approaches the boundary.
    pub fn weights(&self, q: DomainPoint) -> Result<Vec<f64>> {
        match (self.domain, q) {
            (Domain::Interval, DomainPoint::Interval(t)) if (0.0..=1.0).contains(&t) => {
                Ok(vec![1.0 - t, t])
            }
            (Domain::Disk, DomainPoint::Disk(z)) if z.norm() < 1.0 => {
                let raw = PoissonKernel::disk_trapezoid_weights(self.potentials.len(), z);
                let mass: f64 = raw.iter().sum();
                Ok(raw.into_iter().map(|w| w / mass).collect())
            }
            _ => Err(Error::InvalidInput(format!(
                "{q:?} is not a point of the {:?} domain",
                self.domain
            ))),
        }
    }

    /// The blended dual `u_q = sum_p w_p(q) u_p`.
    pub fn blend(&self, q: DomainPoint) -> Result<DualBlend<'_>> {
        let w = self.weights(q)?;
        DualBlend::new(
            w.into_iter().zip(self.potentials.iter()).collect(),
            self.opts,
        )
    }
}

/// `u(q, mu)`, the Poisson integral of the boundary duals.
pub fn harmonic_dual(bd: &BoundaryData, q: DomainPoint, mu: &[f64]) -> Result<f64> {
    Ok(bd.blend(q)?.dual(mu)?.u)
}

/// `phi(q, y)`, the inverse Legendre transform of `u(q, .)`, after checking
/// the blend is convex on a grid of the moment cell.
pub fn harmonic_potential(bd: &BoundaryData, q: DomainPoint, y: &[f64]) -> Result<f64> {
    let blend = bd.blend(q)?;
    blend.certify_convex(BLEND_CERT_POINTS)?;
    Ok(blend.inverse(y)?.phi)
}

/// `K_inf(q, mu) = exp(-1/2 int P(p,q) ln(det Hess u_q / det Hess u_p))`.
pub fn kinf_ratio(bd: &BoundaryData, q: DomainPoint, mu: &[f64]) -> Result<f64> {
    Ok(bd.blend(q)?.ln_det_ratio(mu)?.exp())
}

/// Bergman approximants of a harmonic map at one level.
pub struct HarmonicBergman<'a> {
    bd: &'a BoundaryData,
    k: u32,
    q: QuadratureSpec,
    policy: TruncationPolicy,
    /// `ln rho_k(j)` for each boundary sample.
    boundary_log_rho: Vec<Vec<f64>>,
}

/// Values of the harmonic Bergman approximant at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicValue {
    pub phi_k: f64,
    pub phi: f64,
    pub diff: f64,
}

/// Precomputed `K_k(q, .)` and `rho_k(q, .)` at one interior point.
pub struct HarmonicSlice<'b> {
    hb: &'b HarmonicBergman<'b>,
    blend: DualBlend<'b>,
    /// `ln K_k(q, j) - ln(rho_k(q, j) / V)`.
    log_weight: Vec<f64>,
    log_k: Vec<f64>,
}

impl<'a> HarmonicBergman<'a> {
    pub fn new(
        bd: &'a BoundaryData,
        k: u32,
        q: QuadratureSpec,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        let boundary_log_rho = bd
            .potentials
            .par_iter()
            .map(|pot| log_norming_constants(pot, k, &q))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            bd,
            k,
            q,
            policy,
            boundary_log_rho,
        })
    }

    pub fn with_plan(bd: &'a BoundaryData, k: u32, plan: &QuadraturePlan) -> Result<Self> {
        Self::new(bd, k, plan.spec(k), TruncationPolicy::default())
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn boundary(&self) -> &BoundaryData {
        self.bd
    }

    pub fn slice(&self, q: DomainPoint) -> Result<HarmonicSlice<'_>> {
        let blend = self.bd.blend(q)?;
        let weights = self.bd.weights(q)?;
        let lq = log_norming_constants(&blend, self.k, &self.q)?;
        let ln_v = self.bd.lattice().volume().ln();
        let n = lq.len();
        let mut log_k = vec![0.0; n];
        for (w, lr) in weights.iter().zip(&self.boundary_log_rho) {
            if *w == 0.0 {
                continue;
            }
            for j in 0..n {
                log_k[j] += w * (lq[j] - lr[j]);
            }
        }
        let log_weight = (0..n).map(|j| log_k[j] - (lq[j] - ln_v)).collect();
        Ok(HarmonicSlice {
            hb: self,
            blend,
            log_weight,
            log_k,
        })
    }

    pub fn bergman_harmonic(&self, q: DomainPoint, z: &[Complex64]) -> Result<f64> {
        Ok(self.slice(q)?.eval(z)?.phi_k)
    }
}

impl HarmonicSlice<'_> {
    /// `ln K_k(q, j)` in lexicographic order.
    pub fn log_kk(&self) -> &[f64] {
        &self.log_k
    }

    pub fn blend(&self) -> &DualBlend<'_> {
        &self.blend
    }

    pub fn eval_at(&self, x: &[f64], y: &[f64]) -> Result<HarmonicValue> {
        let hb = self.hb;
        let lat = hb.bd.lattice();
        let k = hb.k as f64;
        let phi = self.blend.inverse(y)?.phi;
        let ln_theta = reduced_log_norms(lat, hb.k, x, y, &hb.policy)?;
        let mut acc = LogSumExp::new();
        for (lt, w) in ln_theta.iter().zip(&self.log_weight) {
            acc.add(lt + w);
        }
        let psi_term = phi - 2.0 * PI * lat.quad_form(y);
        let diff = (acc.value() - k * psi_term) / k;
        Ok(HarmonicValue {
            phi_k: phi + diff,
            phi,
            diff,
        })
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<HarmonicValue> {
        let (x, y) = self.hb.bd.lattice().lattice_coords(z)?;
        self.eval_at(&x, &y)
    }
}

/// `phi_k(q, z)` for boundary data `bd`.
pub fn bergman_harmonic(bd: &BoundaryData, k: u32, q: DomainPoint, z: &[Complex64]) -> Result<f64> {
    HarmonicBergman::with_plan(bd, k, &QuadraturePlan::default())?.bergman_harmonic(q, z)
}

/// Disk boundary data `psi_theta = s(theta) psi_1` with the smoothed step
/// `s(theta) = (1 - tanh(kappa sin theta)) / 2`: close to flat on `(0, pi)` and
/// to `psi_1` on `(pi, 2 pi)`.
pub fn smoothed_half_disk(
    psi1: &KahlerPotential,
    samples: usize,
    kappa: f64,
    opts: NewtonOptions,
) -> Result<BoundaryData> {
    let pots = (0..samples)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / samples as f64;
            let s = 0.5 * (1.0 - (kappa * theta.sin()).tanh());
            KahlerPotential::new(psi1.lattice().clone(), psi1.psi().scaled(s))
        })
        .collect::<Result<Vec<_>>>()?;
    BoundaryData::disk(pots, opts)
}
