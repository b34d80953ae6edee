//! Bergman-side quantities built from the level-k theta basis: densities,
//! Bernstein and Riemann sums, and Bergman geodesics with their error fields.
//!
//! Hilbert norms are taken against the unit-mass volume form, i.e. the
//! norming constants are divided by the cell volume `(4 pi)^m det X`, so that
//! the density satisfies `k^{-m} Pi_k -> 1`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fit::{default_order, fit_inverse_powers, AsymptoticFit};
use crate::lattice::{
    basis_indices, check_dim, reduced_log_norms, Lattice, ThetaIndex, TruncationPolicy,
};
use crate::legendre::{DualBlend, GeodesicSegment};
use crate::norming::{log_norming_constants, QuadraturePlan, QuadratureSpec};
use crate::numeric::{log_sum_exp, LogSumExp};
use crate::potential::{ConvexPotential, KahlerPotential, TrigPolynomial};

/// Absolute agreement required between the two error-field routes.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

/// Eigenvalue `f(-j/k) = sum_n f_hat(n) e^{-2 pi i n.j/k}` of the quantized
/// multiplication operator on `theta_j`.
pub fn weyl_apply(f: &TrigPolynomial, idx: &ThetaIndex) -> Result<Complex64> {
    check_dim(f.dim(), idx.dim())?;
    let k = idx.level() as f64;
    let j = idx.components();
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, c) in f.coefficients() {
        let dot: f64 = n.iter().zip(j).map(|(a, b)| *a as f64 * *b as f64).sum();
        acc += c * Complex64::from_polar(1.0, -2.0 * PI * dot / k);
    }
    Ok(acc)
}

/// `(1/k^m) sum_j f(j/k)` over `j in (Z/kZ)^m`.
pub fn riemann_sum(f: &TrigPolynomial, k: u32) -> Result<f64> {
    let m = f.dim();
    let kf = k as f64;
    let js = basis_indices(m, k)?;
    let total: f64 = js
        .iter()
        .map(|idx| {
            let x: Vec<f64> = idx.components().iter().map(|&j| j as f64 / kf).collect();
            f.eval(&x)
        })
        .sum();
    Ok(total / js.len() as f64)
}

/// Aliasing formula `sum_n f_hat(k n)` for the same sum.
pub fn riemann_sum_aliased(f: &TrigPolynomial, k: u32) -> f64 {
    let kk = k as i64;
    f.coefficients()
        .iter()
        .filter(|(n, _)| n.iter().all(|v| v % kk == 0))
        .map(|(_, c)| c.re)
        .sum()
}

/// Normalized Bergman data of one potential at one level.
pub struct BergmanKernel<'a, P: ConvexPotential + ?Sized> {
    pot: &'a P,
    k: u32,
    /// `ln(rho_j / V)`.
    log_norm: Vec<f64>,
    policy: TruncationPolicy,
}

impl<'a, P: ConvexPotential + ?Sized> BergmanKernel<'a, P> {
    pub fn new(pot: &'a P, k: u32, q: &QuadratureSpec, policy: TruncationPolicy) -> Result<Self> {
        let ln_v = pot.lattice().volume().ln();
        let log_norm = log_norming_constants(pot, k, q)?
            .into_iter()
            .map(|l| l - ln_v)
            .collect();
        Ok(Self {
            pot,
            k,
            log_norm,
            policy,
        })
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn lattice(&self) -> &Lattice {
        self.pot.lattice()
    }

    /// `ln(|theta_j|^2_{h^k} / ||theta_j||^2)` for every `j`, at lattice
    /// coordinates.
    pub fn log_terms_at(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let lat = self.pot.lattice();
        let ln_theta = reduced_log_norms(lat, self.k, x, y, &self.policy)?;
        let psi = self.pot.psi_at(y)?;
        let shift = -4.0 * PI * self.k as f64 * psi;
        Ok(ln_theta
            .iter()
            .zip(&self.log_norm)
            .map(|(t, n)| t + shift - n)
            .collect())
    }

    pub fn log_terms(&self, z: &[Complex64]) -> Result<Vec<f64>> {
        let (x, y) = self.pot.lattice().lattice_coords(z)?;
        self.log_terms_at(&x, &y)
    }

    /// `Pi_k(z, z) = sum_j |theta_j(z)|^2_{h^k} / ||theta_j||^2`.
    pub fn density(&self, z: &[Complex64]) -> Result<f64> {
        Ok(log_sum_exp(&self.log_terms(z)?).exp())
    }

    /// `(1/k^m) sum_j f(-j/k) |theta_j|^2_{h^k} / ||theta_j||^2`.
    pub fn bernstein(&self, f: &TrigPolynomial, z: &[Complex64]) -> Result<f64> {
        let terms = self.log_terms(z)?;
        let js = basis_indices(self.lattice().dim(), self.k)?;
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        for (idx, t) in js.iter().zip(&terms) {
            acc += weyl_apply(f, idx)?.re * (t - max).exp();
        }
        Ok(acc * max.exp() / js.len() as f64)
    }
}

/// `Pi_k(z, z)` for a certified potential.
pub fn bergman_density(pot: &KahlerPotential, k: u32, z: &[Complex64]) -> Result<f64> {
    BergmanKernel::new(
        pot,
        k,
        &QuadratureSpec::for_level(k),
        TruncationPolicy::default(),
    )?
    .density(z)
}

/// Generalized Bernstein sum of `f` at `z`.
pub fn bernstein_sum(
    pot: &KahlerPotential,
    k: u32,
    f: &TrigPolynomial,
    z: &[Complex64],
) -> Result<f64> {
    BergmanKernel::new(
        pot,
        k,
        &QuadratureSpec::for_level(k),
        TruncationPolicy::default(),
    )?
    .bernstein(f, z)
}

/// Reduced moment `nu = (4 pi X)^{-1} grad phi(y)`, the point where Bernstein
/// sums concentrate; `y + grad psi(y)` on the model lattice.
pub fn bernstein_point(pot: &KahlerPotential, y: &[f64]) -> Vec<f64> {
    let mu = pot.moment_map(y);
    let nu = pot.lattice().im_inverse() * mu / (4.0 * PI);
    nu.iter().copied().collect()
}

/// The Bergman geodesic `phi_k(t, .)` between the endpoints of a segment.
pub struct BergmanGeodesic<'a> {
    seg: &'a GeodesicSegment,
    k: u32,
    q: QuadratureSpec,
    policy: TruncationPolicy,
    log_rho0: Vec<f64>,
    log_rho1: Vec<f64>,
}

/// One side of the error-field cross-check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorFieldValue {
    pub phi_k: f64,
    pub phi_t: f64,
    /// `phi_k - phi_t` from the Bergman potential.
    pub diff: f64,
    /// The same quantity through the `R_k` identity.
    pub identity: f64,
}

/// Precomputed error field at one time `t`.
pub struct ErrorFieldSlice<'b> {
    bg: &'b BergmanGeodesic<'b>,
    t: f64,
    blend: DualBlend<'b>,
    /// `ln R_k(j, t) - ln(rho_t / V)`.
    log_weight_t: Vec<f64>,
}

impl<'a> BergmanGeodesic<'a> {
    pub fn new(
        seg: &'a GeodesicSegment,
        k: u32,
        q: QuadratureSpec,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        let e0 = seg.blend(0.0)?;
        let e1 = seg.blend(1.0)?;
        let (l0, l1) = rayon::join(
            || log_norming_constants(&e0, k, &q),
            || log_norming_constants(&e1, k, &q),
        );
        Ok(Self {
            seg,
            k,
            q,
            policy,
            log_rho0: l0?,
            log_rho1: l1?,
        })
    }

    pub fn with_plan(seg: &'a GeodesicSegment, k: u32, plan: &QuadraturePlan) -> Result<Self> {
        Self::new(seg, k, plan.spec(k), TruncationPolicy::default())
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn segment(&self) -> &GeodesicSegment {
        self.seg
    }

    pub fn log_rho(&self, endpoint: usize) -> &[f64] {
        if endpoint == 0 {
            &self.log_rho0
        } else {
            &self.log_rho1
        }
    }

    fn lattice(&self) -> &Lattice {
        self.seg.lattice()
    }

    fn ln_theta(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        reduced_log_norms(self.lattice(), self.k, x, y, &self.policy)
    }

    /// `(1/k) ln sum_j (rho_0/rho_1)^t |theta_j|^2 / (rho_0/V)` at lattice
    /// coordinates, minus nothing: the absolute potential
    /// `2 pi yXy + (1/k) ln sum_j ...` of the pulled-back Fubini–Study metric.
    pub fn potential_at(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("t = {t} outside [0, 1]")));
        }
        let ln_v = self.lattice().volume().ln();
        let ln_theta = self.ln_theta(x, y)?;
        let mut acc = LogSumExp::new();
        for (j, lt) in ln_theta.iter().enumerate() {
            acc.add(lt + ln_v - (1.0 - t) * self.log_rho0[j] - t * self.log_rho1[j]);
        }
        Ok(2.0 * PI * self.lattice().quad_form(y) + acc.value() / self.k as f64)
    }

    pub fn bergman_potential(&self, t: f64, z: &[Complex64]) -> Result<f64> {
        let (x, y) = self.lattice().lattice_coords(z)?;
        self.potential_at(t, &x, &y)
    }

    /// Error field at time `t`, with `rho_t` computed once for many points.
    pub fn slice(&self, t: f64) -> Result<ErrorFieldSlice<'_>> {
        let blend = self.seg.blend(t)?;
        let lt = log_norming_constants(&blend, self.k, &self.q)?;
        let ln_v = self.lattice().volume().ln();
        let log_weight_t = (0..lt.len())
            .map(|j| {
                let log_rk = lt[j] - (1.0 - t) * self.log_rho0[j] - t * self.log_rho1[j];
                log_rk - (lt[j] - ln_v)
            })
            .collect();
        Ok(ErrorFieldSlice {
            bg: self,
            t,
            blend,
            log_weight_t,
        })
    }

    /// `phi_k(t, z) - phi_t(z)`, cross-checked.
    pub fn error_field(&self, t: f64, z: &[Complex64]) -> Result<ErrorFieldValue> {
        self.slice(t)?.eval(z)
    }
}

impl ErrorFieldSlice<'_> {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn eval_at(&self, x: &[f64], y: &[f64]) -> Result<ErrorFieldValue> {
        let bg = self.bg;
        let lat = bg.lattice();
        let k = bg.k as f64;
        let phi_k = bg.potential_at(self.t, x, y)?;
        let phi_t = self.blend.inverse(y)?.phi;
        let diff = phi_k - phi_t;
        let ln_theta = bg.ln_theta(x, y)?;
        let mut acc = LogSumExp::new();
        for (lt, w) in ln_theta.iter().zip(&self.log_weight_t) {
            acc.add(lt + w);
        }
        let psi_term = phi_t - 2.0 * PI * lat.quad_form(y);
        let identity = (acc.value() - k * psi_term) / k;
        if !((diff - identity).abs() <= CROSS_CHECK_TOL) {
            return Err(Error::CrossCheckFailure {
                direct: diff,
                identity,
            });
        }
        Ok(ErrorFieldValue {
            phi_k,
            phi_t,
            diff,
            identity,
        })
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<ErrorFieldValue> {
        let (x, y) = self.bg.lattice().lattice_coords(z)?;
        self.eval_at(&x, &y)
    }
}

/// Expansion of the error field at one point across a ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub t: f64,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// `phi_k - phi_t - (m/k) ln k`.
    pub values: Vec<f64>,
    pub fit: AsymptoticFit,
    /// `ln R_inf(mu_t(y), t)`, the predicted `1/k` coefficient.
    pub target: f64,
    pub mu: Vec<f64>,
}

impl ExpansionReport {
    pub fn first_order_gap(&self) -> f64 {
        (self.fit.coefficient(1) - self.target).abs()
    }
}

/// Fits `phi_k - phi_t - (m/k) ln k` at `(t, x, y)` in powers of `1/k`.
pub fn expansion_fit(
    seg: &GeodesicSegment,
    k_ladder: &[u32],
    t: f64,
    x: &[f64],
    y: &[f64],
    plan: &QuadraturePlan,
) -> Result<ExpansionReport> {
    let geodesics = k_ladder
        .par_iter()
        .map(|&k| BergmanGeodesic::with_plan(seg, k, plan))
        .collect::<Result<Vec<_>>>()?;
    expansion_fit_ladder(&geodesics, t, x, y)
}

/// As [`expansion_fit`] with the ladder of Bergman geodesics prebuilt.
pub fn expansion_fit_ladder(
    ladder: &[BergmanGeodesic<'_>],
    t: f64,
    x: &[f64],
    y: &[f64],
) -> Result<ExpansionReport> {
    let first = ladder
        .first()
        .ok_or_else(|| Error::InvalidInput("empty ladder".into()))?;
    let seg = first.segment();
    let m = seg.lattice().dim() as f64;
    let ks: Vec<u32> = ladder.iter().map(|b| b.level()).collect();
    let values = ladder
        .par_iter()
        .map(|bg| {
            let k = bg.level() as f64;
            let v = bg.slice(t)?.eval_at(x, y)?;
            Ok(v.diff - m * k.ln() / k)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_inverse_powers(&ks, &values, default_order(ks.len()))?;
    let blend = seg.blend(t)?;
    let mu = blend.inverse(y)?.mu;
    let target = blend.ln_det_ratio(mu.as_slice())?;
    Ok(ExpansionReport {
        t,
        y: y.to_vec(),
        x: x.to_vec(),
        values,
        fit,
        target,
        mu: mu.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::theta_eval;
    use crate::legendre::NewtonOptions;
    use crate::norming::log_norming_constants;
    use crate::potential::{FourierTerm, PotentialPath};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cosine(a: f64) -> KahlerPotential {
        KahlerPotential::new(
            Lattice::square(1),
            TrigPolynomial::cosine(vec![1], a).unwrap(),
        )
        .unwrap()
    }

    fn standard() -> GeodesicSegment {
        let path =
            PotentialPath::new(KahlerPotential::flat(Lattice::square(1)), cosine(0.01)).unwrap();
        GeodesicSegment::new(path, NewtonOptions::default()).unwrap()
    }

    fn flat_segment() -> GeodesicSegment {
        let lat = Lattice::square(1);
        let path = PotentialPath::new(
            KahlerPotential::flat(lat.clone()),
            KahlerPotential::flat(lat),
        )
        .unwrap();
        GeodesicSegment::new(path, NewtonOptions::default()).unwrap()
    }

    #[test]
    fn weyl_eigenvalues() {
        let one = TrigPolynomial::from_terms(1, &[FourierTerm::new(vec![0], 1.0, 0.0)]).unwrap();
        let cos = TrigPolynomial::cosine(vec![1], 1.0).unwrap();
        for j in 0..4 {
            let idx = ThetaIndex::new(4, vec![j]).unwrap();
            assert!((weyl_apply(&one, &idx).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        }
        let idx = ThetaIndex::new(4, vec![1]).unwrap();
        assert!(weyl_apply(&cos, &idx).unwrap().norm() < 1e-15);
        let f = TrigPolynomial::from_terms(
            1,
            &[
                FourierTerm::new(vec![1], 0.7, 0.3),
                FourierTerm::new(vec![3], 0.2, -1.0),
            ],
        )
        .unwrap();
        for j in 0..7 {
            let idx = ThetaIndex::new(7, vec![j]).unwrap();
            let v = weyl_apply(&f, &idx).unwrap();
            assert!((v.re - f.eval(&[-(j as f64) / 7.0])).abs() < 1e-14);
            assert!(v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn riemann_sums() {
        let cos = TrigPolynomial::cosine(vec![1], 1.0).unwrap();
        assert!(riemann_sum(&cos, 5).unwrap().abs() < 1e-15);
        let constant =
            TrigPolynomial::from_terms(1, &[FourierTerm::new(vec![0], 2.5, 0.0)]).unwrap();
        for k in 1..6 {
            assert!((riemann_sum(&constant, k).unwrap() - 2.5).abs() < 1e-15);
        }
        let f = TrigPolynomial::from_terms(
            1,
            &[
                FourierTerm::new(vec![0], 0.1, 0.0),
                FourierTerm::new(vec![3], 0.4, 0.2),
            ],
        )
        .unwrap();
        assert!((riemann_sum(&f, 8).unwrap() - 0.1).abs() < 1e-15);
        assert!((riemann_sum(&f, 3).unwrap() - riemann_sum_aliased(&f, 3)).abs() < 1e-15);
        assert!((riemann_sum_aliased(&f, 3) - (0.1 + 0.4 * 0.2f64.cos())).abs() < 1e-15);
    }

    #[test]
    fn flat_density_is_nearly_constant() {
        let flat = KahlerPotential::flat(Lattice::square(1));
        let k = 16;
        for z in [c(0.0, 0.0), c(0.3, 0.41), c(-0.7, 0.5)] {
            let d = bergman_density(&flat, k, &[z]).unwrap();
            assert!((d / k as f64 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn density_integrates_to_dimension() {
        let pot = cosine(0.01);
        let k = 8;
        let kernel = BergmanKernel::new(
            &pot,
            k,
            &QuadratureSpec::for_level(k),
            TruncationPolicy::default(),
        )
        .unwrap();
        let n = 48;
        let mut total = 0.0;
        for i in 0..n {
            for l in 0..n {
                let x = i as f64 / n as f64;
                let y = l as f64 / n as f64;
                let d = log_sum_exp(&kernel.log_terms_at(&[x], &[y]).unwrap()).exp();
                total += d * pot.volume_density(&[y]).unwrap() / (4.0 * PI);
            }
        }
        total /= (n * n) as f64;
        assert!((total - k as f64).abs() < 1e-9, "{total}");
    }

    #[test]
    fn bernstein_of_one_is_density() {
        let pot = cosine(0.01);
        let k = 16;
        let kernel = BergmanKernel::new(
            &pot,
            k,
            &QuadratureSpec::for_level(k),
            TruncationPolicy::default(),
        )
        .unwrap();
        let one = TrigPolynomial::from_terms(1, &[FourierTerm::new(vec![0], 1.0, 0.0)]).unwrap();
        let z = [c(0.2, 0.37)];
        let b = kernel.bernstein(&one, &z).unwrap();
        let d = kernel.density(&z).unwrap() / k as f64;
        assert!((b - d).abs() < 1e-12);
        let cos = TrigPolynomial::cosine(vec![1], 1.0).unwrap();
        let shifted = [c(1.2, 0.37)];
        assert!(
            (kernel.bernstein(&cos, &z).unwrap() - kernel.bernstein(&cos, &shifted).unwrap()).abs()
                < 1e-12
        );
    }

    #[test]
    fn bernstein_point_model() {
        let pot = cosine(0.01);
        let nu = bernstein_point(&pot, &[0.3]);
        let expected = 0.3 + pot.psi().grad(&[0.3])[0];
        assert!((nu[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn log_space_matches_naive_summation() {
        let seg = standard();
        let policy = TruncationPolicy::default();
        for k in [4u32, 16, 32] {
            let bg = BergmanGeodesic::new(&seg, k, QuadratureSpec::for_level(k), policy).unwrap();
            let lat = seg.lattice();
            let v = lat.volume();
            for (t, z) in [(0.3, c(0.1, 0.2)), (0.8, c(-0.4, 0.7))] {
                let mut s = 0.0;
                for idx in basis_indices(1, k).unwrap() {
                    let th = theta_eval(lat, &idx, &[z], &policy).unwrap().norm_sqr();
                    let j = idx.linear();
                    s += (bg.log_rho0[j] - bg.log_rho1[j]).exp().powf(t) * th * v
                        / bg.log_rho0[j].exp();
                }
                let naive = s.ln() / k as f64;
                let fast = bg.bergman_potential(t, &[z]).unwrap();
                assert!((naive - fast).abs() < 1e-10, "k={k}: {naive} vs {fast}");
            }
        }
    }

    #[test]
    fn bergman_potential_is_periodic_in_z() {
        let seg = standard();
        let k = 16;
        let bg = BergmanGeodesic::with_plan(&seg, k, &QuadraturePlan::default()).unwrap();
        let z = c(0.3, 0.21);
        let a = bg.error_field(0.4, &[z]).unwrap().diff;
        let b = bg.error_field(0.4, &[z + c(1.0, 0.0)]).unwrap().diff;
        let d = bg.error_field(0.4, &[z + c(0.0, 1.0)]).unwrap().diff;
        assert!((a - b).abs() < 1e-10);
        assert!((a - d).abs() < 1e-10);
    }

    #[test]
    fn flat_error_is_density_log_and_t_independent() {
        let seg = flat_segment();
        let k = 16;
        let bg = BergmanGeodesic::with_plan(&seg, k, &QuadraturePlan::default()).unwrap();
        let flat = KahlerPotential::flat(Lattice::square(1));
        let z = [c(0.25, 0.4)];
        let density = bergman_density(&flat, k, &z).unwrap();
        let e0 = bg.error_field(0.0, &z).unwrap().diff;
        let e1 = bg.error_field(0.7, &z).unwrap().diff;
        assert!((e0 - density.ln() / k as f64).abs() < 1e-12);
        assert!((e0 - e1).abs() < 1e-12);
    }

    #[test]
    fn endpoint_potential_is_bergman_approximant() {
        let seg = standard();
        let k = 8;
        let bg = BergmanGeodesic::with_plan(&seg, k, &QuadraturePlan::default()).unwrap();
        let pot = seg.endpoint(0);
        let z = [c(0.1, 0.33)];
        let d = bergman_density(pot, k, &z).unwrap();
        let expected = pot.phi(&[0.33]) + d.ln() / k as f64;
        assert!((bg.bergman_potential(0.0, &z).unwrap() - expected).abs() < 1e-12);
        let lr = log_norming_constants(pot, k, &QuadratureSpec::for_level(k)).unwrap();
        assert_eq!(lr, bg.log_rho(0));
    }

    #[test]
    fn error_field_shrinks() {
        let seg = standard();
        let a = BergmanGeodesic::with_plan(&seg, 16, &QuadraturePlan::default()).unwrap();
        let b = BergmanGeodesic::with_plan(&seg, 64, &QuadraturePlan::default()).unwrap();
        let z = [c(0.0, 0.3)];
        let ea = a.error_field(0.5, &z).unwrap().diff - (16f64).ln() / 16.0;
        let eb = b.error_field(0.5, &z).unwrap().diff - (64f64).ln() / 64.0;
        assert!(eb.abs() < ea.abs());
    }
}
