//! Legendre duality `u(mu) = mu.y - phi(y)`, `grad phi(y) = mu`, and the
//! geodesics and harmonic blends obtained by averaging duals.
//!
//! Duals are never tabulated: every evaluation of `u` solves for `y(mu)`.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{check_dim, Lattice};
use crate::potential::{
    inverse_spd, ln_det_spd, min_eigenvalue, solve_spd, ConvexPotential, KahlerPotential,
    PotentialJet, PotentialPath,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Absolute tolerance on the gradient residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput(
                "Newton tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

struct Minimum {
    x: DVector<f64>,
    value: f64,
    hess: DMatrix<f64>,
}

/// Damped Newton for a strictly convex objective given as `(f, grad, hess)`.
fn newton_minimize<F>(
    x0: DVector<f64>,
    opts: &NewtonOptions,
    what: &'static str,
    mut eval: F,
) -> Result<Minimum>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)>,
{
    opts.validate()?;
    let mut x = x0;
    let (mut f, mut g, mut h) = eval(&x)?;
    for _ in 0..opts.max_iter {
        let gnorm = g.norm();
        if gnorm <= opts.tol {
            return Ok(Minimum {
                x,
                value: f,
                hess: h,
            });
        }
        let step = solve_spd(&h, &(-&g))?;
        let slope = g.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &step * alpha;
            let (fnew, gnew, hnew) = eval(&xn)?;
            if fnew <= f + 1e-4 * alpha * slope || gnew.norm() < gnorm {
                accepted = Some((xn, fnew, gnew, hnew));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xn, fnew, gnew, hnew)) => {
                x = xn;
                f = fnew;
                g = gnew;
                h = hnew;
            }
            None => {
                return Err(Error::NoConvergence {
                    what,
                    iterations: opts.max_iter,
                    residual: gnorm,
                })
            }
        }
    }
    let residual = g.norm();
    if residual <= opts.tol {
        Ok(Minimum {
            x,
            value: f,
            hess: h,
        })
    } else {
        Err(Error::NoConvergence {
            what,
            iterations: opts.max_iter,
            residual,
        })
    }
}

/// Solution of `grad phi(y) = mu` with the dual value there.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendrePoint {
    pub u: f64,
    pub y: DVector<f64>,
    /// `Hess phi(y)`; its inverse is `Hess u(mu)`.
    pub hess_phi: DMatrix<f64>,
}

/// Legendre dual `u(mu) = mu.y - phi(y)` at `grad phi(y) = mu`.
pub fn legendre<P: ConvexPotential + ?Sized>(
    potential: &P,
    mu: &[f64],
    opts: &NewtonOptions,
) -> Result<LegendrePoint> {
    let lat = potential.lattice();
    let m = lat.dim();
    check_dim(m, mu.len())?;
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("mu must be finite".into()));
    }
    let muv = DVector::from_column_slice(mu);
    let y0 = lat.im_inverse() * &muv / (4.0 * PI);
    let min = newton_minimize(y0, opts, "Legendre transform", |y| {
        let PotentialJet { phi, grad, hess } = potential.jet(y.as_slice())?;
        Ok((phi - muv.dot(y), grad - &muv, hess))
    })?;
    Ok(LegendrePoint {
        u: -min.value,
        y: min.x,
        hess_phi: min.hess,
    })
}

/// Moment map `mu = grad phi(y)`.
pub fn moment_map(potential: &KahlerPotential, y: &[f64]) -> Result<DVector<f64>> {
    check_dim(potential.dim(), y.len())?;
    Ok(potential.moment_map(y))
}

/// The blended dual `u = sum_p w_p u_p` at one `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub u: f64,
    /// `grad u(mu) = sum w_p y_p(mu)`.
    pub y: DVector<f64>,
    /// `Hess u(mu) = sum w_p Hess phi_p(y_p)^{-1}`.
    pub hess_u: DMatrix<f64>,
    /// `sum w_p ln det Hess phi_p(y_p)`.
    pub mean_ln_det_hess_phi: f64,
}

impl DualPoint {
    /// `ln` of `[det Hess phi(y) / prod det Hess phi_p(y_p)^{w_p}]^{1/2}`,
    /// where `phi` is the potential dual to the blend.
    pub fn ln_det_ratio(&self) -> Result<f64> {
        Ok(-0.5 * (ln_det_spd(&self.hess_u)? + self.mean_ln_det_hess_phi))
    }
}

/// Value of the blended Kähler potential `phi = L^{-1}(sum w_p u_p)` at `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct InversePoint {
    pub phi: f64,
    /// `mu = grad phi(y)`.
    pub mu: DVector<f64>,
    pub hess_phi: DMatrix<f64>,
}

/// Convex combination of Legendre duals of certified potentials.
///
/// Doubles as a convex potential: its Kähler side is evaluated by inverse
/// Legendre transform.
#[derive(Debug, Clone)]
pub struct DualBlend<'a> {
    parts: Vec<(f64, &'a KahlerPotential)>,
    opts: NewtonOptions,
}

pub type SymplecticPotential<'a> = DualBlend<'a>;

impl<'a> DualBlend<'a> {
    /// Zero weights are dropped; the rest must be nonnegative and finite.
    pub fn new(parts: Vec<(f64, &'a KahlerPotential)>, opts: NewtonOptions) -> Result<Self> {
        opts.validate()?;
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("blend needs at least one part".into()))?
            .1
            .lattice();
        for (w, p) in &parts {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "blend weight {w} is not admissible"
                )));
            }
            if p.lattice() != first {
                return Err(Error::InvalidInput(
                    "blended potentials live on different lattices".into(),
                ));
            }
        }
        let parts: Vec<_> = parts.into_iter().filter(|(w, _)| *w > 0.0).collect();
        if parts.is_empty() {
            return Err(Error::InvalidInput("blend weights are all zero".into()));
        }
        Ok(Self { parts, opts })
    }

    /// The plain dual of one potential.
    pub fn single(potential: &'a KahlerPotential, opts: NewtonOptions) -> Self {
        Self {
            parts: vec![(1.0, potential)],
            opts,
        }
    }

    pub fn parts(&self) -> &[(f64, &'a KahlerPotential)] {
        &self.parts
    }

    pub fn options(&self) -> &NewtonOptions {
        &self.opts
    }

    fn as_single(&self) -> Option<&'a KahlerPotential> {
        match self.parts.as_slice() {
            [(w, p)] if *w == 1.0 => Some(*p),
            _ => None,
        }
    }

    pub fn dual(&self, mu: &[f64]) -> Result<DualPoint> {
        let m = self.parts[0].1.dim();
        check_dim(m, mu.len())?;
        let mut u = 0.0;
        let mut y = DVector::zeros(m);
        let mut hess_u = DMatrix::zeros(m, m);
        let mut mean_ln_det = 0.0;
        for (w, p) in &self.parts {
            let lp = legendre(*p, mu, &self.opts)?;
            u += w * lp.u;
            y += &lp.y * *w;
            hess_u += inverse_spd(&lp.hess_phi)? * *w;
            mean_ln_det += w * ln_det_spd(&lp.hess_phi)?;
        }
        Ok(DualPoint {
            u,
            y,
            hess_u,
            mean_ln_det_hess_phi: mean_ln_det,
        })
    }

    /// `ln` of the stationary-phase ratio at `mu`; exactly 0 for a single
    /// unit-weight part.
    pub fn ln_det_ratio(&self, mu: &[f64]) -> Result<f64> {
        if self.as_single().is_some() {
            check_dim(self.parts[0].1.dim(), mu.len())?;
            return Ok(0.0);
        }
        self.dual(mu)?.ln_det_ratio()
    }

    /// `phi(y) = sup_mu (mu.y - u(mu))`.
    pub fn inverse(&self, y: &[f64]) -> Result<InversePoint> {
        if let Some(p) = self.as_single() {
            let jet = p.jet(y)?;
            return Ok(InversePoint {
                phi: jet.phi,
                mu: jet.grad,
                hess_phi: jet.hess,
            });
        }
        let lat = self.lattice();
        check_dim(lat.dim(), y.len())?;
        let yv = DVector::from_column_slice(y);
        let mu0 = DVector::from_column_slice(&lat.im_apply(y)) * (4.0 * PI);
        let min = newton_minimize(mu0, &self.opts, "inverse Legendre transform", |mu| {
            let d = self.dual(mu.as_slice())?;
            Ok((d.u - mu.dot(&yv), d.y - &yv, d.hess_u))
        })?;
        Ok(InversePoint {
            phi: -min.value,
            mu: min.x,
            hess_phi: inverse_spd(&min.hess)?,
        })
    }

    /// Checks `Hess u > 0` on a `points^m` grid over one period cell of `mu`.
    pub fn certify_convex(&self, points: usize) -> Result<()> {
        let lat = self.lattice();
        let m = lat.dim();
        let total = points.pow(m as u32);
        let mut nu = vec![0.0; m];
        for lin in 0..total {
            let mut rest = lin;
            for slot in nu.iter_mut().rev() {
                *slot = (rest % points) as f64 / points as f64;
                rest /= points;
            }
            let mu: Vec<f64> = lat.im_apply(&nu).iter().map(|v| 4.0 * PI * v).collect();
            let d = self
                .dual(&mu)
                .map_err(|_| Error::BlendNotConvex { mu: mu.clone() })?;
            if !(min_eigenvalue(&d.hess_u) > 0.0) {
                return Err(Error::BlendNotConvex { mu });
            }
        }
        Ok(())
    }
}

impl ConvexPotential for DualBlend<'_> {
    fn lattice(&self) -> &Lattice {
        self.parts[0].1.lattice()
    }

    fn jet(&self, y: &[f64]) -> Result<PotentialJet> {
        let p = self.inverse(y)?;
        Ok(PotentialJet {
            phi: p.phi,
            grad: p.mu,
            hess: p.hess_phi,
        })
    }
}

/// The Monge–Ampère geodesic between two endpoints, `u_t = (1-t) u_0 + t u_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment {
    path: PotentialPath,
    opts: NewtonOptions,
}

impl GeodesicSegment {
    pub fn new(path: PotentialPath, opts: NewtonOptions) -> Result<Self> {
        opts.validate()?;
        Ok(Self { path, opts })
    }

    pub fn path(&self) -> &PotentialPath {
        &self.path
    }

    pub fn lattice(&self) -> &Lattice {
        self.path.lattice()
    }

    pub fn options(&self) -> &NewtonOptions {
        &self.opts
    }

    pub fn endpoint(&self, s: usize) -> &KahlerPotential {
        if s == 0 {
            &self.path.phi0
        } else {
            &self.path.phi1
        }
    }

    pub fn blend(&self, t: f64) -> Result<DualBlend<'_>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("t = {t} outside [0, 1]")));
        }
        DualBlend::new(
            vec![(1.0 - t, &self.path.phi0), (t, &self.path.phi1)],
            self.opts,
        )
    }

    /// `u_t(mu)`.
    pub fn dual(&self, t: f64, mu: &[f64]) -> Result<f64> {
        Ok(self.blend(t)?.dual(mu)?.u)
    }

    /// Stationary-phase limit of the norming ratios at `mu`.
    pub fn ratio_rinf(&self, mu: &[f64], t: f64) -> Result<f64> {
        Ok(self.blend(t)?.ln_det_ratio(mu)?.exp())
    }
}

/// `phi_t(y)` on the geodesic.
pub fn inverse_legendre(seg: &GeodesicSegment, t: f64, y: &[f64]) -> Result<f64> {
    Ok(seg.blend(t)?.inverse(y)?.phi)
}

/// Finite-difference residual of the geodesic equation
/// `phi_tt - grad(phi_t)^T (Hess_y phi)^{-1} grad(phi_t)` at `(t, y)`.
///
/// The time derivatives are central differences with step `h`; the spatial
/// gradient of `phi_t` is the difference of the moment maps `mu_{t +- h}(y)`.
pub fn geodesic_check(seg: &GeodesicSegment, t: f64, y: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) || t - h < 0.0 || t + h > 1.0 {
        return Err(Error::InvalidInput(format!(
            "step {h} does not fit inside (0, 1) around t = {t}"
        )));
    }
    let minus = seg.blend(t - h)?.inverse(y)?;
    let mid = seg.blend(t)?.inverse(y)?;
    let plus = seg.blend(t + h)?.inverse(y)?;
    let phi_tt = (plus.phi - 2.0 * mid.phi + minus.phi) / (h * h);
    let grad_dot = (&plus.mu - &minus.mu) / (2.0 * h);
    let contraction = grad_dot.dot(&solve_spd(&mid.hess_phi, &grad_dot)?);
    Ok(phi_tt - contraction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{FourierTerm, TrigPolynomial};
    use proptest::prelude::*;

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

    fn mixed2() -> KahlerPotential {
        let psi = TrigPolynomial::from_terms(
            2,
            &[
                FourierTerm::new(vec![1, 0], 0.01, 0.3),
                FourierTerm::new(vec![1, 1], 0.006, 0.0),
            ],
        )
        .unwrap();
        KahlerPotential::new(Lattice::square(2), psi).unwrap()
    }

    #[test]
    fn flat_dual_is_quadratic() {
        let k = KahlerPotential::flat(Lattice::square(1));
        for mu in [-3.0, 0.0, 1.7, 25.0] {
            let p = legendre(&k, &[mu], &NewtonOptions::default()).unwrap();
            assert!((p.u - mu * mu / (8.0 * PI)).abs() < 1e-12);
            assert!((p.y[0] - mu / (4.0 * PI)).abs() < 1e-15);
        }
    }

    #[test]
    fn critical_point_of_even_potential() {
        let k = cosine(0.01);
        let opts = NewtonOptions::default();
        let p = legendre(&k, &[0.0], &opts).unwrap();
        assert!(k.grad(p.y.as_slice()).norm() <= opts.tol);
        assert!(p.y[0].abs() < 1e-12);
    }

    #[test]
    fn flat_geodesic_is_constant() {
        let path = PotentialPath::new(
            KahlerPotential::flat(Lattice::square(1)),
            KahlerPotential::flat(Lattice::square(1)),
        )
        .unwrap();
        let seg = GeodesicSegment::new(path, NewtonOptions::default()).unwrap();
        for t in [0.2, 0.5, 0.9] {
            for y in [-0.4, 0.0, 0.3, 1.1] {
                let phi = inverse_legendre(&seg, t, &[y]).unwrap();
                assert!((phi - 2.0 * PI * y * y).abs() < 1e-11);
            }
            assert!((seg.ratio_rinf(&[1.3], t).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(geodesic_check(&seg, 0.5, &[0.3], 1e-3).unwrap().abs() < 1e-6);
    }

    #[test]
    fn endpoints_are_recovered() {
        let seg = standard();
        for i in 0..40 {
            let y = -1.0 + i as f64 / 16.0;
            let a = inverse_legendre(&seg, 0.0, &[y]).unwrap();
            let b = inverse_legendre(&seg, 1.0, &[y]).unwrap();
            assert!((a - seg.endpoint(0).phi(&[y])).abs() < 1e-9);
            assert!((b - seg.endpoint(1).phi(&[y])).abs() < 1e-9);
        }
        assert_eq!(seg.ratio_rinf(&[0.7], 0.0).unwrap(), 1.0);
        assert_eq!(seg.ratio_rinf(&[0.7], 1.0).unwrap(), 1.0);
    }

    #[test]
    fn near_endpoint_blend_matches_endpoint() {
        let seg = standard();
        let eps = 1e-9;
        let y = [0.3];
        let blended = seg.blend(1.0 - eps).unwrap().inverse(&y).unwrap().phi;
        assert!((blended - seg.endpoint(1).phi(&y)).abs() < 1e-8);
    }

    #[test]
    fn geodesic_residual_is_small_and_second_order() {
        let seg = standard();
        let r = geodesic_check(&seg, 0.5, &[0.3], 1e-3).unwrap();
        assert!(r.abs() <= 1e-5, "residual {r}");
        let r1 = geodesic_check(&seg, 0.5, &[0.3], 0.08).unwrap();
        let r2 = geodesic_check(&seg, 0.5, &[0.3], 0.04).unwrap();
        let ratio = r1 / r2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio} ({r1}, {r2})");
    }

    #[test]
    fn blended_duals_are_convex() {
        let seg = standard();
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            seg.blend(t).unwrap().certify_convex(64).unwrap();
        }
    }

    #[test]
    fn rinf_is_periodic_and_at_most_one() {
        let seg = standard();
        for mu in [0.0, 1.0, 5.0, 9.0] {
            let a = seg.ratio_rinf(&[mu], 0.5).unwrap();
            let b = seg.ratio_rinf(&[mu + 4.0 * PI], 0.5).unwrap();
            assert!((a - b).abs() < 1e-10);
            assert!(a <= 1.0 && a > 0.9);
        }
    }

    #[test]
    fn rejects_out_of_range_t() {
        let seg = standard();
        assert!(seg.blend(1.5).is_err());
        assert!(geodesic_check(&seg, 0.0, &[0.0], 1e-3).is_err());
    }

    #[test]
    fn dual_shift_is_affine() {
        let k = cosine(0.01);
        let opts = NewtonOptions::default();
        let d = |mu: f64| legendre(&k, &[mu], &opts).unwrap().u;
        // u(mu + 4 pi) - u(mu) = mu + 2 pi for the model lattice.
        for mu in [-1.0, 0.5, 3.0] {
            let diff = d(mu + 4.0 * PI) - d(mu);
            assert!((diff - (mu + 2.0 * PI)).abs() < 1e-10, "{diff}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn legendre_involution(y0 in -2.0f64..2.0, y1 in -2.0f64..2.0) {
            let k = mixed2();
            let y = [y0, y1];
            let mu = k.grad(&y);
            let p = legendre(&k, mu.as_slice(), &NewtonOptions::default()).unwrap();
            prop_assert!((p.y[0] - y0).abs() < 1e-9 && (p.y[1] - y1).abs() < 1e-9);
            let phi = mu.dot(&p.y) - p.u;
            prop_assert!((phi - k.phi(&y)).abs() < 1e-9);
        }

        #[test]
        fn moment_map_is_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
            prop_assume!((a - c).abs() + (b - d).abs() > 1e-3);
            let k = mixed2();
            let opts = NewtonOptions::default();
            let p = legendre(&k, &[a, b], &opts).unwrap();
            let q = legendre(&k, &[c, d], &opts).unwrap();
            let inner = (a - c) * (p.y[0] - q.y[0]) + (b - d) * (p.y[1] - q.y[1]);
            prop_assert!(inner > 0.0);
        }

        #[test]
        fn model_moment_map_shifts_by_4pi(y in -3.0f64..3.0) {
            let k = cosine(0.02);
            let a = moment_map(&k, &[y]).unwrap();
            let b = moment_map(&k, &[y + 1.0]).unwrap();
            prop_assert!((b[0] - a[0] - 4.0 * PI).abs() < 1e-12);
        }
    }
}
