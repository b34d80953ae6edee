//! Invariant Kähler potentials `phi(y) = 2 pi yXy + 4 pi psi(y)`.
//!
//! `psi` is a real trigonometric polynomial, 1-periodic in the lattice
//! coordinate `y`, so `phi - 2 pi yXy` descends to the torus.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{check_dim, Lattice};

/// One real mode `amplitude * cos(2 pi n.y + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTerm {
    pub freq: Vec<i64>,
    pub amplitude: f64,
    pub phase: f64,
}

impl FourierTerm {
    pub fn new(freq: Vec<i64>, amplitude: f64, phase: f64) -> Self {
        Self {
            freq,
            amplitude,
            phase,
        }
    }
}

/// Stored as `a cos(2 pi n.y) + b sin(2 pi n.y)` over a half-space of frequencies.
#[derive(Debug, Clone, PartialEq)]
struct Mode {
    freq: Vec<f64>,
    int_freq: Vec<i64>,
    a: f64,
    b: f64,
}

/// Real-valued, finitely supported Fourier series on `R^m / Z^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    m: usize,
    modes: Vec<Mode>,
}

pub type PeriodicPotential = TrigPolynomial;

/// Value, gradient and Hessian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Sign-canonical representative of `{n, -n}`; `true` if `n` was flipped.
fn canonical(freq: &[i64]) -> (Vec<i64>, bool) {
    match freq.iter().find(|&&c| c != 0) {
        Some(&c) if c < 0 => (freq.iter().map(|v| -v).collect(), true),
        _ => (freq.to_vec(), false),
    }
}

impl TrigPolynomial {
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            modes: Vec::new(),
        }
    }

    /// Sums real modes; opposite and repeated frequencies are merged.
    pub fn from_terms(m: usize, terms: &[FourierTerm]) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let mut acc: BTreeMap<Vec<i64>, (f64, f64)> = BTreeMap::new();
        for term in terms {
            check_dim(m, term.freq.len())?;
            if !term.amplitude.is_finite() || !term.phase.is_finite() {
                return Err(Error::InvalidInput("Fourier term must be finite".into()));
            }
            let (freq, flipped) = canonical(&term.freq);
            let a = term.amplitude * term.phase.cos();
            let mut b = -term.amplitude * term.phase.sin();
            if flipped {
                b = -b;
            }
            let zero = freq.iter().all(|&c| c == 0);
            let slot = acc.entry(freq).or_insert((0.0, 0.0));
            slot.0 += a;
            if !zero {
                slot.1 += b;
            }
        }
        Ok(Self::from_map(m, acc))
    }

    /// From complex coefficients `psi_hat(n)` of `sum psi_hat(n) e^{2 pi i n.y}`.
    /// Fails unless `psi_hat(-n) = conj(psi_hat(n))`.
    pub fn from_coefficients(m: usize, coeffs: &BTreeMap<Vec<i64>, Complex64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let scale = coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        let mut acc: BTreeMap<Vec<i64>, (f64, f64)> = BTreeMap::new();
        for (freq, c) in coeffs {
            check_dim(m, freq.len())?;
            let neg: Vec<i64> = freq.iter().map(|v| -v).collect();
            let partner = coeffs.get(&neg).copied().unwrap_or_default();
            if (partner - c.conj()).norm() > 1e-14 * scale {
                return Err(Error::InvalidInput(format!(
                    "coefficients violate reality at frequency {freq:?}"
                )));
            }
            let (canon, flipped) = canonical(freq);
            if flipped {
                continue;
            }
            let zero = canon.iter().all(|&v| v == 0);
            let entry = if zero {
                (c.re, 0.0)
            } else {
                (2.0 * c.re, -2.0 * c.im)
            };
            acc.insert(canon, entry);
        }
        Ok(Self::from_map(m, acc))
    }

    fn from_map(m: usize, acc: BTreeMap<Vec<i64>, (f64, f64)>) -> Self {
        let modes = acc
            .into_iter()
            .filter(|(_, (a, b))| *a != 0.0 || *b != 0.0)
            .map(|(freq, (a, b))| Mode {
                freq: freq.iter().map(|&v| v as f64).collect(),
                int_freq: freq,
                a,
                b,
            })
            .collect();
        Self { m, modes }
    }

    /// `amplitude * cos(2 pi y_1)` style single-mode helper.
    pub fn cosine(freq: Vec<i64>, amplitude: f64) -> Result<Self> {
        let m = freq.len();
        Self::from_terms(m, &[FourierTerm::new(freq, amplitude, 0.0)])
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    /// Scales every coefficient by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for mode in &mut out.modes {
            mode.a *= s;
            mode.b *= s;
        }
        out.modes.retain(|md| md.a != 0.0 || md.b != 0.0);
        out
    }

    /// Complex coefficients over the full frequency support.
    pub fn coefficients(&self) -> BTreeMap<Vec<i64>, Complex64> {
        let mut out = BTreeMap::new();
        for mode in &self.modes {
            if mode.int_freq.iter().all(|&v| v == 0) {
                out.insert(mode.int_freq.clone(), Complex64::new(mode.a, 0.0));
            } else {
                let c = Complex64::new(0.5 * mode.a, -0.5 * mode.b);
                out.insert(mode.int_freq.clone(), c);
                out.insert(mode.int_freq.iter().map(|v| -v).collect(), c.conj());
            }
        }
        out
    }

    /// Largest `|n|_inf` in the support (0 for constants).
    pub fn degree(&self) -> i64 {
        self.modes
            .iter()
            .flat_map(|md| md.int_freq.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    /// `sup |psi|` bound, the sum of mode amplitudes.
    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(|md| md.a.hypot(md.b)).sum()
    }

    /// Bound on `|d^3 psi|` along unit directions, `(2 pi)^3 sum |n|^3 |psi_hat(n)|`.
    pub fn third_derivative_bound(&self) -> f64 {
        let c = (2.0 * PI).powi(3);
        self.modes
            .iter()
            .map(|md| {
                let n2: f64 = md.freq.iter().map(|v| v * v).sum();
                c * n2.powf(1.5) * md.a.hypot(md.b)
            })
            .sum()
    }

    fn angle(&self, mode: &Mode, y: &[f64]) -> f64 {
        let mut dot = 0.0;
        for (n, v) in mode.freq.iter().zip(y) {
            dot += n * v;
        }
        2.0 * PI * dot
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.m);
        self.modes
            .iter()
            .map(|md| {
                let (s, c) = self.angle(md, y).sin_cos();
                md.a * c + md.b * s
            })
            .sum()
    }

    pub fn grad(&self, y: &[f64]) -> DVector<f64> {
        self.jet(y).grad
    }

    pub fn hess(&self, y: &[f64]) -> DMatrix<f64> {
        self.jet(y).hess
    }

    pub fn jet(&self, y: &[f64]) -> Jet {
        let m = self.m;
        debug_assert_eq!(y.len(), m);
        let mut value = 0.0;
        let mut grad = DVector::zeros(m);
        let mut hess = DMatrix::zeros(m, m);
        let tp = 2.0 * PI;
        for md in &self.modes {
            let (s, c) = self.angle(md, y).sin_cos();
            let v = md.a * c + md.b * s;
            let d = tp * (md.b * c - md.a * s);
            value += v;
            for a in 0..m {
                grad[a] += md.freq[a] * d;
                for b in 0..m {
                    hess[(a, b)] -= tp * tp * md.freq[a] * md.freq[b] * v;
                }
            }
        }
        Jet { value, grad, hess }
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    match h.nrows() {
        1 => h[(0, 0)],
        2 => {
            let tr = 0.5 * (h[(0, 0)] + h[(1, 1)]);
            let d = 0.5 * (h[(0, 0)] - h[(1, 1)]);
            tr - d.hypot(h[(0, 1)])
        }
        _ => SymmetricEigen::new(h.clone()).eigenvalues.min(),
    }
}

/// `ln det` of a symmetric positive definite matrix.
pub(crate) fn ln_det_spd(h: &DMatrix<f64>) -> Result<f64> {
    match h.nrows() {
        1 if h[(0, 0)] > 0.0 => Ok(h[(0, 0)].ln()),
        2 => {
            let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
            if h[(0, 0)] > 0.0 && det > 0.0 {
                Ok(det.ln())
            } else {
                Err(Error::NotPositiveDefinite("2x2 Hessian".into()))
            }
        }
        _ => {
            let chol = h
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("Hessian".into()))?;
            Ok(2.0
                * chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|d| d.ln())
                    .sum::<f64>())
        }
    }
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn inverse_spd(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match h.nrows() {
        1 if h[(0, 0)] > 0.0 => Ok(DMatrix::from_element(1, 1, 1.0 / h[(0, 0)])),
        _ => h
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::NotPositiveDefinite("Hessian".into())),
    }
}

/// Solves `h x = r` for symmetric positive definite `h`.
pub(crate) fn solve_spd(h: &DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    match h.nrows() {
        1 if h[(0, 0)] > 0.0 => Ok(DVector::from_element(1, r[0] / h[(0, 0)])),
        _ => h
            .clone()
            .cholesky()
            .map(|c| c.solve(r))
            .ok_or_else(|| Error::NotPositiveDefinite("Hessian".into())),
    }
}

/// Value, gradient and Hessian of `phi` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialJet {
    pub phi: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// A periodic-perturbation convex potential, evaluated in lattice coordinates.
///
/// `psi(y) = (phi(y) - 2 pi yXy) / (4 pi)` must be 1-periodic.
pub trait ConvexPotential: Sync {
    fn lattice(&self) -> &Lattice;

    fn jet(&self, y: &[f64]) -> Result<PotentialJet>;

    /// Value of the periodic part `psi` at `y`.
    fn psi_at(&self, y: &[f64]) -> Result<f64> {
        let j = self.jet(y)?;
        Ok((j.phi - 2.0 * PI * self.lattice().quad_form(y)) / (4.0 * PI))
    }

    /// `(psi(y), ln det Hess phi(y))`, the two ingredients of norming integrands.
    fn weight_parts(&self, y: &[f64]) -> Result<(f64, f64)> {
        let j = self.jet(y)?;
        let psi = (j.phi - 2.0 * PI * self.lattice().quad_form(y)) / (4.0 * PI);
        Ok((psi, ln_det_spd(&j.hess)?))
    }
}

/// Convexity certificate collected at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityCertificate {
    /// Grid points per dimension that were sampled.
    pub grid: usize,
    /// Smallest eigenvalue of `X + Hess psi` over the grid.
    pub grid_min: f64,
    /// Lipschitz allowance between grid points.
    pub margin: f64,
}

impl ConvexityCertificate {
    /// Certified lower bound on the eigenvalues of `Hess phi / (4 pi)`.
    pub fn lower_bound(&self) -> f64 {
        self.grid_min - self.margin
    }
}

/// `phi(y) = 2 pi yXy + 4 pi psi(y)` on a fixed lattice, certified convex.
#[derive(Debug, Clone, PartialEq)]
pub struct KahlerPotential {
    lattice: Lattice,
    psi: TrigPolynomial,
    certificate: ConvexityCertificate,
}

const MIN_CERT_GRID: usize = 64;
const MAX_CERT_POINTS: usize = 1 << 22;

impl KahlerPotential {
    /// Certifies `X + Hess psi > 0` on a grid of at least `64^m` points plus a
    /// margin from the third-derivative bound, refining while inconclusive.
    pub fn new(lattice: Lattice, psi: TrigPolynomial) -> Result<Self> {
        let m = lattice.dim();
        check_dim(m, psi.dim())?;
        let l3 = psi.third_derivative_bound();
        let mut grid = MIN_CERT_GRID;
        loop {
            let (grid_min, argmin) = grid_min_eigen(&lattice, &psi, grid);
            if grid_min <= 0.0 {
                return Err(Error::ConvexityViolation {
                    y: argmin,
                    min_eigenvalue: 4.0 * PI * grid_min,
                });
            }
            let margin = l3 * (m as f64).sqrt() / (2.0 * grid as f64);
            let certificate = ConvexityCertificate {
                grid,
                grid_min,
                margin,
            };
            if certificate.lower_bound() > 0.0 {
                return Ok(Self {
                    lattice,
                    psi,
                    certificate,
                });
            }
            let next = grid * 2;
            if next
                .checked_pow(m as u32)
                .is_none_or(|p| p > MAX_CERT_POINTS)
            {
                return Err(Error::ConvexityViolation {
                    y: argmin,
                    min_eigenvalue: 4.0 * PI * certificate.lower_bound(),
                });
            }
            grid = next;
        }
    }

    pub fn flat(lattice: Lattice) -> Self {
        let m = lattice.dim();
        Self::new(lattice, TrigPolynomial::zero(m)).expect("flat potential is convex")
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn psi(&self) -> &TrigPolynomial {
        &self.psi
    }

    pub fn certificate(&self) -> &ConvexityCertificate {
        &self.certificate
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn is_flat(&self) -> bool {
        self.psi.is_zero()
    }

    pub fn phi(&self, y: &[f64]) -> f64 {
        2.0 * PI * self.lattice.quad_form(y) + 4.0 * PI * self.psi.eval(y)
    }

    pub fn grad(&self, y: &[f64]) -> DVector<f64> {
        let xy = self.lattice.im_apply(y);
        let g = self.psi.grad(y);
        DVector::from_fn(self.dim(), |a, _| 4.0 * PI * (xy[a] + g[a]))
    }

    /// `Hess phi`, checked positive definite at `y`.
    pub fn hess(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let h = (self.lattice.im_part() + self.psi.hess(y)) * (4.0 * PI);
        check_positive(&h, y)?;
        Ok(h)
    }

    /// `det Hess phi`, the density of `omega^m / m!` in `dx dy`.
    pub fn volume_density(&self, y: &[f64]) -> Result<f64> {
        let h = self.hess(y)?;
        Ok(ln_det_spd(&h)?.exp())
    }

    /// Moment map `y -> grad phi(y)`; `mu(y + e_a) = mu(y) + 4 pi X e_a`.
    pub fn moment_map(&self, y: &[f64]) -> DVector<f64> {
        self.grad(y)
    }

    /// Oscillation bound on `4 pi psi`.
    pub fn oscillation_bound(&self) -> f64 {
        4.0 * PI * self.psi.sup_bound()
    }
}

fn check_positive(h: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    let lam = min_eigenvalue(h);
    if lam > 0.0 {
        Ok(())
    } else {
        Err(Error::ConvexityViolation {
            y: y.to_vec(),
            min_eigenvalue: lam,
        })
    }
}

fn grid_min_eigen(lattice: &Lattice, psi: &TrigPolynomial, grid: usize) -> (f64, Vec<f64>) {
    let m = lattice.dim();
    let x = lattice.im_part();
    let total = grid.pow(m as u32);
    let mut best = f64::INFINITY;
    let mut arg = vec![0.0; m];
    let mut y = vec![0.0; m];
    for lin in 0..total {
        let mut rest = lin;
        for slot in y.iter_mut().rev() {
            *slot = (rest % grid) as f64 / grid as f64;
            rest /= grid;
        }
        let h = x + psi.hess(&y);
        let lam = min_eigenvalue(&h);
        if lam < best {
            best = lam;
            arg.copy_from_slice(&y);
        }
    }
    (best, arg)
}

impl ConvexPotential for KahlerPotential {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn jet(&self, y: &[f64]) -> Result<PotentialJet> {
        let j = self.psi.jet(y);
        let xy = self.lattice.im_apply(y);
        let m = self.dim();
        let hess = (self.lattice.im_part() + j.hess) * (4.0 * PI);
        check_positive(&hess, y)?;
        Ok(PotentialJet {
            phi: 2.0 * PI * self.lattice.quad_form(y) + 4.0 * PI * j.value,
            grad: DVector::from_fn(m, |a, _| 4.0 * PI * (xy[a] + j.grad[a])),
            hess,
        })
    }

    fn psi_at(&self, y: &[f64]) -> Result<f64> {
        Ok(self.psi.eval(y))
    }

    fn weight_parts(&self, y: &[f64]) -> Result<(f64, f64)> {
        let j = self.psi.jet(y);
        let hess = (self.lattice.im_part() + j.hess) * (4.0 * PI);
        check_positive(&hess, y)?;
        Ok((j.value, ln_det_spd(&hess)?))
    }
}

/// Two certified endpoints on a shared lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPath {
    pub phi0: KahlerPotential,
    pub phi1: KahlerPotential,
}

impl PotentialPath {
    pub fn new(phi0: KahlerPotential, phi1: KahlerPotential) -> Result<Self> {
        if phi0.lattice() != phi1.lattice() {
            return Err(Error::InvalidInput(
                "path endpoints live on different lattices".into(),
            ));
        }
        Ok(Self { phi0, phi1 })
    }

    pub fn lattice(&self) -> &Lattice {
        self.phi0.lattice()
    }

    pub fn is_flat(&self) -> bool {
        self.phi0.is_flat() && self.phi1.is_flat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cosine(a: f64) -> TrigPolynomial {
        TrigPolynomial::cosine(vec![1], a).unwrap()
    }

    fn mixed2() -> TrigPolynomial {
        TrigPolynomial::from_terms(
            2,
            &[
                FourierTerm::new(vec![1, 0], 0.01, 0.3),
                FourierTerm::new(vec![1, -1], 0.004, -1.0),
                FourierTerm::new(vec![0, 2], 0.002, 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_series_vanishes() {
        let p = TrigPolynomial::zero(2);
        let j = p.jet(&[0.3, -0.2]);
        assert_eq!(j.value, 0.0);
        assert!(j.grad.iter().all(|&v| v == 0.0));
        assert!(j.hess.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cosine_derivatives_at_origin() {
        let a = 0.01;
        let j = cosine(a).jet(&[0.0]);
        assert!((j.value - a).abs() < 1e-17);
        assert!(j.grad[0].abs() < 1e-17);
        assert!((j.hess[(0, 0)] + 4.0 * PI * PI * a).abs() < 1e-15);
        let p = cosine(a);
        assert!((p.eval(&[0.3]) - p.eval(&[1.3])).abs() < 1e-15);
    }

    #[test]
    fn coefficient_roundtrip() {
        let p = mixed2();
        let c = p.coefficients();
        assert_eq!(c.len(), 6);
        let q = TrigPolynomial::from_coefficients(2, &c).unwrap();
        for y in [[0.1, 0.2], [0.7, -0.4]] {
            assert!((p.eval(&y) - q.eval(&y)).abs() < 1e-16);
        }
        let half = c[&vec![1, 0]];
        assert!((half.norm() - 0.005).abs() < 1e-16);
    }

    #[test]
    fn reality_is_enforced() {
        let mut c = BTreeMap::new();
        c.insert(vec![1], Complex64::new(0.5, 0.1));
        assert!(TrigPolynomial::from_coefficients(1, &c).is_err());
        c.insert(vec![-1], Complex64::new(0.5, -0.1));
        assert!(TrigPolynomial::from_coefficients(1, &c).is_ok());
    }

    #[test]
    fn opposite_frequencies_merge() {
        let p = TrigPolynomial::from_terms(
            1,
            &[
                FourierTerm::new(vec![1], 0.5, 0.2),
                FourierTerm::new(vec![-1], 0.5, -0.2),
            ],
        )
        .unwrap();
        let y = [0.37];
        assert!((p.eval(&y) - (2.0 * PI * 0.37 + 0.2).cos()).abs() < 1e-15);
    }

    #[test]
    fn flat_potential_closed_forms() {
        let k = KahlerPotential::flat(Lattice::square(1));
        assert!((k.phi(&[0.5]) - PI / 2.0).abs() < 1e-15);
        assert!((k.grad(&[0.5])[0] - 2.0 * PI).abs() < 1e-15);
        assert!((k.hess(&[0.5]).unwrap()[(0, 0)] - 4.0 * PI).abs() < 1e-15);
        let k2 = KahlerPotential::flat(Lattice::square(2));
        let v = k2.volume_density(&[0.1, 0.8]).unwrap();
        assert!((v - 16.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn cosine_potential_convexity_and_density() {
        let k = KahlerPotential::new(Lattice::square(1), cosine(0.01)).unwrap();
        let h = k.hess(&[0.0]).unwrap()[(0, 0)];
        assert!((h - 4.0 * PI * (1.0 - 4.0 * PI * PI * 0.01)).abs() < 1e-13);
        assert!(h > 0.0);
        assert!((k.volume_density(&[0.25]).unwrap() - 4.0 * PI).abs() < 1e-13);
        assert!(k.certificate().lower_bound() > 0.0);
        let g0 = k.grad(&[0.3]);
        let g1 = k.grad(&[1.3]);
        assert!((g1[0] - g0[0] - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn volume_integrates_to_cell_mass() {
        let k = KahlerPotential::new(Lattice::square(1), cosine(0.02)).unwrap();
        let n = 64;
        let s: f64 = (0..n)
            .map(|i| k.volume_density(&[i as f64 / n as f64]).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((s - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn nonconvex_potential_is_rejected() {
        let err = KahlerPotential::new(Lattice::square(1), cosine(0.05)).unwrap_err();
        match err {
            Error::ConvexityViolation { y, .. } => assert!(y[0].abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn borderline_potential_needs_refinement() {
        let a = 0.999 / (4.0 * PI * PI);
        let k = KahlerPotential::new(Lattice::square(1), cosine(a)).unwrap();
        assert!(k.certificate().grid > MIN_CERT_GRID);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(y0 in -2.0f64..2.0, y1 in -2.0f64..2.0) {
            let k = KahlerPotential::new(Lattice::square(2), mixed2()).unwrap();
            let h = 1e-5;
            let y = [y0, y1];
            let g = k.grad(&y);
            let hs = k.hess(&y).unwrap();
            for a in 0..2 {
                let mut yp = y;
                let mut ym = y;
                yp[a] += h;
                ym[a] -= h;
                let fd = (k.phi(&yp) - k.phi(&ym)) / (2.0 * h);
                prop_assert!((fd - g[a]).abs() < 1e-7 * (1.0 + g[a].abs()));
                let gp = k.grad(&yp);
                let gm = k.grad(&ym);
                for b in 0..2 {
                    let fd2 = (gp[b] - gm[b]) / (2.0 * h);
                    prop_assert!((fd2 - hs[(a, b)]).abs() < 1e-7 * (1.0 + hs[(a, b)].abs()));
                }
            }
        }

        #[test]
        fn certified_hessian_is_positive(y0 in -5.0f64..5.0, y1 in -5.0f64..5.0) {
            let k = KahlerPotential::new(Lattice::square(2), mixed2()).unwrap();
            let h = k.hess(&[y0, y1]).unwrap();
            prop_assert!(min_eigenvalue(&h) > 0.0);
        }

        #[test]
        fn psi_is_periodic(y0 in -3.0f64..3.0, y1 in -3.0f64..3.0, n0 in -3i32..3, n1 in -3i32..3) {
            let p = mixed2();
            let a = p.eval(&[y0, y1]);
            let b = p.eval(&[y0 + n0 as f64, y1 + n1 as f64]);
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}
