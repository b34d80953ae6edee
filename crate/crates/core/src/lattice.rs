//! Principally polarized period lattices and level-k theta bases.
//!
//! A lattice is described by its symmetric period matrix `Z` with
//! `Im Z` positive definite; the lattice is spanned by the unit vectors
//! `e_1..e_m` and the columns of `Z`. Points are addressed either in complex
//! coordinates `z` or in real lattice coordinates `(x, y)` with
//! `z = x + Z y`, so that both `x` and `y` are 1-periodic on the torus.
//!
//! The level-k basis is
//!
//! ```text
//! theta_l(z) = sum_{n in Z^m} exp(pi i (l+kn) (Z/k) (l+kn)^T + 2 pi i (l+kn).z)
//! ```
//!
//! indexed by `l in {0..k-1}^m`. Internally every consumer works with the
//! reduced function `exp(-pi k yXy) theta_l(x + Z y)`, whose modulus is bounded
//! independently of `y`; the raw value is recovered by multiplying the
//! Gaussian envelope back in.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::KahlerPotential;

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    period: DMatrix<Complex64>,
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    im_inv: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
    det_im: f64,
    has_real_part: bool,
}

impl Lattice {
    /// Builds the lattice for a symmetric period matrix with positive definite
    /// imaginary part.
    pub fn new(period: DMatrix<Complex64>) -> Result<Self> {
        let m = period.nrows();
        if m == 0 || period.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "period matrix must be square and non-empty, got {}x{}",
                period.nrows(),
                period.ncols()
            )));
        }
        if period
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidInput(
                "period matrix has non-finite entries".into(),
            ));
        }
        for a in 0..m {
            for b in 0..a {
                if period[(a, b)] != period[(b, a)] {
                    return Err(Error::InvalidInput(format!(
                        "period matrix is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        let re = period.map(|z| z.re);
        let im = period.map(|z| z.im);
        let eig = SymmetricEigen::new(im.clone());
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if lambda_min <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "Im Z has smallest eigenvalue {lambda_min:e}"
            )));
        }
        let im_inv = im
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("Im Z".into()))?
            .inverse();
        let det_im = eig.eigenvalues.iter().product();
        let has_real_part = re.iter().any(|&v| v != 0.0);
        Ok(Self {
            period,
            re,
            im,
            im_inv,
            lambda_min,
            lambda_max,
            det_im,
            has_real_part,
        })
    }

    /// The model lattice `Z^m + i Z^m`, i.e. `Z = iI`.
    pub fn square(m: usize) -> Self {
        let period = DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(period).expect("iI is a valid period matrix")
    }

    pub fn dim(&self) -> usize {
        self.period.nrows()
    }

    pub fn period(&self) -> &DMatrix<Complex64> {
        &self.period
    }

    /// `X = Im Z`.
    pub fn im_part(&self) -> &DMatrix<f64> {
        &self.im
    }

    pub fn re_part(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn im_inverse(&self) -> &DMatrix<f64> {
        &self.im_inv
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn det_im(&self) -> f64 {
        self.det_im
    }

    pub fn is_model(&self) -> bool {
        !self.has_real_part
            && (0..self.dim())
                .all(|a| (0..self.dim()).all(|b| self.im[(a, b)] == if a == b { 1.0 } else { 0.0 }))
    }

    /// `v X v^T`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let m = self.dim();
        let mut acc = 0.0;
        for a in 0..m {
            let mut row = 0.0;
            for b in 0..m {
                row += self.im[(a, b)] * v[b];
            }
            acc += v[a] * row;
        }
        acc
    }

    /// `X v`.
    pub fn im_apply(&self, v: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|a| (0..m).map(|b| self.im[(a, b)] * v[b]).sum())
            .collect()
    }

    /// Total mass of the volume form `det Hess phi dx dy` over one cell,
    /// `(4 pi)^m det X`; the same for every invariant potential.
    pub fn volume(&self) -> f64 {
        (4.0 * PI).powi(self.dim() as i32) * self.det_im
    }

    /// Real lattice coordinates `(x, y)` of a complex point, `z = x + Z y`.
    pub fn lattice_coords(&self, z: &[Complex64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.dim();
        check_dim(m, z.len())?;
        let im = DVector::from_iterator(m, z.iter().map(|w| w.im));
        let y = &self.im_inv * im;
        let mut x: Vec<f64> = z.iter().map(|w| w.re).collect();
        if self.has_real_part {
            for a in 0..m {
                for b in 0..m {
                    x[a] -= self.re[(a, b)] * y[b];
                }
            }
        }
        Ok((x, y.iter().copied().collect()))
    }

    /// `z = x + Z y`.
    pub fn point(&self, x: &[f64], y: &[f64]) -> Vec<Complex64> {
        let m = self.dim();
        (0..m)
            .map(|a| {
                let mut z = Complex64::new(x[a], 0.0);
                for b in 0..m {
                    z += self.period[(a, b)] * y[b];
                }
                z
            })
            .collect()
    }

    /// Lattice generator `lambda_{idx}`; `0..m` are the unit vectors and
    /// `m..2m` the columns of `Z`.
    pub fn generator(&self, idx: usize) -> Vec<Complex64> {
        let m = self.dim();
        assert!(idx < 2 * m, "generator index out of range");
        if idx < m {
            (0..m)
                .map(|a| Complex64::new(if a == idx { 1.0 } else { 0.0 }, 0.0))
                .collect()
        } else {
            (0..m).map(|a| self.period[(a, idx - m)]).collect()
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Index `j` of a level-`k` theta function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThetaIndex {
    k: u32,
    j: Vec<u32>,
}

impl ThetaIndex {
    pub fn new(k: u32, j: Vec<u32>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("theta level k must be positive".into()));
        }
        if j.is_empty() {
            return Err(Error::InvalidInput(
                "theta index must have dimension >= 1".into(),
            ));
        }
        if let Some(bad) = j.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidInput(format!(
                "theta index component {bad} outside 0..{k}"
            )));
        }
        Ok(Self { k, j })
    }

    /// Reduces arbitrary integer components modulo `k`.
    pub fn from_residues(k: u32, j: &[i64]) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("theta level k must be positive".into()));
        }
        let kk = k as i64;
        Self::new(k, j.iter().map(|&c| c.rem_euclid(kk) as u32).collect())
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn components(&self) -> &[u32] {
        &self.j
    }

    pub fn dim(&self) -> usize {
        self.j.len()
    }

    /// Position in the lexicographic basis order.
    pub fn linear(&self) -> usize {
        self.j
            .iter()
            .fold(0usize, |acc, &c| acc * self.k as usize + c as usize)
    }
}

/// All `k^m` indices in lexicographic order (first component most significant).
pub fn theta_basis(lattice: &Lattice, k: u32) -> Result<Vec<ThetaIndex>> {
    basis_indices(lattice.dim(), k)
}

pub(crate) fn basis_indices(m: usize, k: u32) -> Result<Vec<ThetaIndex>> {
    if k == 0 {
        return Err(Error::InvalidInput("theta level k must be positive".into()));
    }
    let total = (k as usize).pow(m as u32);
    Ok((0..total)
        .map(|mut lin| {
            let mut j = vec![0u32; m];
            for slot in j.iter_mut().rev() {
                *slot = (lin % k as usize) as u32;
                lin /= k as usize;
            }
            ThetaIndex { k, j }
        })
        .collect())
}

/// Controls the truncation of theta lattice sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Bound on the omitted tail of the reduced (envelope-free) theta sum.
    pub tail_tol: f64,
    /// Largest admissible radius `|n|_inf` around the dominant term.
    pub max_radius: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_tol: 1e-14,
            max_radius: 64,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tol > 0.0) {
            return Err(Error::InvalidInput("tail_tol must be positive".into()));
        }
        if self.max_radius == 0 {
            return Err(Error::InvalidInput("max_radius must be positive".into()));
        }
        Ok(())
    }
}

/// `sum_{r > radius} ((2r+1)^m - (2r-1)^m) exp(-a (r - 1/2)^2)`.
///
/// Bounds the omitted part of a centered Gaussian lattice sum whose terms
/// satisfy `|term(n)| <= exp(-a |n + delta|^2)` with `|delta|_inf <= 1/2`.
pub(crate) fn gaussian_shell_tail(m: usize, a: f64, radius: usize) -> f64 {
    let mut tail = 0.0;
    let mut r = radius + 1;
    loop {
        let rf = r as f64;
        let shell = (2.0 * rf + 1.0).powi(m as i32) - (2.0 * rf - 1.0).powi(m as i32);
        let term = shell * (-a * (rf - 0.5) * (rf - 0.5)).exp();
        tail += term;
        if term < 1e-300 || (term <= tail * 1e-17 && a * (rf - 0.5) > 2.0 * m as f64) {
            break;
        }
        r += 1;
        if r > radius + 1_000_000 {
            break;
        }
    }
    tail
}

/// Smallest truncation radius certified by the Gaussian tail bound, with the
/// bound itself.
///
/// The radius is never below 1: when `l/k + y` sits half-way between two
/// integers the two nearest terms have equal modulus, and both are needed for
/// relative accuracy even when the absolute tail is negligible.
pub fn truncation_radius(
    lattice: &Lattice,
    k: u32,
    policy: &TruncationPolicy,
) -> Result<(usize, f64)> {
    policy.validate()?;
    if k == 0 {
        return Err(Error::InvalidInput("theta level k must be positive".into()));
    }
    let a = PI * k as f64 * lattice.lambda_min();
    let m = lattice.dim();
    for r in 1..=policy.max_radius {
        let tail = gaussian_shell_tail(m, a, r);
        if tail <= policy.tail_tol {
            return Ok((r, tail));
        }
    }
    let mut required = policy.max_radius + 1;
    while gaussian_shell_tail(m, a, required) > policy.tail_tol && required < 1 << 20 {
        required *= 2;
    }
    Err(Error::TruncationOverflow {
        required,
        max_radius: policy.max_radius,
    })
}

/// Reduced theta value `e^{log_scale} * value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedTheta {
    pub log_scale: f64,
    pub value: Complex64,
}

impl ReducedTheta {
    pub fn ln_abs_sq(&self) -> f64 {
        2.0 * self.log_scale + self.value.norm_sqr().ln()
    }
}

/// Evaluates the reduced theta function `exp(-pi k yXy) theta_l(x + Zy)` at
/// lattice coordinates with a fixed radius around the dominant term.
pub(crate) fn reduced_theta(
    lattice: &Lattice,
    k: u32,
    l: &[u32],
    x: &[f64],
    y: &[f64],
    radius: usize,
) -> ReducedTheta {
    let m = lattice.dim();
    let kf = k as f64;
    let center: Vec<f64> = (0..m).map(|a| l[a] as f64 / kf + y[a]).collect();
    let shift: Vec<f64> = center.iter().map(|c| -c.round()).collect();
    let re_zy: Vec<f64> = if lattice.has_real_part {
        (0..m)
            .map(|a| (0..m).map(|b| lattice.re[(a, b)] * y[b]).sum())
            .collect()
    } else {
        Vec::new()
    };
    let r = radius as i64;
    let side = 2 * radius + 1;
    let count = side.pow(m as u32);
    let mut exponents = Vec::with_capacity(count);
    let mut phases = Vec::with_capacity(count);
    let mut offset = vec![-r; m];
    let mut s = vec![0.0; m];
    let mut big_n = vec![0.0; m];
    let mut max_exp = f64::NEG_INFINITY;
    for _ in 0..count {
        for a in 0..m {
            let n = shift[a] + offset[a] as f64;
            s[a] = center[a] + n;
            big_n[a] = l[a] as f64 + kf * n;
        }
        let e = -PI * kf * lattice.quad_form(&s);
        let mut phase = 0.0;
        for a in 0..m {
            phase += big_n[a] * x[a];
        }
        if lattice.has_real_part {
            let mut quad = 0.0;
            for a in 0..m {
                phase += big_n[a] * re_zy[a];
                for b in 0..m {
                    quad += big_n[a] * lattice.re[(a, b)] * big_n[b];
                }
            }
            phase += 0.5 * quad / kf;
        }
        exponents.push(e);
        phases.push(2.0 * PI * phase);
        if e > max_exp {
            max_exp = e;
        }
        for a in (0..m).rev() {
            offset[a] += 1;
            if offset[a] <= r {
                break;
            }
            offset[a] = -r;
        }
    }
    let mut value = Complex64::new(0.0, 0.0);
    for (e, p) in exponents.iter().zip(&phases) {
        value += Complex64::from_polar((e - max_exp).exp(), *p);
    }
    ReducedTheta {
        log_scale: max_exp,
        value,
    }
}

/// Theta value together with the certified bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub radius: usize,
}

/// `theta_l(z)` truncated by the Gaussian tail bound of `policy`.
pub fn theta_eval(
    lattice: &Lattice,
    idx: &ThetaIndex,
    z: &[Complex64],
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    theta_eval_bounded(lattice, idx, z, policy).map(|t| t.value)
}

/// Like [`theta_eval`] but also reports the absolute tail bound of the raw
/// value (the reduced tail scaled by the Gaussian envelope).
pub fn theta_eval_bounded(
    lattice: &Lattice,
    idx: &ThetaIndex,
    z: &[Complex64],
    policy: &TruncationPolicy,
) -> Result<ThetaValue> {
    check_dim(lattice.dim(), idx.dim())?;
    if z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
        return Err(Error::InvalidInput("theta argument must be finite".into()));
    }
    let (x, y) = lattice.lattice_coords(z)?;
    let (radius, tail) = truncation_radius(lattice, idx.k, policy)?;
    let red = reduced_theta(lattice, idx.k, &idx.j, &x, &y, radius);
    let envelope = PI * idx.k as f64 * lattice.quad_form(&y);
    let scale = (envelope + red.log_scale).exp();
    Ok(ThetaValue {
        value: red.value * scale,
        tail_bound: tail * envelope.exp(),
        radius,
    })
}

/// Natural log of `|theta_l|^2 exp(-pi k yXy * 2)` at lattice coordinates,
/// i.e. of the squared reduced theta modulus.
pub fn ln_reduced_abs_sq(
    lattice: &Lattice,
    idx: &ThetaIndex,
    x: &[f64],
    y: &[f64],
    policy: &TruncationPolicy,
) -> Result<f64> {
    check_dim(lattice.dim(), idx.dim())?;
    let (radius, _) = truncation_radius(lattice, idx.k, policy)?;
    Ok(reduced_theta(lattice, idx.k, &idx.j, x, y, radius).ln_abs_sq())
}

/// `ln` of the squared reduced modulus for the whole level-`k` basis at
/// lattice coordinates, in lexicographic order.
pub fn reduced_log_norms(
    lattice: &Lattice,
    k: u32,
    x: &[f64],
    y: &[f64],
    policy: &TruncationPolicy,
) -> Result<Vec<f64>> {
    let m = lattice.dim();
    check_dim(m, x.len())?;
    check_dim(m, y.len())?;
    let (radius, _) = truncation_radius(lattice, k, policy)?;
    Ok(basis_indices(m, k)?
        .iter()
        .map(|idx| reduced_theta(lattice, k, &idx.j, x, y, radius).ln_abs_sq())
        .collect())
}

/// Pointwise hermitian norm `|theta_j(z)|^2 exp(-k phi(y))` under `h^k`.
pub fn hermitian_norm_sq(
    lattice: &Lattice,
    idx: &ThetaIndex,
    z: &[Complex64],
    potential: &KahlerPotential,
    policy: &TruncationPolicy,
) -> Result<f64> {
    if potential.lattice() != lattice {
        return Err(Error::InvalidInput(
            "potential is defined on a different lattice".into(),
        ));
    }
    let (x, y) = lattice.lattice_coords(z)?;
    let ln = ln_reduced_abs_sq(lattice, idx, &x, &y, policy)?;
    let psi = potential.psi().eval(&y);
    Ok((ln - 4.0 * PI * idx.k as f64 * psi).exp())
}
