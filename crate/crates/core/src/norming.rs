//! Norming constants `rho_k(j) = ||theta_j||^2` under `h^k` and the volume
//! form `det Hess phi dx dy`, with their ratios along a geodesic.
//!
//! Integrating over `x` first leaves a Gaussian lattice sum in `y`, so
//!
//! ```text
//! rho_k(j) = int_{[0,1]^m} sum_n exp(-2 pi k s X s) exp(-4 pi k psi(y)) det Hess phi(y) dy,
//! s = y + j/k + n,
//! ```
//!
//! which is evaluated by the trapezoid rule on the periodized integrand.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fit::{fit_inverse_powers, power_law, AsymptoticFit, PowerLaw};
use crate::lattice::{
    basis_indices, gaussian_shell_tail, truncation_radius, Lattice, ThetaIndex, TruncationPolicy,
};
use crate::legendre::GeodesicSegment;
use crate::potential::ConvexPotential;

/// Relative change tolerated when the quadrature grid is doubled.
pub const CONVERGENCE_TOL: f64 = 1e-10;
/// Relative bound required of the omitted lattice images.
pub const IMAGE_TAIL_TOL: f64 = 1e-15;
const MAX_PERIODIZATION_RADIUS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    /// Trapezoid points per dimension of the coarse grid; results are taken on
    /// the doubled grid after checking agreement with the coarse one.
    pub points_per_dim: usize,
    /// Minimum number of lattice images summed on each side; raised when the
    /// image tail bound demands it.
    pub periodization_radius: usize,
}

impl QuadratureSpec {
    /// `M = max(64, ceil(8 sqrt k))`, radius 3.
    pub fn for_level(k: u32) -> Self {
        Self::for_level_scaled(k, 1.0)
    }

    pub fn for_level_scaled(k: u32, scale: f64) -> Self {
        let base = (8.0 * (k as f64).sqrt()).ceil().max(64.0);
        Self {
            points_per_dim: (base * scale).ceil() as usize,
            periodization_radius: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_dim < 16 {
            return Err(Error::InvalidInput(format!(
                "quadrature needs at least 16 points per dimension, got {}",
                self.points_per_dim
            )));
        }
        if self.periodization_radius == 0 {
            return Err(Error::InvalidInput(
                "periodization radius must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Grid resolution chosen per level; `scale` multiplies the default point count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePlan {
    pub scale: f64,
}

impl Default for QuadraturePlan {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl QuadraturePlan {
    pub fn spec(&self, k: u32) -> QuadratureSpec {
        QuadratureSpec::for_level_scaled(k, self.scale)
    }
}

/// `ln(weight)` on the fine grid, `weight = exp(-4 pi k psi) det Hess phi`.
struct WeightGrid {
    points: usize,
    ln_w: Vec<f64>,
}

fn grid_point(m: usize, points: usize, mut lin: usize) -> Vec<f64> {
    let mut y = vec![0.0; m];
    for slot in y.iter_mut().rev() {
        *slot = (lin % points) as f64 / points as f64;
        lin /= points;
    }
    y
}

fn weight_grid<P: ConvexPotential + ?Sized>(pot: &P, k: u32, points: usize) -> Result<WeightGrid> {
    let m = pot.lattice().dim();
    let total = points.pow(m as u32);
    let kf = k as f64;
    let ln_w = (0..total)
        .into_par_iter()
        .map(|lin| {
            let y = grid_point(m, points, lin);
            let (psi, ln_det) = pot.weight_parts(&y)?;
            Ok(-4.0 * PI * kf * psi + ln_det)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(WeightGrid { points, ln_w })
}

/// Smallest radius `>= min_radius` whose image tail is below
/// [`IMAGE_TAIL_TOL`] relative to the integral.
fn image_radius(lat: &Lattice, k: u32, min_radius: usize, ln_w_spread: f64) -> Result<usize> {
    let m = lat.dim();
    let a = 2.0 * PI * k as f64 * lat.lambda_min();
    // Lower bound of the integral relative to the weight maximum.
    let ln_scale = ln_w_spread + 0.5 * m as f64 * (2.0 * k as f64).ln() + 0.5 * lat.det_im().ln();
    for r in min_radius..=MAX_PERIODIZATION_RADIUS {
        let tail = gaussian_shell_tail(m, a, r);
        if tail.ln() + ln_scale < IMAGE_TAIL_TOL.ln() {
            return Ok(r);
        }
    }
    Err(Error::InvalidInput(format!(
        "lattice image tail not below {IMAGE_TAIL_TOL:e} within radius {MAX_PERIODIZATION_RADIUS}"
    )))
}

fn is_diagonal(x: &DMatrix<f64>) -> bool {
    let m = x.nrows();
    (0..m).all(|a| (0..m).all(|b| a == b || x[(a, b)] == 0.0))
}

/// Periodized Gaussian `sum_n exp(-a (c + n)^2)` over `|c + n| <= radius + 1/2`.
fn periodized_gaussian(a: f64, c: f64, radius: usize) -> f64 {
    let c0 = c - c.round();
    let r = radius as i64;
    (-r..=r)
        .map(|n| {
            let s = c0 + n as f64;
            (-a * s * s).exp()
        })
        .sum()
}

/// `ln rho_k(j)` for every `j` in `js` from the grid restricted by `stride`.
fn log_rho_on_grid(
    lat: &Lattice,
    k: u32,
    grid: &WeightGrid,
    stride: usize,
    radius: usize,
    js: &[ThetaIndex],
) -> Vec<f64> {
    let m = lat.dim();
    let fine = grid.points;
    let points = fine / stride;
    let kf = k as f64;
    let total = points.pow(m as u32);
    let fine_index = |lin: usize| -> usize {
        let mut rest = lin;
        let mut idx = 0;
        let mut mult = 1;
        for _ in 0..m {
            idx += (rest % points) * stride * mult;
            rest /= points;
            mult *= fine;
        }
        idx
    };
    let ln_w: Vec<f64> = (0..total).map(|lin| grid.ln_w[fine_index(lin)]).collect();
    let shift = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln_w.iter().map(|v| (v - shift).exp()).collect();
    let norm = shift - m as f64 * (points as f64).ln();
    let x = lat.im_part();

    if is_diagonal(x) {
        // The Gaussian factorizes: contract the weight tensor one axis at a time.
        let kk = k as usize;
        let mut tensor = w;
        let mut shape = vec![points; m];
        for axis in 0..m {
            let a = 2.0 * PI * kf * x[(axis, axis)];
            let table: Vec<f64> = (0..points)
                .flat_map(|i| {
                    let y = i as f64 / points as f64;
                    (0..kk).map(move |j| periodized_gaussian(a, y + j as f64 / kf, radius))
                })
                .collect();
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let mut next = vec![0.0; outer * kk * inner];
            for o in 0..outer {
                for i in 0..points {
                    let row = &table[i * kk..(i + 1) * kk];
                    let src = &tensor[(o * points + i) * inner..(o * points + i + 1) * inner];
                    for (j, g) in row.iter().enumerate() {
                        let dst = &mut next[(o * kk + j) * inner..(o * kk + j + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += g * s;
                        }
                    }
                }
            }
            tensor = next;
            shape[axis] = kk;
        }
        return js
            .iter()
            .map(|idx| tensor[idx.linear()].ln() + norm)
            .collect();
    }

    js.iter()
        .map(|idx| {
            let j = idx.components();
            let r = radius as i64;
            let side = 2 * radius + 1;
            let images = side.pow(m as u32);
            let mut acc = 0.0;
            let mut s = vec![0.0; m];
            for lin in 0..total {
                let y = grid_point(m, points, lin);
                let c: Vec<f64> = (0..m)
                    .map(|a| {
                        let v = y[a] + j[a] as f64 / kf;
                        v - v.round()
                    })
                    .collect();
                let mut g = 0.0;
                for img in 0..images {
                    let mut rest = img;
                    for a in 0..m {
                        s[a] = c[a] + ((rest % side) as i64 - r) as f64;
                        rest /= side;
                    }
                    g += (-2.0 * PI * kf * lat.quad_form(&s)).exp();
                }
                acc += w[lin] * g;
            }
            acc.ln() + norm
        })
        .collect()
}

/// `ln rho_k(j)` for the requested indices, checked against the coarse grid.
pub fn log_norming_constants_for<P: ConvexPotential + ?Sized>(
    pot: &P,
    k: u32,
    js: &[ThetaIndex],
    q: &QuadratureSpec,
) -> Result<Vec<f64>> {
    q.validate()?;
    let lat = pot.lattice();
    for idx in js {
        if idx.level() != k || idx.dim() != lat.dim() {
            return Err(Error::InvalidInput(format!(
                "index {:?} does not belong to the level-{k} basis",
                idx.components()
            )));
        }
    }
    let grid = weight_grid(pot, k, 2 * q.points_per_dim)?;
    let max = grid.ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = grid.ln_w.iter().copied().fold(f64::INFINITY, f64::min);
    let radius = image_radius(lat, k, q.periodization_radius, max - min + 1.0)?;
    let fine = log_rho_on_grid(lat, k, &grid, 1, radius, js);
    let coarse = log_rho_on_grid(lat, k, &grid, 2, radius, js);
    for ((f, c), idx) in fine.iter().zip(&coarse).zip(js) {
        let change = (f - c).exp_m1().abs();
        if !(change <= CONVERGENCE_TOL) {
            return Err(Error::QuadratureNotConverged {
                k,
                j: idx.components().to_vec(),
                relative_change: change,
            });
        }
    }
    Ok(fine)
}

/// `ln rho_k(j)` for the whole basis in lexicographic order.
pub fn log_norming_constants<P: ConvexPotential + ?Sized>(
    pot: &P,
    k: u32,
    q: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let js = basis_indices(pot.lattice().dim(), k)?;
    log_norming_constants_for(pot, k, &js, q)
}

/// `rho_k(j) = ||theta_j||^2_{h^k}`.
pub fn norming_constant<P: ConvexPotential + ?Sized>(
    pot: &P,
    idx: &ThetaIndex,
    q: &QuadratureSpec,
) -> Result<f64> {
    let v = log_norming_constants_for(pot, idx.level(), std::slice::from_ref(idx), q)?;
    Ok(v[0].exp())
}

/// Flat closed form `(4 pi)^m sqrt(det X) / (2k)^{m/2}`.
pub fn flat_norming_constant(lat: &Lattice, k: u32) -> f64 {
    let m = lat.dim() as i32;
    (4.0 * PI).powi(m) * lat.det_im().sqrt() / (2.0 * k as f64).powf(m as f64 / 2.0)
}

/// One level's reduced theta data at a fixed `y`: coefficients and frequencies
/// for the `x`-dependence `sum_n c_n e^{2 pi i N_n.x}`.
struct ThetaRow {
    coeffs: Vec<Complex64>,
    freqs: Vec<Vec<i64>>,
}

fn theta_rows(lat: &Lattice, k: u32, y: &[f64], radius: usize, js: &[ThetaIndex]) -> Vec<ThetaRow> {
    let m = lat.dim();
    let kf = k as f64;
    let re = lat.re_part();
    let re_zy: Vec<f64> = (0..m)
        .map(|a| (0..m).map(|b| re[(a, b)] * y[b]).sum())
        .collect();
    let r = radius as i64;
    let side = 2 * radius + 1;
    let count = side.pow(m as u32);
    js.iter()
        .map(|idx| {
            let l = idx.components();
            let shift: Vec<i64> = (0..m)
                .map(|a| -((l[a] as f64 / kf + y[a]).round() as i64))
                .collect();
            let mut coeffs = Vec::with_capacity(count);
            let mut freqs = Vec::with_capacity(count);
            let mut s = vec![0.0; m];
            for lin in 0..count {
                let mut rest = lin;
                let mut big_n = vec![0i64; m];
                for a in 0..m {
                    let n = shift[a] + (rest % side) as i64 - r;
                    rest /= side;
                    big_n[a] = l[a] as i64 + k as i64 * n;
                    s[a] = big_n[a] as f64 / kf + y[a];
                }
                let amp = -PI * kf * lat.quad_form(&s);
                let mut phase = 0.0;
                let mut quad = 0.0;
                for a in 0..m {
                    let na = big_n[a] as f64;
                    phase += na * re_zy[a];
                    for b in 0..m {
                        quad += na * re[(a, b)] * big_n[b] as f64;
                    }
                }
                phase += 0.5 * quad / kf;
                coeffs.push(Complex64::from_polar(amp.exp(), 2.0 * PI * phase));
                freqs.push(big_n);
            }
            ThetaRow { coeffs, freqs }
        })
        .collect()
}

/// Gram matrix of the level-`k` basis by trapezoid quadrature over both `x`
/// and `y`, using `points_per_dim` points in `x` and the checked doubled grid
/// in `y`. Only an orthogonality oracle; norming constants are computed without
/// the `x` integral.
pub fn gram_matrix<P: ConvexPotential + ?Sized>(
    pot: &P,
    k: u32,
    q: &QuadratureSpec,
) -> Result<DMatrix<Complex64>> {
    q.validate()?;
    let lat = pot.lattice();
    let m = lat.dim();
    let js = basis_indices(m, k)?;
    let n = js.len();
    let (radius, _) = truncation_radius(lat, k, &TruncationPolicy::default())?;
    let mx = q.points_per_dim;
    let grid = weight_grid(pot, k, 2 * mx)?;
    let shift = grid.ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let roots: Vec<Complex64> = (0..mx)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / mx as f64))
        .collect();
    let x_total = mx.pow(m as u32);
    let fine = grid.points;
    let y_total = fine.pow(m as u32);

    // Per fine y-point contribution, ordered for a deterministic reduction.
    let per_y: Vec<DMatrix<Complex64>> = (0..y_total)
        .into_par_iter()
        .map(|lin| {
            let y = grid_point(m, fine, lin);
            let rows = theta_rows(lat, k, &y, radius, &js);
            let w = (grid.ln_w[lin] - shift).exp();
            let mut g = DMatrix::<Complex64>::zeros(n, n);
            let mut vals = vec![Complex64::new(0.0, 0.0); n];
            let mut xi = vec![0usize; m];
            for xl in 0..x_total {
                let mut rest = xl;
                for slot in xi.iter_mut().rev() {
                    *slot = rest % mx;
                    rest /= mx;
                }
                for (v, row) in vals.iter_mut().zip(&rows) {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (c, f) in row.coeffs.iter().zip(&row.freqs) {
                        let mut e: i64 = 0;
                        for a in 0..m {
                            e += f[a] * xi[a] as i64;
                        }
                        acc += c * roots[e.rem_euclid(mx as i64) as usize];
                    }
                    *v = acc;
                }
                for a in 0..n {
                    for b in 0..n {
                        g[(a, b)] += vals[a] * vals[b].conj();
                    }
                }
            }
            g * Complex64::new(w, 0.0)
        })
        .collect();

    let is_coarse = |lin: usize| -> bool {
        let mut rest = lin;
        (0..m).all(|_| {
            let ok = (rest % fine).is_multiple_of(2);
            rest /= fine;
            ok
        })
    };
    let mut g_fine = DMatrix::<Complex64>::zeros(n, n);
    let mut g_coarse = DMatrix::<Complex64>::zeros(n, n);
    for (lin, g) in per_y.iter().enumerate() {
        g_fine += g;
        if is_coarse(lin) {
            g_coarse += g;
        }
    }
    let scale_fine = (shift - m as f64 * ((fine as f64).ln() + (mx as f64).ln())).exp();
    let scale_coarse = scale_fine * 2f64.powi(m as i32);
    let g_fine = g_fine * Complex64::new(scale_fine, 0.0);
    let g_coarse = g_coarse * Complex64::new(scale_coarse, 0.0);
    for a in 0..n {
        for b in 0..n {
            let norm = (g_fine[(a, a)].re * g_fine[(b, b)].re).sqrt();
            let change = (g_fine[(a, b)] - g_coarse[(a, b)]).norm() / norm;
            if !(change <= CONVERGENCE_TOL) {
                return Err(Error::QuadratureNotConverged {
                    k,
                    j: js[a].components().to_vec(),
                    relative_change: change,
                });
            }
        }
    }
    Ok(g_fine)
}

/// `max_{a != b} |G_ab| / sqrt(G_aa G_bb)`.
pub fn max_normalized_off_diagonal(g: &DMatrix<Complex64>) -> f64 {
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a != b {
                worst = worst.max(g[(a, b)].norm() / (g[(a, a)].re * g[(b, b)].re).sqrt());
            }
        }
    }
    worst
}

/// `ln rho_k(j, t)` over the basis on a grid of times along a geodesic.
#[derive(Debug, Clone, PartialEq)]
pub struct NormingTable {
    pub k: u32,
    pub t_grid: Vec<f64>,
    /// `log_rho[t][j]`, `j` in lexicographic order.
    pub log_rho: Vec<Vec<f64>>,
}

impl NormingTable {
    /// The grid must contain both endpoints.
    pub fn build(
        seg: &GeodesicSegment,
        k: u32,
        t_grid: &[f64],
        q: &QuadratureSpec,
    ) -> Result<Self> {
        if !t_grid.contains(&0.0) || !t_grid.contains(&1.0) {
            return Err(Error::InvalidInput("t-grid must contain 0 and 1".into()));
        }
        if t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput("t-grid must lie in [0, 1]".into()));
        }
        let log_rho = t_grid
            .par_iter()
            .map(|&t| log_norming_constants(&seg.blend(t)?, k, q))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            t_grid: t_grid.to_vec(),
            log_rho,
        })
    }

    fn t_slot(&self, t: f64) -> Result<usize> {
        self.t_grid
            .iter()
            .position(|&s| s == t)
            .ok_or_else(|| Error::InvalidInput(format!("t = {t} is not in the table grid")))
    }

    pub fn rho(&self, idx: &ThetaIndex, t: f64) -> Result<f64> {
        Ok(self.log_rho[self.t_slot(t)?][idx.linear()].exp())
    }

    /// `ln R_k(j, t)`.
    pub fn log_ratio_rk(&self, idx: &ThetaIndex, t: f64) -> Result<f64> {
        let j = idx.linear();
        let lt = self.log_rho[self.t_slot(t)?][j];
        let l0 = self.log_rho[self.t_slot(0.0)?][j];
        let l1 = self.log_rho[self.t_slot(1.0)?][j];
        Ok(log_ratio(lt, l0, l1, t))
    }

    pub fn ratio_rk(&self, idx: &ThetaIndex, t: f64) -> Result<f64> {
        Ok(self.log_ratio_rk(idx, t)?.exp())
    }
}

/// `ln rho_t - (1-t) ln rho_0 - t ln rho_1`; exactly zero at `t in {0, 1}`.
pub(crate) fn log_ratio(lt: f64, l0: f64, l1: f64, t: f64) -> f64 {
    lt - (1.0 - t) * l0 - t * l1
}

/// `R_k(j, t) = rho_k(j,t) / (rho_k(j,0)^{1-t} rho_k(j,1)^t)`.
pub fn ratio_rk(table: &NormingTable, idx: &ThetaIndex, t: f64) -> Result<f64> {
    table.ratio_rk(idx, t)
}

/// `R_inf(mu, t)`, the stationary-phase limit of `R_k`.
pub fn ratio_rinf(seg: &GeodesicSegment, mu: &[f64], t: f64) -> Result<f64> {
    seg.ratio_rinf(mu, t)
}

/// Stationary point `mu = -4 pi X j / k` of the `rho_k(j)` integrand, reduced
/// into the cell `4 pi X [0,1)^m`.
pub fn index_moment(lat: &Lattice, idx: &ThetaIndex) -> Vec<f64> {
    let k = idx.level();
    let nu: Vec<f64> = idx
        .components()
        .iter()
        .map(|&j| ((k - j) % k) as f64 / k as f64)
        .collect();
    lat.im_apply(&nu).iter().map(|v| 4.0 * PI * v).collect()
}

/// `R_k` against `R_inf` for every index of one level at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioComparison {
    pub k: u32,
    pub t: f64,
    pub rk: Vec<f64>,
    pub rinf: Vec<f64>,
    /// `log_rho[s][j]` at `s = 0, t, 1`.
    pub log_rho: [Vec<f64>; 3],
}

impl RatioComparison {
    pub fn max_abs_deviation(&self) -> f64 {
        self.rk
            .iter()
            .zip(&self.rinf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn compare_ratios(
    seg: &GeodesicSegment,
    k: u32,
    t: f64,
    q: &QuadratureSpec,
) -> Result<RatioComparison> {
    let lat = seg.lattice();
    let js = basis_indices(lat.dim(), k)?;
    let l0 = log_norming_constants(&seg.blend(0.0)?, k, q)?;
    let l1 = log_norming_constants(&seg.blend(1.0)?, k, q)?;
    let lt = log_norming_constants(&seg.blend(t)?, k, q)?;
    let blend = seg.blend(t)?;
    let rinf = js
        .par_iter()
        .map(|idx| Ok(blend.ln_det_ratio(&index_moment(lat, idx))?.exp()))
        .collect::<Result<Vec<f64>>>()?;
    let rk = (0..js.len())
        .map(|j| log_ratio(lt[j], l0[j], l1[j], t).exp())
        .collect();
    Ok(RatioComparison {
        k,
        t,
        rk,
        rinf,
        log_rho: [l0, lt, l1],
    })
}

/// Convergence of `R_k / R_inf - 1` at a fixed point along a ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub t: f64,
    /// Target `-j/k` modulo 1 (the moment cell coordinate of `mu*`).
    pub nu_star: Vec<f64>,
    pub indices: Vec<ThetaIndex>,
    pub rk: Vec<f64>,
    pub rinf: Vec<f64>,
    pub relative_deviation: Vec<f64>,
    pub fit: AsymptoticFit,
    /// Power law of `|R_k / R_inf - 1|`; `None` when all deviations vanish.
    pub decay: Option<PowerLaw>,
}

/// For each `k` picks the index whose moment `-j/k mod 1` is nearest to
/// `nu_star`, and fits `R_k / R_inf - 1` in powers of `1/k`.
pub fn regularity_check(
    seg: &GeodesicSegment,
    k_ladder: &[u32],
    t: f64,
    nu_star: &[f64],
    plan: &QuadraturePlan,
) -> Result<RegularityReport> {
    let lat = seg.lattice();
    let m = lat.dim();
    if nu_star.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: nu_star.len(),
        });
    }
    if k_ladder.len() < 4 {
        return Err(Error::InvalidInput(
            "regularity check needs at least 4 levels".into(),
        ));
    }
    let blend = seg.blend(t)?;
    let rows = k_ladder
        .par_iter()
        .map(|&k| {
            let kk = k as i64;
            let j: Vec<i64> = nu_star
                .iter()
                .map(|nu| (-(nu * k as f64).round() as i64).rem_euclid(kk))
                .collect();
            let idx = ThetaIndex::from_residues(k, &j)?;
            let q = plan.spec(k);
            let one = std::slice::from_ref(&idx);
            let l0 = log_norming_constants_for(&seg.blend(0.0)?, k, one, &q)?[0];
            let l1 = log_norming_constants_for(&seg.blend(1.0)?, k, one, &q)?[0];
            let lt = log_norming_constants_for(&seg.blend(t)?, k, one, &q)?[0];
            let rk = log_ratio(lt, l0, l1, t).exp();
            let rinf = blend.ln_det_ratio(&index_moment(lat, &idx))?.exp();
            Ok((idx, rk, rinf))
        })
        .collect::<Result<Vec<_>>>()?;
    let indices: Vec<ThetaIndex> = rows.iter().map(|r| r.0.clone()).collect();
    let rk: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let rinf: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let relative_deviation: Vec<f64> = rk.iter().zip(&rinf).map(|(a, b)| a / b - 1.0).collect();
    let fit = fit_inverse_powers(
        k_ladder,
        &relative_deviation,
        crate::fit::default_order(k_ladder.len()),
    )?;
    let decay = if relative_deviation.iter().all(|&d| d != 0.0) {
        Some(power_law(k_ladder, &relative_deviation)?)
    } else {
        None
    };
    Ok(RegularityReport {
        t,
        nu_star: nu_star.to_vec(),
        indices,
        rk,
        rinf,
        relative_deviation,
        fit,
        decay,
    })
}
