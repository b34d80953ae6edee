//! Least-squares fits across a ladder of levels `k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition numbers above this make the fitted coefficients meaningless.
pub const MAX_CONDITION: f64 = 1e12;

/// Coefficients of `c_0 + c_1/k + ... + c_p/k^p` fitted to a ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticFit {
    pub k_ladder: Vec<u32>,
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// `value - model` at each ladder point.
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    /// 2-norm condition number of the scaled Vandermonde matrix.
    pub condition: f64,
}

impl AsymptoticFit {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, q: usize) -> f64 {
        self.coefficients.get(q).copied().unwrap_or(0.0)
    }

    /// `value - c_0 - c_1/k` at each ladder point.
    pub fn beyond_first_order(&self) -> Vec<f64> {
        self.k_ladder
            .iter()
            .zip(&self.values)
            .map(|(&k, v)| v - self.coefficient(0) - self.coefficient(1) / k as f64)
            .collect()
    }
}

/// The default order: interpolation through `c_0..c_4`, or fewer when the
/// ladder is short.
pub fn default_order(ladder_len: usize) -> usize {
    ladder_len.saturating_sub(1).min(4)
}

fn check_ladder(ks: &[u32], values: &[f64]) -> Result<()> {
    if ks.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            got: values.len(),
        });
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidInput(
            "ladder must hold positive levels".into(),
        ));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "ladder must be strictly increasing".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("fit values must be finite".into()));
    }
    Ok(())
}

/// Fits `sum_{q <= order} c_q k^{-q}` by SVD least squares in the scaled
/// variable `k_min / k`.
pub fn fit_inverse_powers(ks: &[u32], values: &[f64], order: usize) -> Result<AsymptoticFit> {
    check_ladder(ks, values)?;
    if order + 1 > ks.len() {
        return Err(Error::InvalidInput(format!(
            "order {order} needs at least {} ladder points, got {}",
            order + 1,
            ks.len()
        )));
    }
    let kmin = ks[0] as f64;
    let n = ks.len();
    let cols = order + 1;
    let a = DMatrix::from_fn(n, cols, |i, q| (kmin / ks[i] as f64).powi(q as i32));
    let b = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::FitIllConditioned { condition });
    }
    let scaled = svd
        .solve(&b, 0.0)
        .map_err(|msg| Error::InvalidInput(msg.to_string()))?;
    let coefficients: Vec<f64> = (0..cols).map(|q| scaled[q] * kmin.powi(q as i32)).collect();
    let model = &a * &scaled;
    let residuals: Vec<f64> = (0..n).map(|i| values[i] - model[i]).collect();
    let residual_norm = residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(AsymptoticFit {
        k_ladder: ks.to_vec(),
        values: values.to_vec(),
        coefficients,
        residuals,
        residual_norm,
        condition,
    })
}

/// `ln |v| = intercept + slope ln k` fitted by least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn power_law(ks: &[u32], values: &[f64]) -> Result<PowerLaw> {
    check_ladder(ks, values)?;
    if ks.len() < 2 {
        return Err(Error::InvalidInput("power law needs two points".into()));
    }
    if values.contains(&0.0) {
        return Err(Error::InvalidInput("power law needs nonzero values".into()));
    }
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(PowerLaw {
        slope,
        intercept,
        r_squared,
    })
}
