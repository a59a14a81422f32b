//! Differencing-order tests: augmented Dickey–Fuller for `d`, Canova–Hansen
//! for the seasonal `D`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::difference;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfResult {
    pub statistic: f64,
    /// Observations used in the test regression.
    pub nobs: usize,
    pub critical_5pct: f64,
    /// True when the unit-root null is rejected, i.e. the series looks stationary.
    pub reject: bool,
}

/// MacKinnon (2010) response-surface 5% critical value, constant only.
pub fn adf_critical_5pct(nobs: usize) -> f64 {
    let t = nobs as f64;
    -2.86154 - 2.8903 / t - 4.234 / (t * t) - 40.040 / (t * t * t)
}

fn is_constant(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// ADF regression of `Δy_t` on a constant, `y_{t-1}` and `max_lag` lagged
/// differences. A constant series is stationary by convention.
pub fn adf_test(series: &[f64], max_lag: usize) -> Result<AdfResult> {
    let n = series.len();
    if n < max_lag + 10 {
        return Err(Error::SeriesTooShort {
            needed: max_lag + 10,
            got: n,
        });
    }
    let dy = difference(series, 1, 1);
    let nobs = dy.len() - max_lag;
    let critical_5pct = adf_critical_5pct(nobs);
    if is_constant(series) {
        return Ok(AdfResult {
            statistic: f64::NEG_INFINITY,
            nobs,
            critical_5pct,
            reject: true,
        });
    }
    let k = max_lag + 2;
    let x = DMatrix::from_fn(nobs, k, |r, c| {
        let t = r + max_lag;
        match c {
            0 => 1.0,
            1 => series[t],
            _ => dy[t - (c - 1)],
        }
    });
    let y = DVector::from_fn(nobs, |r, _| dy[r + max_lag]);
    let statistic = ols_t_stat(&x, &y, 1)?;
    Ok(AdfResult {
        statistic,
        nobs,
        critical_5pct,
        reject: statistic < critical_5pct,
    })
}

fn ols_t_stat(x: &DMatrix<f64>, y: &DVector<f64>, coef: usize) -> Result<f64> {
    let xtx = x.transpose() * x;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular test regression".into()))?;
    let beta = &inv * x.transpose() * y;
    let resid = y - x * &beta;
    let dof = (x.nrows() - x.ncols()) as f64;
    let s2 = resid.norm_squared() / dof;
    let se = (s2 * inv[(coef, coef)]).sqrt();
    Ok(if se > 0.0 {
        beta[coef] / se
    } else if beta[coef] < 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

/// Default lag order `trunc((n-1)^(1/3))`.
pub fn default_adf_lag(n: usize) -> usize {
    ((n.saturating_sub(1)) as f64).cbrt().trunc() as usize
}

/// Smallest `d ∈ {0,1,2}` whose differenced series rejects a unit root.
pub fn select_d(series: &[f64]) -> usize {
    let mut x = series.to_vec();
    for d in 0..2 {
        match adf_test(&x, default_adf_lag(x.len())) {
            Ok(r) if r.reject => return d,
            Ok(_) => {}
            // Too short to test further: keep what we have.
            Err(_) => return d,
        }
        x = difference(&x, 1, 1);
    }
    2
}

/// Canova–Hansen critical values at 5% for `m = 2..=12`.
const CH_CRITICAL: [f64; 11] = [
    0.4617146, 0.7479655, 1.0007818, 1.2375350, 1.4625240, 1.6920200, 1.9043096, 2.1169602,
    2.3268562, 2.5406922, 2.7391007,
];

pub fn ch_critical_5pct(m: usize) -> f64 {
    if (2..=12).contains(&m) {
        CH_CRITICAL[m - 2]
    } else {
        0.269 * (m as f64).powf(0.928)
    }
}

/// Fourier seasonal regressors: the first `m - 1` of
/// `cos(2πit/m), sin(2πit/m)` for `i = 1..`, with `t` starting at 1.
fn seasonal_dummies(n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m - 1, |r, c| {
        let t = (r + 1) as f64;
        let i = (c / 2 + 1) as f64;
        let arg = 2.0 * std::f64::consts::PI * i * t / m as f64;
        if c % 2 == 0 {
            arg.cos()
        } else {
            arg.sin()
        }
    })
}

/// Canova–Hansen statistic for the stability of the seasonal pattern.
/// `None` when the test does not apply (`m < 2`, `n < 2m` or constant input).
pub fn canova_hansen(series: &[f64], m: usize) -> Option<f64> {
    let n = series.len();
    if m < 2 || n < 2 * m || is_constant(series) {
        return None;
    }
    let r1 = seasonal_dummies(n, m);
    let mut design = DMatrix::from_element(n, m, 1.0);
    design.view_mut((0, 1), (n, m - 1)).copy_from(&r1);
    let y = DVector::from_column_slice(series);
    let beta = design.clone().svd(true, true).solve(&y, 1e-12).ok()?;
    let resid = &y - &design * beta;

    let mut fhataux = r1;
    for (r, mut row) in fhataux.row_iter_mut().enumerate() {
        row *= resid[r];
    }
    let mut fhat = fhataux.clone();
    for r in 1..n {
        let prev = fhat.row(r - 1).clone_owned();
        let mut row = fhat.row_mut(r);
        row += prev;
    }

    let ltrunc = (m as f64 * (n as f64 / 100.0).powf(0.25)).round() as usize;
    let k = m - 1;
    let mut omnw = DMatrix::zeros(k, k);
    for lag in 1..=ltrunc.min(n - 1) {
        let w = 1.0 - lag as f64 / (ltrunc as f64 + 1.0);
        let lead = fhataux.rows(lag, n - lag);
        let back = fhataux.rows(0, n - lag);
        omnw += (lead.transpose() * back) * w;
    }
    let omfhat = (fhataux.transpose() * &fhataux + &omnw + omnw.transpose()) / n as f64;
    let inv = omfhat.try_inverse()?;
    let stat = (inv * fhat.transpose() * &fhat).trace() / (n * n) as f64;
    stat.is_finite().then_some(stat)
}

/// `D = 1` when Canova–Hansen rejects seasonal stability at 5%.
pub fn select_seasonal_d(series: &[f64], m: usize) -> usize {
    match canova_hansen(series, m) {
        Some(stat) if stat > ch_critical_5pct(m) => 1,
        _ => 0,
    }
}
