//! Conditional-sum-of-squares estimation.
//!
//! The differenced series is standardized before optimization; the
//! intercept is an offset on that scale so the zero start sits at the sample
//! mean. Pre-sample values are taken as zero and every observation of the
//! differenced series enters the objective, which keeps AIC comparable
//! across orders with different lag spans.

use crate::error::{Error, Result};
use crate::stats::{mean, variance};

use super::nelder_mead::{minimize, NelderMeadOptions};
use super::{difference_order, SarimaFit, SarimaOrder};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub optimizer: NelderMeadOptions,
}

/// Expands `(1 - Σ a_i B^i)(1 - Σ s_j B^{jm})` into lag coefficients `c`
/// with the polynomial `1 - Σ c_l B^l` (`c[0]` unused). With `sign = -1`
/// the moving-average form `(1 + …)(1 + …)` is produced instead.
fn expand(short: &[f64], seasonal: &[f64], m: usize, sign: f64) -> Vec<f64> {
    let span = short.len() + m * seasonal.len();
    // Work with full polynomials 1 + Σ coef_l B^l.
    let mut a = vec![0.0; short.len() + 1];
    a[0] = 1.0;
    for (i, v) in short.iter().enumerate() {
        a[i + 1] = -sign * v;
    }
    let mut s = vec![0.0; m * seasonal.len() + 1];
    s[0] = 1.0;
    for (j, v) in seasonal.iter().enumerate() {
        s[(j + 1) * m] = -sign * v;
    }
    let mut prod = vec![0.0; span + 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in s.iter().enumerate() {
            prod[i + j] += x * y;
        }
    }
    prod.iter().map(|v| -sign * v).collect()
}

/// True when every root of `1 - Σ c_i z^i` lies strictly outside the unit
/// circle (pass the negated coefficients for a moving-average factor).
/// Step-down recursion: the polynomial is stable iff every reflection
/// coefficient has magnitude below one.
pub fn is_stationary_factor(coefs: &[f64]) -> bool {
    if coefs.iter().any(|c| !c.is_finite()) {
        return false;
    }
    let mut cur = coefs.to_vec();
    while let Some(&r) = cur.last() {
        if r.abs() >= 1.0 {
            return false;
        }
        let j = cur.len();
        let denom = 1.0 - r * r;
        cur = (0..j - 1)
            .map(|i| (cur[i] + r * cur[j - 2 - i]) / denom)
            .collect();
    }
    true
}

struct Layout {
    order: SarimaOrder,
}

impl Layout {
    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64], f64) {
        let o = &self.order;
        let (phi, rest) = x.split_at(o.p);
        let (theta, rest) = rest.split_at(o.q);
        let (sphi, rest) = rest.split_at(o.sp);
        let (stheta, rest) = rest.split_at(o.sq);
        (phi, theta, sphi, stheta, rest[0])
    }

    fn admissible(&self, x: &[f64]) -> bool {
        let (phi, theta, sphi, stheta, _) = self.split(x);
        let neg = |v: &[f64]| v.iter().map(|c| -c).collect::<Vec<_>>();
        is_stationary_factor(phi)
            && is_stationary_factor(sphi)
            && is_stationary_factor(&neg(theta))
            && is_stationary_factor(&neg(stheta))
    }
}

/// Innovations of the model on `w` (already differenced), with zero
/// pre-sample values. `ar`/`ma` are the expanded lag coefficients.
fn innovations(w: &[f64], ar: &[f64], ma: &[f64], mu: f64, out: &mut Vec<f64>) {
    out.clear();
    for t in 0..w.len() {
        let mut e = w[t] - mu;
        for l in 1..ar.len().min(t + 1) {
            e -= ar[l] * (w[t - l] - mu);
        }
        for l in 1..ma.len().min(t + 1) {
            e -= ma[l] * out[t - l];
        }
        out.push(e);
    }
}

fn model_innovations(w: &[f64], order: &SarimaOrder, x: &[f64], out: &mut Vec<f64>) {
    let layout = Layout { order: *order };
    let (phi, theta, sphi, stheta, mu) = layout.split(x);
    let ar = expand(phi, sphi, order.m, 1.0);
    let ma = expand(theta, stheta, order.m, -1.0);
    innovations(w, &ar, &ma, mu, out);
}

pub fn fit_css(series: &[f64], order: SarimaOrder) -> Result<SarimaFit> {
    fit_css_with(series, order, &FitOptions::default())
}

/// Fits `order` by minimizing the conditional sum of squared innovations.
/// Hitting the iteration cap yields `NotConverged` carrying the best fit.
pub fn fit_css_with(series: &[f64], order: SarimaOrder, opts: &FitOptions) -> Result<SarimaFit> {
    if !order.is_valid() {
        return Err(Error::InvalidArgument(format!("invalid order {order}")));
    }
    let needed = order.n_params() + order.diff_loss() + 1;
    if series.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            got: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "series contains non-finite values".into(),
        ));
    }
    let w = difference_order(series, &order);
    let (center, spread) = (mean(&w), variance(&w, 0).sqrt());
    if spread.is_nan() || spread <= 0.0 {
        return Err(Error::ZeroVariance("differenced series".into()));
    }
    let z: Vec<f64> = w.iter().map(|v| (v - center) / spread).collect();
    let n = z.len();
    let layout = Layout { order };
    let mut buf = Vec::with_capacity(n);
    let objective = |x: &[f64]| -> f64 {
        if !layout.admissible(x) {
            return f64::INFINITY;
        }
        let mut e = std::mem::take(&mut buf);
        model_innovations(&z, &order, x, &mut e);
        let sse = e.iter().map(|v| v * v).sum::<f64>();
        buf = e;
        if sse.is_finite() {
            sse / n as f64
        } else {
            f64::INFINITY
        }
    };
    let x0 = vec![0.0; order.n_params()];
    let best = minimize(objective, &x0, opts.optimizer);

    let (phi, theta, sphi, stheta, mu) = layout.split(&best.x);
    let sse = best.f * n as f64 * spread * spread;
    let sigma2 = sse / n as f64;
    let k = order.n_params();
    let fit = SarimaFit {
        order,
        phi: phi.to_vec(),
        theta: theta.to_vec(),
        seasonal_phi: sphi.to_vec(),
        seasonal_theta: stheta.to_vec(),
        intercept: center + mu * spread,
        sigma2,
        aic: n as f64 * sigma2.ln() + 2.0 * (k + 1) as f64,
        n_obs: n,
        sse,
        iterations: best.iterations,
        converged: best.converged,
    };
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::ZeroVariance("innovations".into()));
    }
    if best.converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged {
            iterations: best.iterations,
            best_objective: best.f,
            best: Box::new(fit),
        })
    }
}

/// One-step-ahead innovations of `fit` on `series`, in series units, one per
/// differenced observation.
pub fn residuals(series: &[f64], fit: &SarimaFit) -> Vec<f64> {
    let w = difference_order(series, &fit.order);
    let mut x = Vec::with_capacity(fit.order.n_params());
    x.extend(&fit.phi);
    x.extend(&fit.theta);
    x.extend(&fit.seasonal_phi);
    x.extend(&fit.seasonal_theta);
    x.push(fit.intercept);
    let mut e = Vec::with_capacity(w.len());
    model_innovations(&w, &fit.order, &x, &mut e);
    e
}

/// Mean absolute one-step-ahead error of the fitted recursion, skipping the
/// start-up values before the autoregressive span is available. The
/// forecast error of the original series equals the differenced-series
/// innovation, so no integration is needed.
pub fn one_step_forecast_mae(series: &[f64], fit: &SarimaFit) -> Result<f64> {
    let e = residuals(series, fit);
    let start = fit.order.ar_span();
    if e.len() <= start {
        return Err(Error::SeriesTooShort {
            needed: start + 1 + fit.order.diff_loss(),
            got: series.len(),
        });
    }
    let tail = &e[start..];
    Ok(tail.iter().map(|v| v.abs()).sum::<f64>() / tail.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(seed: u64, n: usize, phi: f64) -> Vec<f64> {
        let e = noise(seed, n + 200);
        let mut x = vec![0.0; n + 200];
        for t in 1..x.len() {
            x[t] = phi * x[t - 1] + e[t];
        }
        x.split_off(200)
    }

    #[test]
    fn polynomial_expansion() {
        // (1 - 0.5B)(1 - 0.3B^2) = 1 - 0.5B - 0.3B^2 + 0.15B^3
        let c = expand(&[0.5], &[0.3], 2, 1.0);
        let want = [0.0, 0.5, 0.3, -0.15];
        for (a, b) in c[1..].iter().zip(&want[1..]) {
            assert!((a - b).abs() < 1e-15);
        }
        // (1 + 0.4B)(1 + 0.2B^3) = 1 + 0.4B + 0.2B^3 + 0.08B^4
        let c = expand(&[0.4], &[0.2], 3, -1.0);
        let want = [0.0, 0.4, 0.0, 0.2, 0.08];
        for (a, b) in c[1..].iter().zip(&want[1..]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn stationarity_check() {
        assert!(is_stationary_factor(&[0.5]));
        assert!(!is_stationary_factor(&[1.0]));
        assert!(!is_stationary_factor(&[1.2]));
        // 1 - 1.5z + 0.56z² = (1 - 0.7z)(1 - 0.8z)
        assert!(is_stationary_factor(&[1.5, -0.56]));
        // 1 - 0.5z - 0.6z²: roots about 0.95 and -1.75
        assert!(!is_stationary_factor(&[0.5, 0.6]));
        assert!(is_stationary_factor(&[]));
        assert!(is_stationary_factor(&[0.0, 0.0]));
        assert!(!is_stationary_factor(&[f64::NAN]));
        // (1 - 0.9z)(1 + 0.95z) and a complex pair of modulus 1/0.9.
        assert!(is_stationary_factor(&[-0.05, 0.855]));
        assert!(is_stationary_factor(&[2.0 * 0.9 * 0.5, -0.81]));
        assert!(!is_stationary_factor(&[2.0 * 1.1 * 0.5, -1.21]));
    }

    #[test]
    fn recovers_ar1_coefficient() {
        for seed in 0..10 {
            let x = ar1(seed, 1000, 0.7);
            let fit = fit_css(&x, SarimaOrder::new(1, 0, 0, 0, 0, 0, 1)).unwrap();
            assert!(
                (fit.phi[0] - 0.7).abs() <= 0.08,
                "seed {seed}: {}",
                fit.phi[0]
            );
        }
    }

    #[test]
    fn recovers_ma1_coefficient() {
        for seed in 0..10 {
            let e = noise(100 + seed, 1001);
            let x: Vec<f64> = (1..e.len()).map(|t| e[t] + 0.5 * e[t - 1]).collect();
            let fit = fit_css(&x, SarimaOrder::new(0, 0, 1, 0, 0, 0, 1)).unwrap();
            assert!(
                (fit.theta[0] - 0.5).abs() <= 0.1,
                "seed {seed}: {}",
                fit.theta[0]
            );
        }
    }

    #[test]
    fn white_noise_aic_closed_form() {
        let x: Vec<f64> = noise(5, 400).iter().map(|v| 3.0 + 2.0 * v).collect();
        let fit = fit_css(&x, SarimaOrder::new(0, 0, 0, 0, 0, 0, 1)).unwrap();
        let n = x.len() as f64;
        let s2 = variance(&x, 0);
        assert!((fit.intercept - mean(&x)).abs() < 1e-3);
        assert!((fit.sigma2 - s2).abs() < 1e-6 * s2);
        let closed = n * s2.ln() + 2.0;
        assert!((fit.aic - closed).abs() <= 2.0 + 1e-6);
        assert!((fit.aic - (n * (fit.sse / n).ln() + 4.0)).abs() < 1e-9);
    }

    #[test]
    fn noiseless_ar1_has_zero_one_step_error() {
        let mut x = vec![5.0];
        for t in 1..200 {
            let prev: f64 = x[t - 1];
            x.push(0.8 * prev);
        }
        let fit = SarimaFit {
            order: SarimaOrder::new(1, 0, 0, 0, 0, 0, 1),
            phi: vec![0.8],
            theta: vec![],
            seasonal_phi: vec![],
            seasonal_theta: vec![],
            intercept: 0.0,
            sigma2: 1.0,
            aic: 0.0,
            n_obs: 200,
            sse: 0.0,
            iterations: 0,
            converged: true,
        };
        assert!(one_step_forecast_mae(&x, &fit).unwrap() <= 1e-8);
    }

    #[test]
    fn white_noise_mae_matches_half_normal_mean() {
        let x: Vec<f64> = noise(9, 20_000).iter().map(|v| 1.5 * v).collect();
        let fit = fit_css(&x, SarimaOrder::new(0, 0, 0, 0, 0, 0, 1)).unwrap();
        let mae = one_step_forecast_mae(&x, &fit).unwrap();
        let expect = 1.5 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mae - expect).abs() <= 0.05 * expect, "{mae} vs {expect}");
    }

    #[test]
    fn fit_never_worse_than_start() {
        for seed in 0..5 {
            let x = ar1(seed, 300, -0.4);
            let order = SarimaOrder::new(2, 1, 1, 1, 0, 1, 7);
            let fit = match fit_css(&x, order) {
                Ok(f) => f,
                Err(Error::NotConverged { best, .. }) => *best,
                Err(e) => panic!("{e}"),
            };
            let w = difference_order(&x, &order);
            let start_sse = variance(&w, 0) * w.len() as f64;
            assert!(fit.sse <= start_sse * (1.0 + 1e-12));
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_css(&[1.0; 5], SarimaOrder::new(2, 0, 2, 0, 0, 0, 1)),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(matches!(
            fit_css(&[2.0; 50], SarimaOrder::new(0, 0, 0, 0, 0, 0, 1)),
            Err(Error::ZeroVariance(_))
        ));
        let x = ar1(1, 50, 0.5);
        let Err(Error::NotConverged {
            best, iterations, ..
        }) = fit_css_with(
            &x,
            SarimaOrder::new(2, 0, 2, 0, 0, 0, 1),
            &FitOptions {
                optimizer: NelderMeadOptions {
                    max_iter: 3,
                    ..Default::default()
                },
            },
        )
        else {
            panic!("expected non-convergence")
        };
        assert_eq!(iterations, 3);
        assert_eq!(best.phi.len(), 2);
    }
}
