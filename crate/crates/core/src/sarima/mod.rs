//! Seasonal ARIMA baselines: order selection, conditional-sum-of-squares
//! fitting, stepwise AIC search and one-step-ahead error thresholds.

mod css;
mod nelder_mead;
mod stepwise;
mod unit_root;

pub use css::{
    fit_css, fit_css_with, is_stationary_factor, one_step_forecast_mae, residuals, FitOptions,
};
pub use nelder_mead::{minimize, Minimum, NelderMeadOptions};
pub use stepwise::{
    baseline_thresholds, stepwise_search, BaselineThresholds, SearchEntry, StepwiseConfig,
    StepwiseResult,
};
pub use unit_root::{
    adf_critical_5pct, adf_test, canova_hansen, ch_critical_5pct, default_adf_lag, select_d,
    select_seasonal_d, AdfResult,
};

use std::fmt;

use serde::Serialize;

/// Default seasonal period for daily laboratory data.
pub const DEFAULT_PERIOD: usize = 7;

/// `(p,d,q)(P,D,Q)_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub sp: usize,
    #[serde(rename = "D")]
    pub sd: usize,
    #[serde(rename = "Q")]
    pub sq: usize,
    pub m: usize,
}

impl SarimaOrder {
    pub fn new(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize, m: usize) -> Self {
        SarimaOrder {
            p,
            d,
            q,
            sp,
            sd,
            sq,
            m,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.m >= 1 && self.d + self.sd <= 3 && (self.m > 1 || self.sp + self.sd + self.sq == 0)
    }

    /// AR, MA, seasonal AR, seasonal MA and intercept.
    pub fn n_params(&self) -> usize {
        self.p + self.q + self.sp + self.sq + 1
    }

    /// Observations lost to differencing.
    pub fn diff_loss(&self) -> usize {
        self.d + self.m * self.sd
    }

    /// Lag of the expanded autoregressive polynomial; residuals before it are
    /// start-up values.
    pub fn ar_span(&self) -> usize {
        self.p + self.m * self.sp
    }

    pub fn ma_span(&self) -> usize {
        self.q + self.m * self.sq
    }
}

impl fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})[{}]",
            self.p, self.d, self.q, self.sp, self.sd, self.sq, self.m
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SarimaFit {
    pub order: SarimaOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seasonal_phi: Vec<f64>,
    pub seasonal_theta: Vec<f64>,
    /// Mean of the differenced series.
    pub intercept: f64,
    pub sigma2: f64,
    pub aic: f64,
    /// Length of the differenced series.
    pub n_obs: usize,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `lag`-step differencing applied `times` times.
pub fn difference(xs: &[f64], lag: usize, times: usize) -> Vec<f64> {
    let mut out = xs.to_vec();
    for _ in 0..times {
        if out.len() <= lag {
            return Vec::new();
        }
        out = (lag..out.len()).map(|t| out[t] - out[t - lag]).collect();
    }
    out
}

/// Inverts one `lag`-step difference given the first `lag` original values.
pub fn undifference(diffs: &[f64], head: &[f64]) -> Vec<f64> {
    let mut out = head.to_vec();
    out.reserve(diffs.len());
    for (i, d) in diffs.iter().enumerate() {
        let next = out[i] + d;
        out.push(next);
    }
    out
}

/// Non-seasonal then seasonal differencing as prescribed by `order`.
pub fn difference_order(xs: &[f64], order: &SarimaOrder) -> Vec<f64> {
    difference(&difference(xs, 1, order.d), order.m, order.sd)
}
