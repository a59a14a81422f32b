//! Stepwise AIC order search and the per-point baseline thresholds.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::ingest::{N_POINTS, POINT_LABELS};

use super::css::{fit_css_with, one_step_forecast_mae, FitOptions};
use super::unit_root::{select_d, select_seasonal_d};
use super::{difference, SarimaFit, SarimaOrder, DEFAULT_PERIOD};

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseConfig {
    pub m: usize,
    pub max_p: usize,
    pub max_q: usize,
    pub max_sp: usize,
    pub max_sq: usize,
    /// Safety cap on accepted moves.
    pub max_steps: usize,
    pub fit: FitOptions,
    pub exec: Execution,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        StepwiseConfig {
            m: DEFAULT_PERIOD,
            max_p: 5,
            max_q: 5,
            max_sp: 2,
            max_sq: 2,
            max_steps: 100,
            fit: FitOptions::default(),
            exec: Execution::default(),
        }
    }
}

/// One evaluated candidate; `aic` is `None` when the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchEntry {
    pub order: SarimaOrder,
    pub aic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseResult {
    pub fit: SarimaFit,
    /// Every candidate in evaluation order.
    pub log: Vec<SearchEntry>,
}

impl StepwiseResult {
    pub fn aic_of(&self, order: &SarimaOrder) -> Option<f64> {
        self.log
            .iter()
            .find(|e| &e.order == order)
            .and_then(|e| e.aic)
    }
}

fn neighbours(o: &SarimaOrder, cfg: &StepwiseConfig) -> Vec<SarimaOrder> {
    let seasonal = o.m > 1;
    let mut out = Vec::with_capacity(8);
    let mut push = |cand: SarimaOrder| {
        if cand.p <= cfg.max_p
            && cand.q <= cfg.max_q
            && cand.sp <= cfg.max_sp
            && cand.sq <= cfg.max_sq
        {
            out.push(cand);
        }
    };
    if seasonal {
        if o.sp > 0 {
            push(SarimaOrder { sp: o.sp - 1, ..*o });
        }
        push(SarimaOrder { sp: o.sp + 1, ..*o });
        if o.sq > 0 {
            push(SarimaOrder { sq: o.sq - 1, ..*o });
        }
        push(SarimaOrder { sq: o.sq + 1, ..*o });
    }
    if o.p > 0 {
        push(SarimaOrder { p: o.p - 1, ..*o });
    }
    push(SarimaOrder { p: o.p + 1, ..*o });
    if o.q > 0 {
        push(SarimaOrder { q: o.q - 1, ..*o });
    }
    push(SarimaOrder { q: o.q + 1, ..*o });
    out
}

/// Fit that accepts an optimizer's best point when it ran out of iterations.
fn try_fit(series: &[f64], order: SarimaOrder, opts: &FitOptions) -> Option<SarimaFit> {
    match fit_css_with(series, order, opts) {
        Ok(f) => Some(f),
        Err(Error::NotConverged { best, .. }) => Some(*best),
        Err(_) => None,
    }
    .filter(|f| f.aic.is_finite())
}

/// Hyndman–Khandakar style search: `d` and `D` from unit-root tests, four
/// starting orders, then single-coordinate moves to the best improving
/// neighbour until none improves.
pub fn stepwise_search(series: &[f64], cfg: &StepwiseConfig) -> Result<StepwiseResult> {
    if series.len() < 50 {
        return Err(Error::SeriesTooShort {
            needed: 50,
            got: series.len(),
        });
    }
    let m = cfg.m.max(1);
    let sd = if m > 1 {
        select_seasonal_d(series, m)
    } else {
        0
    };
    let d = select_d(&difference(series, m, sd));
    let seasonal = usize::from(m > 1);
    let starts = [
        SarimaOrder::new(2, d, 2, seasonal, sd, seasonal, m),
        SarimaOrder::new(0, d, 0, 0, sd, 0, m),
        SarimaOrder::new(1, d, 0, seasonal, sd, 0, m),
        SarimaOrder::new(0, d, 1, 0, sd, seasonal, m),
    ];

    let mut fits: BTreeMap<SarimaOrder, Option<SarimaFit>> = BTreeMap::new();
    let mut log = Vec::new();
    let evaluate =
        |cands: Vec<SarimaOrder>, fits: &mut BTreeMap<_, _>, log: &mut Vec<SearchEntry>| {
            let fresh: Vec<SarimaOrder> = cands.into_iter().filter(|o| !fits.contains_key(o)).fold(
                Vec::new(),
                |mut acc, o| {
                    if !acc.contains(&o) {
                        acc.push(o);
                    }
                    acc
                },
            );
            let results = map_slice(cfg.exec, &fresh, |o| try_fit(series, *o, &cfg.fit));
            for (o, r) in fresh.into_iter().zip(results) {
                log.push(SearchEntry {
                    order: o,
                    aic: r.as_ref().map(|f| f.aic),
                });
                fits.insert(o, r);
            }
        };

    let best_of = |orders: &[SarimaOrder], fits: &BTreeMap<SarimaOrder, Option<SarimaFit>>| {
        orders
            .iter()
            .filter_map(|o| fits.get(o).and_then(|f| f.as_ref()))
            .min_by(|a, b| a.aic.total_cmp(&b.aic))
            .cloned()
    };

    evaluate(starts.to_vec(), &mut fits, &mut log);
    let mut current = best_of(&starts, &fits).ok_or(Error::NoModel)?;
    for _ in 0..cfg.max_steps {
        let nb = neighbours(&current.order, cfg);
        evaluate(nb.clone(), &mut fits, &mut log);
        match best_of(&nb, &fits) {
            Some(cand) if cand.aic < current.aic => current = cand,
            _ => break,
        }
    }
    Ok(StepwiseResult { fit: current, log })
}

/// Per-point SARIMA one-step MAE in °C, the error budget the soft sensor
/// has to beat.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineThresholds {
    pub mae: Vec<f64>,
    pub orders: Vec<SarimaOrder>,
    pub aic: Vec<f64>,
}

impl BaselineThresholds {
    /// `{"vol_2": mae, …}`.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = POINT_LABELS
            .iter()
            .zip(&self.mae)
            .map(|(p, v)| (format!("vol_{p}"), serde_json::json!(v)))
            .collect();
        serde_json::Value::Object(map)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Vec<f64>> {
        POINT_LABELS
            .iter()
            .map(|p| {
                v.get(format!("vol_{p}"))
                    .and_then(|x| x.as_f64())
                    .filter(|x| *x > 0.0)
                    .ok_or_else(|| Error::format("thresholds", format!("missing vol_{p}")))
            })
            .collect()
    }
}

/// Runs the stepwise search on each point series (time ordered) and records
/// its in-sample one-step MAE.
pub fn baseline_thresholds(
    points: &[Vec<f64>],
    cfg: &StepwiseConfig,
) -> Result<BaselineThresholds> {
    if points.len() != N_POINTS {
        return Err(Error::WrongPointCount(points.len()));
    }
    let mut out = BaselineThresholds {
        mae: Vec::with_capacity(N_POINTS),
        orders: Vec::with_capacity(N_POINTS),
        aic: Vec::with_capacity(N_POINTS),
    };
    for series in points {
        let res = stepwise_search(series, cfg)?;
        let mae = one_step_forecast_mae(series, &res.fit)?;
        if mae.is_nan() || mae <= 0.0 {
            return Err(Error::ZeroVariance("baseline residuals".into()));
        }
        out.mae.push(mae);
        out.orders.push(res.fit.order);
        out.aic.push(res.fit.aic);
    }
    Ok(out)
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

    #[test]
    fn neighbourhood_respects_caps() {
        let cfg = StepwiseConfig::default();
        let o = SarimaOrder::new(0, 0, 5, 2, 1, 0, 7);
        let nb = neighbours(&o, &cfg);
        assert!(nb.contains(&SarimaOrder::new(1, 0, 5, 2, 1, 0, 7)));
        assert!(nb.contains(&SarimaOrder::new(0, 0, 5, 2, 1, 1, 7)));
        assert!(nb.iter().all(|c| c.q <= 5 && c.sp <= 2));
        assert_eq!(nb.len(), 4);
        let ns = neighbours(&SarimaOrder::new(1, 0, 1, 0, 0, 0, 1), &cfg);
        assert!(ns.iter().all(|c| c.sp == 0 && c.sq == 0));
    }

    #[test]
    fn white_noise_search_is_locally_optimal_and_repeatable() {
        let x: Vec<f64> = noise(3, 300).iter().map(|v| 10.0 + v).collect();
        let cfg = StepwiseConfig::default();
        let res = stepwise_search(&x, &cfg).unwrap();
        let wn = fit_css_with(&x, SarimaOrder::new(0, 0, 0, 0, 0, 0, 7), &cfg.fit).unwrap();
        assert_eq!(res.fit.order.d, 0);
        assert!(res.fit.aic <= wn.aic + 2.0);
        for nb in neighbours(&res.fit.order, &cfg) {
            if let Some(a) = res.aic_of(&nb) {
                assert!(res.fit.aic <= a);
            }
        }
        let again = stepwise_search(
            &x,
            &StepwiseConfig {
                exec: Execution::Sequential,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(again.fit, res.fit);
        assert_eq!(again.log, res.log);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            stepwise_search(&[1.0; 20], &StepwiseConfig::default()),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn thresholds_json_round_trip() {
        let t = BaselineThresholds {
            mae: (1..=7).map(f64::from).collect(),
            orders: vec![SarimaOrder::new(0, 0, 0, 0, 0, 0, 7); 7],
            aic: vec![0.0; 7],
        };
        let v = t.to_json();
        assert_eq!(v["vol_100"], 7.0);
        assert_eq!(BaselineThresholds::from_json(&v).unwrap(), t.mae);
    }
}
