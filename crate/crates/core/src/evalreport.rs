//! Soft-sensor evaluation: per-point MAE against the baseline thresholds and
//! the 95% confidence-interval analysis of test errors.

use std::path::Path;

use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::POINT_LABELS;
use crate::stats::{mean, normal_quantile, variance};

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Mean `|pred − actual|` per column.
pub fn mae_per_point(pred: ArrayView2<f64>, actual: ArrayView2<f64>) -> Result<Vec<f64>> {
    if pred.dim() != actual.dim() || pred.nrows() == 0 {
        return Err(Error::Shape(format!(
            "prediction {:?} vs actual {:?}",
            pred.dim(),
            actual.dim()
        )));
    }
    let n = pred.nrows() as f64;
    Ok(pred
        .columns()
        .into_iter()
        .zip(actual.columns())
        .map(|(p, a)| p.iter().zip(a).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
        .collect())
}

/// A point passes when its MAE is strictly below its threshold.
pub fn threshold_check(mae: &[f64], thresholds: &[f64]) -> Vec<bool> {
    mae.iter().zip(thresholds).map(|(m, t)| m < t).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Whether the bin centre lies inside the interval.
    pub inside: bool,
}

impl HistogramBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiAnalysis {
    pub level: f64,
    pub mean: f64,
    pub std: f64,
    pub ci: Interval,
    pub frac_outside: f64,
    pub histogram: Vec<HistogramBin>,
}

/// `mean ± z·s` with the sample standard deviation; the share of errors
/// strictly outside; and an equal-width histogram over the error range.
pub fn ci_analysis(errors: &[f64], level: f64, bins: usize) -> Result<CiAnalysis> {
    if errors.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: errors.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) || bins == 0 {
        return Err(Error::InvalidArgument(format!(
            "level {level}, bins {bins}"
        )));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument("non-finite error value".into()));
    }
    let m = mean(errors);
    let s = variance(errors, 1).sqrt();
    let z = normal_quantile(0.5 + level / 2.0);
    let ci = Interval {
        lower: m - z * s,
        upper: m + z * s,
    };
    let outside = errors.iter().filter(|&&e| !ci.contains(e)).count();
    Ok(CiAnalysis {
        level,
        mean: m,
        std: s,
        frac_outside: outside as f64 / errors.len() as f64,
        histogram: histogram(errors, bins, &ci),
        ci,
    })
}

fn histogram(errors: &[f64], bins: usize, ci: &Interval) -> Vec<HistogramBin> {
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &e in errors {
        let k = (((e - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let lower = lo + k as f64 * width;
            let upper = if k + 1 == bins {
                hi
            } else {
                lo + (k + 1) as f64 * width
            };
            let mut bin = HistogramBin {
                lower,
                upper,
                count,
                inside: false,
            };
            bin.inside = ci.contains(bin.center());
            bin
        })
        .collect()
}

/// Two-column `bin_center,count` export.
pub fn write_histogram_csv(path: &Path, bins: &[HistogramBin]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["bin_center", "count"]).map_err(csv_err)?;
    for b in bins {
        w.write_record([b.center().to_string(), b.count.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub mae_train: Vec<f64>,
    pub mae_test: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub pass: Vec<bool>,
    /// Pooled over all points.
    pub pooled: CiAnalysis,
    pub per_point: Vec<CiAnalysis>,
}

impl EvalSummary {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }

    /// The report's `evaluation` section, keyed by point label.
    pub fn to_json(&self) -> serde_json::Value {
        let by_point = |vals: &[f64]| -> serde_json::Value {
            POINT_LABELS
                .iter()
                .zip(vals)
                .map(|(p, v)| (format!("vol_{p}"), serde_json::json!(v)))
                .collect::<serde_json::Map<_, _>>()
                .into()
        };
        let pass: serde_json::Map<_, _> = POINT_LABELS
            .iter()
            .zip(&self.pass)
            .map(|(p, v)| (format!("vol_{p}"), serde_json::json!(v)))
            .collect();
        let per_point: serde_json::Map<_, _> = POINT_LABELS
            .iter()
            .zip(&self.per_point)
            .map(|(p, c)| {
                (
                    format!("vol_{p}"),
                    serde_json::json!({"lower": c.ci.lower, "upper": c.ci.upper, "frac_outside": c.frac_outside}),
                )
            })
            .collect();
        serde_json::json!({
            "mae_train": by_point(&self.mae_train),
            "mae_test": by_point(&self.mae_test),
            "thresholds": by_point(&self.thresholds),
            "pass": pass,
            "ci": {
                "level": self.pooled.level,
                "mean": self.pooled.mean,
                "std": self.pooled.std,
                "lower": self.pooled.ci.lower,
                "upper": self.pooled.ci.upper,
                "per_point": per_point,
            },
            "frac_outside": self.pooled.frac_outside,
            "histogram": self.pooled.histogram.iter().map(|b| serde_json::json!({
                "lower": b.lower, "upper": b.upper, "count": b.count, "inside": b.inside,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Compares predictions with actuals on both splits (errors are
/// `pred − actual`, °C).
pub fn evaluate(
    pred_train: ArrayView2<f64>,
    actual_train: ArrayView2<f64>,
    pred_test: ArrayView2<f64>,
    actual_test: ArrayView2<f64>,
    thresholds: &[f64],
    bins: usize,
) -> Result<EvalSummary> {
    let mae_train = mae_per_point(pred_train, actual_train)?;
    let mae_test = mae_per_point(pred_test, actual_test)?;
    if thresholds.len() != mae_test.len() {
        return Err(Error::Shape("one threshold per point required".into()));
    }
    let errors = &pred_test - &actual_test;
    let pooled_errors: Vec<f64> = errors.iter().copied().collect();
    let pooled = ci_analysis(&pooled_errors, DEFAULT_LEVEL, bins)?;
    let per_point = errors
        .columns()
        .into_iter()
        .map(|c| ci_analysis(&c.to_vec(), DEFAULT_LEVEL, bins))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSummary {
        pass: threshold_check(&mae_test, thresholds),
        mae_train,
        mae_test,
        thresholds: thresholds.to_vec(),
        pooled,
        per_point,
    })
}
