//! Laboratory target cleaning: null/duplicate removal, then Tukey IQR fences
//! per distillation point with a row-wise union rule.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{CleanReport, LabTable, N_POINTS};
use crate::stats::quantile_sorted;

/// Standard Tukey fence multiplier.
pub const TUKEY_MULTIPLIER: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointBounds {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower: f64,
    pub upper: f64,
}

impl PointBounds {
    /// Strict exceedance: a value sitting exactly on a fence is kept.
    pub fn exceeded_by(&self, v: f64) -> bool {
        v < self.lower || v > self.upper
    }
}

/// IQR fences for each distillation point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IqrBounds {
    pub points: Vec<PointBounds>,
}

/// Removes rows with any invalid cell, then exact duplicates (same timestamp
/// and bit-identical values), keeping the first occurrence.
pub fn drop_nulls_duplicates(lab: &LabTable) -> Result<(LabTable, CleanReport)> {
    let mut report = CleanReport::for_stage("prep-lab");
    let mut seen: HashSet<(i64, [u64; N_POINTS])> = HashSet::new();
    let mut keep = vec![false; lab.n_rows()];
    for (i, k) in keep.iter_mut().enumerate() {
        if lab.valid.row(i).iter().any(|&v| !v) {
            report.removed_null += 1;
            continue;
        }
        let mut key = [0u64; N_POINTS];
        for (p, slot) in key.iter_mut().enumerate() {
            *slot = lab.values[[i, p]].to_bits();
        }
        if seen.insert((lab.timestamps[i], key)) {
            *k = true;
        } else {
            report.removed_duplicate += 1;
        }
    }
    let out = lab.filter_rows(&keep);
    if out.is_empty() {
        return Err(Error::EmptyLabTable);
    }
    Ok((out, report))
}

/// Fences from type-7 quartiles with the standard 1.5 multiplier.
pub fn iqr_bounds(series: &[Vec<f64>]) -> Result<IqrBounds> {
    iqr_bounds_with(series, TUKEY_MULTIPLIER)
}

pub fn iqr_bounds_with(series: &[Vec<f64>], multiplier: f64) -> Result<IqrBounds> {
    let points = series
        .iter()
        .map(|values| {
            let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            if sorted.len() < 4 {
                return Err(Error::TooFewValues {
                    needed: 4,
                    got: sorted.len(),
                });
            }
            sorted.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&sorted, 0.25);
            let q3 = quantile_sorted(&sorted, 0.75);
            let iqr = q3 - q1;
            Ok(PointBounds {
                q1,
                q3,
                iqr,
                lower: q1 - multiplier * iqr,
                upper: q3 + multiplier * iqr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IqrBounds { points })
}

/// Fences computed from every valid value of each point in `lab`.
pub fn lab_iqr_bounds(lab: &LabTable, multiplier: f64) -> Result<IqrBounds> {
    let series: Vec<Vec<f64>> = (0..N_POINTS).map(|k| lab.point_series(k)).collect();
    iqr_bounds_with(&series, multiplier)
}

/// Drops every row in which at least one point lies strictly outside its
/// fences.
pub fn flag_outlier_union(lab: &LabTable, bounds: &IqrBounds) -> (LabTable, CleanReport) {
    let mut report = CleanReport::for_stage("prep-lab");
    let keep: Vec<bool> = (0..lab.n_rows())
        .map(|i| {
            !bounds
                .points
                .iter()
                .enumerate()
                .any(|(k, b)| lab.valid[[i, k]] && b.exceeded_by(lab.values[[i, k]]))
        })
        .collect();
    report.removed_outlier = keep.iter().filter(|&&k| !k).count();
    (lab.filter_rows(&keep), report)
}

/// The full laboratory cleaning stage.
pub fn clean_lab(lab: &LabTable, multiplier: f64) -> Result<(LabTable, CleanReport, IqrBounds)> {
    let (dedup, mut report) = drop_nulls_duplicates(lab)?;
    let bounds = lab_iqr_bounds(&dedup, multiplier)?;
    let (clean, outliers) = flag_outlier_union(&dedup, &bounds);
    if clean.is_empty() {
        return Err(Error::EmptyLabTable);
    }
    report.removed_outlier = outliers.removed_outlier;
    Ok((clean, report, bounds))
}
