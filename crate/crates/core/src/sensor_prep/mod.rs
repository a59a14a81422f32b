//! Plant-signal cleaning: per-signal change points and piecewise 3σ repair
//! of short-term outliers, then joint PCA / Hotelling T² detection of
//! long-term anomaly periods.

mod changepoint;
mod hotelling;
mod pca;

pub use changepoint::{
    default_penalty, detect_change_points, repair_short_term, Segmentation, DEFAULT_MIN_SEG,
};
pub use hotelling::{hotelling_periods, hotelling_t2, t2_limit, AnomalyPeriods, Period};
pub use pca::{fit_pca, PcaModel};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::ingest::{CleanReport, LabTable, SensorTable};

/// Tunables of the sensor cleaning stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorPrepConfig {
    /// Split penalty is `penalty_factor · ln n`.
    pub penalty_factor: f64,
    pub min_seg: usize,
    pub var_target: f64,
    pub alpha: f64,
    /// Minimum run of consecutive T² exceedances, in rows (minutes).
    pub min_duration: usize,
    pub exec: Execution,
}

impl Default for SensorPrepConfig {
    fn default() -> Self {
        SensorPrepConfig {
            penalty_factor: 3.0,
            min_seg: DEFAULT_MIN_SEG,
            var_target: 0.90,
            alpha: 0.99,
            min_duration: 60,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SensorPrepOutput {
    /// Repaired values; cells inside anomaly periods are marked invalid.
    pub table: SensorTable,
    /// Segmentation of each sensor over its valid samples.
    pub segmentations: Vec<Segmentation>,
    pub repaired: Vec<usize>,
    pub pca: PcaModel,
    pub periods: AnomalyPeriods,
    pub report: CleanReport,
}

struct SignalResult {
    segmentation: Segmentation,
    repaired_count: usize,
    /// Repaired value for valid rows, piecewise mean for invalid rows.
    filled: Vec<f64>,
}

fn clean_signal(table: &SensorTable, j: usize, cfg: &SensorPrepConfig) -> Result<SignalResult> {
    let n = table.n_rows();
    let rows: Vec<usize> = (0..n).filter(|&i| table.valid[[i, j]]).collect();
    if rows.is_empty() {
        return Err(Error::ZeroVariance(table.names[j].clone()));
    }
    let compact: Vec<f64> = rows.iter().map(|&i| table.values[[i, j]]).collect();
    let segmentation = if compact.len() >= 2 * cfg.min_seg {
        detect_change_points(
            &compact,
            cfg.penalty_factor * (compact.len() as f64).ln(),
            cfg.min_seg,
        )?
    } else {
        Segmentation::single(&compact)
    };
    let (repaired, repaired_count) = repair_short_term(&compact, &segmentation);

    let mut filled = vec![0.0; n];
    let mut next = 0;
    for (i, slot) in filled.iter_mut().enumerate() {
        if next < rows.len() && rows[next] == i {
            *slot = repaired[next];
            next += 1;
        } else {
            let s = segmentation.segment_of(next.saturating_sub(1));
            *slot = segmentation.seg_mean[s];
        }
    }
    Ok(SignalResult {
        segmentation,
        repaired_count,
        filled,
    })
}

/// Runs the full sensor cleaning stage.
pub fn clean_sensors(table: &SensorTable, cfg: &SensorPrepConfig) -> Result<SensorPrepOutput> {
    let (n, m) = (table.n_rows(), table.n_sensors());
    let results = map_indexed(cfg.exec, m, |j| clean_signal(table, j, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut filled = Array2::zeros((n, m));
    for (j, r) in results.iter().enumerate() {
        for (i, &v) in r.filled.iter().enumerate() {
            filled[[i, j]] = v;
        }
    }
    let pca = fit_pca(filled.view(), &table.names, cfg.var_target, cfg.exec)?;
    let periods = hotelling_periods(
        filled.view(),
        &table.timestamps,
        &pca,
        cfg.alpha,
        cfg.min_duration,
        cfg.exec,
    )?;

    let mut valid = table.valid.clone();
    for p in &periods.periods {
        valid
            .slice_mut(ndarray::s![p.start_idx..=p.end_idx, ..])
            .fill(false);
    }
    let mut values = filled;
    ndarray::Zip::from(&mut values)
        .and(&table.valid)
        .and(&table.values)
        .for_each(|v, &ok, &orig| {
            if !ok {
                *v = orig;
            }
        });

    let mut report = CleanReport::for_stage("prep-sensors");
    for (j, r) in results.iter().enumerate() {
        report
            .repaired_short_term
            .insert(table.names[j].clone(), r.repaired_count);
    }
    report.long_term_periods = periods.time_ranges();

    Ok(SensorPrepOutput {
        table: SensorTable::new(table.timestamps.clone(), table.names.clone(), values, valid)?,
        repaired: results.iter().map(|r| r.repaired_count).collect(),
        segmentations: results.into_iter().map(|r| r.segmentation).collect(),
        pca,
        periods,
        report,
    })
}

/// Removes laboratory rows sampled inside any anomaly period.
pub fn mask_lab_in_periods(
    lab: &LabTable,
    periods: &AnomalyPeriods,
) -> Result<(LabTable, CleanReport)> {
    let keep: Vec<bool> = lab
        .timestamps
        .iter()
        .map(|&ts| !periods.contains_ts(ts))
        .collect();
    let mut report = CleanReport::for_stage("prep-sensors");
    report.removed_long_term = keep.iter().filter(|&&k| !k).count();
    let out = lab.filter_rows(&keep);
    if out.is_empty() {
        return Err(Error::EmptyLabTable);
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::N_POINTS;

    fn lab(ts: &[i64]) -> LabTable {
        let n = ts.len();
        LabTable::new(
            ts.to_vec(),
            Array2::from_elem((n, N_POINTS), 350.0),
            Array2::from_elem((n, N_POINTS), true),
        )
        .unwrap()
    }

    #[test]
    fn masking_removes_rows_inside_periods() {
        let table = lab(&[0, 100, 200, 300, 400]);
        let periods = AnomalyPeriods::from_time_ranges(&[[90, 110], [300, 350]]);
        let (out, report) = mask_lab_in_periods(&table, &periods).unwrap();
        assert_eq!(out.timestamps, vec![0, 200, 400]);
        assert_eq!(report.removed_long_term, 2);

        let (same, report) =
            mask_lab_in_periods(&table, &AnomalyPeriods::from_time_ranges(&[])).unwrap();
        assert_eq!(same, table);
        assert_eq!(report.removed_long_term, 0);

        let all = AnomalyPeriods::from_time_ranges(&[[-10, 1000]]);
        assert!(matches!(
            mask_lab_in_periods(&table, &all),
            Err(Error::EmptyLabTable)
        ));
    }
}
