//! Hotelling T² on PCA scores and extraction of long-term anomaly periods.

use ndarray::ArrayView2;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::pca::PcaModel;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

/// One run of consecutive exceedances, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Period {
    pub start_idx: usize,
    pub end_idx: usize,
    pub start_ts: i64,
    pub end_ts: i64,
}

impl Period {
    /// Rows covered, both ends included.
    pub fn n_rows(&self) -> usize {
        self.end_idx - self.start_idx + 1
    }

    pub fn contains_ts(&self, ts: i64) -> bool {
        (self.start_ts..=self.end_ts).contains(&ts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyPeriods {
    pub periods: Vec<Period>,
    pub t2_limit: f64,
}

impl AnomalyPeriods {
    /// Periods known only by their time span, e.g. from an earlier run.
    pub fn from_time_ranges(ranges: &[[i64; 2]]) -> Self {
        AnomalyPeriods {
            periods: ranges
                .iter()
                .map(|&[start_ts, end_ts]| Period {
                    start_idx: 0,
                    end_idx: 0,
                    start_ts,
                    end_ts,
                })
                .collect(),
            t2_limit: f64::NAN,
        }
    }

    pub fn time_ranges(&self) -> Vec<[i64; 2]> {
        self.periods
            .iter()
            .map(|p| [p.start_ts, p.end_ts])
            .collect()
    }

    pub fn contains_ts(&self, ts: i64) -> bool {
        self.periods.iter().any(|p| p.contains_ts(ts))
    }
}

/// Control limit `a (n² − 1) / (n (n − a)) · F(a, n − a; alpha)`.
pub fn t2_limit(n: usize, a: usize, alpha: f64) -> Result<f64> {
    if n <= a {
        return Err(Error::InvalidArgument(format!(
            "T² limit needs more observations ({n}) than components ({a})"
        )));
    }
    let (nf, af) = (n as f64, a as f64);
    let f = FisherSnedecor::new(af, nf - af)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(alpha);
    Ok(af * (nf * nf - 1.0) / (nf * (nf - af)) * f)
}

/// T² per row: sum of squared scores divided by the component variances.
pub fn hotelling_t2(data: ArrayView2<f64>, pca: &PcaModel, exec: Execution) -> Vec<f64> {
    let p = pca.n_features();
    map_indexed(exec, data.nrows(), |i| {
        let row = data.row(i);
        let mut t2 = 0.0;
        for c in 0..pca.retained {
            let mut score = 0.0;
            for j in 0..p {
                score += (row[j] - pca.mean[j]) / pca.scale[j] * pca.components[[j, c]];
            }
            t2 += score * score / pca.eigvals[c];
        }
        t2
    })
}

/// Maximal runs of consecutive `T² > limit` at least `min_duration` rows long.
pub fn hotelling_periods(
    data: ArrayView2<f64>,
    timestamps: &[i64],
    pca: &PcaModel,
    alpha: f64,
    min_duration: usize,
    exec: Execution,
) -> Result<AnomalyPeriods> {
    let n = data.nrows();
    if timestamps.len() != n {
        return Err(Error::Shape(format!(
            "{} timestamps for {n} rows",
            timestamps.len()
        )));
    }
    let limit = t2_limit(n, pca.retained, alpha)?;
    let t2 = hotelling_t2(data, pca, exec);
    let mut periods = Vec::new();
    let mut run_start = None;
    for i in 0..=n {
        let above = i < n && t2[i] > limit;
        match (above, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s >= min_duration.max(1) {
                    periods.push(Period {
                        start_idx: s,
                        end_idx: i - 1,
                        start_ts: timestamps[s],
                        end_ts: timestamps[i - 1],
                    });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(AnomalyPeriods {
        periods,
        t2_limit: limit,
    })
}

#[cfg(test)]
mod tests {
    use super::super::pca::fit_pca;
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn isolated_exceedance_is_not_a_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data = Array2::from_shape_fn((2000, 3), |_| rng.sample::<f64, _>(StandardNormal));
        data.row_mut(1000).fill(25.0);
        let ts: Vec<i64> = (0..2000).map(|i| 60 * i).collect();
        let pca = fit_pca(data.view(), &[], 0.9, Execution::Sequential).unwrap();
        let found =
            hotelling_periods(data.view(), &ts, &pca, 0.99, 60, Execution::Sequential).unwrap();
        assert!(found.periods.is_empty());
        let found =
            hotelling_periods(data.view(), &ts, &pca, 0.99, 1, Execution::Sequential).unwrap();
        assert!(found
            .periods
            .iter()
            .any(|p| p.start_idx == 1000 && p.n_rows() == 1));
    }

    #[test]
    fn limit_needs_more_rows_than_components() {
        assert!(t2_limit(3, 3, 0.99).is_err());
        assert!(t2_limit(100, 3, 0.99).unwrap() > 0.0);
    }

    #[test]
    fn long_shift_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut data = Array2::from_shape_fn((5000, 4), |_| rng.sample::<f64, _>(StandardNormal));
        for i in 3000..3200 {
            for j in 0..4 {
                data[[i, j]] += 8.0;
            }
        }
        let ts: Vec<i64> = (0..5000).map(|i| 60 * i).collect();
        let pca = fit_pca(data.view(), &[], 0.9, Execution::Sequential).unwrap();
        let found =
            hotelling_periods(data.view(), &ts, &pca, 0.99, 60, Execution::Sequential).unwrap();
        assert_eq!(found.periods.len(), 1);
        let p = found.periods[0];
        assert!(
            p.start_idx.abs_diff(3000) <= 30 && p.end_idx.abs_diff(3199) <= 30,
            "{p:?}"
        );
    }
}
