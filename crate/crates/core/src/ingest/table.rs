use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Number of distillation points on the laboratory curve.
pub const N_POINTS: usize = 7;

/// Volume-percent labels of the distillation points, in column order.
pub const POINT_LABELS: [u32; N_POINTS] = [2, 10, 30, 50, 70, 90, 100];

/// Plant signals at one-minute cadence.
///
/// Invalid cells keep whatever value they were parsed with (NaN for blanks)
/// and must be consulted through `valid`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTable {
    /// Epoch seconds, strictly increasing.
    pub timestamps: Vec<i64>,
    pub names: Vec<String>,
    /// Rows are minutes, columns are sensors.
    pub values: Array2<f64>,
    pub valid: Array2<bool>,
}

impl SensorTable {
    pub fn new(
        timestamps: Vec<i64>,
        names: Vec<String>,
        values: Array2<f64>,
        valid: Array2<bool>,
    ) -> Result<Self> {
        let table = SensorTable {
            timestamps,
            names,
            values,
            valid,
        };
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<()> {
        let shape = (self.timestamps.len(), self.names.len());
        if self.values.dim() != shape || self.valid.dim() != shape {
            return Err(Error::Shape(format!(
                "sensor table expects {:?}, values {:?}, valid {:?}",
                shape,
                self.values.dim(),
                self.valid.dim()
            )));
        }
        if let Some(w) = self.timestamps.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::format(
                "sensor table",
                format!("timestamps not strictly increasing at {}", w[1]),
            ));
        }
        let mut seen = HashSet::new();
        for name in &self.names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateSensor(name.clone()));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_sensors(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn sensor_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Half-open row range `[lo, hi)` whose timestamps lie in `(from, to]`.
    pub fn rows_in_window(&self, from: i64, to: i64) -> (usize, usize) {
        let lo = self.timestamps.partition_point(|&t| t <= from);
        let hi = self.timestamps.partition_point(|&t| t <= to);
        (lo, hi.max(lo))
    }
}

/// Daily laboratory distillation curves (°C).
#[derive(Debug, Clone, PartialEq)]
pub struct LabTable {
    /// Epoch seconds, non-decreasing; duplicates are allowed before cleaning.
    pub timestamps: Vec<i64>,
    /// Rows are samples, columns follow [`POINT_LABELS`].
    pub values: Array2<f64>,
    pub valid: Array2<bool>,
}

impl LabTable {
    pub fn new(timestamps: Vec<i64>, values: Array2<f64>, valid: Array2<bool>) -> Result<Self> {
        let shape = (timestamps.len(), N_POINTS);
        if values.dim() != shape || valid.dim() != shape {
            return Err(Error::Shape(format!(
                "lab table expects {:?}, values {:?}, valid {:?}",
                shape,
                values.dim(),
                valid.dim()
            )));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[0] > w[1]) {
            return Err(Error::format(
                "lab table",
                format!("timestamps decrease at {}", w[1]),
            ));
        }
        Ok(LabTable {
            timestamps,
            values,
            valid,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Keeps the rows for which `keep` is true, preserving order.
    pub fn filter_rows(&self, keep: &[bool]) -> LabTable {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep[i]).collect();
        self.select_rows(&idx)
    }

    pub fn select_rows(&self, idx: &[usize]) -> LabTable {
        LabTable {
            timestamps: idx.iter().map(|&i| self.timestamps[i]).collect(),
            values: self.values.select(ndarray::Axis(0), idx),
            valid: self.valid.select(ndarray::Axis(0), idx),
        }
    }

    /// Values of one distillation point over the valid rows.
    pub fn point_series(&self, k: usize) -> Vec<f64> {
        self.values
            .column(k)
            .iter()
            .zip(self.valid.column(k))
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
            .collect()
    }
}
