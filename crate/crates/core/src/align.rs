//! Time alignment of minute-level sensors to lab samples, scaling and the
//! train/test split.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::ingest::{CleanReport, LabTable, SensorTable, N_POINTS};

/// One hour, in seconds.
pub const DEFAULT_WINDOW_SECS: i64 = 3600;
pub const DEFAULT_TRAIN_FRAC: f64 = 0.7;

/// Per-column affine scaling to zero mean and unit population variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn transform(&self, m: ArrayView2<f64>) -> Array2<f64> {
        let mut out = m.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
        }
        out
    }

    pub fn inverse(&self, m: ArrayView2<f64>) -> Array2<f64> {
        let mut out = m.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v * self.std[j] + self.mean[j]);
        }
        out
    }

    pub fn n_columns(&self) -> usize {
        self.mean.len()
    }
}

/// Mean of each sensor's valid samples in `(lab_ts - width, lab_ts]`.
/// `None` when any sensor has no valid sample there.
pub fn window_average(sensors: &SensorTable, lab_ts: i64, width: i64) -> Option<Vec<f64>> {
    let (lo, hi) = sensors.rows_in_window(lab_ts - width, lab_ts);
    (0..sensors.n_sensors())
        .map(|j| {
            let (sum, count) = (lo..hi)
                .filter(|&i| sensors.valid[[i, j]])
                .fold((0.0, 0usize), |(s, c), i| {
                    (s + sensors.values[[i, j]], c + 1)
                });
            (count > 0).then(|| sum / count as f64)
        })
        .collect()
}

/// Fits a scaler on `fit_rows` and applies it to every row. `names` label
/// the columns in error messages.
pub fn standardize(
    m: ArrayView2<f64>,
    fit_rows: &[usize],
    names: &[String],
) -> Result<(Array2<f64>, Scaler)> {
    if fit_rows.is_empty() {
        return Err(Error::InvalidArgument(
            "no rows to fit the scaler on".into(),
        ));
    }
    let k = fit_rows.len() as f64;
    let mut scaler = Scaler {
        mean: Vec::with_capacity(m.ncols()),
        std: Vec::with_capacity(m.ncols()),
    };
    for j in 0..m.ncols() {
        let mean = fit_rows.iter().map(|&i| m[[i, j]]).sum::<f64>() / k;
        let var = fit_rows
            .iter()
            .map(|&i| (m[[i, j]] - mean).powi(2))
            .sum::<f64>()
            / k;
        let std = var.sqrt();
        if std.is_nan() || std <= 1e-12 * mean.abs().max(1.0) {
            let name = names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("column {j}"));
            return Err(Error::ZeroVariance(name));
        }
        scaler.mean.push(mean);
        scaler.std.push(std);
    }
    Ok((scaler.transform(m), scaler))
}

/// Seeded shuffle split; `|train| = floor(frac · n)`. Both lists are sorted.
pub fn split_train_test(n: usize, frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = train_size(n, frac)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx.split_off(n_train);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

/// First `floor(frac · n)` rows train, the rest test.
pub fn split_chronological(n: usize, frac: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = train_size(n, frac)?;
    Ok(((0..n_train).collect(), (n_train..n).collect()))
}

fn train_size(n: usize, frac: f64) -> Result<usize> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {frac}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} samples")));
    }
    // The nudge keeps products like 0.7 · 10 from flooring to 6.
    Ok(((frac * n as f64) + 1e-9).floor() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    #[default]
    Shuffled,
    Chronological,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalerFit {
    #[default]
    TrainRows,
    /// Scale before splitting, as in the original workflow.
    AllRows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    pub window_secs: i64,
    pub train_frac: f64,
    pub seed: u64,
    pub split: SplitMode,
    pub scaler_fit: ScalerFit,
    pub exec: Execution,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            window_secs: DEFAULT_WINDOW_SECS,
            train_frac: DEFAULT_TRAIN_FRAC,
            seed: 0,
            split: SplitMode::default(),
            scaler_fit: ScalerFit::default(),
            exec: Execution::default(),
        }
    }
}

/// Row-aligned model inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub timestamps: Vec<i64>,
    pub feature_names: Vec<String>,
    pub x_raw: Array2<f64>,
    /// Targets in °C.
    pub y_raw: Array2<f64>,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub x_scaler: Scaler,
    pub y_scaler: Scaler,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl AlignedDataset {
    pub fn n_samples(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
        m.select(Axis(0), idx)
    }

    /// Per-point targets of the training rows in time order, °C.
    pub fn train_targets(&self, point: usize) -> Vec<f64> {
        self.train_idx
            .iter()
            .map(|&i| self.y_raw[[i, point]])
            .collect()
    }
}

/// Averages sensors before every lab sample, drops rows with empty windows,
/// splits and scales.
pub fn align_dataset(
    sensors: &SensorTable,
    lab: &LabTable,
    cfg: &AlignConfig,
) -> Result<(AlignedDataset, CleanReport)> {
    let feats = map_indexed(cfg.exec, lab.n_rows(), |i| {
        window_average(sensors, lab.timestamps[i], cfg.window_secs)
    });
    let mut report = CleanReport::for_stage("align");
    let kept: Vec<usize> = (0..lab.n_rows()).filter(|&i| feats[i].is_some()).collect();
    report.dropped_empty_window = lab.n_rows() - kept.len();

    let n = kept.len();
    let p = sensors.n_sensors();
    let mut x_raw = Array2::zeros((n, p));
    let mut y_raw = Array2::zeros((n, N_POINTS));
    for (r, &i) in kept.iter().enumerate() {
        let f = feats[i].as_ref().expect("kept rows have features");
        x_raw
            .row_mut(r)
            .assign(&ndarray::ArrayView1::from(f.as_slice()));
        y_raw.row_mut(r).assign(&lab.values.row(i));
    }

    let (train_idx, test_idx) = match cfg.split {
        SplitMode::Shuffled => split_train_test(n, cfg.train_frac, cfg.seed)?,
        SplitMode::Chronological => split_chronological(n, cfg.train_frac)?,
    };
    let all: Vec<usize>;
    let fit_rows = match cfg.scaler_fit {
        ScalerFit::TrainRows => &train_idx,
        ScalerFit::AllRows => {
            all = (0..n).collect();
            &all
        }
    };
    let (x, x_scaler) = standardize(x_raw.view(), fit_rows, &sensors.names)?;
    let point_names: Vec<String> = crate::ingest::POINT_LABELS
        .iter()
        .map(|v| format!("vol_{v}"))
        .collect();
    let (y, y_scaler) = standardize(y_raw.view(), fit_rows, &point_names)?;

    Ok((
        AlignedDataset {
            timestamps: kept.iter().map(|&i| lab.timestamps[i]).collect(),
            feature_names: sensors.names.clone(),
            x_raw,
            y_raw,
            x,
            y,
            x_scaler,
            y_scaler,
            train_idx,
            test_idx,
        },
        report,
    ))
}

const ALIGNED_MAGIC: &[u8; 4] = b"SSAD";
const ALIGNED_VERSION: u32 = 1;

/// Writes the dataset in the `aligned.bin` layout (see `docs/formats.md`).
pub fn write_aligned(ds: &AlignedDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = Writer::new(BufWriter::new(file), "aligned dataset");
    w.bytes(ALIGNED_MAGIC)?;
    w.u32(ALIGNED_VERSION)?;
    w.i64s(&ds.timestamps)?;
    w.strs(&ds.feature_names)?;
    w.matrix(&ds.x_raw)?;
    w.matrix(&ds.y_raw)?;
    for s in [&ds.x_scaler, &ds.y_scaler] {
        w.f64s(&s.mean)?;
        w.f64s(&s.std)?;
    }
    w.usizes(&ds.train_idx)?;
    w.usizes(&ds.test_idx)?;
    let mut inner = w.into_inner();
    inner.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aligned(path: &Path) -> Result<AlignedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(BufReader::new(file), "aligned dataset");
    if &r.bytes::<4>()? != ALIGNED_MAGIC {
        return Err(r.fail("bad magic"));
    }
    let version = r.u32()?;
    if version != ALIGNED_VERSION {
        return Err(r.fail(format!("unsupported version {version}")));
    }
    let timestamps = r.i64s()?;
    let feature_names = r.strs()?;
    let x_raw = r.matrix()?;
    let y_raw = r.matrix()?;
    let mut scalers = Vec::with_capacity(2);
    for _ in 0..2 {
        scalers.push(Scaler {
            mean: r.f64s()?,
            std: r.f64s()?,
        });
    }
    let train_idx = r.usizes()?;
    let test_idx = r.usizes()?;
    r.finish()?;

    let n = timestamps.len();
    let consistent = x_raw.dim() == (n, feature_names.len())
        && y_raw.dim() == (n, N_POINTS)
        && scalers[0].n_columns() == feature_names.len()
        && scalers[1].n_columns() == N_POINTS
        && train_idx.len() + test_idx.len() == n
        && train_idx.iter().chain(&test_idx).all(|&i| i < n);
    if !consistent {
        return Err(Error::format("aligned dataset", "inconsistent shapes"));
    }
    let y_scaler = scalers.pop().expect("two scalers");
    let x_scaler = scalers.pop().expect("two scalers");
    Ok(AlignedDataset {
        x: x_scaler.transform(x_raw.view()),
        y: y_scaler.transform(y_raw.view()),
        timestamps,
        feature_names,
        x_raw,
        y_raw,
        x_scaler,
        y_scaler,
        train_idx,
        test_idx,
    })
}
