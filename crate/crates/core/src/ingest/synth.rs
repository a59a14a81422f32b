//! Synthetic VDU-like plant and laboratory data with a logged ground truth.
//!
//! Each sensor follows a piecewise-constant operating level (regimes of 4 to
//! 36 hours) plus Gaussian noise whose variance is four times the regime
//! variance. Short-term spikes, long-term mean shifts and laboratory
//! artifacts are planted on top and every planted location is logged.
//!
//! The laboratory curve depends on five designated sensors only. With
//! `z_s = (1-hour mean of s - base_s) / regime_scale_s`:
//!
//! ```text
//! g = 6 z_T3 + 3 z_T0 + 2 z_T31 - 1.5 z_PT + z_T0 z_F3 + 0.8 (z_T31^2 - 1)
//! y_k = CURVE_BASE[k] + CURVE_SLOPE[k] g + N(0, 0.8^2)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use ndarray::Array2;

use super::table::{LabTable, SensorTable, N_POINTS};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

/// 2020-01-01T00:00:00Z.
pub const START_EPOCH: i64 = 1_577_836_800;
pub const MINUTES_PER_DAY: usize = 1440;

/// Sensors driving the laboratory curve, most influential first.
pub const DRIVING_SENSORS: [&str; 5] = ["T3", "T0", "T31", "PT", "F3"];

const OTHER_SENSORS: [&str; 26] = [
    "T1", "T2", "T4", "T5", "T11", "T21", "T41", "T51", "T32", "T42", "PB", "P1", "P2", "P3", "P4",
    "P5", "F1", "F2", "F4", "F5", "F11", "F21", "F31", "F40", "F50", "F60",
];

pub const CURVE_BASE: [f64; N_POINTS] = [320.0, 345.0, 370.0, 385.0, 400.0, 425.0, 455.0];
pub const CURVE_SLOPE: [f64; N_POINTS] = [0.8, 0.9, 1.0, 1.0, 1.1, 1.2, 1.4];
const LAB_NOISE: f64 = 0.8;

/// Generator settings. Artifact rates default to the proportions observed on
/// the refinery data (72.7% null rows, 5.7% duplicates, 3.27% sensor spikes,
/// 91 of 1299 lab rows outside the IQR fences).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    pub n_days: usize,
    pub sensors: usize,
    /// Fraction of raw lab rows that are null records.
    pub null_rate: f64,
    /// Fraction of raw lab rows that duplicate a genuine record.
    pub dup_rate: f64,
    /// Mean per-cell probability of a short-term sensor spike.
    pub short_outlier_rate: f64,
    /// Probability that a genuine lab record carries one gross error.
    pub lab_outlier_rate: f64,
    /// Half-open day ranges with a sensor-wide mean shift.
    pub long_periods: Vec<(usize, usize)>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_days: 300,
            sensors: 31,
            null_rate: 0.727,
            dup_rate: 0.057,
            short_outlier_rate: 0.0327,
            lab_outlier_rate: 0.07,
            long_periods: vec![(10, 12), (200, 201)],
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("null_rate", self.null_rate),
            ("dup_rate", self.dup_rate),
            ("short_outlier_rate", self.short_outlier_rate),
            ("lab_outlier_rate", self.lab_outlier_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {r} not in [0, 1]"
                )));
            }
        }
        if self.null_rate + self.dup_rate >= 1.0 {
            return Err(Error::InvalidArgument(
                "null_rate + dup_rate must be below 1".into(),
            ));
        }
        if self.n_days == 0 || self.sensors == 0 {
            return Err(Error::InvalidArgument(
                "n_days and sensors must be positive".into(),
            ));
        }
        let mut last_end = 0;
        for &(a, b) in &self.long_periods {
            if a >= b || b > self.n_days || a < last_end {
                return Err(Error::InvalidArgument(format!(
                    "long period ({a}, {b}) must be ordered, non-empty and within {} days",
                    self.n_days
                )));
            }
            last_end = b;
        }
        Ok(())
    }
}

/// A planted long-term anomaly, in sensor rows (inclusive) and epoch seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthPeriod {
    pub start_idx: usize,
    pub end_idx: usize,
    pub start_ts: i64,
    pub end_ts: i64,
}

/// Every artifact the generator planted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    /// `(row, sensor)` of each injected spike, sorted.
    pub spikes: Vec<(usize, usize)>,
    pub long_periods: Vec<TruthPeriod>,
    /// Regime boundaries per sensor.
    pub change_points: Vec<Vec<usize>>,
    /// Indices into the returned (sorted) lab table.
    pub lab_null_rows: Vec<usize>,
    pub lab_duplicate_rows: Vec<usize>,
    pub lab_outlier_rows: Vec<usize>,
    /// Sensors entering the laboratory map, most influential first.
    pub driving_sensors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub sensors: SensorTable,
    pub lab: LabTable,
    pub truth: GroundTruth,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn sensor_name(j: usize) -> String {
    if j < DRIVING_SENSORS.len() {
        DRIVING_SENSORS[j].to_string()
    } else if j - DRIVING_SENSORS.len() < OTHER_SENSORS.len() {
        OTHER_SENSORS[j - DRIVING_SENSORS.len()].to_string()
    } else {
        format!("S{j}")
    }
}

struct SensorTrack {
    clean: Vec<f64>,
    observed: Vec<f64>,
    spikes: Vec<usize>,
    change_points: Vec<usize>,
    base: f64,
    scale: f64,
}

/// Per-sensor spike rates spread evenly around the mean rate (mean preserved),
/// so individual signals range from roughly a quarter to 1.75x the average.
fn spike_rate(spec: &SynthSpec, j: usize) -> f64 {
    if spec.sensors == 1 {
        return spec.short_outlier_rate;
    }
    let lo = 0.2385;
    let factor = lo + (2.0 - 2.0 * lo) * j as f64 / (spec.sensors - 1) as f64;
    (spec.short_outlier_rate * factor).min(1.0)
}

fn generate_sensor(spec: &SynthSpec, j: usize, n: usize) -> SensorTrack {
    let mut rng = rng_for(spec.seed, j as u64 + 1);
    let name = sensor_name(j);
    let (base, rel) = match name.as_bytes()[0] {
        b'T' => (rng.random_range(150.0..420.0), 0.01),
        b'P' => (rng.random_range(2.0..20.0), 0.03),
        _ => (rng.random_range(10.0..120.0), 0.03),
    };
    let scale = rel * base;
    let noise = 2.0 * scale;

    let mut clean = Vec::with_capacity(n);
    let mut change_points = Vec::new();
    while clean.len() < n {
        if !clean.is_empty() {
            change_points.push(clean.len());
        }
        let len = rng.random_range(240..=2160).min(n - clean.len());
        let level = base + scale * normal(&mut rng);
        for _ in 0..len {
            clean.push(level + noise * normal(&mut rng));
        }
    }

    let mut observed = clean.clone();
    let total_sd = (scale * scale + noise * noise).sqrt();
    for &(a, b) in &spec.long_periods {
        let shift = if rng.random_bool(0.5) { 3.0 } else { -3.0 } * total_sd;
        for v in &mut observed[a * MINUTES_PER_DAY..b * MINUTES_PER_DAY] {
            *v += shift;
        }
    }
    let rate = spike_rate(spec, j);
    let mut spikes = Vec::new();
    for (t, v) in observed.iter_mut().enumerate() {
        if rate > 0.0 && rng.random_bool(rate) {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            *v += sign * rng.random_range(8.0..15.0) * noise;
            spikes.push(t);
        }
    }
    SensorTrack {
        clean,
        observed,
        spikes,
        change_points,
        base,
        scale,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum RowKind {
    Genuine,
    Null,
    Duplicate,
}

struct RawRow {
    ts: i64,
    values: [f64; N_POINTS],
    valid: [bool; N_POINTS],
    kind: RowKind,
    outlier: bool,
}

fn null_row(rng: &mut impl Rng, ts: i64) -> RawRow {
    let mut values = [0.0; N_POINTS];
    let mut valid = [true; N_POINTS];
    let all = rng.random_bool(0.8);
    for k in 0..N_POINTS {
        values[k] = CURVE_BASE[k] + 5.0 * normal(rng);
        if all || rng.random_bool(0.5) {
            valid[k] = false;
        }
    }
    if valid.iter().all(|&v| v) {
        valid[rng.random_range(0..N_POINTS)] = false;
    }
    for k in 0..N_POINTS {
        if !valid[k] {
            values[k] = if rng.random_bool(0.5) { 0.0 } else { f64::NAN };
        }
    }
    RawRow {
        ts,
        values,
        valid,
        kind: RowKind::Null,
        outlier: false,
    }
}

fn duplicate_of(row: &RawRow) -> RawRow {
    RawRow {
        ts: row.ts,
        values: row.values,
        valid: row.valid,
        kind: RowKind::Duplicate,
        outlier: row.outlier,
    }
}

fn plant_gross_error(rng: &mut impl Rng, values: &mut [f64; N_POINTS], lo: f64, hi: f64) {
    let k = rng.random_range(0..N_POINTS);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    values[k] += sign * rng.random_range(lo..hi);
}

/// Sorts rows by timestamp (stable, so originals precede their duplicates)
/// and assembles the table plus per-kind row indices.
fn assemble(mut rows: Vec<RawRow>) -> (LabTable, Vec<usize>, Vec<usize>, Vec<usize>) {
    rows.sort_by_key(|r| r.ts);
    let n = rows.len();
    let mut values = Array2::zeros((n, N_POINTS));
    let mut valid = Array2::from_elem((n, N_POINTS), false);
    let (mut nulls, mut dups, mut outliers) = (Vec::new(), Vec::new(), Vec::new());
    for (i, r) in rows.iter().enumerate() {
        for k in 0..N_POINTS {
            values[[i, k]] = r.values[k];
            valid[[i, k]] = r.valid[k];
        }
        match r.kind {
            RowKind::Null => nulls.push(i),
            RowKind::Duplicate => dups.push(i),
            RowKind::Genuine if r.outlier => outliers.push(i),
            RowKind::Genuine => {}
        }
    }
    let timestamps = rows.iter().map(|r| r.ts).collect();
    let lab = LabTable::new(timestamps, values, valid).expect("rows sorted by construction");
    (lab, nulls, dups, outliers)
}

/// The curve's nonlinear driver on standardized sensor levels.
pub fn curve_driver(z: &[f64; 5]) -> f64 {
    let [t3, t0, t31, pt, f3] = *z;
    6.0 * t3 + 3.0 * t0 + 2.0 * t31 - 1.5 * pt + t0 * f3 + 0.8 * (t31 * t31 - 1.0)
}

/// Generates plant data, laboratory data and the log of planted artifacts.
/// The output is a pure function of `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let n = spec.n_days * MINUTES_PER_DAY;
    let tracks = map_indexed(Execution::default(), spec.sensors, |j| {
        generate_sensor(spec, j, n)
    });

    let timestamps: Vec<i64> = (0..n).map(|i| START_EPOCH + 60 * i as i64).collect();
    let names: Vec<String> = (0..spec.sensors).map(sensor_name).collect();
    let mut values = Array2::zeros((n, spec.sensors));
    for (j, track) in tracks.iter().enumerate() {
        for (i, &v) in track.observed.iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    let sensors = SensorTable::new(
        timestamps.clone(),
        names.clone(),
        values,
        Array2::from_elem((n, spec.sensors), true),
    )?;

    // Lab records: one genuine sample per day, drawn between 08:00 and 12:00.
    let mut rng = rng_for(spec.seed, 0);
    let mut rows = Vec::new();
    for d in 0..spec.n_days {
        let t = d * MINUTES_PER_DAY + 480 + rng.random_range(0..240);
        let mut z = [0.0; 5];
        for (s, zs) in z.iter_mut().enumerate().take(spec.sensors.min(5)) {
            let track = &tracks[s];
            let avg = track.clean[t + 1 - 60..=t].iter().sum::<f64>() / 60.0;
            *zs = (avg - track.base) / track.scale;
        }
        let g = curve_driver(&z);
        let mut values = [0.0; N_POINTS];
        for k in 0..N_POINTS {
            values[k] = CURVE_BASE[k] + CURVE_SLOPE[k] * g + LAB_NOISE * normal(&mut rng);
        }
        let outlier = rng.random_bool(spec.lab_outlier_rate);
        if outlier {
            plant_gross_error(&mut rng, &mut values, 40.0, 80.0);
        }
        rows.push(RawRow {
            ts: timestamps[t],
            values,
            valid: [true; N_POINTS],
            kind: RowKind::Genuine,
            outlier,
        });
    }
    let artifact_share = spec.null_rate + spec.dup_rate;
    let extra = (spec.n_days as f64 * artifact_share / (1.0 - artifact_share)).round() as usize;
    let null_share = if artifact_share > 0.0 {
        spec.null_rate / artifact_share
    } else {
        0.0
    };
    let genuine = rows.len();
    for _ in 0..extra {
        if rng.random_bool(null_share) {
            let ts = timestamps[rng.random_range(0..n)];
            rows.push(null_row(&mut rng, ts));
        } else {
            let src = rng.random_range(0..genuine);
            let dup = duplicate_of(&rows[src]);
            rows.push(dup);
        }
    }
    let (lab, lab_null_rows, lab_duplicate_rows, lab_outlier_rows) = assemble(rows);

    let mut spikes: Vec<(usize, usize)> = tracks
        .iter()
        .enumerate()
        .flat_map(|(j, tr)| tr.spikes.iter().map(move |&t| (t, j)))
        .collect();
    spikes.sort_unstable();
    let long_periods = spec
        .long_periods
        .iter()
        .map(|&(a, b)| {
            let (start_idx, end_idx) = (a * MINUTES_PER_DAY, b * MINUTES_PER_DAY - 1);
            TruthPeriod {
                start_idx,
                end_idx,
                start_ts: timestamps[start_idx],
                end_ts: timestamps[end_idx],
            }
        })
        .collect();
    let truth = GroundTruth {
        spikes,
        long_periods,
        change_points: tracks.iter().map(|t| t.change_points.clone()).collect(),
        lab_null_rows,
        lab_duplicate_rows,
        lab_outlier_rows,
        driving_sensors: names.iter().take(5).cloned().collect(),
    };
    Ok(Synthetic {
        sensors,
        lab,
        truth,
    })
}

/// Exact artifact counts for a lab-only replay of the cleaning pipeline.
/// Defaults reproduce the refinery counts: 6,037 raw rows made of 1,299
/// genuine, 4,391 null and 347 duplicate records; 91 genuine rows carry a
/// gross error and two genuine rows fall inside long-term anomaly periods.
#[derive(Debug, Clone, PartialEq)]
pub struct LabCounts {
    pub genuine: usize,
    pub nulls: usize,
    pub duplicates: usize,
    pub outliers: usize,
    /// Half-open day ranges; each receives exactly one genuine row.
    pub periods: Vec<(usize, usize)>,
}

impl Default for LabCounts {
    fn default() -> Self {
        LabCounts {
            genuine: 1299,
            nulls: 4391,
            duplicates: 347,
            outliers: 91,
            periods: vec![(1, 14), (789, 791)],
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabReplay {
    pub lab: LabTable,
    /// `[start, end]` epoch seconds of each anomaly period.
    pub periods: Vec<[i64; 2]>,
    pub null_rows: Vec<usize>,
    pub duplicate_rows: Vec<usize>,
    pub outlier_rows: Vec<usize>,
}

/// Builds a raw lab table with artifacts planted to exact counts. Genuine
/// values stay within ±10 °C of the base curve so that the IQR fences flag
/// exactly the planted gross errors.
pub fn replay_lab_counts(counts: &LabCounts, seed: u64) -> Result<LabReplay> {
    let period_rows = counts.periods.len();
    if counts.genuine < period_rows + counts.outliers {
        return Err(Error::InvalidArgument(
            "too few genuine rows for the requested outliers and periods".into(),
        ));
    }
    let mut rng = rng_for(seed, 0);
    let covered: usize = counts.periods.iter().map(|&(a, b)| b - a).sum();
    let last_period_end = counts.periods.iter().map(|p| p.1).max().unwrap_or(0);
    let horizon = (counts.genuine + covered + 200).max(last_period_end + 1);
    let in_period = |d: usize| counts.periods.iter().any(|&(a, b)| (a..b).contains(&d));

    let free_days: Vec<usize> = (0..horizon).filter(|&d| !in_period(d)).collect();
    let mut chosen =
        rand::seq::index::sample(&mut rng, free_days.len(), counts.genuine - period_rows)
            .into_iter()
            .map(|i| free_days[i])
            .collect::<Vec<_>>();
    chosen.sort_unstable();
    let outlier_picks: Vec<usize> =
        rand::seq::index::sample(&mut rng, chosen.len(), counts.outliers).into_vec();
    let mut is_outlier = vec![false; chosen.len()];
    for i in outlier_picks {
        is_outlier[i] = true;
    }
    let days: Vec<(usize, bool)> = chosen
        .into_iter()
        .zip(is_outlier)
        .chain(counts.periods.iter().map(|&(a, _)| (a, false)))
        .collect();

    let day_ts = |d: usize| START_EPOCH + 86_400 * d as i64;
    let mut rows = Vec::with_capacity(counts.genuine + counts.nulls + counts.duplicates);
    for (d, outlier) in days {
        let ts = day_ts(d) + 60 * rng.random_range(480..720);
        let mut values = [0.0; N_POINTS];
        for (k, v) in values.iter_mut().enumerate() {
            *v = CURVE_BASE[k] + rng.random_range(-10.0..10.0);
        }
        if outlier {
            plant_gross_error(&mut rng, &mut values, 60.0, 100.0);
        }
        rows.push(RawRow {
            ts,
            values,
            valid: [true; N_POINTS],
            kind: RowKind::Genuine,
            outlier,
        });
    }
    let genuine = rows.len();
    for _ in 0..counts.nulls {
        let ts = day_ts(0) + 60 * rng.random_range(0..(horizon * MINUTES_PER_DAY) as i64);
        rows.push(null_row(&mut rng, ts));
    }
    for _ in 0..counts.duplicates {
        let src = rng.random_range(0..genuine);
        let dup = duplicate_of(&rows[src]);
        rows.push(dup);
    }
    let (lab, null_rows, duplicate_rows, outlier_rows) = assemble(rows);
    let periods = counts
        .periods
        .iter()
        .map(|&(a, b)| [day_ts(a), day_ts(b) - 1])
        .collect();
    Ok(LabReplay {
        lab,
        periods,
        null_rows,
        duplicate_rows,
        outlier_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            n_days: 4,
            sensors: 6,
            long_periods: vec![(1, 2)],
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_synthetic(&small(3)).unwrap();
        let b = generate_synthetic(&small(3)).unwrap();
        assert_eq!(a.sensors, b.sensors);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.lab.timestamps, b.lab.timestamps);
        assert_eq!(a.lab.valid, b.lab.valid);
        let bits = |t: &LabTable| t.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.lab), bits(&b.lab));
        let c = generate_synthetic(&small(4)).unwrap();
        assert_ne!(a.sensors.values, c.sensors.values);
    }

    #[test]
    fn zero_rates_plant_nothing() {
        let spec = SynthSpec {
            null_rate: 0.0,
            dup_rate: 0.0,
            short_outlier_rate: 0.0,
            lab_outlier_rate: 0.0,
            ..small(1)
        };
        let s = generate_synthetic(&spec).unwrap();
        assert!(s.truth.spikes.is_empty());
        assert!(s.truth.lab_null_rows.is_empty());
        assert!(s.truth.lab_duplicate_rows.is_empty());
        assert!(s.truth.lab_outlier_rows.is_empty());
        assert_eq!(s.lab.n_rows(), 4);
    }

    #[test]
    fn spike_log_matches_rate_on_ten_thousand_minutes() {
        let spec = SynthSpec {
            n_days: 7,
            sensors: 1,
            long_periods: vec![],
            ..Default::default()
        };
        let s = generate_synthetic(&spec).unwrap();
        let minutes = s.sensors.n_rows() as f64;
        let expected = 0.0327 * minutes;
        let sd = (minutes * 0.0327 * (1.0 - 0.0327)).sqrt();
        let got = s.truth.spikes.len() as f64;
        assert!((got - expected).abs() < 4.0 * sd, "{got} vs {expected}");
    }

    #[test]
    fn logged_artifacts_match_table() {
        let s = generate_synthetic(&small(9)).unwrap();
        for &i in &s.truth.lab_null_rows {
            assert!(s.lab.valid.row(i).iter().any(|&v| !v));
        }
        for &i in &s.truth.lab_duplicate_rows {
            assert!(i > 0);
            assert_eq!(s.lab.timestamps[i], s.lab.timestamps[i - 1]);
        }
        assert_eq!(s.truth.long_periods.len(), 1);
        assert_eq!(s.truth.long_periods[0].start_idx, 1440);
        assert_eq!(s.truth.driving_sensors[0], "T3");
    }

    #[test]
    fn replay_counts_are_exact() {
        let r = replay_lab_counts(&LabCounts::default(), 1).unwrap();
        assert_eq!(r.lab.n_rows(), 6037);
        assert_eq!(r.null_rows.len(), 4391);
        assert_eq!(r.duplicate_rows.len(), 347);
        assert_eq!(r.outlier_rows.len(), 91);
        assert_eq!(r.periods.len(), 2);
    }

    #[test]
    fn rejects_bad_rates() {
        let spec = SynthSpec {
            null_rate: 1.2,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = SynthSpec {
            long_periods: vec![(5, 3)],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }
}
