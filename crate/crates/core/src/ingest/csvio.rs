use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use ndarray::Array2;

use super::table::{LabTable, SensorTable, N_POINTS, POINT_LABELS};
use crate::error::{Error, Result};

/// Which sensor columns of a plant file to load.
///
/// With `keep` set only the listed sensors are loaded (in file order);
/// `drop` removes sensors afterwards, e.g. noisy or coked-up instruments.
#[derive(Debug, Clone, Default)]
pub struct ColumnMap {
    pub keep: Option<Vec<String>>,
    pub drop: Vec<String>,
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    if cell.is_empty() {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_timestamp(cell: &str, line: usize) -> Result<i64> {
    cell.parse::<i64>().map_err(|_| Error::BadTimestamp {
        line,
        value: cell.to_string(),
    })
}

fn check_timestamp_header(header: &csv::StringRecord) -> Result<()> {
    match header.get(0) {
        Some(first) if first.eq_ignore_ascii_case("timestamp") && header.len() > 1 => Ok(()),
        Some(first) => Err(Error::NoTimestampColumn(first.to_string())),
        None => Err(Error::NoTimestampColumn(String::new())),
    }
}

/// Reads a plant-sensor CSV: a `timestamp` column (epoch seconds) followed by
/// one column per sensor. Blank or unparseable cells are kept as invalid.
pub fn parse_sensor_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<SensorTable> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    check_timestamp_header(&header)?;

    let mut seen = HashSet::new();
    for name in header.iter().skip(1) {
        if !seen.insert(name) {
            return Err(Error::DuplicateSensor(name.to_string()));
        }
    }
    let selected: Vec<usize> = (1..header.len())
        .filter(|&c| {
            let name = &header[c];
            columns
                .keep
                .as_ref()
                .is_none_or(|keep| keep.iter().any(|k| k == name))
                && !columns.drop.iter().any(|d| d == name)
        })
        .collect();
    if let Some(keep) = &columns.keep {
        if let Some(missing) = keep.iter().find(|k| !seen.contains(k.as_str())) {
            return Err(Error::format(
                "column map",
                format!("sensor `{missing}` not in file"),
            ));
        }
    }
    let names: Vec<String> = selected.iter().map(|&c| header[c].to_string()).collect();

    let mut rows: Vec<(i64, Vec<Option<f64>>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ts = parse_timestamp(&record[0], i + 2)?;
        rows.push((
            ts,
            selected.iter().map(|&c| parse_cell(&record[c])).collect(),
        ));
    }
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    rows.sort_by_key(|(ts, _)| *ts);

    let (n, m) = (rows.len(), names.len());
    let mut values = Array2::from_elem((n, m), f64::NAN);
    let mut valid = Array2::from_elem((n, m), false);
    let mut timestamps = Vec::with_capacity(n);
    for (i, (ts, cells)) in rows.into_iter().enumerate() {
        timestamps.push(ts);
        for (j, cell) in cells.into_iter().enumerate() {
            if let Some(v) = cell {
                values[[i, j]] = v;
                valid[[i, j]] = true;
            }
        }
    }
    SensorTable::new(timestamps, names, values, valid)
}

/// Reads a laboratory CSV: `timestamp` plus exactly seven distillation
/// points. Zeros and blanks are both treated as missing.
pub fn parse_lab_csv(path: impl AsRef<Path>) -> Result<LabTable> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    check_timestamp_header(&header)?;
    if header.len() - 1 != N_POINTS {
        return Err(Error::WrongPointCount(header.len() - 1));
    }

    let mut rows: Vec<(i64, [Option<f64>; N_POINTS])> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => {
                Error::WrongPointCount((*len as usize).saturating_sub(1))
            }
            _ => csv_err(path, e),
        })?;
        let ts = parse_timestamp(&record[0], i + 2)?;
        let mut cells = [None; N_POINTS];
        for (k, cell) in cells.iter_mut().enumerate() {
            *cell = parse_cell(&record[k + 1]).filter(|&v| v != 0.0);
        }
        rows.push((ts, cells));
    }
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    rows.sort_by_key(|(ts, _)| *ts);

    let n = rows.len();
    let mut values = Array2::from_elem((n, N_POINTS), f64::NAN);
    let mut valid = Array2::from_elem((n, N_POINTS), false);
    let mut timestamps = Vec::with_capacity(n);
    for (i, (ts, cells)) in rows.into_iter().enumerate() {
        timestamps.push(ts);
        for (k, cell) in cells.into_iter().enumerate() {
            if let Some(v) = cell {
                values[[i, k]] = v;
                valid[[i, k]] = true;
            }
        }
    }
    LabTable::new(timestamps, values, valid)
}

fn cell_text(value: f64, valid: bool) -> String {
    if valid {
        value.to_string()
    } else {
        String::new()
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_sensor_csv(table: &SensorTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(table.names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut record = Vec::with_capacity(header.len());
    for (i, ts) in table.timestamps.iter().enumerate() {
        record.clear();
        record.push(ts.to_string());
        for j in 0..table.n_sensors() {
            record.push(cell_text(table.values[[i, j]], table.valid[[i, j]]));
        }
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_lab_csv(table: &LabTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(POINT_LABELS.iter().map(|p| format!("vol_{p}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, ts) in table.timestamps.iter().enumerate() {
        let mut record = vec![ts.to_string()];
        for k in 0..N_POINTS {
            record.push(cell_text(table.values[[i, k]], table.valid[[i, k]]));
        }
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
