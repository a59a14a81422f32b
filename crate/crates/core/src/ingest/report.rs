use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Ledger of what each cleaning stage removed or repaired.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub stage: String,
    pub removed_null: usize,
    pub removed_duplicate: usize,
    pub removed_outlier: usize,
    /// Lab rows dropped because they fell inside a long-term anomaly period.
    pub removed_long_term: usize,
    /// Lab rows dropped because no sensor data covered their averaging window.
    pub dropped_empty_window: usize,
    pub repaired_short_term: BTreeMap<String, usize>,
    /// `[start, end]` epoch seconds, ordered and non-overlapping.
    pub long_term_periods: Vec<[i64; 2]>,
}

impl CleanReport {
    pub fn for_stage(stage: &str) -> Self {
        CleanReport {
            stage: stage.to_string(),
            ..Default::default()
        }
    }

    /// Folds a later stage's counts into this ledger.
    pub fn absorb(&mut self, other: &CleanReport) {
        self.stage = other.stage.clone();
        self.removed_null += other.removed_null;
        self.removed_duplicate += other.removed_duplicate;
        self.removed_outlier += other.removed_outlier;
        self.removed_long_term += other.removed_long_term;
        self.dropped_empty_window += other.dropped_empty_window;
        for (name, n) in &other.repaired_short_term {
            *self.repaired_short_term.entry(name.clone()).or_default() += n;
        }
        self.long_term_periods
            .extend(other.long_term_periods.iter().copied());
        self.long_term_periods.sort();
    }

    fn counts_json(&self) -> Value {
        json!({
            "removed_null": self.removed_null,
            "removed_duplicate": self.removed_duplicate,
            "removed_outlier": self.removed_outlier,
            "removed_long_term": self.removed_long_term,
            "dropped_empty_window": self.dropped_empty_window,
            "repaired_short_term": self.repaired_short_term,
        })
    }
}

/// Renders the report document: a JSON object with keys `counts`, `metrics`,
/// `periods` and `stage`, pretty-printed with two-space indent and sorted keys.
pub fn render_report(report: &CleanReport, metrics: &Map<String, Value>) -> String {
    let doc = json!({
        "stage": report.stage,
        "counts": report.counts_json(),
        "periods": report.long_term_periods,
        "metrics": Value::Object(metrics.clone()),
    });
    let mut text =
        serde_json::to_string_pretty(&sorted(doc)).expect("report is always serializable");
    text.push('\n');
    text
}

// Key order must not depend on serde_json's `preserve_order` feature.
fn sorted(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sorted(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

pub fn write_report(
    report: &CleanReport,
    metrics: &Map<String, Value>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_report(report, metrics)).map_err(|e| Error::io(path, e))
}

/// Reads back a report written by [`write_report`].
pub fn read_report(path: impl AsRef<Path>) -> Result<(CleanReport, Map<String, Value>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| Error::format("report", e.to_string()))?;
    let bad = || Error::format("report", "unexpected document layout");
    let counts = doc.get("counts").ok_or_else(bad)?;
    let count = |key: &str| counts.get(key).and_then(Value::as_u64).unwrap_or(0) as usize;
    let report = CleanReport {
        stage: doc
            .get("stage")
            .and_then(Value::as_str)
            .ok_or_else(bad)?
            .to_string(),
        removed_null: count("removed_null"),
        removed_duplicate: count("removed_duplicate"),
        removed_outlier: count("removed_outlier"),
        removed_long_term: count("removed_long_term"),
        dropped_empty_window: count("dropped_empty_window"),
        repaired_short_term: serde_json::from_value(
            counts
                .get("repaired_short_term")
                .cloned()
                .unwrap_or(Value::Object(Map::new())),
        )
        .map_err(|e| Error::format("report", e.to_string()))?,
        long_term_periods: serde_json::from_value(doc.get("periods").cloned().ok_or_else(bad)?)
            .map_err(|e| Error::format("report", e.to_string()))?,
    };
    let metrics = doc
        .get("metrics")
        .and_then(Value::as_object)
        .cloned()
        .ok_or_else(bad)?;
    Ok((report, metrics))
}
