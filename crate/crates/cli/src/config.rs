//! Flat `section.key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default; unknown keys and malformed values are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use softsense_core::align::{AlignConfig, ScalerFit, SplitMode};
use softsense_core::evalreport::DEFAULT_BINS;
use softsense_core::exec::Execution;
use softsense_core::ingest::{ColumnMap, SynthSpec};
use softsense_core::lab_prep::TUKEY_MULTIPLIER;
use softsense_core::mlp::{AdamConfig, TrainConfig};
use softsense_core::sarima::StepwiseConfig;
use softsense_core::sensor_prep::SensorPrepConfig;
use softsense_core::shap::ShapConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: bad value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("config line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
}

/// Effective settings of every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sensors_csv: Option<PathBuf>,
    pub lab_csv: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub parallel: bool,
    pub synth_enabled: bool,
    pub synth: SynthSpec,
    pub sensor_keep: Option<Vec<String>>,
    pub sensor_drop: Vec<String>,
    pub iqr_multiplier: f64,
    pub sensor_prep: SensorPrepConfig,
    pub align: AlignConfig,
    pub sarima: StepwiseConfig,
    pub train: TrainConfig,
    pub shap: ShapConfig,
    pub bins: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sensors_csv: None,
            lab_csv: None,
            out_dir: PathBuf::from("out"),
            seed: 7,
            parallel: true,
            synth_enabled: false,
            synth: SynthSpec::default(),
            sensor_keep: None,
            sensor_drop: Vec::new(),
            iqr_multiplier: TUKEY_MULTIPLIER,
            sensor_prep: SensorPrepConfig::default(),
            align: AlignConfig::default(),
            sarima: StepwiseConfig::default(),
            train: TrainConfig::default(),
            shap: ShapConfig::default(),
            bins: DEFAULT_BINS,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

/// `10-12, 200-201` as half-open day ranges.
fn parse_periods(v: &str) -> Option<Vec<(usize, usize)>> {
    parse_list(v)
        .iter()
        .map(|item| {
            let (a, b) = item.split_once('-')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}

fn positive(v: f64) -> Option<f64> {
    (v.is_finite() && v > 0.0).then_some(v)
}

fn unit_open(v: f64) -> Option<f64> {
    (v > 0.0 && v < 1.0).then_some(v)
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.into(),
                });
            }
            cfg.set(key, value, line)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            line,
            key: key.into(),
            value: value.into(),
        };
        macro_rules! num {
            ($t:ty) => {
                value.parse::<$t>().map_err(|_| bad())?
            };
        }
        macro_rules! check {
            ($e:expr) => {
                $e.ok_or_else(bad)?
            };
        }
        match key {
            "paths.sensors" => self.sensors_csv = Some(PathBuf::from(value)),
            "paths.lab" => self.lab_csv = Some(PathBuf::from(value)),
            "paths.out" => self.out_dir = PathBuf::from(value),
            "run.seed" => self.seed = num!(u64),
            "run.parallel" => self.parallel = check!(parse_bool(value)),
            "synth.enabled" => self.synth_enabled = check!(parse_bool(value)),
            "synth.n_days" => self.synth.n_days = num!(usize),
            "synth.sensors" => self.synth.sensors = num!(usize),
            "synth.null_rate" => self.synth.null_rate = num!(f64),
            "synth.dup_rate" => self.synth.dup_rate = num!(f64),
            "synth.short_outlier_rate" => self.synth.short_outlier_rate = num!(f64),
            "synth.lab_outlier_rate" => self.synth.lab_outlier_rate = num!(f64),
            "synth.long_periods" => self.synth.long_periods = check!(parse_periods(value)),
            "lab.iqr_multiplier" => self.iqr_multiplier = check!(positive(num!(f64))),
            "sensors.keep" => self.sensor_keep = Some(parse_list(value)),
            "sensors.drop" => self.sensor_drop = parse_list(value),
            "sensors.penalty_factor" => {
                self.sensor_prep.penalty_factor = check!(positive(num!(f64)))
            }
            "sensors.min_seg" => self.sensor_prep.min_seg = num!(usize).max(1),
            "sensors.var_target" => self.sensor_prep.var_target = check!(unit_open(num!(f64))),
            "sensors.alpha" => self.sensor_prep.alpha = check!(unit_open(num!(f64))),
            "sensors.min_duration" => self.sensor_prep.min_duration = num!(usize).max(1),
            "align.window_secs" => self.align.window_secs = num!(i64).max(1),
            "align.train_frac" => self.align.train_frac = check!(unit_open(num!(f64))),
            "align.split" => {
                self.align.split = match value {
                    "shuffled" => SplitMode::Shuffled,
                    "chronological" => SplitMode::Chronological,
                    _ => return Err(bad()),
                }
            }
            "align.scaler_fit" => {
                self.align.scaler_fit = match value {
                    "train" => ScalerFit::TrainRows,
                    "all" => ScalerFit::AllRows,
                    _ => return Err(bad()),
                }
            }
            "sarima.m" => self.sarima.m = num!(usize),
            "sarima.max_p" => self.sarima.max_p = num!(usize),
            "sarima.max_q" => self.sarima.max_q = num!(usize),
            "sarima.max_P" => self.sarima.max_sp = num!(usize),
            "sarima.max_Q" => self.sarima.max_sq = num!(usize),
            "sarima.max_steps" => self.sarima.max_steps = num!(usize),
            "train.max_epochs" => self.train.max_epochs = num!(usize),
            "train.lr" => self.train.adam.lr = check!(positive(num!(f64))),
            "train.beta1" => self.train.adam.beta1 = num!(f64),
            "train.beta2" => self.train.adam.beta2 = num!(f64),
            "train.epsilon" => self.train.adam.epsilon = check!(positive(num!(f64))),
            "train.huber_delta" => self.train.huber_delta = check!(positive(num!(f64))),
            "train.patience" => {
                self.train.patience = match num!(usize) {
                    0 => None,
                    n => Some(n),
                }
            }
            "shap.permutations" => self.shap.n_permutations = num!(usize).max(1),
            "shap.background" => self.shap.background_size = num!(usize).max(1),
            "shap.exact" => self.shap.exact_when_possible = check!(parse_bool(value)),
            "eval.bins" => self.bins = num!(usize).max(1),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                })
            }
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    /// Propagates the run seed and execution mode into the stage configs.
    pub fn finalize(&mut self) {
        let exec = self.execution();
        self.synth.seed = self.seed;
        self.sensor_prep.exec = exec;
        self.align.seed = self.seed;
        self.align.exec = exec;
        self.sarima.exec = exec;
        self.train.seed = self.seed;
        self.shap.seed = self.seed;
        self.shap.exec = exec;
    }

    pub fn column_map(&self) -> ColumnMap {
        ColumnMap {
            keep: self.sensor_keep.clone(),
            drop: self.sensor_drop.clone(),
        }
    }

    pub fn sensors_path(&self) -> PathBuf {
        self.sensors_csv
            .clone()
            .unwrap_or_else(|| self.out_dir.join("sensors.csv"))
    }

    pub fn lab_path(&self) -> PathBuf {
        self.lab_csv
            .clone()
            .unwrap_or_else(|| self.out_dir.join("lab.csv"))
    }

    /// Canonical `key = value` listing of the effective configuration, one
    /// key per line in sorted order. Execution mode is left out: it does not
    /// change any result.
    pub fn canonical(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let list = |v: &[String]| v.join(",");
        let periods = self
            .synth
            .long_periods
            .iter()
            .map(|(a, b)| format!("{a}-{b}"))
            .collect::<Vec<_>>()
            .join(",");
        let adam: &AdamConfig = &self.train.adam;
        let mut entries: Vec<(&str, String)> = vec![
            ("paths.sensors", path(&self.sensors_csv)),
            ("paths.lab", path(&self.lab_csv)),
            ("run.seed", self.seed.to_string()),
            ("synth.enabled", self.synth_enabled.to_string()),
            ("synth.n_days", self.synth.n_days.to_string()),
            ("synth.sensors", self.synth.sensors.to_string()),
            ("synth.null_rate", self.synth.null_rate.to_string()),
            ("synth.dup_rate", self.synth.dup_rate.to_string()),
            (
                "synth.short_outlier_rate",
                self.synth.short_outlier_rate.to_string(),
            ),
            (
                "synth.lab_outlier_rate",
                self.synth.lab_outlier_rate.to_string(),
            ),
            ("synth.long_periods", periods),
            ("lab.iqr_multiplier", self.iqr_multiplier.to_string()),
            (
                "sensors.keep",
                self.sensor_keep
                    .as_deref()
                    .map(list)
                    .unwrap_or_else(|| "*".into()),
            ),
            ("sensors.drop", list(&self.sensor_drop)),
            (
                "sensors.penalty_factor",
                self.sensor_prep.penalty_factor.to_string(),
            ),
            ("sensors.min_seg", self.sensor_prep.min_seg.to_string()),
            (
                "sensors.var_target",
                self.sensor_prep.var_target.to_string(),
            ),
            ("sensors.alpha", self.sensor_prep.alpha.to_string()),
            (
                "sensors.min_duration",
                self.sensor_prep.min_duration.to_string(),
            ),
            ("align.window_secs", self.align.window_secs.to_string()),
            ("align.train_frac", self.align.train_frac.to_string()),
            (
                "align.split",
                format!("{:?}", self.align.split).to_lowercase(),
            ),
            (
                "align.scaler_fit",
                format!("{:?}", self.align.scaler_fit).to_lowercase(),
            ),
            ("sarima.m", self.sarima.m.to_string()),
            ("sarima.max_p", self.sarima.max_p.to_string()),
            ("sarima.max_q", self.sarima.max_q.to_string()),
            ("sarima.max_P", self.sarima.max_sp.to_string()),
            ("sarima.max_Q", self.sarima.max_sq.to_string()),
            ("sarima.max_steps", self.sarima.max_steps.to_string()),
            ("train.max_epochs", self.train.max_epochs.to_string()),
            ("train.lr", adam.lr.to_string()),
            ("train.beta1", adam.beta1.to_string()),
            ("train.beta2", adam.beta2.to_string()),
            ("train.epsilon", adam.epsilon.to_string()),
            ("train.huber_delta", self.train.huber_delta.to_string()),
            (
                "train.patience",
                self.train.patience.unwrap_or(0).to_string(),
            ),
            ("shap.permutations", self.shap.n_permutations.to_string()),
            ("shap.background", self.shap.background_size.to_string()),
            ("shap.exact", self.shap.exact_when_possible.to_string()),
            ("eval.bins", self.bins.to_string()),
        ];
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = PipelineConfig::parse(
            "# comment\n\nrun.seed = 11\nsynth.long_periods = 3-5, 8-9\ntrain.patience = 0\nalign.split = chronological\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.synth.long_periods, vec![(3, 5), (8, 9)]);
        assert_eq!(cfg.train.patience, None);
        assert_eq!(cfg.align.split, SplitMode::Chronological);
        assert_eq!(cfg.train.max_epochs, 10000);
        assert_eq!(cfg.iqr_multiplier, 1.5);
    }

    #[test]
    fn rejects_unknown_bad_and_duplicate_keys() {
        assert!(matches!(
            PipelineConfig::parse("train.epochs = 5"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("train.lr = fast"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("sensors.alpha = 1.5"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("run.seed = 1\nrun.seed = 2"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("no equals sign"),
            Err(ConfigError::Syntax { line: 1 })
        ));
    }

    #[test]
    fn hash_tracks_results_not_execution() {
        let a = PipelineConfig::parse("run.parallel = true").unwrap();
        let b = PipelineConfig::parse("run.parallel = false").unwrap();
        let c = PipelineConfig::parse("run.seed = 8").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
