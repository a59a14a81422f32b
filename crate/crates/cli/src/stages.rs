//! The pipeline stages, each reading and writing fixed artifact names under
//! the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ndarray::Array2;
use serde_json::{json, Map, Value};
use softsense_core::align::{align_dataset, read_aligned, write_aligned, AlignedDataset};
use softsense_core::evalreport::{evaluate, write_histogram_csv};
use softsense_core::ingest::{
    generate_synthetic, parse_lab_csv, parse_sensor_csv, read_report, write_lab_csv, write_report,
    write_sensor_csv, CleanReport, ColumnMap, POINT_LABELS,
};
use softsense_core::lab_prep::clean_lab;
use softsense_core::mlp::{fit_soft_sensor, ModelBundle};
use softsense_core::sarima::{baseline_thresholds, BaselineThresholds};
use softsense_core::sensor_prep::{clean_sensors, mask_lab_in_periods, AnomalyPeriods};
use softsense_core::shap::{
    explain_instances, mean_abs_phi, rank_features, select_background, write_shap_csv,
};

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Stage {
    Synth,
    PrepLab,
    PrepSensors,
    Align,
    Baseline,
    Train,
    Evaluate,
    Explain,
    All,
}

impl Stage {
    pub const PIPELINE: [Stage; 8] = [
        Stage::Synth,
        Stage::PrepLab,
        Stage::PrepSensors,
        Stage::Align,
        Stage::Baseline,
        Stage::Train,
        Stage::Evaluate,
        Stage::Explain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::PrepLab => "prep-lab",
            Stage::PrepSensors => "prep-sensors",
            Stage::Align => "align",
            Stage::Baseline => "baseline",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
            Stage::All => "all",
        }
    }
}

pub const LAB_CLEAN: &str = "lab_clean.csv";
pub const SENSORS_CLEAN: &str = "sensors_clean.csv";
pub const PERIODS: &str = "periods.json";
pub const ALIGNED: &str = "aligned.bin";
pub const THRESHOLDS: &str = "thresholds.json";
pub const BUNDLE: &str = "model.bundle";
pub const SHAP: &str = "shap.csv";
pub const HISTOGRAM: &str = "histogram.csv";
pub const REPORT: &str = "report.json";
pub const GROUND_TRUTH: &str = "ground_truth.json";

/// `report.json`: per-stage cleaning ledgers plus metric sections.
///
/// Each stage replaces its own entries, so rerunning a stage leaves the
/// document unchanged. Top-level counts fold the stage ledgers in pipeline
/// order.
struct Report {
    stages: BTreeMap<Stage, CleanReport>,
    metrics: Map<String, Value>,
}

impl Report {
    fn load(path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            return Ok(Report {
                stages: BTreeMap::new(),
                metrics: Map::new(),
            });
        }
        let (_, mut metrics) = read_report(path)?;
        let mut stages = BTreeMap::new();
        if let Some(Value::Object(saved)) = metrics.remove("stages") {
            for (name, v) in saved {
                let stage = Stage::from_str(&name, false)
                    .map_err(|_| CliError::corrupt(path, format!("unknown stage `{name}`")))?;
                let r: CleanReport = serde_json::from_value(v)
                    .map_err(|e| CliError::corrupt(path, e.to_string()))?;
                stages.insert(stage, r);
            }
        }
        Ok(Report { stages, metrics })
    }

    fn save(mut self, path: &Path, config_hash: &str) -> Result<(), CliError> {
        let mut total = CleanReport::default();
        for r in self.stages.values() {
            total.absorb(r);
        }
        let saved: Map<String, Value> = self
            .stages
            .iter()
            .map(|(s, r)| {
                (
                    s.name().to_string(),
                    serde_json::to_value(r).expect("serializable"),
                )
            })
            .collect();
        self.metrics.insert("stages".into(), Value::Object(saved));
        self.metrics
            .insert("config_hash".into(), json!(config_hash));
        write_report(&total, &self.metrics, path)?;
        Ok(())
    }
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub hash: String,
}

impl Context {
    pub fn new(cfg: PipelineConfig) -> Self {
        let hash = cfg.hash();
        Context { cfg, hash }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn require(&self, path: PathBuf, what: &'static str) -> Result<PathBuf, CliError> {
        if path.is_file() {
            Ok(path)
        } else {
            Err(CliError::Missing { what, path })
        }
    }

    fn update_report(
        &self,
        stage: Stage,
        ledger: Option<CleanReport>,
        sections: Vec<(&str, Value)>,
    ) -> Result<(), CliError> {
        let path = self.out(REPORT);
        let mut report = Report::load(&path)?;
        if let Some(mut r) = ledger {
            r.stage = stage.name().to_string();
            report.stages.insert(stage, r);
        }
        for (k, v) in sections {
            report.metrics.insert(k.to_string(), v);
        }
        report.save(&path, &self.hash)
    }

    fn aligned(&self) -> Result<AlignedDataset, CliError> {
        let path = self.require(self.out(ALIGNED), "aligned dataset")?;
        Ok(read_aligned(&path)?)
    }

    fn bundle(&self) -> Result<ModelBundle, CliError> {
        let path = self.require(self.out(BUNDLE), "model bundle")?;
        Ok(ModelBundle::read(&path)?)
    }

    pub fn run(&self, stage: Stage) -> Result<(), CliError> {
        fs::create_dir_all(&self.cfg.out_dir).map_err(|e| CliError::io(&self.cfg.out_dir, e))?;
        match stage {
            Stage::Synth => self.synth(),
            Stage::PrepLab => self.prep_lab(),
            Stage::PrepSensors => self.prep_sensors(),
            Stage::Align => self.align(),
            Stage::Baseline => self.baseline(),
            Stage::Train => self.train(),
            Stage::Evaluate => self.evaluate(),
            Stage::Explain => self.explain(),
            Stage::All => {
                for s in Stage::PIPELINE {
                    if s == Stage::Synth && !self.cfg.synth_enabled {
                        continue;
                    }
                    self.run(s).map_err(|e| e.in_stage(s))?;
                }
                Ok(())
            }
        }
    }

    fn synth(&self) -> Result<(), CliError> {
        let syn = generate_synthetic(&self.cfg.synth)?;
        write_sensor_csv(&syn.sensors, self.cfg.sensors_path())?;
        write_lab_csv(&syn.lab, self.cfg.lab_path())?;
        let truth = serde_json::to_string(&syn.truth).expect("serializable");
        let path = self.out(GROUND_TRUTH);
        fs::write(&path, truth + "\n").map_err(|e| CliError::io(&path, e))?;
        self.update_report(
            Stage::Synth,
            None,
            vec![(
                "synth",
                json!({
                    "sensor_rows": syn.sensors.n_rows(),
                    "sensors": syn.sensors.n_sensors(),
                    "lab_rows": syn.lab.n_rows(),
                    "spikes": syn.truth.spikes.len(),
                    "long_periods": syn.truth.long_periods.iter().map(|p| [p.start_ts, p.end_ts]).collect::<Vec<_>>(),
                }),
            )],
        )
    }

    fn prep_lab(&self) -> Result<(), CliError> {
        let path = self.require(self.cfg.lab_path(), "lab table")?;
        let lab = parse_lab_csv(&path)?;
        let (clean, report, bounds) = clean_lab(&lab, self.cfg.iqr_multiplier)?;
        write_lab_csv(&clean, self.out(LAB_CLEAN))?;
        let fences: Map<String, Value> = POINT_LABELS
            .iter()
            .zip(&bounds.points)
            .map(|(p, b)| {
                (
                    format!("vol_{p}"),
                    json!({"lower": b.lower, "upper": b.upper}),
                )
            })
            .collect();
        self.update_report(
            Stage::PrepLab,
            Some(report),
            vec![(
                "lab",
                json!({"rows_in": lab.n_rows(), "rows_out": clean.n_rows(), "fences": fences}),
            )],
        )
    }

    fn prep_sensors(&self) -> Result<(), CliError> {
        let path = self.require(self.cfg.sensors_path(), "sensor table")?;
        let table = parse_sensor_csv(&path, &self.cfg.column_map())?;
        let out = clean_sensors(&table, &self.cfg.sensor_prep)?;
        write_sensor_csv(&out.table, self.out(SENSORS_CLEAN))?;
        let periods = json!({
            "periods": out.periods.time_ranges(),
            "t2_limit": out.periods.t2_limit,
        });
        let ppath = self.out(PERIODS);
        fs::write(
            &ppath,
            serde_json::to_string_pretty(&periods).expect("serializable") + "\n",
        )
        .map_err(|e| CliError::io(&ppath, e))?;
        let cum: f64 =
            out.pca.eigvals.iter().sum::<f64>() / out.pca.all_eigvals.iter().sum::<f64>();
        self.update_report(
            Stage::PrepSensors,
            Some(out.report),
            vec![(
                "sensors",
                json!({
                    "rows": out.table.n_rows(),
                    "sensors": out.table.n_sensors(),
                    "change_points": out.segmentations.iter().map(|s| s.breakpoints.len()).sum::<usize>(),
                    "pca_components": out.pca.retained,
                    "pca_variance": cum,
                    "t2_limit": out.periods.t2_limit,
                }),
            )],
        )
    }

    fn read_periods(&self) -> Result<AnomalyPeriods, CliError> {
        let path = self.require(self.out(PERIODS), "anomaly periods")?;
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::corrupt(&path, e.to_string()))?;
        let ranges: Vec<[i64; 2]> = doc
            .get("periods")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| CliError::corrupt(&path, e.to_string()))?
            .ok_or_else(|| CliError::corrupt(&path, "no `periods` array".into()))?;
        Ok(AnomalyPeriods::from_time_ranges(&ranges))
    }

    fn align(&self) -> Result<(), CliError> {
        let lab_path = self.require(self.out(LAB_CLEAN), "cleaned lab table")?;
        let sensors_path = self.require(self.out(SENSORS_CLEAN), "cleaned sensor table")?;
        let periods = self.read_periods()?;
        let lab = parse_lab_csv(&lab_path)?;
        let sensors = parse_sensor_csv(&sensors_path, &ColumnMap::default())?;
        let (lab, masked) = mask_lab_in_periods(&lab, &periods)?;
        let (ds, dropped) = align_dataset(&sensors, &lab, &self.cfg.align)?;
        write_aligned(&ds, &self.out(ALIGNED))?;
        let mut ledger = CleanReport::for_stage("align");
        ledger.absorb(&masked);
        ledger.absorb(&dropped);
        self.update_report(
            Stage::Align,
            Some(ledger),
            vec![(
                "align",
                json!({
                    "samples": ds.n_samples(),
                    "features": ds.n_features(),
                    "train": ds.train_idx.len(),
                    "test": ds.test_idx.len(),
                }),
            )],
        )
    }

    fn baseline(&self) -> Result<(), CliError> {
        let ds = self.aligned()?;
        let series: Vec<Vec<f64>> = (0..ds.y_raw.ncols())
            .map(|k| ds.y_raw.column(k).to_vec())
            .collect();
        let th = baseline_thresholds(&series, &self.cfg.sarima)?;
        let path = self.out(THRESHOLDS);
        fs::write(
            &path,
            serde_json::to_string_pretty(&th.to_json()).expect("serializable") + "\n",
        )
        .map_err(|e| CliError::io(&path, e))?;
        let detail: Map<String, Value> = POINT_LABELS
            .iter()
            .enumerate()
            .map(|(k, p)| {
                (
                    format!("vol_{p}"),
                    json!({"mae": th.mae[k], "order": th.orders[k].to_string(), "aic": th.aic[k]}),
                )
            })
            .collect();
        self.update_report(
            Stage::Baseline,
            None,
            vec![("thresholds", Value::Object(detail))],
        )
    }

    fn thresholds(&self) -> Result<Option<Vec<f64>>, CliError> {
        let path = self.out(THRESHOLDS);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::corrupt(&path, e.to_string()))?;
        Ok(Some(BaselineThresholds::from_json(&doc)?))
    }

    fn train(&self) -> Result<(), CliError> {
        let ds = self.aligned()?;
        let thresholds = self.thresholds()?;
        let (network, history) = fit_soft_sensor(&ds, &self.cfg.train)?;
        let bundle = ModelBundle {
            network,
            x_scaler: ds.x_scaler.clone(),
            y_scaler: ds.y_scaler.clone(),
            feature_names: ds.feature_names.clone(),
            thresholds,
            train_config: self.cfg.train.clone(),
            history,
        };
        bundle.write(&self.out(BUNDLE))?;
        let h = &bundle.history;
        self.update_report(
            Stage::Train,
            None,
            vec![(
                "training",
                json!({
                    "epochs": h.train_loss.len(),
                    "best_epoch": h.best_epoch,
                    "best_test_mae": h.best_test_mae,
                    "final_train_loss": h.train_loss.last(),
                    "parameters": bundle.network.n_params(),
                }),
            )],
        )
    }

    fn evaluate(&self) -> Result<(), CliError> {
        let bundle = self.bundle()?;
        let ds = self.aligned()?;
        let thresholds = match self.thresholds()? {
            Some(t) => t,
            None => bundle.thresholds.clone().ok_or(CliError::Missing {
                what: "baseline thresholds",
                path: self.out(THRESHOLDS),
            })?,
        };
        let rows = |idx: &[usize]| AlignedDataset::rows(&ds.x_raw, idx);
        let pred_train = bundle.predict(rows(&ds.train_idx).view())?;
        let pred_test = bundle.predict(rows(&ds.test_idx).view())?;
        let summary = evaluate(
            pred_train.view(),
            AlignedDataset::rows(&ds.y_raw, &ds.train_idx).view(),
            pred_test.view(),
            AlignedDataset::rows(&ds.y_raw, &ds.test_idx).view(),
            &thresholds,
            self.cfg.bins,
        )?;
        write_histogram_csv(&self.out(HISTOGRAM), &summary.pooled.histogram)?;
        self.update_report(
            Stage::Evaluate,
            None,
            vec![("evaluation", summary.to_json())],
        )
    }

    fn explain(&self) -> Result<(), CliError> {
        let bundle = self.bundle()?;
        let ds = self.aligned()?;
        let shap = &self.cfg.shap;
        let bg_idx = select_background(&ds.train_idx, shap.background_size, shap.seed);
        let background: Array2<f64> = AlignedDataset::rows(&ds.x_raw, &bg_idx);
        let instances = AlignedDataset::rows(&ds.x_raw, &ds.test_idx);
        let attrs = explain_instances(&bundle, instances.view(), background.view(), shap)?;
        let outputs: Vec<String> = POINT_LABELS.iter().map(|p| format!("vol_{p}")).collect();
        write_shap_csv(
            &self.out(SHAP),
            &ds.feature_names,
            &outputs,
            &mean_abs_phi(&attrs)?,
        )?;
        let ranking = rank_features(&attrs, &ds.feature_names)?;
        let worst = attrs
            .iter()
            .map(|a| a.efficiency_residual())
            .fold(0.0f64, f64::max);
        self.update_report(
            Stage::Explain,
            None,
            vec![
                (
                    "feature_importance",
                    serde_json::to_value(&ranking.features).expect("serializable"),
                ),
                (
                    "shap",
                    json!({
                        "instances": attrs.len(),
                        "background": bg_idx.len(),
                        "permutations": shap.n_permutations,
                        "max_efficiency_residual": worst,
                    }),
                ),
            ],
        )
    }
}
