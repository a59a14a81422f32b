use softsense_core::align::{
    align_dataset, read_aligned, write_aligned, AlignConfig, AlignedDataset,
};
use softsense_core::evalreport::{evaluate, DEFAULT_BINS};
use softsense_core::exec::Execution;
use softsense_core::ingest::{generate_synthetic, SynthSpec};
use softsense_core::lab_prep::{clean_lab, TUKEY_MULTIPLIER};
use softsense_core::mlp::{fit_soft_sensor, ModelBundle, TrainConfig};
use softsense_core::sarima::{baseline_thresholds, StepwiseConfig};
use softsense_core::sensor_prep::{clean_sensors, mask_lab_in_periods, SensorPrepConfig};
use softsense_core::shap::{explain_instances, rank_features, select_background, ShapConfig};

struct Run {
    ds: AlignedDataset,
    thresholds: Vec<f64>,
    bundle: ModelBundle,
    ranking: Vec<String>,
    mae_test: Vec<f64>,
}

fn run(exec: Execution) -> Run {
    let spec = SynthSpec {
        n_days: 80,
        sensors: 9,
        long_periods: vec![(30, 32)],
        seed: 3,
        ..SynthSpec::default()
    };
    let syn = generate_synthetic(&spec).unwrap();
    let (lab, _, _) = clean_lab(&syn.lab, TUKEY_MULTIPLIER).unwrap();
    let prep = clean_sensors(
        &syn.sensors,
        &SensorPrepConfig {
            exec,
            ..Default::default()
        },
    )
    .unwrap();
    let (lab, _) = mask_lab_in_periods(&lab, &prep.periods).unwrap();
    let (ds, _) = align_dataset(
        &prep.table,
        &lab,
        &AlignConfig {
            seed: 3,
            exec,
            ..Default::default()
        },
    )
    .unwrap();
    let series: Vec<Vec<f64>> = (0..7).map(|k| ds.y_raw.column(k).to_vec()).collect();
    let th = baseline_thresholds(
        &series,
        &StepwiseConfig {
            exec,
            ..Default::default()
        },
    )
    .unwrap();
    let cfg = TrainConfig {
        max_epochs: 200,
        seed: 3,
        ..Default::default()
    };
    let (network, history) = fit_soft_sensor(&ds, &cfg).unwrap();
    let bundle = ModelBundle {
        network,
        x_scaler: ds.x_scaler.clone(),
        y_scaler: ds.y_scaler.clone(),
        feature_names: ds.feature_names.clone(),
        thresholds: Some(th.mae.clone()),
        train_config: cfg,
        history,
    };
    let x_test = AlignedDataset::rows(&ds.x_raw, &ds.test_idx);
    let x_train = AlignedDataset::rows(&ds.x_raw, &ds.train_idx);
    let summary = evaluate(
        bundle.predict(x_train.view()).unwrap().view(),
        AlignedDataset::rows(&ds.y_raw, &ds.train_idx).view(),
        bundle.predict(x_test.view()).unwrap().view(),
        AlignedDataset::rows(&ds.y_raw, &ds.test_idx).view(),
        &th.mae,
        DEFAULT_BINS,
    )
    .unwrap();
    let bg = AlignedDataset::rows(&ds.x_raw, &select_background(&ds.train_idx, 20, 3));
    let shap = ShapConfig {
        n_permutations: 6,
        seed: 3,
        exec,
        ..Default::default()
    };
    let attrs = explain_instances(&bundle, x_test.view(), bg.view(), &shap).unwrap();
    let ranking = rank_features(&attrs, &ds.feature_names)
        .unwrap()
        .features
        .into_iter()
        .map(|f| f.feature)
        .collect();
    Run {
        ds,
        thresholds: th.mae,
        bundle,
        ranking,
        mae_test: summary.mae_test,
    }
}

#[test]
fn execution_modes_agree_end_to_end() {
    let seq = run(Execution::Sequential);
    let par = run(Execution::Parallel);
    assert_eq!(seq.ds, par.ds);
    assert_eq!(seq.thresholds, par.thresholds);
    assert_eq!(seq.bundle, par.bundle);
    assert_eq!(seq.ranking, par.ranking);
    assert_eq!(seq.mae_test, par.mae_test);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("aligned.bin");
    write_aligned(&seq.ds, &path).unwrap();
    assert_eq!(read_aligned(&path).unwrap(), seq.ds);
    let path = dir.path().join("model.bundle");
    seq.bundle.write(&path).unwrap();
    assert_eq!(ModelBundle::read(&path).unwrap(), seq.bundle);
    assert_eq!(seq.ranking.len(), 9);
}
