use ndarray::{Array2, ArrayView2};

use crate::align::{AlignedDataset, Scaler};
use crate::error::{Error, Result};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::huber::DEFAULT_DELTA;
use super::network::{init_network, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub huber_delta: f64,
    pub seed: u64,
    /// Stop after this many epochs without a test improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 10_000,
            adam: AdamConfig::default(),
            huber_delta: DEFAULT_DELTA,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let ok = self.max_epochs > 0
            && a.lr > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.epsilon > 0.0
            && self.huber_delta > 0.0
            && self.patience != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid training config {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    /// Mean over points of the test MAE in °C, per epoch.
    pub test_mae: Vec<f64>,
    /// 1-based epoch of the first minimum.
    pub best_epoch: usize,
    pub best_test_mae: f64,
}

/// Keeps the snapshot with the lowest test error; only strict
/// improvements replace it.
#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub best: Option<(usize, f64, T)>,
    pub saved_at: Vec<usize>,
}

impl<T: Clone> Checkpoint<T> {
    pub fn new() -> Self {
        Checkpoint {
            best: None,
            saved_at: Vec::new(),
        }
    }

    /// Returns true when `value` was saved.
    pub fn observe(&mut self, epoch: usize, mae: f64, value: &T) -> bool {
        let improved = self.best.as_ref().is_none_or(|(_, b, _)| mae < *b);
        if improved {
            self.best = Some((epoch, mae, value.clone()));
            self.saved_at.push(epoch);
        }
        improved
    }
}

impl<T: Clone> Default for Checkpoint<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Mean absolute error per output column in original units.
pub fn mae_per_point(
    pred_scaled: ArrayView2<f64>,
    y_raw: ArrayView2<f64>,
    y_scaler: &Scaler,
) -> Vec<f64> {
    let pred = y_scaler.inverse(pred_scaled);
    let n = pred.nrows() as f64;
    (0..pred.ncols())
        .map(|k| {
            pred.column(k)
                .iter()
                .zip(y_raw.column(k))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / n
        })
        .collect()
}

/// Full-batch Adam on the training rows; after every epoch the test MAE
/// (°C, averaged over points) decides whether to snapshot the network.
pub fn train_with_checkpoint(
    net: Network,
    ds: &AlignedDataset,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    cfg.validate()?;
    if ds.train_idx.is_empty() || ds.test_idx.is_empty() {
        return Err(Error::InvalidArgument(
            "train and test splits must be nonempty".into(),
        ));
    }
    let x_train = AlignedDataset::rows(&ds.x, &ds.train_idx);
    let y_train = AlignedDataset::rows(&ds.y, &ds.train_idx);
    let x_test = AlignedDataset::rows(&ds.x, &ds.test_idx);
    let y_test_raw = AlignedDataset::rows(&ds.y_raw, &ds.test_idx);
    train_on(
        net,
        (&x_train, &y_train),
        (&x_test, &y_test_raw),
        &ds.y_scaler,
        cfg,
    )
}

/// Core loop over explicit matrices: scaled train inputs/targets, scaled
/// test inputs with raw test targets.
pub fn train_on(
    mut net: Network,
    train: (&Array2<f64>, &Array2<f64>),
    test: (&Array2<f64>, &Array2<f64>),
    y_scaler: &Scaler,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    let mut state = AdamState::new(&net);
    let mut history = TrainHistory::default();
    let mut checkpoint = Checkpoint::new();
    for epoch in 1..=cfg.max_epochs {
        let (loss, grads) = net.backward(train.0.view(), train.1.view(), cfg.huber_delta)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        adam_step(&mut net, &grads, &mut state, &cfg.adam);
        let pred = net.forward(test.0.view())?;
        let per_point = mae_per_point(pred.view(), test.1.view(), y_scaler);
        let mae = per_point.iter().sum::<f64>() / per_point.len() as f64;
        if !mae.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss: mae });
        }
        history.train_loss.push(loss);
        history.test_mae.push(mae);
        checkpoint.observe(epoch, mae, &net);
        if let (Some(p), Some((best_epoch, _, _))) = (cfg.patience, &checkpoint.best) {
            if epoch - best_epoch >= p {
                break;
            }
        }
    }
    let (best_epoch, best_test_mae, best) = checkpoint.best.expect("at least one epoch ran");
    history.best_epoch = best_epoch;
    history.best_test_mae = best_test_mae;
    Ok((best, history))
}

/// Initializes the standard topology for `ds` and trains it.
pub fn fit_soft_sensor(ds: &AlignedDataset, cfg: &TrainConfig) -> Result<(Network, TrainHistory)> {
    let net = init_network(ds.n_features(), cfg.seed)?;
    train_with_checkpoint(net, ds, cfg)
}
