//! `model.bundle`: the trained network with everything needed to predict.
//! The byte layout is described in `docs/formats.md`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::align::Scaler;
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

use super::adam::AdamConfig;
use super::network::{Layer, Network};
use super::train::{TrainConfig, TrainHistory};

const MAGIC: &[u8; 4] = b"SSMB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub network: Network,
    pub x_scaler: Scaler,
    pub y_scaler: Scaler,
    pub feature_names: Vec<String>,
    /// Baseline MAE per point (°C), when known at training time.
    pub thresholds: Option<Vec<f64>>,
    pub train_config: TrainConfig,
    pub history: TrainHistory,
}

impl ModelBundle {
    /// Raw sensor window averages in, distillation curve in °C out.
    pub fn predict(&self, raw: ArrayView2<f64>) -> Result<Array2<f64>> {
        if raw.ncols() != self.x_scaler.n_columns() {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.x_scaler.n_columns(),
                raw.ncols()
            )));
        }
        let scaled = self.x_scaler.transform(raw);
        let out = self.network.forward(scaled.view())?;
        Ok(self.y_scaler.inverse(out.view()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Writer::new(BufWriter::new(file), "model bundle");
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.usizes(&self.network.sizes())?;
        for layer in &self.network.layers {
            w.matrix(&layer.w)?;
            w.f64s(layer.b.as_slice().expect("contiguous bias"))?;
        }
        for s in [&self.x_scaler, &self.y_scaler] {
            w.f64s(&s.mean)?;
            w.f64s(&s.std)?;
        }
        w.strs(&self.feature_names)?;
        w.f64s(self.thresholds.as_deref().unwrap_or(&[]))?;
        let c = &self.train_config;
        w.u64(c.max_epochs as u64)?;
        for v in [
            c.adam.lr,
            c.adam.beta1,
            c.adam.beta2,
            c.adam.epsilon,
            c.huber_delta,
        ] {
            w.f64(v)?;
        }
        w.u64(c.seed)?;
        w.u64(c.patience.map_or(0, |p| p as u64))?;
        let h = &self.history;
        w.u64(h.best_epoch as u64)?;
        w.f64(h.best_test_mae)?;
        w.f64s(&h.train_loss)?;
        w.f64s(&h.test_mae)?;
        let mut inner = w.into_inner();
        inner.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader::new(BufReader::new(file), "model bundle");
        if &r.bytes::<4>()? != MAGIC {
            return Err(r.fail("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.fail(format!("unsupported version {version}")));
        }
        let sizes = r.usizes()?;
        if sizes.len() < 2 {
            return Err(r.fail("too few layers"));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let w = r.matrix()?;
            let b = r.f64s()?;
            if w.dim() != (pair[1], pair[0]) || b.len() != pair[1] {
                return Err(r.fail("layer shape disagrees with header"));
            }
            layers.push(Layer { w, b: b.into() });
        }
        let network = Network::from_layers(layers)?;
        let mut scalers = Vec::with_capacity(2);
        for _ in 0..2 {
            scalers.push(Scaler {
                mean: r.f64s()?,
                std: r.f64s()?,
            });
        }
        let feature_names = r.strs()?;
        let thresholds = r.f64s()?;
        let max_epochs = r.u64()? as usize;
        let mut f = [0.0; 5];
        for slot in &mut f {
            *slot = r.f64()?;
        }
        let seed = r.u64()?;
        let patience = r.u64()? as usize;
        let best_epoch = r.u64()? as usize;
        let best_test_mae = r.f64()?;
        let train_loss = r.f64s()?;
        let test_mae = r.f64s()?;
        r.finish()?;

        let y_scaler = scalers.pop().expect("two scalers");
        let x_scaler = scalers.pop().expect("two scalers");
        if x_scaler.n_columns() != network.n_in()
            || y_scaler.n_columns() != network.n_out()
            || feature_names.len() != network.n_in()
        {
            return Err(Error::format(
                "model bundle",
                "scaler widths disagree with network",
            ));
        }
        Ok(ModelBundle {
            network,
            x_scaler,
            y_scaler,
            feature_names,
            thresholds: (!thresholds.is_empty()).then_some(thresholds),
            train_config: TrainConfig {
                max_epochs,
                adam: AdamConfig {
                    lr: f[0],
                    beta1: f[1],
                    beta2: f[2],
                    epsilon: f[3],
                },
                huber_delta: f[4],
                seed,
                patience: (patience > 0).then_some(patience),
            },
            history: TrainHistory {
                train_loss,
                test_mae,
                best_epoch,
                best_test_mae,
            },
        })
    }
}
