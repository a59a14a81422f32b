use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::N_POINTS;

use super::huber::huber_loss_grad;

pub const HIDDEN: [usize; 2] = [30, 30];

/// Dense layer; `w` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            w: Array2::zeros((n_out, n_in)),
            b: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w.nrows()
    }
}

/// Rectified hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Gradients share the parameter layout.
pub type Gradients = Vec<Layer>;

impl Network {
    /// Validates that consecutive layer shapes chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.b.len() != l.n_out() {
                return Err(Error::Shape(format!("layer {i}: bias length mismatch")));
            }
            if i > 0 && layers[i - 1].n_out() != l.n_in() {
                return Err(Error::Shape(format!("layer {i}: input width mismatch")));
            }
        }
        Ok(Network { layers })
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_in())
            .chain(self.layers.iter().map(Layer::n_out))
            .collect()
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map_or(0, Layer::n_out)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn zeros_like(&self) -> Gradients {
        self.layers
            .iter()
            .map(|l| Layer::zeros(l.n_in(), l.n_out()))
            .collect()
    }

    /// Flat view of every parameter, layer by layer, weights then biases.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    /// Row-wise predictions, `samples × n_out`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(self.forward_trace(x).pop().expect("at least one layer"))
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_in() {
            return Err(Error::Shape(format!(
                "expected {} input columns, got {}",
                self.n_in(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Pre-activations of every layer; the last entry is the output.
    fn forward_trace(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = match pre.last() {
                None => x.to_owned(),
                Some(z) => z.mapv(relu),
            };
            let mut z = input.dot(&layer.w.t());
            z += &layer.b;
            pre.push(z);
        }
        pre
    }

    /// Mean Huber loss against `target` and its exact parameter gradient.
    /// The rectifier's derivative at zero is taken as zero.
    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        target: ArrayView2<f64>,
        delta: f64,
    ) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        if target.dim() != (x.nrows(), self.n_out()) {
            return Err(Error::Shape("target shape mismatch".into()));
        }
        let pre = self.forward_trace(x);
        let (loss, mut upstream) =
            huber_loss_grad(pre.last().expect("output").view(), target, delta);
        let mut grads = self.zeros_like();
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 {
                x.to_owned()
            } else {
                pre[i - 1].mapv(relu)
            };
            grads[i].w = upstream.t().dot(&input);
            grads[i].b = upstream.sum_axis(Axis(0));
            if i > 0 {
                let mut down = upstream.dot(&self.layers[i].w);
                Zip::from(&mut down).and(&pre[i - 1]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                upstream = down;
            }
        }
        Ok((loss, grads))
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Xavier-normal weights, std `√(2/(fan_in+fan_out))`, and zero biases for
/// the given layer widths.
pub fn init_with_sizes(sizes: &[usize], seed: u64) -> Result<Network> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Shape(format!("bad layer sizes {sizes:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("positive std");
            Layer {
                w: Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(&mut rng)),
                b: Array1::zeros(fan_out),
            }
        })
        .collect();
    Network::from_layers(layers)
}

/// The soft-sensor topology `[n_in, 30, 30, 7]`.
pub fn init_network(n_in: usize, seed: u64) -> Result<Network> {
    init_with_sizes(&[n_in, HIDDEN[0], HIDDEN[1], N_POINTS], seed)
}
