//! Shapley-value attributions with background replacement: exact coalition
//! enumeration for small feature sets, permutation sampling otherwise.

use std::cmp::Ordering;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::mlp::{ModelBundle, Network};

/// Largest feature count accepted by [`shapley_exact`].
pub const MAX_EXACT_FEATURES: usize = 15;
pub const DEFAULT_BACKGROUND: usize = 100;

/// Anything mapping a batch of rows to a batch of outputs.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn n_outputs(&self) -> usize;
    /// `rows × n_features` in, `rows × n_outputs` out.
    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64>;
}

impl Predictor for Network {
    fn n_features(&self) -> usize {
        self.n_in()
    }

    fn n_outputs(&self) -> usize {
        self.n_out()
    }

    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x).expect("input width checked by caller")
    }
}

/// Raw window features in, °C out.
impl Predictor for ModelBundle {
    fn n_features(&self) -> usize {
        self.network.n_in()
    }

    fn n_outputs(&self) -> usize {
        self.network.n_out()
    }

    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        ModelBundle::predict(self, x).expect("input width checked by caller")
    }
}

/// Adapts a closure over single rows.
pub struct FnPredictor<F> {
    pub n_features: usize,
    pub n_outputs: usize,
    pub f: F,
}

impl<F: Fn(ArrayView1<f64>) -> Vec<f64> + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_outputs));
        for (i, row) in x.outer_iter().enumerate() {
            out.row_mut(i).assign(&Array1::from((self.f)(row)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    /// `features × outputs`.
    pub phi: Array2<f64>,
    /// Mean model output over the background.
    pub base: Vec<f64>,
    /// Model output at the explained instance.
    pub fx: Vec<f64>,
}

impl Attribution {
    /// Largest `|Σ_i phi[i,k] − (f(x)[k] − base[k])|` over outputs.
    pub fn efficiency_residual(&self) -> f64 {
        self.phi
            .sum_axis(Axis(0))
            .iter()
            .enumerate()
            .map(|(k, s)| (s - (self.fx[k] - self.base[k])).abs())
            .fold(0.0, f64::max)
    }
}

fn check_inputs(
    model: &dyn Predictor,
    x: ArrayView1<f64>,
    background: ArrayView2<f64>,
) -> Result<()> {
    if background.nrows() == 0 {
        return Err(Error::EmptyBackground);
    }
    let p = model.n_features();
    if x.len() != p || background.ncols() != p {
        return Err(Error::Shape(format!(
            "model takes {p} features; instance has {}, background {}",
            x.len(),
            background.ncols()
        )));
    }
    Ok(())
}

/// Mean output for each coalition mask, features in a mask take the instance
/// value and the rest come from each background row.
fn coalition_values(
    model: &dyn Predictor,
    x: ArrayView1<f64>,
    background: ArrayView2<f64>,
    masks: &[Vec<bool>],
) -> Array2<f64> {
    let b = background.nrows();
    let mut batch = Array2::zeros((masks.len() * b, x.len()));
    for (c, mask) in masks.iter().enumerate() {
        let mut block = batch.slice_mut(ndarray::s![c * b..(c + 1) * b, ..]);
        block.assign(&background);
        for (j, &on) in mask.iter().enumerate() {
            if on {
                block.column_mut(j).fill(x[j]);
            }
        }
    }
    let out = model.predict(batch.view());
    let mut values = Array2::zeros((masks.len(), model.n_outputs()));
    for c in 0..masks.len() {
        let block = out.slice(ndarray::s![c * b..(c + 1) * b, ..]);
        values
            .row_mut(c)
            .assign(&block.mean_axis(Axis(0)).expect("nonempty background"));
    }
    values
}

// Coalitions evaluated per model call in exact mode.
const EXACT_CHUNK: usize = 256;

/// Exact Shapley values by enumerating all `2^n` coalitions.
pub fn shapley_exact(
    model: &dyn Predictor,
    x: ArrayView1<f64>,
    background: ArrayView2<f64>,
) -> Result<Attribution> {
    check_inputs(model, x, background)?;
    let n = x.len();
    if n > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures(n));
    }
    let total = 1usize << n;
    let mut values = Array2::zeros((total, model.n_outputs()));
    for start in (0..total).step_by(EXACT_CHUNK) {
        let end = (start + EXACT_CHUNK).min(total);
        let masks: Vec<Vec<bool>> = (start..end)
            .map(|s| (0..n).map(|j| s >> j & 1 == 1).collect())
            .collect();
        let v = coalition_values(model, x, background, &masks);
        values.slice_mut(ndarray::s![start..end, ..]).assign(&v);
    }

    // weight(|S|) = |S|! (n-|S|-1)! / n!
    let weight: Vec<f64> = (0..n)
        .map(|s| {
            let ln = ln_factorial(s) + ln_factorial(n - s - 1) - ln_factorial(n);
            ln.exp()
        })
        .collect();
    let mut phi = Array2::zeros((n, model.n_outputs()));
    for i in 0..n {
        let bit = 1usize << i;
        for s in (0..total).filter(|s| s & bit == 0) {
            let w = weight[s.count_ones() as usize];
            let diff = &values.row(s | bit) - &values.row(s);
            phi.row_mut(i).scaled_add(w, &diff);
        }
    }
    Ok(Attribution {
        phi,
        base: values.row(0).to_vec(),
        fx: values.row(total - 1).to_vec(),
    })
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|v| (v as f64).ln()).sum()
}

/// Permutation sampling (Castro et al.): marginal contributions along random
/// feature orders, valued against the full background. Odd-numbered
/// permutations reverse their predecessor (antithetic pairs). Each
/// permutation draws from its own RNG stream, so results do not depend on
/// the execution mode.
pub fn shapley_sampled(
    model: &dyn Predictor,
    x: ArrayView1<f64>,
    background: ArrayView2<f64>,
    n_permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<Attribution> {
    check_inputs(model, x, background)?;
    if n_permutations == 0 {
        return Err(Error::InvalidArgument(
            "need at least one permutation".into(),
        ));
    }
    let n = x.len();
    let order_for = |j: usize| -> Vec<usize> {
        let pair = j / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pair as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        if j % 2 == 1 {
            order.reverse();
        }
        order
    };
    let per_perm = map_indexed(exec, n_permutations, |j| {
        let order = order_for(j);
        let masks: Vec<Vec<bool>> = (0..=n)
            .map(|k| {
                let mut m = vec![false; n];
                for &f in &order[..k] {
                    m[f] = true;
                }
                m
            })
            .collect();
        let v = coalition_values(model, x, background, &masks);
        let mut phi = Array2::zeros((n, model.n_outputs()));
        for (k, &f) in order.iter().enumerate() {
            phi.row_mut(f).assign(&(&v.row(k + 1) - &v.row(k)));
        }
        (phi, v.row(0).to_vec(), v.row(n).to_vec())
    });
    let mut phi = Array2::zeros((n, model.n_outputs()));
    for (p, _, _) in &per_perm {
        phi += p;
    }
    phi /= n_permutations as f64;
    let (_, base, fx) = per_perm
        .into_iter()
        .next()
        .expect("at least one permutation");
    Ok(Attribution { phi, base, fx })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapConfig {
    pub n_permutations: usize,
    pub background_size: usize,
    pub seed: u64,
    /// Use exact enumeration when the feature count allows it.
    pub exact_when_possible: bool,
    pub exec: Execution,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            n_permutations: 64,
            background_size: DEFAULT_BACKGROUND,
            seed: 0,
            exact_when_possible: false,
            exec: Execution::default(),
        }
    }
}

/// `size` distinct rows of `candidates` chosen by `seed`, in ascending order.
pub fn select_background(candidates: &[usize], size: usize, seed: u64) -> Vec<usize> {
    if candidates.len() <= size {
        return candidates.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, candidates.len(), size)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Attributions for every row of `instances`, computed in parallel with
/// per-instance seeds.
pub fn explain_instances(
    model: &dyn Predictor,
    instances: ArrayView2<f64>,
    background: ArrayView2<f64>,
    cfg: &ShapConfig,
) -> Result<Vec<Attribution>> {
    let exact = cfg.exact_when_possible && model.n_features() <= MAX_EXACT_FEATURES;
    map_indexed(cfg.exec, instances.nrows(), |i| {
        let x = instances.row(i);
        if exact {
            shapley_exact(model, x, background)
        } else {
            let seed = cfg.seed.wrapping_add(i as u64);
            shapley_sampled(
                model,
                x,
                background,
                cfg.n_permutations,
                seed,
                Execution::Sequential,
            )
        }
    })
    .into_iter()
    .collect()
}

/// Mean `|phi|` over instances, `features × outputs`.
pub fn mean_abs_phi(attrs: &[Attribution]) -> Result<Array2<f64>> {
    let first = attrs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no attributions".into()))?;
    let mut acc = Array2::zeros(first.phi.dim());
    for a in attrs {
        acc += &a.phi.mapv(f64::abs);
    }
    Ok(acc / attrs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
}

/// Features by descending mean `|phi|`; equal scores fall back to name order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceRanking {
    pub features: Vec<FeatureScore>,
}

impl ImportanceRanking {
    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.feature == name)
    }
}

pub fn rank_features(attrs: &[Attribution], names: &[String]) -> Result<ImportanceRanking> {
    let per_output = mean_abs_phi(attrs)?;
    if per_output.nrows() != names.len() {
        return Err(Error::Shape("one name per feature required".into()));
    }
    let scores = per_output.mean_axis(Axis(1)).expect("at least one output");
    let mut features: Vec<FeatureScore> = names
        .iter()
        .zip(scores.iter())
        .map(|(n, &s)| FeatureScore {
            feature: n.clone(),
            score: s,
        })
        .collect();
    features.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(ImportanceRanking { features })
}

/// `feature,output_point,mean_abs_phi`, one row per pair, features in input
/// order.
pub fn write_shap_csv(
    path: &Path,
    names: &[String],
    outputs: &[String],
    per_output: &Array2<f64>,
) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["feature", "output_point", "mean_abs_phi"])
        .map_err(csv_err)?;
    for (i, name) in names.iter().enumerate() {
        for (k, out) in outputs.iter().enumerate() {
            w.write_record([name.as_str(), out.as_str(), &per_output[[i, k]].to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
