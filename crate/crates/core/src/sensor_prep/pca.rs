//! Principal component analysis on standardized plant signals.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

/// Rows per work item when accumulating the correlation matrix. Fixed so the
/// summation order, and therefore the result, does not depend on threads.
const CHUNK_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Column means used for standardization.
    pub mean: Vec<f64>,
    /// Column sample standard deviations used for standardization.
    pub scale: Vec<f64>,
    /// Loadings, features × retained, orthonormal columns.
    pub components: Array2<f64>,
    /// Retained variances, non-increasing and positive.
    pub eigvals: Vec<f64>,
    pub retained: usize,
    /// Every eigenvalue of the correlation matrix, non-increasing.
    pub all_eigvals: Vec<f64>,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn standardize(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let mut z = data.to_owned();
        for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        z
    }

    /// Scores on the retained components, rows × retained.
    pub fn scores(&self, data: ArrayView2<f64>) -> Array2<f64> {
        self.standardize(data).dot(&self.components)
    }
}

/// Fits PCA on column-standardized `signals` (rows ≥ columns) and retains the
/// fewest components whose cumulative explained variance reaches
/// `var_target`. `names` labels columns in error messages.
pub fn fit_pca(
    signals: ArrayView2<f64>,
    names: &[String],
    var_target: f64,
    exec: Execution,
) -> Result<PcaModel> {
    let (n, p) = signals.dim();
    if n < p || n < 2 {
        return Err(Error::Shape(format!(
            "PCA needs at least as many rows as columns, got {n} × {p}"
        )));
    }
    if !(0.0..=1.0).contains(&var_target) {
        return Err(Error::InvalidArgument(format!(
            "var_target {var_target} not in [0, 1]"
        )));
    }
    let label = |j: usize| {
        names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("column {j}"))
    };

    let mean: Vec<f64> = signals
        .axis_iter(Axis(1))
        .map(|c| c.sum() / n as f64)
        .collect();
    let mut scale = Vec::with_capacity(p);
    for (j, col) in signals.axis_iter(Axis(1)).enumerate() {
        let ss: f64 = col.iter().map(|v| (v - mean[j]).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd.is_nan() || sd <= 1e-12 * (1.0 + mean[j].abs()) {
            return Err(Error::ZeroVariance(label(j)));
        }
        scale.push(sd);
    }

    let n_chunks = n.div_ceil(CHUNK_ROWS);
    let partials = map_indexed(exec, n_chunks, |c| {
        let rows = c * CHUNK_ROWS..((c + 1) * CHUNK_ROWS).min(n);
        let mut acc = vec![0.0; p * p];
        let mut z = vec![0.0; p];
        for i in rows {
            for j in 0..p {
                z[j] = (signals[[i, j]] - mean[j]) / scale[j];
            }
            for a in 0..p {
                let za = z[a];
                for b in a..p {
                    acc[a * p + b] += za * z[b];
                }
            }
        }
        acc
    });
    let mut corr = DMatrix::<f64>::zeros(p, p);
    for part in &partials {
        for a in 0..p {
            for b in a..p {
                corr[(a, b)] += part[a * p + b];
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = corr[(a, b)] / (n - 1) as f64;
            corr[(a, b)] = v;
            corr[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let all_eigvals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let total: f64 = all_eigvals.iter().sum();
    let positive = all_eigvals.iter().filter(|&&l| l > 1e-10 * total).count();

    let mut retained = p;
    let mut cum = 0.0;
    for (k, l) in all_eigvals.iter().enumerate() {
        cum += l;
        if cum >= var_target * total - 1e-12 * total {
            retained = k + 1;
            break;
        }
    }
    let retained = retained.clamp(1, positive.max(1));

    let mut components = Array2::zeros((p, retained));
    for (c, &k) in order.iter().take(retained).enumerate() {
        let v = eig.eigenvectors.column(k);
        // Sign convention: largest-magnitude loading is positive.
        let pivot = (0..p)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            components[[j, c]] = sign * v[j];
        }
    }
    Ok(PcaModel {
        mean,
        scale,
        components,
        eigvals: all_eigvals[..retained].to_vec(),
        retained,
        all_eigvals,
    })
}
