use ndarray::{Array2, ArrayView2, Zip};

pub const DEFAULT_DELTA: f64 = 1.0;

/// Huber value and derivative for a single residual.
pub fn huber(e: f64, delta: f64) -> (f64, f64) {
    if e.abs() <= delta {
        (0.5 * e * e, e)
    } else {
        (delta * (e.abs() - 0.5 * delta), delta * e.signum())
    }
}

/// Mean Huber loss over all elements and its gradient w.r.t. `pred`.
pub fn huber_loss_grad(
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
    delta: f64,
) -> (f64, Array2<f64>) {
    let count = pred.len() as f64;
    let mut grad = Array2::zeros(pred.dim());
    let mut total = 0.0;
    Zip::from(&mut grad)
        .and(pred)
        .and(target)
        .for_each(|g, &p, &t| {
            let (l, d) = huber(p - t, delta);
            total += l;
            *g = d / count;
        });
    (total / count, grad)
}
