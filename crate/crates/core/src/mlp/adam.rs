use super::network::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        AdamState {
            m: net.zeros_like(),
            v: net.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update; increments the 1-based step count.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let grads = grads.iter().flat_map(|l| l.w.iter().chain(l.b.iter()));
    let ms = state
        .m
        .iter_mut()
        .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()));
    let vs = state
        .v
        .iter_mut()
        .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()));
    for (((p, &g), m), v) in net.params_mut().zip(grads).zip(ms).zip(vs) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}
