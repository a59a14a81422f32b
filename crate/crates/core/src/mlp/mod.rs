//! The soft-sensor network: a small rectified MLP trained with Huber loss and
//! Adam, keeping the snapshot with the best test error.

mod adam;
mod bundle;
mod huber;
mod network;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use bundle::ModelBundle;
pub use huber::{huber, huber_loss_grad, DEFAULT_DELTA};
pub use network::{init_network, init_with_sizes, Gradients, Layer, Network, HIDDEN};
pub use train::{
    fit_soft_sensor, mae_per_point, train_on, train_with_checkpoint, Checkpoint, TrainConfig,
    TrainHistory,
};

#[cfg(test)]
mod tests;
