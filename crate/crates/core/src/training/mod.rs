//! One-step training: loss, feature statistics, noise injection, and the
//! Adam loop.

mod loss;
mod normalizer;
mod train;

pub use loss::{compute_loss, tape_loss};
pub use normalizer::{Normalizer, STD_FLOOR};
pub use train::{
    fit_normalizers, gradient_check, inject_noise, load_checkpoint, loss_and_gradients, loss_csv,
    make_sample, sample_loss, save_checkpoint, train, CheckpointMeta, Dataset, LossRecord, Sample,
    TrainOutput, TrainingConfig,
};
