//! Desk-scale trainer: losses, Adam, the knee learning-rate schedule,
//! patch sampling and the epoch loop.

mod adam;
mod config;
mod loss;
mod sampler;
mod schedule;
mod trainer;

pub use adam::{Adam, AdamParams, OptimState};
pub use config::{parse_key_values, TrainConfig};
pub use loss::{charbonnier_backward, charbonnier_loss, l2_backward, l2_loss, LossKind};
pub use sampler::{sample_batch, sample_patch_images, sample_patch_pair};
pub use schedule::KneeSchedule;
pub use trainer::{checkpoint_path, train, train_step, train_to_dir, validation_psnr, EpochLog, TrainOutcome};
