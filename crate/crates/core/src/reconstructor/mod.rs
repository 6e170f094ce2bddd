//! Skip-connected denoising autoencoder over 2-channel flow fields.

mod config;
mod losses;
mod model;
mod train;

pub use config::{AEConfig, LossKind, SkipSet};
pub use losses::{endpoint_loss, mse_loss, wing_loss};
pub use model::{flow_to_tensor, flows_to_tensor, tensor_to_flows, Autoencoder};
pub(crate) use model::replace_params;
pub(crate) use train::minibatches;
pub use train::{reconstruct, train_reconstructor, EpochRecord, History};
