//! The multiple instance classifier: configuration, construction, forward
//! pass, training loop and checkpoints.

pub mod checkpoint;
mod config;
mod mil;
mod train;

pub use config::{ConvKind, ModelConfig, CHEB_ORDERS};
pub use mil::{bce_loss, build_model, ForwardOutput, MilModel, Mode, Prediction};
pub use train::{train, TrainHistory};
