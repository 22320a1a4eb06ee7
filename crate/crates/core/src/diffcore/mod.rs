//! Reverse-mode differentiation over dense `f64` matrices, plus the Adam
//! optimizer and the seeded generator used everywhere else.

mod adam;
mod gradcheck;
pub(crate) mod kernels;
mod param;
mod rng;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckReport, SkippedCoord, DEFAULT_STEP};
pub use param::{ParamStore, Parameter};
pub use rng::Rng;
pub use tensor::{sigmoid, Tensor};
