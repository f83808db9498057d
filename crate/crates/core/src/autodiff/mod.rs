//! Reverse-mode automatic differentiation over dense `f64` matrices, with the
//! Adam optimizer, a central-difference gradient checker, and checkpoints.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod matrix;
mod nn;
mod params;
mod tape;

pub use adam::{Adam, LrSchedule};
pub use gradcheck::{check_gradients, relative_error, GradCheckReport, GRAD_FLOOR};
pub use matrix::Matrix;
pub use nn::Mlp;
pub use params::{Bound, Init, ParamBuilder, ParamStore};
pub use tape::{Gradients, Tape, Var, LAYER_NORM_EPS};
