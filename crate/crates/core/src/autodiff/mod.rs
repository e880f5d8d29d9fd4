//! Reverse-mode differentiation over small dense `f64` matrices, the Adam
//! update rule, and a finite-difference oracle for checking both.

mod adam;
pub mod fd;
mod matrix;
mod params;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fd::{central_difference, finite_difference_gradient};
pub use matrix::Matrix;
pub use params::{glorot_uniform, BoundParams, ParamStore};
pub(crate) use params::check_finite;
pub use tape::{Gradients, Tape, Var};

/// Guard inside `x * ln(x + eps)` so entropy terms stay finite at 0.
pub const LOG_EPS: f64 = 1e-12;
