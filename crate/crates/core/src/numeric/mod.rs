//! Dense matrices, trainable tensors, and a reverse-mode tape.

mod gradcheck;
pub mod kernels;
mod matrix;
mod param;
mod tape;

pub use gradcheck::{finite_difference_grad, relative_error, DEFAULT_EPSILON};
pub use matrix::{dot, norm, Matrix};
pub use param::{sgd_update, ParamTensor};
pub use tape::{Gradients, Tape, Var};
