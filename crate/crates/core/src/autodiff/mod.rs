//! Dense reverse-mode automatic differentiation and the Adam optimizer.

mod adam;
mod gradcheck;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use tape::{row_std, sigmoid, softmax_in_place, Tape, Var};
