//! Dense arrays, reverse-mode autodiff and Adam, all at `f64`.

mod adam;
mod array;
mod tape;

pub use adam::AdamState;
pub use array::Array;
pub use tape::{Gradients, OpKind, Tape, Var};
