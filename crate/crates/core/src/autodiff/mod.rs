//! Array arithmetic with recorded operations and reverse-mode gradients.

pub mod array;
pub mod gradcheck;
pub mod tape;

pub use array::Array;
pub use tape::{Gradients, Tape, Var};
