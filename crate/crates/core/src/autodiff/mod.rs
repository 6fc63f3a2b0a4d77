//! Minimal reverse-mode differentiation over dense `f64` tensors.
//!
//! Broadcasting is limited to exact shape matches or a single-element operand;
//! row-bias addition is its own op.

mod graph;
pub mod gradcheck;
mod tensor;

pub use graph::{Graph, NodeId};
pub use tensor::Tensor;
