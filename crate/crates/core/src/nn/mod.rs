//! Dense tensors, reverse-mode differentiation, loss and optimizer.

mod adam;
mod graph;
pub mod io;
mod loss;
mod params;
mod tensor;

pub use adam::AdamState;
pub use graph::{bce, sigmoid, Graph, Var, PROB_EPS};
pub use loss::{add_l2_grad, l2_penalty, loss};
pub use params::{glorot, uniform, Param, ParamKind, ParamStore};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
