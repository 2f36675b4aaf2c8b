//! Minimal tape-based autodiff: tensors, a per-pass graph, named parameter
//! sets, and an AdamW optimizer. Everything is f64 and strictly ordered, so
//! identical seeds give bit-identical runs.

mod graph;
mod optim;
mod params;
mod tensor;

pub use graph::{Graph, NodeId};
pub use optim::AdamW;
pub use params::{normal_tensor, xavier_tensor, NamedTensor, ParamSet};
pub use tensor::Tensor;
