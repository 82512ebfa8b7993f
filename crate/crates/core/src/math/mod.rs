//! Dense numeric primitives with reverse-mode gradients.

mod gradcheck;
mod param;
mod tape;

pub use gradcheck::grad_check;
pub use param::{ParamId, ParamKind, ParamStore, ParamTensor, Shape};
#[allow(unused_imports)]
pub(crate) use tape::dot;
pub use tape::{sigmoid_scalar, softmax, NodeId, Tape};
