//! Dense matrices and a small feedforward engine with residual blocks,
//! inverted dropout, backpropagation and first-order optimizers.

mod matrix;
mod network;
mod optim;
pub mod snapshot;

pub use matrix::Matrix;
pub use network::{accumulate_gradients, flatten_gradients, Dense, Gradients, NetSpec, Network};
pub use optim::{OptimKind, OptimState};
