//! The reflection group ℤ₂ acting on states and actions, the equivariance
//! mismatch and its regulariser, and the orbit-averaging projection together
//! with the distances used to reason about it.

mod ops;
mod spec;

pub use ops::{
    mismatch, orbit_average, projection_distance, reflection_closure, sup_metric, symreg_loss,
    xi_bound, DeterministicPolicy, OrbitAverage,
};
pub use spec::{ActionMode, PolicyOutput, SymmetrySpec};
