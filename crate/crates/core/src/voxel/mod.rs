//! Occupancy voxelization over a regular 3D grid.
//!
//! Hard mode marks a bin 1 when any point falls inside it. Soft mode replaces
//! the indicator by RBF weights around bin centers so the tensor becomes a
//! smooth function of the point coordinates:
//!
//! ```text
//! T(m, m') = mean over p ∈ P_m' of exp(−‖p − ĉ_m‖² / σ²)      (0 when P_m' is empty)
//! T(m)     = T(m, m) + (1/26) · Σ_{m' ∈ N_m} T(m, m')
//! ```
//!
//! where `P_m'` are the points whose containing bin is `m'` and `N_m` the 26
//! bins of the surrounding 3×3×3 cube. The divisor stays 26 at the grid
//! border; out-of-grid neighbors simply contribute nothing.
//!
//! Bin membership is piecewise constant in the coordinates, so gradients are
//! those of the smooth RBF terms with membership held fixed.

mod grid;
mod soft;
mod tensor;

pub use grid::{BinAssignment, BinIndex, GridSpec, Neighborhood};
pub use soft::{
    assign_bins, hard_voxelize, hard_voxelize_with, soft_voxelize, soft_voxelize_with, voxelize_backward,
    voxelize_backward_with, Influence, VoxelBackwardMap,
};
pub use tensor::{
    format_tensor_dump, parse_tensor_dump, read_tensor_dump, write_tensor_dump, OccupancyTensor, TensorGrad,
};
