//! Differentiable change-of-representation layers for pseudo-LiDAR pipelines.
//!
//! A depth map is back-projected into a point cloud ([`projection`]), which is
//! then either voxelized into a soft occupancy tensor ([`voxel`]) or thinned
//! into a LiDAR-like point set ([`sparsify`]). Every step carries an exact
//! backward pass, so a loss defined on the tensor or on the kept points can be
//! routed back to per-pixel depth gradients ([`losses`] composes those with a
//! supervised depth loss).
//!
//! The [`io`] module reads and writes KITTI-style velodyne sweeps, 16-bit depth
//! PNGs and calibration files; [`harness`] holds the finite-difference
//! oracle, scene synthesis, the depth-optimization demo and timing helpers.
//!
//! Kernels run data-parallel through rayon when the `parallel` feature is
//! enabled (the default). Results are bit-identical in [`Exec::Serial`] and
//! [`Exec::Parallel`] because every reduction runs in a fixed order.

pub mod camera;
pub mod depth;
pub mod error;
pub mod exec;
pub mod harness;
pub mod io;
pub mod losses;
pub mod projection;
pub mod sparsify;
pub mod voxel;

pub use camera::CameraModel;
pub use depth::{DepthGrad, DepthImage, Pixel};
pub use error::{Error, Result};
pub use exec::Exec;
pub use projection::{PointGrad, ProvenancedCloud};
