//! Verification and demonstration tooling: a finite-difference gradient
//! oracle, end-to-end loss pipelines, synthetic scenes, a depth-correction
//! demo and voxelization timing.

mod bench;
mod gradcheck;
mod optimize;
mod pipeline;
mod scene;

pub use bench::{bench_voxelize, uniform_cloud, BenchReport, BenchRow};
pub use gradcheck::{finite_diff_check, finite_diff_check_with, relative_error, GradCheckReport};
pub use optimize::{optimize_depth, rmse, OptimStep, OptimTrace, OptimizeConfig};
pub use pipeline::{PointLoss, QuantizedPath, SparsifiedPath, VoxelizedPointLoss};
pub use scene::{
    demo_grid, demo_scene, gradcheck_scene, road_scene, synth_scene, GradcheckScene, Rect, RoadScene, RoadSceneSpec,
    Scene, SceneSpec, GRADCHECK_FACE_MARGIN,
};
