//! Depth map → loss compositions with hand-chained backward passes.

use crate::camera::CameraModel;
use crate::depth::{DepthGrad, DepthImage};
use crate::error::Result;
use crate::exec::Exec;
use crate::losses::DetectionLoss;
use crate::projection::{backprop_to_depth_with, depth_to_points_with, PointGrad, ProvenancedCloud};
use crate::sparsify::{angular_sparsify_with, filter_height, scatter_grads, KeepMap, SphericalBinSpec};
use crate::voxel::{soft_voxelize_with, voxelize_backward_with, GridSpec, OccupancyTensor};

/// A loss on a bare point set.
pub trait PointLoss {
    fn evaluate(&self, points: &[[f64; 3]]) -> Result<(f64, PointGrad)>;
}

/// Soft voxelization followed by a tensor loss.
#[derive(Clone, Debug)]
pub struct VoxelizedPointLoss<D> {
    pub grid: GridSpec,
    pub det: D,
    pub exec: Exec,
}

impl<D: DetectionLoss> VoxelizedPointLoss<D> {
    pub fn new(grid: GridSpec, det: D) -> Self {
        VoxelizedPointLoss {
            grid,
            det,
            exec: Exec::default(),
        }
    }

    pub fn tensor(&self, points: &[[f64; 3]]) -> Result<OccupancyTensor> {
        Ok(soft_voxelize_with(points, &self.grid, self.exec)?.0)
    }

    pub fn value(&self, points: &[[f64; 3]]) -> Result<f64> {
        let (t, _) = soft_voxelize_with(points, &self.grid, self.exec)?;
        Ok(self.det.evaluate(&t)?.0)
    }
}

impl<D: DetectionLoss> PointLoss for VoxelizedPointLoss<D> {
    fn evaluate(&self, points: &[[f64; 3]]) -> Result<(f64, PointGrad)> {
        let (t, bwd) = soft_voxelize_with(points, &self.grid, self.exec)?;
        let (loss, tg) = self.det.evaluate(&t)?;
        // bins the tensor does not store have no points nearby to move
        let tg = tg.restricted_to(&t);
        Ok((loss, voxelize_backward_with(&bwd, &tg, points, self.exec)?))
    }
}

/// Every valid pixel becomes a point and feeds the point loss.
#[derive(Clone, Debug)]
pub struct QuantizedPath<P> {
    pub cam: CameraModel,
    pub head: P,
    pub exec: Exec,
}

impl<P: PointLoss> QuantizedPath<P> {
    pub fn new(cam: CameraModel, head: P) -> Self {
        QuantizedPath {
            cam,
            head,
            exec: Exec::default(),
        }
    }

    pub fn cloud(&self, depth: &DepthImage) -> Result<ProvenancedCloud> {
        depth_to_points_with(depth, &self.cam, self.exec)
    }

    pub fn loss(&self, depth: &DepthImage) -> Result<f64> {
        Ok(self.loss_and_grad(depth)?.0)
    }

    pub fn loss_and_grad(&self, depth: &DepthImage) -> Result<(f64, DepthGrad)> {
        let cloud = self.cloud(depth)?;
        let (loss, pg) = self.head.evaluate(cloud.points())?;
        Ok((loss, backprop_to_depth_with(&cloud, &pg, &self.cam, self.exec)?))
    }
}

/// Height filter and beam-like angular subsampling before the point loss, as
/// a point-based detector would see the cloud. Dropped points get no gradient.
#[derive(Clone, Debug)]
pub struct SparsifiedPath<P> {
    pub cam: CameraModel,
    pub y_limit: f64,
    pub spec: SphericalBinSpec,
    pub head: P,
    pub exec: Exec,
}

impl<P: PointLoss> SparsifiedPath<P> {
    pub fn new(cam: CameraModel, y_limit: f64, spec: SphericalBinSpec, head: P) -> Self {
        SparsifiedPath {
            cam,
            y_limit,
            spec,
            head,
            exec: Exec::default(),
        }
    }

    pub fn keep(&self, cloud: &ProvenancedCloud) -> Result<KeepMap> {
        let tall = filter_height(cloud, self.y_limit);
        let sub = cloud.select(&tall.kept)?;
        tall.then(&angular_sparsify_with(&sub, &self.spec, self.exec)?)
    }

    pub fn loss(&self, depth: &DepthImage) -> Result<f64> {
        Ok(self.loss_and_grad(depth)?.0)
    }

    pub fn loss_and_grad(&self, depth: &DepthImage) -> Result<(f64, DepthGrad)> {
        let cloud = depth_to_points_with(depth, &self.cam, self.exec)?;
        let keep = self.keep(&cloud)?;
        let kept = cloud.select(&keep.kept)?;
        let (loss, pg) = self.head.evaluate(kept.points())?;
        let full = scatter_grads(&keep, &pg, cloud.len())?;
        Ok((loss, backprop_to_depth_with(&cloud, &full, &self.cam, self.exec)?))
    }
}
