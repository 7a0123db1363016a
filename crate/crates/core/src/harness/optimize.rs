use crate::camera::CameraModel;
use crate::depth::{DepthImage, Pixel};
use crate::error::{Error, Result};
use crate::losses::{
    depth_loss, gradient_stats, total_grad, total_loss, GradStats, LossWeights, OccupancySurrogate, TargetOccupancy,
};
use crate::voxel::GridSpec;

use super::pipeline::{QuantizedPath, VoxelizedPointLoss};

#[derive(Clone, Debug)]
pub struct OptimizeConfig {
    pub weights: LossWeights,
    pub steps: usize,
    pub lr: f64,
    /// Pixels whose distance to their target bin is tracked; all pixels valid
    /// in the ground truth when `None`.
    pub track: Option<Vec<Pixel>>,
}

/// State before the update of one iteration; the last entry is the state
/// after the final update.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimStep {
    pub total: f64,
    pub det: f64,
    pub depth: f64,
    /// Coverage of the combined depth gradient.
    pub stats: GradStats,
    /// Mean distance from tracked points to the center of the bin their
    /// ground-truth point falls in.
    pub mean_distance: f64,
}

#[derive(Clone, Debug)]
pub struct OptimTrace {
    pub steps: Vec<OptimStep>,
    pub final_depth: DepthImage,
}

impl OptimTrace {
    pub fn initial(&self) -> &OptimStep {
        &self.steps[0]
    }

    pub fn last(&self) -> &OptimStep {
        self.steps.last().expect("trace is never empty")
    }
}

/// Root-mean-square depth error over `pixels` (skipping ones invalid in either).
pub fn rmse(z: &DepthImage, truth: &DepthImage, pixels: &[Pixel]) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for px in pixels {
        let (u, v) = (px.u as usize, px.v as usize);
        if let (Some(a), Some(b)) = (z.get(u, v), truth.get(u, v)) {
            s += (a - b) * (a - b);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Plain gradient descent on `λ_det·L_det + λ_depth·L_depth` through the soft
/// quantization path, with the squared occupancy mismatch as detection loss.
///
/// A depth term with zero weight is not evaluated at all, so `truth` may then
/// lack supervision.
pub fn optimize_depth(
    initial: &DepthImage,
    target: &TargetOccupancy,
    cam: &CameraModel,
    grid: &GridSpec,
    truth: &DepthImage,
    cfg: &OptimizeConfig,
) -> Result<OptimTrace> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate {} must be positive",
            cfg.lr
        )));
    }
    if !initial.same_shape(truth) {
        return Err(Error::DimensionMismatch(format!(
            "initial {}x{} vs truth {}x{}",
            initial.width(),
            initial.height(),
            truth.width(),
            truth.height()
        )));
    }
    let path = QuantizedPath::new(
        *cam,
        VoxelizedPointLoss::new(*grid, OccupancySurrogate { target: target.clone() }),
    );
    let tracked: Vec<(usize, [f64; 3])> = match &cfg.track {
        Some(p) => p.clone(),
        None => truth.valid_pixels().collect(),
    }
    .into_iter()
    .filter_map(|px| {
        let (u, v) = (px.u as usize, px.v as usize);
        let z = truth.get(u, v)?;
        let cell = grid.cell_of(cam.back_project(u as f64, v as f64, z))?;
        Some((initial.index(u, v), grid.center(cell)))
    })
    .collect();

    let mut z = initial.clone();
    let mut steps = Vec::with_capacity(cfg.steps + 1);
    for it in 0..=cfg.steps {
        let (det, det_grad) = path.loss_and_grad(&z)?;
        let (depth, depth_grad) = if cfg.weights.lambda_depth != 0.0 {
            let (l, g) = depth_loss(&z, truth)?;
            (l, Some(g))
        } else {
            (0.0, None)
        };
        let total = total_loss(det, depth, &cfg.weights);
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss {
                value: total,
                context: format!("iteration {it}"),
            });
        }
        let grad = total_grad(Some(&det_grad), depth_grad.as_ref(), &cfg.weights)?;
        let mean_distance = if tracked.is_empty() {
            0.0
        } else {
            tracked
                .iter()
                .map(|&(i, c)| {
                    let px = z.pixel_of(i);
                    let p = cam.back_project(px.u as f64, px.v as f64, z.depth_at(i));
                    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt()
                })
                .sum::<f64>()
                / tracked.len() as f64
        };
        steps.push(OptimStep {
            total,
            det,
            depth,
            stats: gradient_stats(&grad),
            mean_distance,
        });
        if it == cfg.steps {
            break;
        }
        for (i, &g) in grad.values().iter().enumerate() {
            if g != 0.0 && z.is_valid(i) {
                z.nudge(i, -cfg.lr * g);
                let nz = z.depth_at(i);
                if !(nz.is_finite() && nz > 0.0) {
                    return Err(Error::NonFiniteLoss {
                        value: nz,
                        context: format!("depth left the valid range at iteration {it}"),
                    });
                }
            }
        }
    }
    Ok(OptimTrace { steps, final_depth: z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scene::demo_scene;

    #[test]
    fn rmse_of_identical_maps_is_zero() {
        let (s, _, _) = demo_scene();
        let all: Vec<Pixel> = s.truth.valid_pixels().collect();
        assert_eq!(rmse(&s.truth, &s.truth, &all), 0.0);
        assert!(rmse(&s.initial, &s.truth, &all) > 0.0);
    }

    #[test]
    fn trace_has_one_entry_per_step_plus_final() {
        let (s, grid, target) = demo_scene();
        let cfg = OptimizeConfig {
            weights: LossWeights::VOXEL_BASED,
            steps: 3,
            lr: 1e-3,
            track: Some(s.object_pixels()),
        };
        let t = optimize_depth(&s.initial, &target, &s.camera, &grid, &s.truth, &cfg).unwrap();
        assert_eq!(t.steps.len(), 4);
    }

    #[test]
    fn rejects_bad_learning_rate() {
        let (s, grid, target) = demo_scene();
        let cfg = OptimizeConfig {
            weights: LossWeights::VOXEL_BASED,
            steps: 1,
            lr: 0.0,
            track: None,
        };
        assert!(optimize_depth(&s.initial, &target, &s.camera, &grid, &s.truth, &cfg).is_err());
    }
}
