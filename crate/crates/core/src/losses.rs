//! Depth supervision, the detection-loss slot, loss weighting and gradient
//! coverage statistics.

use std::cmp::Ordering;

use crate::depth::{DepthGrad, DepthImage};
use crate::error::{Error, Result};
use crate::voxel::{hard_voxelize, BinIndex, GridSpec, OccupancyTensor, TensorGrad};

/// `0.5x²` for `|x| < 1`, `|x| − 0.5` otherwise.
#[inline]
pub fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

#[inline]
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// Mean smooth-L1 error over pixels valid in both maps, with its gradient
/// with respect to `pred`.
pub fn depth_loss(pred: &DepthImage, truth: &DepthImage) -> Result<(f64, DepthGrad)> {
    if !pred.same_shape(truth) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let supervised: Vec<usize> = (0..pred.len())
        .filter(|&i| pred.is_valid(i) && truth.is_valid(i))
        .collect();
    if supervised.is_empty() {
        return Err(Error::NoSupervisedPixels);
    }
    let inv = 1.0 / supervised.len() as f64;
    let mut grad = DepthGrad::zeros_like(pred);
    let mut total = 0.0;
    for &i in &supervised {
        let r = pred.depth_at(i) - truth.depth_at(i);
        total += smooth_l1(r);
        grad.values_mut()[i] = smooth_l1_grad(r) * inv;
    }
    Ok((total * inv, grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_depth: f64,
    pub lambda_det: f64,
}

impl LossWeights {
    /// Weights for detectors consuming raw points.
    pub const POINT_BASED: LossWeights = LossWeights {
        lambda_depth: 1.0,
        lambda_det: 0.01,
    };
    /// Weights for detectors consuming a voxel tensor.
    pub const VOXEL_BASED: LossWeights = LossWeights {
        lambda_depth: 1.0,
        lambda_det: 0.1,
    };

    pub fn new(lambda_depth: f64, lambda_det: f64) -> Result<Self> {
        if !(lambda_depth >= 0.0 && lambda_det >= 0.0 && lambda_depth.is_finite() && lambda_det.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be finite and non-negative, got ({lambda_depth}, {lambda_det})"
            )));
        }
        Ok(LossWeights {
            lambda_depth,
            lambda_det,
        })
    }
}

pub fn total_loss(det: f64, depth: f64, w: &LossWeights) -> f64 {
    w.lambda_det * det + w.lambda_depth * depth
}

/// `λ_det·det + λ_depth·depth`, either part optional.
pub fn total_grad(det: Option<&DepthGrad>, depth: Option<&DepthGrad>, w: &LossWeights) -> Result<DepthGrad> {
    let shape = det
        .or(depth)
        .ok_or_else(|| Error::InvalidArgument("no gradient to combine".into()))?;
    let mut out = DepthGrad::zeros(shape.width(), shape.height());
    if let Some(g) = det {
        out.add_scaled(g, w.lambda_det)?;
    }
    if let Some(g) = depth {
        out.add_scaled(g, w.lambda_depth)?;
    }
    Ok(out)
}

/// Ground-truth occupancy for the surrogate detection loss.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetOccupancy {
    tensor: OccupancyTensor,
}

impl TargetOccupancy {
    /// Hard occupancy of ground-truth points (e.g. a LiDAR sweep in the camera frame).
    pub fn from_points(points: &[[f64; 3]], grid: &GridSpec) -> Result<Self> {
        Ok(TargetOccupancy {
            tensor: hard_voxelize(points, grid)?,
        })
    }

    pub fn from_tensor(tensor: OccupancyTensor) -> Result<Self> {
        if let Some(e) = tensor.entries().iter().find(|e| !(0.0..=1.0).contains(&e.1)) {
            return Err(Error::InvalidArgument(format!(
                "target value {} at bin {} outside [0, 1]",
                e.1, e.0
            )));
        }
        Ok(TargetOccupancy { tensor })
    }

    pub fn tensor(&self) -> &OccupancyTensor {
        &self.tensor
    }

    pub fn get(&self, bin: BinIndex) -> f64 {
        self.tensor.get(bin)
    }

    pub fn len(&self) -> usize {
        self.tensor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensor.is_empty()
    }
}

/// A detection loss on the voxel tensor: value and `∂L/∂T`.
pub trait DetectionLoss {
    fn evaluate(&self, pred: &OccupancyTensor) -> Result<(f64, TensorGrad)>;
}

/// Squared occupancy mismatch against a target tensor.
///
/// Not a detector: it stands in for one so the push/pull behaviour of the
/// tensor gradient can be exercised without a network. A bin that is occupied
/// but should not be gets a positive gradient (points pushed out), an empty
/// bin that should be occupied gets a negative one (points pulled in).
#[derive(Clone, Debug)]
pub struct OccupancySurrogate {
    pub target: TargetOccupancy,
}

impl DetectionLoss for OccupancySurrogate {
    fn evaluate(&self, pred: &OccupancyTensor) -> Result<(f64, TensorGrad)> {
        surrogate_det_loss(pred, &self.target)
    }
}

fn same_layout(a: &GridSpec, b: &GridSpec) -> bool {
    a.origin == b.origin && a.bin_size == b.bin_size && a.counts == b.counts
}

/// `½ Σ (T(m) − T*(m))²` over the union of stored bins. The gradient holds the
/// nonzero residuals only.
pub fn surrogate_det_loss(pred: &OccupancyTensor, target: &TargetOccupancy) -> Result<(f64, TensorGrad)> {
    if !same_layout(pred.grid(), target.tensor.grid()) {
        return Err(Error::GridMismatch);
    }
    let (a, b) = (pred.entries(), target.tensor.entries());
    let (mut i, mut j) = (0, 0);
    let mut loss = 0.0;
    let mut grad = TensorGrad::new();
    let mut add = |bin: BinIndex, r: f64| {
        loss += 0.5 * r * r;
        if r != 0.0 {
            grad.insert(bin, r);
        }
    };
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                add(a[i].0, a[i].1);
                i += 1;
            }
            Ordering::Greater => {
                add(b[j].0, -b[j].1);
                j += 1;
            }
            Ordering::Equal => {
                add(a[i].0, a[i].1 - b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    Ok((loss, grad))
}

/// Coverage of a depth-gradient field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradStats {
    /// Fraction of all pixels with a nonzero gradient.
    pub ratio: f64,
    /// Mean |g| over those pixels (0 when there are none).
    pub mean: f64,
    /// Σ |g| over all pixels.
    pub sum: f64,
}

pub const STATS_CSV_HEADER: &str = "loss_name,ratio,mean,sum";

impl GradStats {
    pub fn csv_row(&self, name: &str) -> String {
        format!("{name},{},{},{}", self.ratio, self.mean, self.sum)
    }
}

pub fn gradient_stats(g: &DepthGrad) -> GradStats {
    let total = g.values().len();
    let (count, sum) = g
        .values()
        .iter()
        .filter(|v| **v != 0.0)
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v.abs()));
    GradStats {
        ratio: if total == 0 { 0.0 } else { count as f64 / total as f64 },
        mean: if count == 0 { 0.0 } else { sum / count as f64 },
        sum,
    }
}
