//! Depth map ⇄ pseudo-LiDAR point cloud.
//!
//! Forward: `z = Z(u,v)`, `x = (u − c_u)·z / f_u`, `y = (v − c_v)·z / f_v`.
//! Backward: since x, y, z are each linear in `Z(u,v)`, a point gradient
//! `g` maps to `∂L/∂Z(u,v) = g·((u − c_u)/f_u, (v − c_v)/f_v, 1)`.

use crate::camera::CameraModel;
use crate::depth::{DepthGrad, DepthImage, Pixel};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};

/// Camera-frame points, each tagged with the pixel it came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProvenancedCloud {
    points: Vec<[f64; 3]>,
    source: Vec<Pixel>,
}

impl ProvenancedCloud {
    pub fn new(points: Vec<[f64; 3]>, source: Vec<Pixel>) -> Result<Self> {
        if points.len() != source.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                actual: source.len(),
            });
        }
        Ok(ProvenancedCloud { points, source })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn source(&self) -> &[Pixel] {
        &self.source
    }

    /// Sub-cloud of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<ProvenancedCloud> {
        let n = self.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        Ok(ProvenancedCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            source: indices.iter().map(|&i| self.source[i]).collect(),
        })
    }
}

/// Per-point `(∂L/∂x, ∂L/∂y, ∂L/∂z)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointGrad(pub Vec<[f64; 3]>);

impl PointGrad {
    pub fn zeros(n: usize) -> Self {
        PointGrad(vec![[0.0; 3]; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[[f64; 3]] {
        &self.0
    }
}

pub fn depth_to_points(depth: &DepthImage, cam: &CameraModel) -> Result<ProvenancedCloud> {
    depth_to_points_with(depth, cam, Exec::default())
}

/// One point per valid pixel, in row-major pixel order.
pub fn depth_to_points_with(depth: &DepthImage, cam: &CameraModel, exec: Exec) -> Result<ProvenancedCloud> {
    check_shape(depth.width(), depth.height(), cam)?;
    let valid: Vec<usize> = (0..depth.len()).filter(|&i| depth.is_valid(i)).collect();
    if valid.is_empty() {
        return Err(Error::EmptyDepth);
    }
    let points = exec::map_slice(exec, &valid, |&i| {
        let px = depth.pixel_of(i);
        cam.back_project(px.u as f64, px.v as f64, depth.depth_at(i))
    });
    let source = valid.iter().map(|&i| depth.pixel_of(i)).collect();
    Ok(ProvenancedCloud { points, source })
}

pub fn backprop_to_depth(cloud: &ProvenancedCloud, grads: &PointGrad, cam: &CameraModel) -> Result<DepthGrad> {
    backprop_to_depth_with(cloud, grads, cam, Exec::default())
}

/// Route point gradients to their source pixels. Several points sharing a
/// pixel are summed in ascending point order.
pub fn backprop_to_depth_with(
    cloud: &ProvenancedCloud,
    grads: &PointGrad,
    cam: &CameraModel,
    exec: Exec,
) -> Result<DepthGrad> {
    if grads.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            actual: grads.len(),
        });
    }
    let (w, h) = (cam.width, cam.height);
    if let Some((i, px)) = cloud
        .source
        .iter()
        .enumerate()
        .find(|(_, px)| px.u as usize >= w || px.v as usize >= h)
    {
        return Err(Error::InvalidArgument(format!(
            "point {i} has source pixel ({}, {}) outside {w}x{h}",
            px.u, px.v
        )));
    }
    let contributions = exec::map_range(exec, cloud.len(), |i| {
        let px = cloud.source[i];
        let jac = cam.depth_jacobian(px.u as f64, px.v as f64);
        let g = grads.0[i];
        g[0] * jac[0] + g[1] * jac[1] + g[2] * jac[2]
    });
    let mut out = DepthGrad::zeros(w, h);
    let values = out.values_mut();
    for (px, c) in cloud.source.iter().zip(contributions) {
        values[px.v as usize * w + px.u as usize] += c;
    }
    Ok(out)
}

fn check_shape(width: usize, height: usize, cam: &CameraModel) -> Result<()> {
    if width != cam.width || height != cam.height {
        return Err(Error::DimensionMismatch(format!(
            "depth image {width}x{height} vs camera {}x{}",
            cam.width, cam.height
        )));
    }
    Ok(())
}

/// Range plus LiDAR-style angles of a camera-frame point.
///
/// `theta` is the elevation above the optical axis in the vertical plane
/// (positive upward, i.e. toward −y), `phi` the azimuth in the horizontal
/// x–z plane (positive toward +x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spherical {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Spherical {
    pub fn from_cartesian(p: [f64; 3]) -> Option<Self> {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r == 0.0 || !r.is_finite() {
            return None;
        }
        Some(Spherical {
            r,
            theta: (-p[1]).atan2(p[0].hypot(p[2])),
            phi: p[0].atan2(p[2]),
        })
    }

    pub fn to_cartesian(self) -> [f64; 3] {
        let horizontal = self.r * self.theta.cos();
        [
            horizontal * self.phi.sin(),
            -self.r * self.theta.sin(),
            horizontal * self.phi.cos(),
        ]
    }
}

pub fn points_to_spherical(cloud: &ProvenancedCloud) -> Result<Vec<Spherical>> {
    cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| Spherical::from_cartesian(p).ok_or(Error::ZeroNormPoint(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn cam() -> CameraModel {
        CameraModel::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn substitution_example() {
        let mut d = DepthImage::new(100, 100);
        d.set(60, 40, 10.0).unwrap();
        d.set(50, 50, 3.5).unwrap();
        let cloud = depth_to_points(&d, &cam()).unwrap();
        // row-major: (60, 40) comes before (50, 50)
        assert_eq!(cloud.points()[0], [1.0, -1.0, 10.0]);
        assert_eq!(cloud.points()[1], [0.0, 0.0, 3.5]);
        assert_eq!(cloud.source(), &[Pixel::new(60, 40), Pixel::new(50, 50)]);
    }

    #[test]
    fn one_point_per_valid_pixel() {
        let mut d = DepthImage::new(100, 100);
        for (u, v) in [(0, 0), (99, 0), (3, 7), (99, 99)] {
            d.set(u, v, 2.0).unwrap();
        }
        assert_eq!(depth_to_points(&d, &cam()).unwrap().len(), 4);
    }

    #[test]
    fn empty_depth_and_shape_mismatch() {
        assert!(matches!(
            depth_to_points(&DepthImage::new(100, 100), &cam()),
            Err(Error::EmptyDepth)
        ));
        let mut d = DepthImage::new(10, 10);
        d.set(0, 0, 1.0).unwrap();
        assert!(matches!(depth_to_points(&d, &cam()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn jacobian_entries() {
        let mut d = DepthImage::new(100, 100);
        d.set(60, 17, 4.0).unwrap();
        let cloud = depth_to_points(&d, &cam()).unwrap();
        let gz = backprop_to_depth(&cloud, &PointGrad(vec![[0.0, 0.0, 1.0]]), &cam()).unwrap();
        assert_eq!(gz.get(60, 17), 1.0);
        let gx = backprop_to_depth(&cloud, &PointGrad(vec![[1.0, 0.0, 0.0]]), &cam()).unwrap();
        assert!((gx.get(60, 17) - 0.1).abs() < 1e-15);
        assert_eq!(gx.nonzero_count(), 1);
    }

    #[test]
    fn backprop_length_mismatch() {
        let mut d = DepthImage::new(100, 100);
        d.set(1, 1, 4.0).unwrap();
        let cloud = depth_to_points(&d, &cam()).unwrap();
        assert!(matches!(
            backprop_to_depth(&cloud, &PointGrad::zeros(2), &cam()),
            Err(Error::LengthMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn shared_pixel_accumulates() {
        let cloud = ProvenancedCloud::new(
            vec![[0.0, 0.0, 1.0], [0.0, 0.0, 2.0]],
            vec![Pixel::new(5, 5), Pixel::new(5, 5)],
        )
        .unwrap();
        let g = backprop_to_depth(&cloud, &PointGrad(vec![[0.0, 0.0, 0.25], [0.0, 0.0, 0.5]]), &cam()).unwrap();
        assert_eq!(g.get(5, 5), 0.75);
    }

    #[test]
    fn spherical_examples() {
        let s = Spherical::from_cartesian([0.0, 0.0, 5.0]).unwrap();
        assert_eq!((s.r, s.theta, s.phi), (5.0, 0.0, 0.0));
        let s = Spherical::from_cartesian([5.0, 0.0, 5.0]).unwrap();
        assert!((s.r - 5.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((s.phi - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(s.theta, 0.0);
        // a point above the optical axis (negative y) has positive elevation
        assert!(Spherical::from_cartesian([0.0, -1.0, 5.0]).unwrap().theta > 0.0);
        assert!(Spherical::from_cartesian([0.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn zero_norm_point_is_an_error() {
        let cloud = ProvenancedCloud::new(
            vec![[1.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
            vec![Pixel::new(0, 0), Pixel::new(1, 0)],
        )
        .unwrap();
        assert!(matches!(points_to_spherical(&cloud), Err(Error::ZeroNormPoint(1))));
    }
}
