use crate::error::{Error, Result};

/// Pinhole intrinsics in pixels.
///
/// Pixel coordinates are integer pixel centers: column `u` runs along the
/// image width, row `v` along the height, and back-projection uses `u` and
/// `v` directly without a half-pixel offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraModel {
    pub fu: f64,
    pub fv: f64,
    pub cu: f64,
    pub cv: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn new(fu: f64, fv: f64, cu: f64, cv: f64, width: usize, height: usize) -> Result<Self> {
        let cam = CameraModel {
            fu,
            fv,
            cu,
            cv,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fu.is_finite() && self.fu > 0.0 && self.fv.is_finite() && self.fv > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got ({}, {})",
                self.fu, self.fv
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image size must be nonzero".into()));
        }
        if !(self.cu >= 0.0 && self.cu < self.width as f64) {
            return Err(Error::InvalidCamera(format!(
                "c_u = {} outside [0, {})",
                self.cu, self.width
            )));
        }
        if !(self.cv >= 0.0 && self.cv < self.height as f64) {
            return Err(Error::InvalidCamera(format!(
                "c_v = {} outside [0, {})",
                self.cv, self.height
            )));
        }
        Ok(())
    }

    /// Camera-frame point of pixel `(u, v)` at depth `z`.
    #[inline]
    pub fn back_project(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        [(u - self.cu) * z / self.fu, (v - self.cv) * z / self.fv, z]
    }

    /// Continuous image coordinates of a camera-frame point with `z > 0`.
    #[inline]
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (self.fu * p[0] / p[2] + self.cu, self.fv * p[1] / p[2] + self.cv)
    }

    /// Derivative of [`back_project`](Self::back_project) with respect to depth.
    #[inline]
    pub fn depth_jacobian(&self, u: f64, v: f64) -> [f64; 3] {
        [(u - self.cu) / self.fu, (v - self.cv) / self.fv, 1.0]
    }

    /// KITTI left color camera (sequence 0000 of the object benchmark).
    pub fn kitti() -> Self {
        CameraModel {
            fu: 721.5377,
            fv: 721.5377,
            cu: 609.5593,
            cv: 172.854,
            width: 1242,
            height: 375,
        }
    }
}
