use crate::error::{Error, Result};

/// Integer pixel location: `u` is the column, `v` the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub u: u32,
    pub v: u32,
}

impl Pixel {
    pub fn new(u: u32, v: u32) -> Self {
        Pixel { u, v }
    }
}

/// Value stored at invalid pixels. Never read by any computation.
pub const INVALID_DEPTH: f64 = 0.0;

/// Row-major H×W metric depth grid with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthImage {
    /// All pixels invalid.
    pub fn new(width: usize, height: usize) -> Self {
        DepthImage {
            width,
            height,
            values: vec![INVALID_DEPTH; width * height],
            valid: vec![false; width * height],
        }
    }

    /// Build from a dense buffer; non-positive or non-finite entries become invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        let valid: Vec<bool> = values.iter().map(|z| z.is_finite() && *z > 0.0).collect();
        let values = values
            .into_iter()
            .zip(&valid)
            .map(|(z, &ok)| if ok { z } else { INVALID_DEPTH })
            .collect();
        Ok(DepthImage {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        debug_assert!(u < self.width && v < self.height);
        v * self.width + u
    }

    #[inline]
    pub fn pixel_of(&self, index: usize) -> Pixel {
        Pixel::new((index % self.width) as u32, (index / self.width) as u32)
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let i = self.index(u, v);
        self.valid[i].then(|| self.values[i])
    }

    /// Mark `(u, v)` valid with depth `z`. Rejects non-finite or non-positive depth.
    pub fn set(&mut self, u: usize, v: usize, z: f64) -> Result<()> {
        if u >= self.width || v >= self.height {
            return Err(Error::InvalidArgument(format!(
                "pixel ({u}, {v}) outside {}x{} image",
                self.width, self.height
            )));
        }
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "depth {z} at ({u}, {v}) must be finite and positive"
            )));
        }
        let i = self.index(u, v);
        self.values[i] = z;
        self.valid[i] = true;
        Ok(())
    }

    pub fn invalidate(&mut self, u: usize, v: usize) {
        let i = self.index(u, v);
        self.values[i] = INVALID_DEPTH;
        self.valid[i] = false;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.valid[index]
    }

    pub fn depth_at(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Raw write access to a valid pixel's depth, used by perturbation and
    /// descent loops. Invalid pixels are left untouched.
    pub fn nudge(&mut self, index: usize, delta: f64) {
        if self.valid[index] {
            self.values[index] += delta;
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.valid
            .iter()
            .enumerate()
            .filter(|(_, &ok)| ok)
            .map(|(i, _)| self.pixel_of(i))
    }

    pub fn same_shape(&self, other: &DepthImage) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel gradient ∂L/∂Z(u, v); zero where no gradient reaches.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthGrad {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthGrad {
    pub fn zeros(width: usize, height: usize) -> Self {
        DepthGrad {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn zeros_like(depth: &DepthImage) -> Self {
        Self::zeros(depth.width(), depth.height())
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(DepthGrad { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &DepthGrad, scale: f64) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|g| **g != 0.0).count()
    }
}
