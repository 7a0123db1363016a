use std::fmt;

use crate::error::{Error, Result};

/// Linear bin index `(ix·Ny + iy)·Nz + iz`; ordering matches lexicographic `(ix, iy, iz)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinIndex(pub usize);

impl fmt::Display for BinIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighborhood {
    None,
    Cube26,
}

impl Neighborhood {
    pub fn as_str(self) -> &'static str {
        match self {
            Neighborhood::None => "none",
            Neighborhood::Cube26 => "cube26",
        }
    }
}

impl std::str::FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Neighborhood::None),
            "cube26" => Ok(Neighborhood::Cube26),
            other => Err(Error::InvalidGrid(format!("unknown neighborhood `{other}`"))),
        }
    }
}

/// Regular grid of `counts` bins of size `bin_size` starting at `origin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub bin_size: [f64; 3],
    pub counts: [usize; 3],
    /// RBF bandwidth σ² in m².
    pub sigma_sq: f64,
    pub neighborhood: Neighborhood,
}

/// Neighbor average divisor; fixed even where part of the cube leaves the grid.
pub const NEIGHBOR_COUNT: f64 = 26.0;

/// Offset code of the bin itself in the 3×3×3 cube enumeration.
pub(crate) const OWN_CODE: u8 = 13;

impl GridSpec {
    pub fn new(
        origin: [f64; 3],
        bin_size: [f64; 3],
        counts: [usize; 3],
        sigma_sq: f64,
        neighborhood: Neighborhood,
    ) -> Result<Self> {
        let g = GridSpec {
            origin,
            bin_size,
            counts,
            sigma_sq,
            neighborhood,
        };
        g.validate()?;
        Ok(g)
    }

    /// 700×800×35 bins of 0.1 m covering 70 m ahead, ±40 m laterally and
    /// 3.5 m of height (−2.5 m … +1.0 m), laid out in the camera frame
    /// (x right, y down, z forward): x ∈ [−40, 40], y ∈ [−1, 2.5], z ∈ [0, 70].
    pub fn bev_camera() -> Self {
        GridSpec {
            origin: [-40.0, -1.0, 0.0],
            bin_size: [0.1, 0.1, 0.1],
            counts: [800, 35, 700],
            sigma_sq: 0.01,
            neighborhood: Neighborhood::Cube26,
        }
    }

    /// The same volume in the LiDAR frame (x forward, y left, z up).
    pub fn bev_lidar() -> Self {
        GridSpec {
            origin: [0.0, -40.0, -2.5],
            bin_size: [0.1, 0.1, 0.1],
            counts: [700, 800, 35],
            sigma_sq: 0.01,
            neighborhood: Neighborhood::Cube26,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bin_size.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "bin sizes must be positive: {:?}",
                self.bin_size
            )));
        }
        if self.counts.contains(&0) {
            return Err(Error::InvalidGrid(format!("bin counts must be ≥ 1: {:?}", self.counts)));
        }
        if self
            .counts
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .is_none()
        {
            return Err(Error::InvalidGrid("total bin count overflows".into()));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        if !(self.sigma_sq.is_finite() && self.sigma_sq > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "sigma_sq must be positive, got {}",
                self.sigma_sq
            )));
        }
        Ok(())
    }

    pub fn with_sigma_sq(mut self, sigma_sq: f64) -> Self {
        self.sigma_sq = sigma_sq;
        self
    }

    pub fn with_neighborhood(mut self, neighborhood: Neighborhood) -> Self {
        self.neighborhood = neighborhood;
        self
    }

    pub fn total_bins(&self) -> usize {
        self.counts.iter().product()
    }

    /// Cell containing `p`. A coordinate exactly on an interior edge belongs to
    /// the higher cell; the upper extent itself is outside.
    #[inline]
    pub fn cell_of(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let mut cell = [0usize; 3];
        for a in 0..3 {
            let t = ((p[a] - self.origin[a]) / self.bin_size[a]).floor();
            if !(t >= 0.0 && t < self.counts[a] as f64) {
                return None;
            }
            cell[a] = t as usize;
        }
        Some(cell)
    }

    #[inline]
    pub fn index_of(&self, cell: [usize; 3]) -> BinIndex {
        BinIndex((cell[0] * self.counts[1] + cell[1]) * self.counts[2] + cell[2])
    }

    #[inline]
    pub fn cell_of_index(&self, bin: BinIndex) -> [usize; 3] {
        let iz = bin.0 % self.counts[2];
        let rest = bin.0 / self.counts[2];
        [rest / self.counts[1], rest % self.counts[1], iz]
    }

    #[inline]
    pub fn center(&self, cell: [usize; 3]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for a in 0..3 {
            c[a] = self.origin[a] + (cell[a] as f64 + 0.5) * self.bin_size[a];
        }
        c
    }

    pub fn contains_bin(&self, bin: BinIndex) -> bool {
        bin.0 < self.total_bins()
    }

    /// Cell at offset code `code` (0..27, lexicographic over {−1,0,1}³) from `cell`.
    #[inline]
    pub(crate) fn offset_cell(&self, cell: [usize; 3], code: u8) -> Option<[usize; 3]> {
        let d = [code / 9, (code / 3) % 3, code % 3];
        let mut out = [0usize; 3];
        for a in 0..3 {
            let c = cell[a] + d[a] as usize;
            if c == 0 || c > self.counts[a] {
                return None;
            }
            out[a] = c - 1;
        }
        Some(out)
    }

    /// Offset codes visited for a source bin, in ascending target order.
    pub(crate) fn offset_codes(&self) -> &'static [u8] {
        const ALL: [u8; 27] = [
            0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26,
        ];
        match self.neighborhood {
            Neighborhood::None => &ALL[13..14],
            Neighborhood::Cube26 => &ALL,
        }
    }
}

/// Containing bin of each point, `None` when outside the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BinAssignment(pub Vec<Option<BinIndex>>);
