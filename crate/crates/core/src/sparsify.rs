//! LiDAR-like subsampling of a pseudo-LiDAR cloud.
//!
//! Points above a height limit are dropped, then at most one point is kept
//! per (elevation, azimuth) bin. The backward pass is a scatter: kept points
//! pass their gradient through unchanged, dropped points get zero.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::projection::{PointGrad, ProvenancedCloud, Spherical};

/// Maximum height above the camera kept by default, meters.
pub const DEFAULT_Y_LIMIT: f64 = 1.0;

/// Angular bins over elevation `theta` and azimuth `phi` (radians, see
/// [`Spherical`] for the conventions).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalBinSpec {
    pub theta_min: f64,
    pub theta_max: f64,
    pub n_theta: usize,
    pub phi_min: f64,
    pub phi_max: f64,
    pub n_phi: usize,
}

impl SphericalBinSpec {
    pub fn new(theta: (f64, f64), n_theta: usize, phi: (f64, f64), n_phi: usize) -> Result<Self> {
        let s = SphericalBinSpec {
            theta_min: theta.0,
            theta_max: theta.1,
            n_theta,
            phi_min: phi.0,
            phi_max: phi.1,
            n_phi,
        };
        s.validate()?;
        Ok(s)
    }

    /// `beams` elevation bins over [−24.9°, +2.0°] and azimuth bins of
    /// `phi_res_deg` over the ±45° frontal view.
    pub fn lidar_beams(beams: usize, phi_res_deg: f64) -> Result<Self> {
        if !(phi_res_deg.is_finite() && phi_res_deg > 0.0) {
            return Err(Error::InvalidBinSpec(format!("azimuth resolution {phi_res_deg}°")));
        }
        let half_fov = 45.0f64;
        let n_phi = (2.0 * half_fov / phi_res_deg).round().max(1.0) as usize;
        Self::new(
            ((-24.9f64).to_radians(), 2.0f64.to_radians()),
            beams,
            ((-half_fov).to_radians(), half_fov.to_radians()),
            n_phi,
        )
    }

    /// 64 beams at 0.18° azimuth resolution.
    pub fn default_64_beam() -> Self {
        Self::lidar_beams(64, DEFAULT_PHI_RES_DEG).expect("valid defaults")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_theta == 0 || self.n_phi == 0 {
            return Err(Error::InvalidBinSpec("bin counts must be ≥ 1".into()));
        }
        if !(self.theta_max > self.theta_min && self.phi_max > self.phi_min) {
            return Err(Error::InvalidBinSpec("each axis needs max > min".into()));
        }
        if ![self.theta_min, self.theta_max, self.phi_min, self.phi_max]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidBinSpec("extents must be finite".into()));
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        self.n_theta * self.n_phi
    }

    fn theta_step(&self) -> f64 {
        (self.theta_max - self.theta_min) / self.n_theta as f64
    }

    fn phi_step(&self) -> f64 {
        (self.phi_max - self.phi_min) / self.n_phi as f64
    }

    /// Bin of an angle pair; `None` outside the extents. The upper edges belong
    /// to the last bin.
    pub fn bin_of(&self, theta: f64, phi: f64) -> Option<AngularBin> {
        if !(theta >= self.theta_min && theta <= self.theta_max && phi >= self.phi_min && phi <= self.phi_max) {
            return None;
        }
        let t = (((theta - self.theta_min) / self.theta_step()) as usize).min(self.n_theta - 1);
        let p = (((phi - self.phi_min) / self.phi_step()) as usize).min(self.n_phi - 1);
        Some(AngularBin { theta: t, phi: p })
    }

    pub fn center(&self, bin: AngularBin) -> (f64, f64) {
        (
            self.theta_min + (bin.theta as f64 + 0.5) * self.theta_step(),
            self.phi_min + (bin.phi as f64 + 0.5) * self.phi_step(),
        )
    }
}

pub const DEFAULT_PHI_RES_DEG: f64 = 0.18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AngularBin {
    pub theta: usize,
    pub phi: usize,
}

/// Indices of the input points that survive a subsampling step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeepMap {
    /// Ascending, unique.
    pub kept: Vec<usize>,
    /// Angular bin of each kept point; `None` for pure filters.
    pub bin_of_kept: Option<Vec<AngularBin>>,
}

impl KeepMap {
    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// Chain `inner`, computed on the cloud selected by `self`, back to the
    /// original indexing.
    pub fn then(&self, inner: &KeepMap) -> Result<KeepMap> {
        let kept = inner
            .kept
            .iter()
            .map(|&i| {
                self.kept.get(i).copied().ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: self.kept.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KeepMap {
            kept,
            bin_of_kept: inner.bin_of_kept.clone(),
        })
    }
}

/// Keep points no more than `y_limit` meters above the camera (y points down).
pub fn filter_height(cloud: &ProvenancedCloud, y_limit: f64) -> KeepMap {
    KeepMap {
        kept: cloud
            .points()
            .iter()
            .enumerate()
            .filter(|(_, p)| p[1] >= -y_limit)
            .map(|(i, _)| i)
            .collect(),
        bin_of_kept: None,
    }
}

pub fn angular_sparsify(cloud: &ProvenancedCloud, spec: &SphericalBinSpec) -> Result<KeepMap> {
    angular_sparsify_with(cloud, spec, Exec::default())
}

/// At most one point per angular bin: the one closest to the bin center in
/// (θ, φ), ties going to the smaller range and then the smaller index.
/// Points outside the angular extents, or at the origin, are dropped.
pub fn angular_sparsify_with(cloud: &ProvenancedCloud, spec: &SphericalBinSpec, exec: Exec) -> Result<KeepMap> {
    spec.validate()?;
    let binned = exec::map_range(exec, cloud.len(), |i| {
        let s = Spherical::from_cartesian(cloud.points()[i])?;
        let bin = spec.bin_of(s.theta, s.phi)?;
        let (tc, pc) = spec.center(bin);
        let d2 = (s.theta - tc).powi(2) + (s.phi - pc).powi(2);
        Some(Candidate {
            bin,
            d2,
            r: s.r,
            index: i,
        })
    });
    let mut candidates: Vec<Candidate> = binned.into_iter().flatten().collect();
    exec::sort_unique_by(exec, &mut candidates, Candidate::cmp);

    let mut winners: Vec<(usize, AngularBin)> = Vec::new();
    let mut last = None;
    for c in &candidates {
        if last != Some(c.bin) {
            winners.push((c.index, c.bin));
            last = Some(c.bin);
        }
    }
    winners.sort_unstable_by_key(|w| w.0);
    Ok(KeepMap {
        kept: winners.iter().map(|w| w.0).collect(),
        bin_of_kept: Some(winners.iter().map(|w| w.1).collect()),
    })
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    bin: AngularBin,
    d2: f64,
    r: f64,
    index: usize,
}

impl Candidate {
    fn cmp(a: &Candidate, b: &Candidate) -> Ordering {
        a.bin
            .cmp(&b.bin)
            .then(a.d2.total_cmp(&b.d2))
            .then(a.r.total_cmp(&b.r))
            .then(a.index.cmp(&b.index))
    }
}

/// Height filter followed by angular sparsification, with indices mapped
/// back to `cloud`.
pub fn sparsify(cloud: &ProvenancedCloud, y_limit: f64, spec: &SphericalBinSpec) -> Result<KeepMap> {
    let tall = filter_height(cloud, y_limit);
    let sub = cloud.select(&tall.kept)?;
    tall.then(&angular_sparsify(&sub, spec)?)
}

/// Gradient of the full cloud from gradients on the kept points.
pub fn scatter_grads(keep: &KeepMap, kept_grads: &PointGrad, n_input: usize) -> Result<PointGrad> {
    if kept_grads.len() != keep.kept.len() {
        return Err(Error::LengthMismatch {
            expected: keep.kept.len(),
            actual: kept_grads.len(),
        });
    }
    let mut out = PointGrad::zeros(n_input);
    for (&i, g) in keep.kept.iter().zip(kept_grads.as_slice()) {
        if i >= n_input {
            return Err(Error::IndexOutOfRange { index: i, len: n_input });
        }
        out.0[i] = *g;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::Pixel;

    fn cloud(points: Vec<[f64; 3]>) -> ProvenancedCloud {
        let src = (0..points.len() as u32).map(|i| Pixel::new(i, 0)).collect();
        ProvenancedCloud::new(points, src).unwrap()
    }

    fn one_bin() -> SphericalBinSpec {
        SphericalBinSpec::new((-0.5, 0.5), 1, (-0.5, 0.5), 1).unwrap()
    }

    #[test]
    fn height_threshold() {
        let c = cloud(vec![[0.0, -0.5, 5.0], [0.0, -1.5, 5.0], [0.0, 2.0, 5.0]]);
        assert_eq!(filter_height(&c, 1.0).kept, vec![0, 2]);
        assert_eq!(filter_height(&c, f64::INFINITY).kept, vec![0, 1, 2]);
        assert!(filter_height(&cloud(vec![]), 1.0).is_empty());
    }

    #[test]
    fn collinear_points_collapse_to_nearest() {
        let dir = [0.1f64, -0.05, 1.0];
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let pts: Vec<[f64; 3]> = [9.0, 2.0, 5.0]
            .iter()
            .map(|r| [dir[0] / n * r, dir[1] / n * r, dir[2] / n * r])
            .collect();
        let keep = angular_sparsify(&cloud(pts), &one_bin()).unwrap();
        assert_eq!(keep.kept, vec![1]);
    }

    #[test]
    fn different_azimuth_bins_are_both_kept() {
        let spec = SphericalBinSpec::new((-0.5, 0.5), 1, (-0.5, 0.5), 2).unwrap();
        let keep = angular_sparsify(&cloud(vec![[1.0, 0.0, 5.0], [-1.0, 0.0, 5.0]]), &spec).unwrap();
        assert_eq!(keep.kept, vec![0, 1]);
        assert_eq!(keep.bin_of_kept.unwrap().len(), 2);
    }

    #[test]
    fn closest_to_center_wins() {
        // bin center is (0, 0); the second point is nearer in angle despite larger range
        let keep = angular_sparsify(&cloud(vec![[0.2, 0.0, 1.0], [0.1, 0.0, 5.0]]), &one_bin()).unwrap();
        assert_eq!(keep.kept, vec![1]);
    }

    #[test]
    fn out_of_extent_and_origin_points_dropped() {
        let keep = angular_sparsify(
            &cloud(vec![[0.0, 0.0, 0.0], [5.0, 0.0, 1.0], [0.0, 0.0, 1.0]]),
            &one_bin(),
        )
        .unwrap();
        assert_eq!(keep.kept, vec![2]);
    }

    #[test]
    fn scatter_semantics() {
        let keep = KeepMap {
            kept: vec![2],
            bin_of_kept: None,
        };
        let g = scatter_grads(&keep, &PointGrad(vec![[1.0, 2.0, 3.0]]), 4).unwrap();
        assert_eq!(g.0, vec![[0.0; 3], [0.0; 3], [1.0, 2.0, 3.0], [0.0; 3]]);
        let z = scatter_grads(&KeepMap::default(), &PointGrad::default(), 3).unwrap();
        assert_eq!(z, PointGrad::zeros(3));
        assert!(matches!(
            scatter_grads(&keep, &PointGrad(vec![[0.0; 3]]), 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(matches!(
            scatter_grads(&keep, &PointGrad::default(), 4),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn chained_maps_index_the_original_cloud() {
        let c = cloud(vec![[0.0, -3.0, 5.0], [0.01, 0.0, 5.0], [0.0, 0.0, 4.0]]);
        let keep = sparsify(&c, 1.0, &one_bin()).unwrap();
        assert_eq!(keep.kept, vec![2]);
    }

    #[test]
    fn spec_validation() {
        assert!(SphericalBinSpec::new((0.0, 0.0), 1, (0.0, 1.0), 1).is_err());
        assert!(SphericalBinSpec::new((0.0, 1.0), 0, (0.0, 1.0), 1).is_err());
        let d = SphericalBinSpec::default_64_beam();
        assert_eq!(d.n_theta, 64);
        assert_eq!(d.n_phi, 500);
    }
}
