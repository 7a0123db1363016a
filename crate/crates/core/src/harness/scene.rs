//! Synthetic scenes with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::camera::CameraModel;
use crate::depth::{DepthImage, Pixel};
use crate::error::{Error, Result};
use crate::io::{lidar_to_depth, LidarPoint, LidarSweep};
use crate::losses::TargetOccupancy;
use crate::voxel::{GridSpec, Neighborhood};

/// Fronto-parallel boxes in front of a flat background.
#[derive(Clone, Debug)]
pub struct SceneSpec {
    pub camera: CameraModel,
    pub n_objects: usize,
    pub background_depth: f64,
    /// Object depths are drawn uniformly from this range.
    pub object_depth: (f64, f64),
    /// Object side lengths in pixels, drawn uniformly from this inclusive range.
    pub object_pixels: (usize, usize),
    /// Added to every object pixel of the initial estimate.
    pub object_bias: f64,
    /// Std. dev. of Gaussian noise added to every pixel of the initial estimate.
    pub noise_std: f64,
    pub seed: u64,
}

impl SceneSpec {
    fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let (lo, hi) = self.object_depth;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("object depth range ({lo}, {hi})")));
        }
        if !(self.background_depth > 0.0 && self.background_depth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "background depth {}",
                self.background_depth
            )));
        }
        let (a, b) = self.object_pixels;
        if a == 0 || a > b || b + 2 > self.camera.width.min(self.camera.height) {
            return Err(Error::InvalidArgument(format!("object size range ({a}, {b})")));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite() && self.object_bias.is_finite()) {
            return Err(Error::InvalidArgument(
                "noise and bias must be finite, noise ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Pixel rectangle `[u0, u1) × [v0, v1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub u0: usize,
    pub v0: usize,
    pub u1: usize,
    pub v1: usize,
}

impl Rect {
    pub fn contains(&self, u: usize, v: usize) -> bool {
        (self.u0..self.u1).contains(&u) && (self.v0..self.v1).contains(&v)
    }

    /// True when the rectangles overlap or touch, including diagonally.
    fn touches(&self, o: &Rect) -> bool {
        self.u0 <= o.u1 && o.u0 <= self.u1 && self.v0 <= o.v1 && o.v0 <= self.v1
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub camera: CameraModel,
    pub truth: DepthImage,
    pub initial: DepthImage,
    /// Every pixel of `truth` back-projected, stored as f32 like a sensor file.
    pub sweep: LidarSweep,
    pub objects: Vec<Rect>,
    /// Row-major, true on object pixels.
    pub object_mask: Vec<bool>,
}

impl Scene {
    pub fn object_pixels(&self) -> Vec<Pixel> {
        self.pixels_where(true)
    }

    pub fn background_pixels(&self) -> Vec<Pixel> {
        self.pixels_where(false)
    }

    fn pixels_where(&self, on_object: bool) -> Vec<Pixel> {
        let w = self.camera.width;
        self.object_mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == on_object)
            .map(|(i, _)| Pixel::new((i % w) as u32, (i / w) as u32))
            .collect()
    }
}

/// Piecewise-constant ground truth, a biased and noisy initial estimate, and
/// the sweep obtained by back-projecting the ground truth.
///
/// Objects never touch each other, so `n_objects` boxes give exactly that many
/// 8-connected foreground components. With zero noise and zero bias the
/// initial estimate equals the ground truth.
pub fn synth_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let cam = spec.camera;
    let (w, h) = (cam.width, cam.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut objects: Vec<Rect> = Vec::with_capacity(spec.n_objects);
    let mut depths = Vec::with_capacity(spec.n_objects);
    for _ in 0..spec.n_objects {
        let mut placed = None;
        for _ in 0..10_000 {
            let sw = rng.gen_range(spec.object_pixels.0..=spec.object_pixels.1);
            let sh = rng.gen_range(spec.object_pixels.0..=spec.object_pixels.1);
            let u0 = rng.gen_range(1..w - sw);
            let v0 = rng.gen_range(1..h - sh);
            let r = Rect {
                u0,
                v0,
                u1: u0 + sw,
                v1: v0 + sh,
            };
            if objects.iter().all(|o| !o.touches(&r)) {
                placed = Some(r);
                break;
            }
        }
        let r = placed.ok_or_else(|| Error::InvalidArgument(format!("cannot fit {} objects", spec.n_objects)))?;
        objects.push(r);
        depths.push(rng.gen_range(spec.object_depth.0..=spec.object_depth.1));
    }

    let mut truth = vec![spec.background_depth; w * h];
    let mut mask = vec![false; w * h];
    for (r, &z) in objects.iter().zip(&depths) {
        for v in r.v0..r.v1 {
            for u in r.u0..r.u1 {
                truth[v * w + u] = z;
                mask[v * w + u] = true;
            }
        }
    }

    let noise = Normal::new(0.0, spec.noise_std).expect("validated std");
    let initial: Vec<f64> = truth
        .iter()
        .zip(&mask)
        .map(|(&z, &m)| {
            let bias = if m { spec.object_bias } else { 0.0 };
            let n = if spec.noise_std > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            (z + bias + n).max(1e-3)
        })
        .collect();

    let sweep = LidarSweep::new(
        (0..w * h)
            .map(|i| {
                let p = cam.back_project((i % w) as f64, (i / w) as f64, truth[i]);
                LidarPoint::new(p[0] as f32, p[1] as f32, p[2] as f32, 0.5)
            })
            .collect(),
    );

    Ok(Scene {
        camera: cam,
        truth: DepthImage::from_values(w, h, truth)?,
        initial: DepthImage::from_values(w, h, initial)?,
        sweep,
        objects,
        object_mask: mask,
    })
}

/// Grid used by the correction demo: 20 × 8 × 20 bins of 0.5 m in the camera
/// frame, x ∈ [−5, 5], y ∈ [−2, 2], z ∈ [2, 12), with σ equal to one bin as
/// in the full-size grid.
pub fn demo_grid() -> GridSpec {
    GridSpec {
        origin: [-5.0, -2.0, 2.0],
        bin_size: [0.5, 0.5, 0.5],
        counts: [20, 8, 20],
        sigma_sq: 0.25,
        neighborhood: Neighborhood::Cube26,
    }
}

/// The standard demo: a 64 × 48 image, one box 6.25 m away in front of a wall
/// at 10.25 m, the box's initial depth pushed 1.5 m too far and every pixel
/// jittered by 5 cm. The target is the occupancy of the true sweep. Both
/// surfaces sit mid-bin so the jitter alone does not flip bin membership.
pub fn demo_scene() -> (Scene, GridSpec, TargetOccupancy) {
    let spec = SceneSpec {
        camera: CameraModel::new(60.0, 60.0, 31.5, 23.5, 64, 48).expect("valid camera"),
        n_objects: 1,
        background_depth: 10.25,
        object_depth: (6.25, 6.25),
        object_pixels: (14, 18),
        object_bias: 1.5,
        noise_std: 0.05,
        seed: 7,
    };
    let scene = synth_scene(&spec).expect("demo spec is valid");
    let grid = demo_grid();
    let pts: Vec<[f64; 3]> = scene.sweep.points.iter().map(|p| p.xyz()).collect();
    let target = TargetOccupancy::from_points(&pts, &grid).expect("valid grid");
    (scene, grid, target)
}

/// A small randomized problem for checking the full chain's gradient.
#[derive(Clone, Debug)]
pub struct GradcheckScene {
    pub camera: CameraModel,
    pub depth: DepthImage,
    pub grid: GridSpec,
    pub target: TargetOccupancy,
}

/// Minimum distance from any point to a bin face. Bin membership is
/// discontinuous across faces, so a finite-difference step must never cross
/// one.
pub const GRADCHECK_FACE_MARGIN: f64 = 1e-4;

/// An 8 × 8 depth map viewing a 5 × 5 × 3 grid of 0.1 m bins (σ² = 0.01) at
/// 2.0-2.3 m, with depths drawn so that no point sits within
/// [`GRADCHECK_FACE_MARGIN`] of a bin face. The target occupancy comes from an
/// independently jittered copy of the cloud, so both push and pull terms
/// appear.
pub fn gradcheck_scene(seed: u64) -> GradcheckScene {
    let cam = CameraModel::new(40.0, 40.0, 3.5, 3.5, 8, 8).expect("valid camera");
    let grid = GridSpec {
        origin: [-0.25, -0.25, 2.0],
        bin_size: [0.1, 0.1, 0.1],
        counts: [5, 5, 3],
        sigma_sq: 0.01,
        neighborhood: Neighborhood::Cube26,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clear = |p: [f64; 3]| {
        (0..3).all(|a| {
            let t = (p[a] - grid.origin[a]) / grid.bin_size[a];
            let frac = (t - t.round()).abs() * grid.bin_size[a];
            frac >= GRADCHECK_FACE_MARGIN
        })
    };
    let mut values = Vec::with_capacity(64);
    for v in 0..8 {
        for u in 0..8 {
            let z = loop {
                let z: f64 = rng.gen_range(2.0..2.3);
                if clear(cam.back_project(u as f64, v as f64, z)) {
                    break z;
                }
            };
            values.push(z);
        }
    }
    let depth = DepthImage::from_values(8, 8, values).expect("positive depths");
    let jittered: Vec<[f64; 3]> = depth
        .valid_pixels()
        .map(|px| {
            let z = depth.get(px.u as usize, px.v as usize).unwrap() + rng.gen_range(-0.15..0.15);
            cam.back_project(px.u as f64, px.v as f64, z)
        })
        .collect();
    let target = TargetOccupancy::from_points(&jittered, &grid).expect("valid grid");
    GradcheckScene {
        camera: cam,
        depth,
        grid,
        target,
    }
}

/// A street seen by a KITTI-like camera: ground plane, building fronts on
/// both sides, parked cars. Depth is ray-cast per pixel; the sparse ground
/// truth comes from ray-casting a 64-beam scanner co-located with the camera.
#[derive(Clone, Debug)]
pub struct RoadSceneSpec {
    pub camera: CameraModel,
    pub camera_height: f64,
    /// Lateral distance of the building fronts.
    pub street_half_width: f64,
    pub building_height: f64,
    pub n_cars: usize,
    /// Rays that hit nothing closer than this stay invalid.
    pub max_depth: f64,
    /// Relative std. dev. of the predicted depth error.
    pub depth_noise_rel: f64,
    pub lidar_beams: usize,
    pub lidar_elevation_deg: (f64, f64),
    pub lidar_azimuth_res_deg: f64,
    pub seed: u64,
}

impl Default for RoadSceneSpec {
    fn default() -> Self {
        RoadSceneSpec {
            camera: CameraModel::kitti(),
            camera_height: 1.65,
            street_half_width: 9.0,
            building_height: 3.0,
            n_cars: 8,
            max_depth: 80.0,
            depth_noise_rel: 0.03,
            lidar_beams: 64,
            lidar_elevation_deg: (-24.9, 2.0),
            lidar_azimuth_res_deg: 0.18,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RoadScene {
    pub camera: CameraModel,
    /// Noise-free ray-cast depth.
    pub truth: DepthImage,
    /// `truth` with multiplicative noise, standing in for a network's estimate.
    pub prediction: DepthImage,
    /// Sparse ground truth rendered from `sweep`, restricted to pixels that
    /// have a prediction.
    pub lidar_depth: DepthImage,
    pub sweep: LidarSweep,
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Aabb {
    #[allow(clippy::needless_range_loop)]
    fn hit(&self, d: [f64; 3]) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for a in 0..3 {
            if d[a] == 0.0 {
                if !(self.lo[a] <= 0.0 && 0.0 <= self.hi[a]) {
                    return None;
                }
                continue;
            }
            let (mut ta, mut tb) = (self.lo[a] / d[a], self.hi[a] / d[a]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}

struct Street {
    ground_y: f64,
    half_width: f64,
    roof_y: f64,
    cars: Vec<Aabb>,
    max_t: f64,
}

impl Street {
    /// Ray parameter of the nearest hit along `d` from the origin.
    fn cast(&self, d: [f64; 3]) -> Option<f64> {
        let mut best = f64::INFINITY;
        if d[1] > 0.0 {
            best = best.min(self.ground_y / d[1]);
        }
        if d[0] != 0.0 {
            let t = self.half_width / d[0].abs();
            let y = t * d[1];
            if y >= self.roof_y && y <= self.ground_y {
                best = best.min(t);
            }
        }
        for c in &self.cars {
            if let Some(t) = c.hit(d) {
                best = best.min(t);
            }
        }
        (best * norm(d) <= self.max_t).then_some(best)
    }
}

fn norm(d: [f64; 3]) -> f64 {
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

// negated comparisons also reject NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn road_scene(spec: &RoadSceneSpec) -> Result<RoadScene> {
    let cam = spec.camera;
    cam.validate()?;
    if spec.lidar_beams == 0 || !(spec.lidar_azimuth_res_deg > 0.0) || !(spec.max_depth > 0.0) {
        return Err(Error::InvalidArgument(
            "road scene needs beams, azimuth step and range".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cars: Vec<Aabb> = Vec::new();
    let lane = spec.street_half_width - 1.2;
    while cars.len() < spec.n_cars {
        let x = rng.gen_range(-lane..lane);
        let z = rng.gen_range(6.0..45.0);
        let c = Aabb {
            lo: [x - 0.8, spec.camera_height - 1.5, z],
            hi: [x + 0.8, spec.camera_height, z + 3.9],
        };
        let clear = cars.iter().all(|o| {
            c.lo[0] > o.hi[0] + 0.5 || o.lo[0] > c.hi[0] + 0.5 || c.lo[2] > o.hi[2] + 1.0 || o.lo[2] > c.hi[2] + 1.0
        });
        // keep the camera's own lane free
        if clear && (x.abs() > 1.6) {
            cars.push(c);
        }
    }
    let street = Street {
        ground_y: spec.camera_height,
        half_width: spec.street_half_width,
        roof_y: spec.camera_height - spec.building_height,
        cars,
        max_t: spec.max_depth,
    };

    let (w, h) = (cam.width, cam.height);
    let truth: Vec<f64> = (0..w * h)
        .map(|i| {
            let (u, v) = ((i % w) as f64, (i / w) as f64);
            let d = [(u - cam.cu) / cam.fu, (v - cam.cv) / cam.fv, 1.0];
            street.cast(d).unwrap_or(0.0)
        })
        .collect();
    let noise =
        Normal::new(0.0, spec.depth_noise_rel).map_err(|e| Error::InvalidArgument(format!("depth noise: {e}")))?;
    let prediction: Vec<f64> = truth
        .iter()
        .map(|&z| {
            if z > 0.0 {
                z * (1.0 + noise.sample(&mut rng)).max(0.05)
            } else {
                0.0
            }
        })
        .collect();

    let (e0, e1) = spec.lidar_elevation_deg;
    let n_az = (90.0 / spec.lidar_azimuth_res_deg).round() as usize;
    let mut points = Vec::new();
    for b in 0..spec.lidar_beams {
        let el = if spec.lidar_beams == 1 {
            e0
        } else {
            e0 + (e1 - e0) * b as f64 / (spec.lidar_beams - 1) as f64
        }
        .to_radians();
        for a in 0..n_az {
            let az = (-45.0 + (a as f64 + 0.5) * spec.lidar_azimuth_res_deg).to_radians();
            let d = [el.cos() * az.sin(), -el.sin(), el.cos() * az.cos()];
            if let Some(t) = street.cast(d) {
                points.push(LidarPoint::new(
                    (t * d[0]) as f32,
                    (t * d[1]) as f32,
                    (t * d[2]) as f32,
                    0.3,
                ));
            }
        }
    }
    let sweep = LidarSweep::new(points);
    let mut lidar_depth = lidar_to_depth(&sweep, &cam);
    for v in 0..h {
        for u in 0..w {
            if truth[v * w + u] <= 0.0 {
                lidar_depth.invalidate(u, v);
            }
        }
    }
    Ok(RoadScene {
        camera: cam,
        truth: DepthImage::from_values(w, h, truth)?,
        prediction: DepthImage::from_values(w, h, prediction)?,
        lidar_depth,
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_objects: usize, noise: f64, bias: f64) -> SceneSpec {
        SceneSpec {
            camera: CameraModel::new(30.0, 30.0, 15.5, 11.5, 32, 24).unwrap(),
            n_objects,
            background_depth: 20.0,
            object_depth: (4.0, 8.0),
            object_pixels: (3, 6),
            object_bias: bias,
            noise_std: noise,
            seed: 3,
        }
    }

    fn components(mask: &[bool], w: usize, h: usize) -> usize {
        let mut seen = vec![false; mask.len()];
        let mut count = 0;
        for s in 0..mask.len() {
            if !mask[s] || seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(i) = stack.pop() {
                let (u, v) = ((i % w) as i64, (i / w) as i64);
                for dv in -1..=1 {
                    for du in -1..=1 {
                        let (x, y) = (u + du, v + dv);
                        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                            continue;
                        }
                        let j = y as usize * w + x as usize;
                        if mask[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn zero_noise_initial_equals_truth() {
        let s = synth_scene(&small(3, 0.0, 0.0)).unwrap();
        assert_eq!(s.initial, s.truth);
    }

    #[test]
    fn object_count_is_component_count() {
        for n in 0..5 {
            let s = synth_scene(&small(n, 0.1, 1.0)).unwrap();
            assert_eq!(components(&s.object_mask, 32, 24), n);
            // depth discontinuities agree with the mask
            let fg: Vec<bool> = s.truth.values().iter().map(|&z| z != 20.0).collect();
            assert_eq!(fg, s.object_mask);
        }
    }

    #[test]
    fn sweep_reproduces_truth() {
        let s = synth_scene(&small(2, 0.05, 1.0)).unwrap();
        let back = lidar_to_depth(&s.sweep, &s.camera);
        for i in 0..back.len() {
            assert!(back.is_valid(i));
            assert!((back.depth_at(i) - s.truth.depth_at(i)).abs() <= 1.0 / 512.0);
        }
    }

    #[test]
    fn bias_lands_on_objects_only() {
        let s = synth_scene(&small(2, 0.0, 1.5)).unwrap();
        for i in 0..s.truth.len() {
            let d = s.initial.depth_at(i) - s.truth.depth_at(i);
            assert_eq!(d, if s.object_mask[i] { 1.5 } else { 0.0 });
        }
    }

    #[test]
    fn too_many_objects_is_an_error() {
        let mut spec = small(200, 0.0, 0.0);
        spec.object_pixels = (6, 6);
        assert!(synth_scene(&spec).is_err());
    }

    #[test]
    fn gradcheck_scene_keeps_clear_of_faces() {
        for seed in 0..5 {
            let g = gradcheck_scene(seed);
            assert_eq!(g.depth.valid_count(), 64);
            assert!(!g.target.is_empty());
        }
    }

    #[test]
    fn ray_box_intersection() {
        let b = Aabb {
            lo: [-1.0, -1.0, 4.0],
            hi: [1.0, 1.0, 6.0],
        };
        assert_eq!(b.hit([0.0, 0.0, 1.0]), Some(4.0));
        assert_eq!(b.hit([1.0, 0.0, 0.0]), None);
        assert_eq!(b.hit([0.0, 0.0, -1.0]), None);
    }
}
