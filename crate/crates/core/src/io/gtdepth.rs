use crate::camera::CameraModel;
use crate::depth::DepthImage;
use crate::io::velodyne::LidarSweep;

/// Render a sparse ground-truth depth map from a camera-frame sweep.
///
/// Each point with `z > 0` lands on the pixel nearest its projection; when
/// several points share a pixel the smallest depth wins. Points behind the
/// camera or outside the frame are skipped.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn lidar_to_depth(sweep: &LidarSweep, cam: &CameraModel) -> DepthImage {
    let (w, h) = (cam.width, cam.height);
    let mut best = vec![f64::INFINITY; w * h];
    for p in &sweep.points {
        let xyz = p.xyz();
        if !(xyz[2] > 0.0) {
            continue;
        }
        let (u, v) = cam.project(xyz);
        let (u, v) = (u.round(), v.round());
        if !(u >= 0.0 && v >= 0.0 && u < w as f64 && v < h as f64) {
            continue;
        }
        let i = v as usize * w + u as usize;
        if xyz[2] < best[i] {
            best[i] = xyz[2];
        }
    }
    let values = best.into_iter().map(|z| if z.is_finite() { z } else { 0.0 }).collect();
    DepthImage::from_values(w, h, values).expect("buffer sized from camera")
}
