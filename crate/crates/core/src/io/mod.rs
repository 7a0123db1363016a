//! KITTI-style file formats and ground-truth depth generation.
//!
//! | file | layout |
//! |------|--------|
//! | velodyne `.bin` | packed records of four little-endian `f32`: x, y, z, reflectance (16 bytes each, no header) |
//! | depth `.png` | single-channel 16-bit grayscale; depth in meters = raw / 256, raw 0 = no depth |
//! | calibration `.txt` | one `KEY: v1 v2 ...` entry per line; 3×4 matrices as 12 row-major floats |

mod calib;
mod depth_png;
mod gtdepth;
mod velodyne;

pub use calib::{parse_calibration, parse_calibration_str, Calibration, CalibrationOptions};
pub use depth_png::{
    decode_depth_raw, encode_depth_raw, read_depth_png, write_depth_png, DEPTH_SCALE, MAX_ENCODABLE_DEPTH,
};
pub use gtdepth::lidar_to_depth;
pub use velodyne::{decode_velodyne, encode_velodyne, read_velodyne, write_velodyne, LidarPoint, LidarSweep};
