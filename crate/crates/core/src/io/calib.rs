use std::path::Path;

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::io::velodyne::{LidarPoint, LidarSweep};

pub type Mat3x4 = [[f64; 4]; 3];
pub type Mat3 = [[f64; 3]; 3];

const IDENTITY_3X4: Mat3x4 = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
const IDENTITY_3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Clone, Debug)]
pub struct CalibrationOptions {
    pub projection_key: String,
    /// LiDAR→camera rigid transform; identity when the key is absent.
    pub extrinsic_key: String,
    /// Rectifying rotation applied after the extrinsic; identity when absent.
    pub rectification_key: String,
    pub image_width: usize,
    pub image_height: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            projection_key: "P2".into(),
            extrinsic_key: "Tr_velo_to_cam".into(),
            rectification_key: "R0_rect".into(),
            image_width: 1242,
            image_height: 375,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub camera: CameraModel,
    pub projection: Mat3x4,
    pub extrinsic: Mat3x4,
    pub rectification: Mat3,
}

impl Calibration {
    /// Map LiDAR-frame points into the (rectified) camera frame.
    pub fn lidar_to_camera(&self, sweep: &LidarSweep) -> LidarSweep {
        let t = &self.extrinsic;
        let r = &self.rectification;
        let points = sweep
            .points
            .iter()
            .map(|p| {
                let src = p.xyz();
                let mut cam = [0.0; 3];
                for (i, row) in t.iter().enumerate() {
                    cam[i] = row[0] * src[0] + row[1] * src[1] + row[2] * src[2] + row[3];
                }
                let mut rect = [0.0; 3];
                for (i, row) in r.iter().enumerate() {
                    rect[i] = row[0] * cam[0] + row[1] * cam[1] + row[2] * cam[2];
                }
                LidarPoint::new(rect[0] as f32, rect[1] as f32, rect[2] as f32, p.reflectance)
            })
            .collect();
        LidarSweep { points }
    }
}

pub fn parse_calibration(path: impl AsRef<Path>, opts: &CalibrationOptions) -> Result<Calibration> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration_str(&text, opts)
}

pub fn parse_calibration_str(text: &str, opts: &CalibrationOptions) -> Result<Calibration> {
    let projection =
        find_matrix::<12>(text, &opts.projection_key)?.ok_or_else(|| Error::MissingKey(opts.projection_key.clone()))?;
    let extrinsic = find_matrix::<12>(text, &opts.extrinsic_key)?;
    let rectification = find_matrix::<9>(text, &opts.rectification_key)?;

    let p = to_3x4(&projection);
    let camera = CameraModel::new(p[0][0], p[1][1], p[0][2], p[1][2], opts.image_width, opts.image_height)?;
    Ok(Calibration {
        camera,
        projection: p,
        extrinsic: extrinsic.as_ref().map(to_3x4).unwrap_or(IDENTITY_3X4),
        rectification: rectification
            .map(|v| [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
            .unwrap_or(IDENTITY_3),
    })
}

fn to_3x4(v: &[f64; 12]) -> Mat3x4 {
    [
        [v[0], v[1], v[2], v[3]],
        [v[4], v[5], v[6], v[7]],
        [v[8], v[9], v[10], v[11]],
    ]
}

/// Values of the first `key:` line, which must hold exactly `N` floats.
fn find_matrix<const N: usize>(text: &str, key: &str) -> Result<Option<[f64; N]>> {
    for (lineno, line) in text.lines().enumerate() {
        let Some((k, rest)) = line.split_once(':') else {
            continue;
        };
        if k.trim() != key {
            continue;
        }
        let line = lineno + 1;
        let values = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::CalibrationParse {
                    line,
                    message: format!("`{tok}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let values: [f64; N] = values.try_into().map_err(|v: Vec<f64>| Error::CalibrationParse {
            line,
            message: format!("`{key}` needs {N} values, found {}", v.len()),
        })?;
        return Ok(Some(values));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> CalibrationOptions {
        CalibrationOptions {
            image_width: 100,
            image_height: 80,
            ..Default::default()
        }
    }

    #[test]
    fn extracts_intrinsics() {
        let text = "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nP2: 100 0 50 0 0 100 40 0 0 0 1 0\n";
        let calib = parse_calibration_str(text, &opts()).unwrap();
        assert_eq!(
            calib.camera,
            CameraModel::new(100.0, 100.0, 50.0, 40.0, 100, 80).unwrap()
        );
        assert_eq!(calib.extrinsic, IDENTITY_3X4);
        assert_eq!(calib.rectification, IDENTITY_3);
    }

    #[test]
    fn configurable_key() {
        let text = "P0: 100 0 50 0 0 100 40 0 0 0 1 0\n";
        let o = CalibrationOptions {
            projection_key: "P0".into(),
            ..opts()
        };
        assert_eq!(parse_calibration_str(text, &o).unwrap().camera.cu, 50.0);
    }

    #[test]
    fn missing_key_is_named() {
        let err = parse_calibration_str("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n", &opts()).unwrap_err();
        assert!(matches!(&err, Error::MissingKey(k) if k == "P2"));
        assert!(err.to_string().contains("P2"));
    }

    #[test]
    fn malformed_float_reports_line() {
        let text = "P0: 1 0 0 0 0 1 0 0 0 0 1 0\n\nP2: 100 0 5x0 0 0 100 40 0 0 0 1 0\n";
        match parse_calibration_str(text, &opts()) {
            Err(Error::CalibrationParse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_value_count() {
        let text = "P2: 100 0 50 0 0 100 40 0 0 0 1\n";
        assert!(matches!(
            parse_calibration_str(text, &opts()),
            Err(Error::CalibrationParse { line: 1, .. })
        ));
    }

    #[test]
    fn extrinsic_and_rectification_are_applied() {
        // LiDAR x forward, y left, z up -> camera x right, y down, z forward, shifted 0.5 m.
        let text = "P2: 100 0 50 0 0 100 40 0 0 0 1 0\n\
                    R0_rect: 1 0 0 0 1 0 0 0 1\n\
                    Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0.5 1 0 0 0\n";
        let calib = parse_calibration_str(text, &opts()).unwrap();
        let sweep = LidarSweep::new(vec![LidarPoint::new(10.0, 2.0, 1.0, 0.3)]);
        let cam = calib.lidar_to_camera(&sweep);
        assert_eq!(cam.points[0], LidarPoint::new(-2.0, -0.5, 10.0, 0.3));
    }
}
