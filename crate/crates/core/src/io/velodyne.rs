use std::path::Path;

use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub reflectance: f32,
}

impl LidarPoint {
    pub fn new(x: f32, y: f32, z: f32, reflectance: f32) -> Self {
        LidarPoint { x, y, z, reflectance }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }

    fn check(&self, index: usize) -> Result<()> {
        let fields = [
            ("x", self.x),
            ("y", self.y),
            ("z", self.z),
            ("reflectance", self.reflectance),
        ];
        if let Some((name, value)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("{name} is {value}"),
            });
        }
        if !(0.0..=1.0).contains(&self.reflectance) {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("reflectance {} outside [0, 1]", self.reflectance),
            });
        }
        Ok(())
    }
}

/// One LiDAR sweep: finite coordinates in meters, reflectance in `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LidarSweep {
    pub points: Vec<LidarPoint>,
}

impl LidarSweep {
    pub fn new(points: Vec<LidarPoint>) -> Self {
        LidarSweep { points }
    }

    /// Geometry-only sweep with zero reflectance.
    pub fn from_xyz<I: IntoIterator<Item = [f64; 3]>>(points: I) -> Self {
        LidarSweep {
            points: points
                .into_iter()
                .map(|p| LidarPoint::new(p[0] as f32, p[1] as f32, p[2] as f32, 0.0))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.points.iter().enumerate().try_for_each(|(i, p)| p.check(i))
    }
}

pub fn decode_velodyne(bytes: &[u8]) -> Result<LidarSweep> {
    let rem = bytes.len() % RECORD_BYTES;
    if rem != 0 {
        return Err(Error::TruncatedVelodyne {
            len: bytes.len() as u64,
            offset: (bytes.len() - rem) as u64,
        });
    }
    let points = bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
            let p = LidarPoint::new(f(0), f(1), f(2), f(3));
            p.check(i).map(|_| p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LidarSweep { points })
}

pub fn encode_velodyne(sweep: &LidarSweep) -> Result<Vec<u8>> {
    sweep.validate()?;
    let mut out = Vec::with_capacity(sweep.len() * RECORD_BYTES);
    for p in &sweep.points {
        for v in [p.x, p.y, p.z, p.reflectance] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_velodyne(path: impl AsRef<Path>) -> Result<LidarSweep> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_velodyne(&bytes)
}

/// Validates every record before touching the filesystem.
pub fn write_velodyne(sweep: &LidarSweep, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_velodyne(sweep)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
