use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exec::Exec;
use crate::voxel::{hard_voxelize_with, soft_voxelize_with, voxelize_backward_with, GridSpec, TensorGrad};

/// Median wall time per call at one cloud size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub n_points: usize,
    pub hard: Duration,
    pub soft_forward: Duration,
    pub soft_backward: Duration,
}

impl BenchRow {
    pub fn soft_total(&self) -> Duration {
        self.soft_forward + self.soft_backward
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub exec: Exec,
    pub repetitions: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Largest soft forward+backward time ratio between consecutive rows,
    /// normalized to a doubling of the point count.
    pub fn max_doubling_ratio(&self) -> Option<f64> {
        self.rows
            .windows(2)
            .filter(|w| w[0].n_points > 0 && w[1].n_points > w[0].n_points)
            .map(|w| {
                let t = w[1].soft_total().as_secs_f64() / w[0].soft_total().as_secs_f64().max(1e-12);
                let growth = (w[1].n_points as f64 / w[0].n_points as f64).log2();
                t.powf(1.0 / growth)
            })
            .reduce(f64::max)
    }
}

/// Points drawn uniformly over the grid volume: the worst case for the
/// voxelizer, since nearly every point opens its own bin.
pub fn uniform_cloud(n: usize, grid: &GridSpec, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| std::array::from_fn(|a| grid.origin[a] + rng.gen::<f64>() * grid.bin_size[a] * grid.counts[a] as f64))
        .collect()
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v.get(v.len() / 2).copied().unwrap_or_default()
}

/// Time hard voxelization and soft forward and backward passes on uniform
/// clouds of each size. The backward pass receives a unit gradient on every
/// stored bin. One untimed warm-up round precedes the timed ones.
pub fn bench_voxelize(sizes: &[usize], grid: &GridSpec, repetitions: usize, exec: Exec) -> Result<BenchReport> {
    let reps = repetitions.max(1);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let pts = uniform_cloud(n, grid, n as u64);
        let (mut hard, mut fwd, mut bwd) = (Vec::new(), Vec::new(), Vec::new());
        for rep in 0..=reps {
            let t = Instant::now();
            std::hint::black_box(hard_voxelize_with(&pts, grid, exec)?);
            hard.push(t.elapsed());

            let t = Instant::now();
            let (tensor, map) = soft_voxelize_with(&pts, grid, exec)?;
            fwd.push(t.elapsed());

            let mut g = TensorGrad::new();
            for (bin, _) in tensor.entries() {
                g.insert(*bin, 1.0);
            }
            let t = Instant::now();
            std::hint::black_box(voxelize_backward_with(&map, &g, &pts, exec)?);
            bwd.push(t.elapsed());
            if rep == 0 {
                hard.clear();
                fwd.clear();
                bwd.clear();
            }
        }
        rows.push(BenchRow {
            n_points: n,
            hard: median(hard),
            soft_forward: median(fwd),
            soft_backward: median(bwd),
        });
    }
    Ok(BenchReport {
        exec,
        repetitions: reps,
        rows,
    })
}
