use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

/// Differentiable change of representation for pseudo-LiDAR pipelines.
#[derive(Parser, Debug)]
#[command(name = "plcor", version)]
struct Cli {
    /// `key = value` file supplying defaults for any flag; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Back-project a 16-bit depth PNG into a camera-frame point cloud.
    Project(ProjectArgs),
    /// Voxelize a point cloud into a hard or soft occupancy tensor.
    Voxelize(VoxelizeArgs),
    /// Height filter and beam-like angular subsampling of a point cloud.
    Sparsify(SparsifyArgs),
    /// Render a sparse ground-truth depth PNG from a velodyne sweep.
    Gtdepth(GtdepthArgs),
    /// Check chained gradients against central differences on random scenes.
    Gradcheck(GradcheckArgs),
    /// Gradient-descent depth correction through the soft-quantized path.
    #[command(name = "demo-e2e")]
    DemoE2e(DemoArgs),
    /// Gradient coverage per loss as `loss_name,ratio,mean,sum` rows.
    Stats(StatsArgs),
    /// Time hard and soft voxelization on the full-size grid.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// Depth map (16-bit PNG, value/256 = meters, 0 = invalid).
    #[arg(long)]
    depth: PathBuf,
    /// KITTI calibration file; the KITTI left color camera otherwise.
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = CloudFormat::Bin)]
    format: CloudFormat,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CloudFormat {
    /// Velodyne-style little-endian f32 x, y, z, reflectance.
    Bin,
    /// Text lines `x y z u v` with the source pixel.
    Txt,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Hard,
    Soft,
}

#[derive(Args, Debug)]
struct VoxelizeArgs {
    /// Point cloud in velodyne format.
    #[arg(long)]
    input: PathBuf,
    /// Tensor dump destination.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Soft)]
    mode: Mode,
    /// RBF bandwidth σ² in m²; the grid's own value otherwise.
    #[arg(long)]
    sigma_sq: Option<f64>,
    /// `camera`, `lidar`, or `ox,oy,oz:bx,by,bz:nx,ny,nz`.
    #[arg(long, default_value = "camera", allow_hyphen_values = true)]
    grid: String,
    /// `cube26` or `none`.
    #[arg(long, default_value = "cube26")]
    neighborhood: String,
    /// Treat the input as LiDAR-frame and map it into the camera frame.
    #[arg(long)]
    calib: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SparsifyArgs {
    /// Camera-frame point cloud in velodyne format.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    beams: usize,
    /// Azimuth resolution in degrees.
    #[arg(long, default_value_t = plcor::sparsify::DEFAULT_PHI_RES_DEG)]
    phi_res: f64,
    /// Keep points at most this far above the camera, in meters.
    #[arg(long, default_value_t = plcor::sparsify::DEFAULT_Y_LIMIT, allow_hyphen_values = true)]
    y_limit: f64,
    /// Treat the input as LiDAR-frame and map it into the camera frame.
    #[arg(long)]
    calib: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GtdepthArgs {
    #[arg(long)]
    velodyne: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1242)]
    width: usize,
    #[arg(long, default_value_t = 375)]
    height: usize,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Central-difference step in meters.
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    /// Check at most this many pixels per scene, drawn at random.
    #[arg(long)]
    pixels: Option<usize>,
    #[arg(long, default_value_t = 20)]
    scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_depth: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_det: f64,
    /// Per-iteration CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Predicted depth PNG; a synthetic street scene when omitted.
    #[arg(long, requires_all = ["ground_truth", "calib"])]
    prediction: Option<PathBuf>,
    /// Sparse ground-truth depth PNG.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    beams: usize,
    #[arg(long, default_value_t = plcor::sparsify::DEFAULT_PHI_RES_DEG)]
    phi_res: f64,
    #[arg(long, default_value_t = plcor::sparsify::DEFAULT_Y_LIMIT, allow_hyphen_values = true)]
    y_limit: f64,
    /// CSV destination; stdout otherwise.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [75_000usize, 150_000, 300_000])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Run single-threaded.
    #[arg(long)]
    serial: bool,
}

/// Exit status for an error: 2 when any cause is an I/O failure, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some() || c.downcast_ref::<plcor::Error>().is_some_and(|e| e.is_io())
    });
    if io {
        2
    } else {
        1
    }
}

fn parse_cli() -> anyhow::Result<Result<Cli, clap::Error>> {
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let args = config::expand(&cmd, std::env::args().collect())?;
    Ok(cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)))
}

fn main() -> ExitCode {
    let cli = match parse_cli() {
        Ok(Ok(cli)) => cli,
        Ok(Err(e)) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
