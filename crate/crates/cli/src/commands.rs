use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use plcor::camera::CameraModel;
use plcor::depth::{DepthImage, Pixel};
use plcor::exec::Exec;
use plcor::harness::{
    bench_voxelize, demo_scene, finite_diff_check, gradcheck_scene, optimize_depth, rmse, road_scene, OptimizeConfig,
    QuantizedPath, RoadSceneSpec, SparsifiedPath, VoxelizedPointLoss,
};
use plcor::io::{
    lidar_to_depth, parse_calibration, read_depth_png, read_velodyne, write_depth_png, write_velodyne,
    CalibrationOptions, LidarSweep,
};
use plcor::losses::{depth_loss, gradient_stats, LossWeights, OccupancySurrogate, TargetOccupancy, STATS_CSV_HEADER};
use plcor::projection::depth_to_points;
use plcor::sparsify::{sparsify, SphericalBinSpec};
use plcor::voxel::{hard_voxelize, soft_voxelize, write_tensor_dump, GridSpec, Neighborhood};

use crate::{
    BenchArgs, CloudFormat, Cmd, DemoArgs, GradcheckArgs, GtdepthArgs, Mode, ProjectArgs, SparsifyArgs, StatsArgs,
    VoxelizeArgs,
};

pub fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Project(a) => project(a),
        Cmd::Voxelize(a) => voxelize(a),
        Cmd::Sparsify(a) => sparsify_cmd(a),
        Cmd::Gtdepth(a) => gtdepth(a),
        Cmd::Gradcheck(a) => gradcheck(a),
        Cmd::DemoE2e(a) => demo(a),
        Cmd::Stats(a) => stats(a),
        Cmd::Bench(a) => bench(a),
    }
}

fn camera_for(calib: Option<&Path>, width: usize, height: usize) -> Result<CameraModel> {
    match calib {
        Some(p) => {
            let opts = CalibrationOptions {
                image_width: width,
                image_height: height,
                ..Default::default()
            };
            Ok(parse_calibration(p, &opts)?.camera)
        }
        None => {
            let k = CameraModel::kitti();
            Ok(CameraModel::new(k.fu, k.fv, k.cu, k.cv, width, height)?)
        }
    }
}

/// Points of a velodyne file, mapped into the camera frame when `calib` is given.
fn load_cloud(input: &Path, calib: Option<&Path>) -> Result<LidarSweep> {
    let sweep = read_velodyne(input)?;
    Ok(match calib {
        Some(p) => parse_calibration(p, &CalibrationOptions::default())?.lidar_to_camera(&sweep),
        None => sweep,
    })
}

fn parse_triple<T: std::str::FromStr>(s: &str, what: &str) -> Result<[T; 3]> {
    let v: Vec<T> = s
        .split(',')
        .map(|x| x.trim().parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| anyhow::anyhow!("bad {what} `{s}`"))?;
    v.try_into()
        .map_err(|_| anyhow::anyhow!("{what} needs three values, got `{s}`"))
}

fn parse_grid(spec: &str, sigma_sq: Option<f64>, neighborhood: &str) -> Result<GridSpec> {
    let mut grid = match spec {
        "camera" => GridSpec::bev_camera(),
        "lidar" => GridSpec::bev_lidar(),
        custom => {
            let parts: Vec<&str> = custom.split(':').collect();
            let [o, b, n] = parts.as_slice() else {
                bail!("grid must be camera, lidar or ox,oy,oz:bx,by,bz:nx,ny,nz");
            };
            GridSpec::new(
                parse_triple(o, "grid origin")?,
                parse_triple(b, "bin size")?,
                parse_triple(n, "bin counts")?,
                0.01,
                Neighborhood::Cube26,
            )?
        }
    };
    if let Some(s) = sigma_sq {
        grid = grid.with_sigma_sq(s);
    }
    grid = grid.with_neighborhood(neighborhood.parse::<Neighborhood>()?);
    grid.validate()?;
    Ok(grid)
}

fn project(a: ProjectArgs) -> Result<()> {
    let depth = read_depth_png(&a.depth)?;
    let cam = camera_for(a.calib.as_deref(), depth.width(), depth.height())?;
    let cloud = depth_to_points(&depth, &cam)?;
    match a.format {
        CloudFormat::Bin => write_velodyne(&LidarSweep::from_xyz(cloud.points().iter().copied()), &a.output)?,
        CloudFormat::Txt => {
            let mut s = String::new();
            for (p, px) in cloud.points().iter().zip(cloud.source()) {
                writeln!(s, "{} {} {} {} {}", p[0], p[1], p[2], px.u, px.v)?;
            }
            std::fs::write(&a.output, s).with_context(|| format!("writing {}", a.output.display()))?;
        }
    }
    println!("{} points from {} valid pixels", cloud.len(), depth.valid_count());
    Ok(())
}

fn voxelize(a: VoxelizeArgs) -> Result<()> {
    let grid = parse_grid(&a.grid, a.sigma_sq, &a.neighborhood)?;
    let sweep = load_cloud(&a.input, a.calib.as_deref())?;
    let pts: Vec<[f64; 3]> = sweep.points.iter().map(|p| p.xyz()).collect();
    let tensor = match a.mode {
        Mode::Hard => hard_voxelize(&pts, &grid)?,
        Mode::Soft => soft_voxelize(&pts, &grid)?.0,
    };
    write_tensor_dump(&tensor, &a.output)?;
    let inside = pts.iter().filter(|&&p| grid.cell_of(p).is_some()).count();
    println!(
        "{} points, {} inside the grid, {} stored bins",
        pts.len(),
        inside,
        tensor.len()
    );
    Ok(())
}

fn sparsify_cmd(a: SparsifyArgs) -> Result<()> {
    let spec = SphericalBinSpec::lidar_beams(a.beams, a.phi_res)?;
    let sweep = load_cloud(&a.input, a.calib.as_deref())?;
    let pts: Vec<[f64; 3]> = sweep.points.iter().map(|p| p.xyz()).collect();
    let src = (0..pts.len()).map(|i| Pixel::new(i as u32, 0)).collect();
    let cloud = plcor::ProvenancedCloud::new(pts, src)?;
    let keep = sparsify(&cloud, a.y_limit, &spec)?;
    let kept = LidarSweep::new(keep.kept.iter().map(|&i| sweep.points[i]).collect());
    write_velodyne(&kept, &a.output)?;
    println!(
        "{} points in, {} kept ({} angular bins)",
        cloud.len(),
        kept.len(),
        spec.bin_count()
    );
    Ok(())
}

fn gtdepth(a: GtdepthArgs) -> Result<()> {
    let opts = CalibrationOptions {
        image_width: a.width,
        image_height: a.height,
        ..Default::default()
    };
    let calib = parse_calibration(&a.calib, &opts)?;
    let sweep = calib.lidar_to_camera(&read_velodyne(&a.velodyne)?);
    let depth = lidar_to_depth(&sweep, &calib.camera);
    write_depth_png(&depth, &a.output)?;
    println!(
        "{} of {} pixels have depth ({:.2}%)",
        depth.valid_count(),
        depth.len(),
        100.0 * depth.valid_count() as f64 / depth.len() as f64
    );
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    println!("scene,max_rel_error,worst_u,worst_v,analytic,numeric");
    let mut worst: f64 = 0.0;
    for s in 0..a.scenes {
        let seed = a.seed + s as u64;
        let scene = gradcheck_scene(seed);
        let path = QuantizedPath::new(
            scene.camera,
            VoxelizedPointLoss::new(
                scene.grid,
                OccupancySurrogate {
                    target: scene.target.clone(),
                },
            ),
        );
        let all: Vec<Pixel> = scene.depth.valid_pixels().collect();
        let subset: Option<Vec<Pixel>> = a.pixels.map(|n| {
            let step = (all.len() / n.max(1)).max(1);
            all.iter().copied().step_by(step).take(n).collect()
        });
        let r = finite_diff_check(
            |z| path.loss(z),
            |z| path.loss_and_grad(z).map(|x| x.1),
            &scene.depth,
            a.h,
            subset.as_deref(),
        )?;
        let px = r.worst_pixel.unwrap_or(Pixel::new(0, 0));
        println!(
            "{seed},{:e},{},{},{:e},{:e}",
            r.max_rel_error, px.u, px.v, r.analytic_at_worst, r.numeric_at_worst
        );
        worst = worst.max(r.max_rel_error);
    }
    if worst > a.tol {
        bail!("max relative error {worst:e} exceeds {:e}", a.tol);
    }
    println!("ok: max relative error {worst:e} ≤ {:e}", a.tol);
    Ok(())
}

fn demo(a: DemoArgs) -> Result<()> {
    let (scene, grid, target) = demo_scene();
    let cfg = OptimizeConfig {
        weights: LossWeights::new(a.lambda_depth, a.lambda_det)?,
        steps: a.steps,
        lr: a.lr,
        track: Some(scene.object_pixels()),
    };
    let trace = optimize_depth(&scene.initial, &target, &scene.camera, &grid, &scene.truth, &cfg)?;
    if let Some(p) = &a.trace {
        let mut s = String::from("iteration,total,det,depth,ratio,mean,sum,mean_distance\n");
        for (i, t) in trace.steps.iter().enumerate() {
            writeln!(
                s,
                "{i},{},{},{},{},{},{},{}",
                t.total, t.det, t.depth, t.stats.ratio, t.stats.mean, t.stats.sum, t.mean_distance
            )?;
        }
        std::fs::write(p, s).with_context(|| format!("writing {}", p.display()))?;
    }
    let bg = scene.background_pixels();
    let (first, last) = (trace.initial(), trace.last());
    println!(
        "detection loss   {:.6} -> {:.6} ({:.1}%)",
        first.det,
        last.det,
        100.0 * last.det / first.det
    );
    println!(
        "object distance  {:.6} -> {:.6} m",
        first.mean_distance, last.mean_distance
    );
    println!(
        "background RMSE  {:.6} -> {:.6} m",
        rmse(&scene.initial, &scene.truth, &bg),
        rmse(&trace.final_depth, &scene.truth, &bg)
    );
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let (cam, pred, truth, target_points): (CameraModel, DepthImage, DepthImage, Vec<[f64; 3]>) =
        match (&a.prediction, &a.ground_truth, &a.calib) {
            (Some(p), Some(g), Some(c)) => {
                let pred = read_depth_png(p)?;
                let truth = read_depth_png(g)?;
                let cam = camera_for(Some(c), pred.width(), pred.height())?;
                let pts = depth_to_points(&truth, &cam)?.points().to_vec();
                (cam, pred, truth, pts)
            }
            _ => {
                let r = road_scene(&RoadSceneSpec {
                    seed: a.seed,
                    ..Default::default()
                })?;
                let pts = r.sweep.points.iter().map(|p| p.xyz()).collect();
                (r.camera, r.prediction, r.lidar_depth, pts)
            }
        };
    let grid = GridSpec::bev_camera();
    let target = TargetOccupancy::from_points(&target_points, &grid)?;
    let head = VoxelizedPointLoss::new(grid, OccupancySurrogate { target });
    let (_, g_depth) = depth_loss(&pred, &truth)?;
    let (_, g_quant) = QuantizedPath::new(cam, head.clone()).loss_and_grad(&pred)?;
    let spec = SphericalBinSpec::lidar_beams(a.beams, a.phi_res)?;
    let (_, g_sparse) = SparsifiedPath::new(cam, a.y_limit, spec, head).loss_and_grad(&pred)?;

    let mut s = format!("{STATS_CSV_HEADER}\n");
    for (name, g) in [
        ("depth", &g_depth),
        ("det_quantized", &g_quant),
        ("det_sparsified", &g_sparse),
    ] {
        writeln!(s, "{}", gradient_stats(g).csv_row(name))?;
    }
    match &a.output {
        Some(p) => std::fs::write(p, s).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{s}"),
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let exec = if a.serial { Exec::Serial } else { Exec::Parallel };
    let r = bench_voxelize(&a.sizes, &GridSpec::bev_camera(), a.reps, exec)?;
    println!("n_points,hard_ms,soft_forward_ms,soft_backward_ms");
    for row in &r.rows {
        println!(
            "{},{:.3},{:.3},{:.3}",
            row.n_points,
            row.hard.as_secs_f64() * 1e3,
            row.soft_forward.as_secs_f64() * 1e3,
            row.soft_backward.as_secs_f64() * 1e3
        );
    }
    if let Some(g) = r.max_doubling_ratio() {
        println!("# worst soft time growth per doubling: {g:.2}");
    }
    Ok(())
}
