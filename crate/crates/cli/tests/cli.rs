use std::path::Path;
use std::process::{Command, Output};

use plcor::io::{read_depth_png, read_velodyne, write_velodyne, LidarSweep};
use plcor::voxel::read_tensor_dump;

const CALIB: &str = "\
P0: 721.5377 0 609.5593 0 0 721.5377 172.854 0 0 0 1 0
P2: 721.5377 0 609.5593 44.85728 0 721.5377 172.854 0.2163791 0 0 1 0.002745884
R0_rect: 1 0 0 0 1 0 0 0 1
Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0
";

fn plcor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plcor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// LiDAR-frame points 10-20 m ahead, spread over the camera's view.
fn lidar_file(dir: &Path) -> std::path::PathBuf {
    let mut pts = Vec::new();
    for i in 0..40 {
        for j in 0..10 {
            let x = 10.0 + i as f64 * 0.25;
            pts.push([x, (i as f64 - 20.0) * 0.2, -1.0 + j as f64 * 0.2]);
        }
    }
    let p = dir.join("sweep.bin");
    write_velodyne(&LidarSweep::from_xyz(pts), &p).unwrap();
    p
}

#[test]
fn gtdepth_then_project_recovers_points() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("calib.txt");
    std::fs::write(&calib, CALIB).unwrap();
    let sweep = lidar_file(dir.path());
    let png = dir.path().join("gt.png");
    let o = plcor(&[
        "gtdepth",
        "--velodyne",
        s(&sweep),
        "--calib",
        s(&calib),
        "--output",
        s(&png),
    ]);
    assert!(o.status.success(), "{o:?}");
    let depth = read_depth_png(&png).unwrap();
    assert_eq!((depth.width(), depth.height()), (1242, 375));
    assert_eq!(depth.valid_count(), 400);

    let cloud = dir.path().join("cloud.txt");
    let o = plcor(&[
        "project",
        "--depth",
        s(&png),
        "--calib",
        s(&calib),
        "--output",
        s(&cloud),
        "--format",
        "txt",
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&cloud).unwrap();
    assert_eq!(text.lines().count(), 400);
    for line in text.lines() {
        let v: Vec<f64> = line.split(' ').map(|x| x.parse().unwrap()).collect();
        // camera-frame depth of every sweep point is 10-20 m
        assert!(v[2] >= 10.0 - 1e-2 && v[2] <= 20.0 + 1e-2, "{line}");
    }

    let bin = dir.path().join("cloud.bin");
    let o = plcor(&["project", "--depth", s(&png), "--calib", s(&calib), "--output", s(&bin)]);
    assert!(o.status.success());
    assert_eq!(read_velodyne(&bin).unwrap().len(), 400);
}

#[test]
fn voxelize_modes_and_config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("calib.txt");
    std::fs::write(&calib, CALIB).unwrap();
    let sweep = lidar_file(dir.path());
    let out = dir.path().join("t.txt");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# shared settings\nmode = hard\nsteps = 3\ngrid = -10,-3,0:0.5,0.5,0.5:40,12,60\n",
    )
    .unwrap();

    let o = plcor(&[
        "voxelize",
        "--config",
        s(&cfg),
        "--input",
        s(&sweep),
        "--output",
        s(&out),
        "--calib",
        s(&calib),
    ]);
    assert!(o.status.success(), "{o:?}");
    let hard = read_tensor_dump(&out).unwrap();
    assert!(!hard.is_empty());
    assert!(hard.entries().iter().all(|e| e.1 == 1.0));
    assert_eq!(hard.grid().counts, [40, 12, 60]);

    let o = plcor(&[
        "voxelize",
        "--config",
        s(&cfg),
        "--mode",
        "soft",
        "--input",
        s(&sweep),
        "--output",
        s(&out),
        "--calib",
        s(&calib),
    ]);
    assert!(o.status.success(), "{o:?}");
    let soft = read_tensor_dump(&out).unwrap();
    assert!(soft.len() > hard.len());
    assert!(soft.entries().iter().any(|e| e.1 != 1.0));
}

#[test]
fn sparsify_keeps_a_subset() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("calib.txt");
    std::fs::write(&calib, CALIB).unwrap();
    let sweep = lidar_file(dir.path());
    let out = dir.path().join("kept.bin");
    let o = plcor(&[
        "sparsify",
        "--input",
        s(&sweep),
        "--calib",
        s(&calib),
        "--output",
        s(&out),
        "--beams",
        "8",
        "--phi-res",
        "2",
    ]);
    assert!(o.status.success(), "{o:?}");
    let kept = read_velodyne(&out).unwrap();
    assert!(!kept.is_empty() && kept.len() < 400);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    let out = dir.path().join("x");
    assert_eq!(
        plcor(&["voxelize", "--input", s(&missing), "--output", s(&out)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(plcor(&["voxelize", "--output", s(&out)]).status.code(), Some(1));
    assert_eq!(plcor(&["gradcheck", "--h", "-1"]).status.code(), Some(1));
    assert_eq!(plcor(&["bench", "--config", s(&missing)]).status.code(), Some(2));
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "no_such_flag = 1\n").unwrap();
    assert_eq!(plcor(&["bench", "--config", s(&bad)]).status.code(), Some(1));
    assert_eq!(plcor(&["--help"]).status.code(), Some(0));
}

#[test]
fn gradcheck_and_demo_run() {
    let o = plcor(&["gradcheck", "--scenes", "2", "--pixels", "16"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("ok: max relative error"));

    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = plcor(&["demo-e2e", "--steps", "2", "--lambda-depth", "1", "--trace", s(&trace)]);
    assert!(o.status.success(), "{o:?}");
    let t = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(t.lines().count(), 4);
    assert!(t.starts_with("iteration,total,det,depth,ratio,mean,sum,mean_distance"));
}

#[test]
fn stats_csv_layout() {
    let o = plcor(&["stats"]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "loss_name,ratio,mean,sum");
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["depth", "det_quantized", "det_sparsified"]);
}
