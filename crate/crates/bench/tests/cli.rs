use std::process::Command;

use swing_bench::report::read_csv;
use swing_bench::sweep::SweepRow;
use swing_core::igraph::PointCloud;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swing-bench"))
}

#[test]
fn gen_cloud_writes_a_parseable_cloud() {
    let out = bench().args(["gen-cloud", "--n", "50", "--seed", "3"]).output().unwrap();
    assert!(out.status.success());
    let cloud = PointCloud::parse(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!((cloud.len(), cloud.dim()), (50, 3));
}

#[test]
fn fne_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fne.csv");
    let status = bench()
        .args(["fne-sweep", "--kernels", "diffusion", "--n-list", "25", "--r-list", "8,16", "--m", "10", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let rows: Vec<SweepRow> = read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.fne.is_some_and(|v| v.is_finite())));
}

#[test]
fn mesh_normals_reads_an_off_file() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("ico.off");
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut text = String::from("OFF\n12 20 0\n");
    for v in [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ] {
        text += &format!("{} {} {}\n", v[0], v[1], v[2]);
    }
    for f in [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6],
        [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10],
        [8, 6, 7], [9, 8, 1],
    ] {
        text += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
    }
    std::fs::write(&mesh, text).unwrap();
    let out = bench()
        .args(["mesh-normals", "--m", "10", "--r", "16", "--mask", "0.5", "--mesh"])
        .arg(&mesh)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 4, "{csv}");
}

#[test]
fn malformed_mesh_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("bad.off");
    std::fs::write(&mesh, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1\n3 0 1 2\n").unwrap();
    let out = bench().args(["mesh-normals", "--mesh"]).arg(&mesh).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn selftest_passes() {
    let out = bench().arg("selftest").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn bad_arguments_fail() {
    for args in [["fne-sweep", "--p-halt", "1.5", "--n-list", "10"], ["time-sweep", "--repeats", "0", "--n-list", "10"]] {
        let out = bench().args(args).env("RUST_BACKTRACE", "0").output().unwrap();
        assert!(!out.status.success());
        assert!(!out.stderr.is_empty());
    }
}
