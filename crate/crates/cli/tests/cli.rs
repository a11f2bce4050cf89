use std::fs::File;
use std::io::BufReader;
use std::process::Command;

use dualfem::experiments::SCALAR_HEADER;
use dualfem::mesh::Mesh;

fn dualfem() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualfem"))
}

#[test]
fn small_run_writes_csv_with_footer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plaplace.csv");
    let status = dualfem()
        .args(["--experiment", "plaplace", "--levels", "1", "--grade-depth", "1", "--max-iter", "8", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SCALAR_HEADER);
    assert!(lines.last().unwrap().starts_with("# jref = "));
    assert_eq!(lines.len(), 10);
    assert!(lines[1].starts_with("1,"));
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let output = dualfem()
        .args(["--experiment", "pstokes", "--levels", "0", "--grade-depth", "1", "--max-iter", "3"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), SCALAR_HEADER);
}

#[test]
fn unknown_experiment_fails_with_message() {
    let output = dualfem().args(["--experiment", "heat"]).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8(output.stderr).unwrap().contains("error:"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "experiment = bingham\nlevels = 0\ngrade_depth = 1\nmax_iter = 50\n").unwrap();
    let output = dualfem().arg("--config").arg(&config).args(["--max-iter", "2", "--eps-policy", "fixed"]).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = String::from_utf8(output.stdout).unwrap();
    let eps: Vec<&str> = text.lines().skip(1).filter(|l| !l.starts_with('#')).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(eps.len(), 2);
    assert_eq!(eps[1].parse::<f64>().unwrap(), 0.5);
}

#[test]
fn dumped_mesh_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("mesh.txt");
    let status = dualfem()
        .args(["--experiment", "plaplace", "--levels", "1", "--grade-depth", "2", "--max-iter", "1", "--out"])
        .arg(dir.path().join("x.csv"))
        .arg("--dump-mesh")
        .arg(&mesh_path)
        .status()
        .unwrap();
    assert!(status.success());
    let mesh: Mesh<f64> = Mesh::read_text(BufReader::new(File::open(&mesh_path).unwrap())).unwrap();
    assert!(mesh.n_triangles() > 24);
    assert!((mesh.total_area() - 3.0).abs() < 1e-12);
}
