use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dynct(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dynct"));
    c.args(args);
    if let Some(t) = threads {
        c.env("DYNCT_THREADS", t);
    }
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_STATIC: &str = "\
trajectory.kind = two-circles
phantom.gaussian = 0, 0, 0, 1, 0.5
voxel.dims = 3
voxel.spacing = 0.2
quadrature.order = 9
params.n_c = 60
";

#[test]
fn selftest_passes() {
    let o = dynct(&["selftest"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn missing_dataset_reports_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.cfg", "data.source = file\ndata.path = nowhere.cbd\n");
    let o = dynct(&["reconstruct", cfg.to_str().unwrap()], None);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: missing-input:"), "{err}");
}

#[test]
fn config_errors_have_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "u.cfg", "detecotr.n_u = 4\n");
    let err = stderr(&dynct(&["simulate", cfg.to_str().unwrap()], None));
    assert!(err.starts_with("error: config-unknown-key:") && err.contains("detector.n_u"), "{err}");
    let cfg = write_config(dir.path(), "s.cfg", "voxel.spacing = -1\n");
    let err = stderr(&dynct(&["reconstruct", cfg.to_str().unwrap()], None));
    assert!(err.starts_with("error: config-invalid:") && err.contains("voxel.spacing"), "{err}");
    let err = stderr(&dynct(&["reconstruct", dir.path().join("absent.cfg").to_str().unwrap()], None));
    assert!(err.starts_with("error: missing-input:"), "{err}");
}

#[test]
fn reconstruct_writes_volume_slices_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.cfg", &format!("{SMALL_STATIC}output.dir = out\n"));
    let o = dynct(&["reconstruct", cfg.to_str().unwrap()], Some("1"));
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let vol = dynct::formats::read_volume(&out.join("recon.vol")).unwrap();
    assert_eq!(vol.dims, [3, 3, 3]);
    let center = vol.values[vol.index(1, 1, 1)];
    assert!((center - 1.0).abs() < 0.05, "{center}");
    let pgm = std::fs::read(out.join("recon_xy.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n3 3\n65535\n"));
    assert_eq!(pgm.len(), b"P5\n3 3\n65535\n".len() + 18);
    let metrics = std::fs::read_to_string(out.join("recon_metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\nrel_l2,"), "{metrics}");
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.cfg", SMALL_STATIC);
    let mut volumes = Vec::new();
    for t in ["1", "3"] {
        let out = dir.path().join(format!("t{t}"));
        let o = dynct(&["--out", out.to_str().unwrap(), "reconstruct", cfg.to_str().unwrap()], Some(t));
        assert!(o.status.success(), "{}", stderr(&o));
        volumes.push(std::fs::read(out.join("recon.vol")).unwrap());
    }
    assert_eq!(volumes[0], volumes[1]);
}

#[test]
fn simulate_then_reconstruct_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let sim = write_config(
        dir.path(),
        "sim.cfg",
        "trajectory.kind = circle\nroi.radius = 1.5\nphantom.ball = 0,0,0, 0.5, 1\ndetector.n_u = 8\ndetector.n_v = 6\ndetector.n_s = 12\n",
    );
    let o = dynct(&["simulate", sim.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let set = dynct::formats::read_dataset(&dir.path().join("dataset.cbd")).unwrap();
    assert_eq!((set.n_u, set.n_v, set.frame_count()), (8, 6, 12));

    let rec = write_config(
        dir.path(),
        "rec.cfg",
        "trajectory.kind = circle\nroi.radius = 1.5\ndata.source = file\ndata.path = dataset.cbd\nvoxel.dims = 1\nquadrature.order = 5\nparams.n_c = 16\nparams.allow_holes = true\nparams.tau_h = 0.1\noutput.dir = rec\n",
    );
    let o = dynct(&["reconstruct", rec.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = std::fs::read_to_string(dir.path().join("rec/recon_metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\nmax_deficit,"), "{metrics}");

    let wrong = write_config(dir.path(), "wrong.cfg", "trajectory.kind = two-circles\nroi.radius = 1.5\ndata.source = file\ndata.path = dataset.cbd\n");
    let err = stderr(&dynct(&["reconstruct", wrong.to_str().unwrap()], None));
    assert!(err.starts_with("error: config-invalid:") && err.contains("trajectory"), "{err}");
}

#[test]
fn converge_writes_one_row_per_eps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.cfg",
        "\
trajectory.kind = two-circles
deformation.kind = twist
deformation.axis = 1, 1, 1
deformation.radius = 1.9
phantom.gaussian = 0, 0, 0, 1, 0.5
voxel.dims = 1
quadrature.order = 7
params.n_c = 48
params.h = 0.05
converge.eps_list = 0.2,0.1,0.05,0
",
    );
    let o = dynct(&["converge", cfg.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4, "{text}");
    assert!(rows[3].starts_with("0.0,"), "{text}");
}

#[test]
fn analyze_crit_writes_risk_and_arcs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "a.cfg",
        "trajectory.kind = circle\nvoxel.dims = 2\nvoxel.spacing = 0.5\nquadrature.order = 7\nanalyze.points = 0,0,0; 0.2,0.1,0\nanalyze.n_s = 3\n",
    );
    let o = dynct(&["analyze-crit", cfg.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let risk = dynct::formats::read_volume(&dir.path().join("risk.vol")).unwrap();
    assert!(risk.values.iter().all(|r| (0.0..=1.0).contains(r)));
    let ends = std::fs::read_to_string(dir.path().join("arc_endpoints.csv")).unwrap();
    assert_eq!(ends.lines().count(), 1 + 2 * 3);
    let arcs = std::fs::read_to_string(dir.path().join("arcs.csv")).unwrap();
    assert!(arcs.lines().count() > 6);
}

#[test]
fn compare_xstarx_writes_energies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "x.cfg",
        "trajectory.kind = circle\nphantom.ball = 0,0,0, 0.6, 1\nvoxel.dims = 9\nvoxel.spacing = 0.25\nquadrature.order = 3\ncompare.n_s = 32\ncompare.n_t = 16\ncompare.reconstruct = false\ncompare.risk_threshold = 0\n",
    );
    let o = dynct(&["compare-xstarx", cfg.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("artifact_energy.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("xstarx_neg_laplacian,"), "{csv}");
    assert!(dir.path().join("xstarx.vol").is_file());
}
