use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use sparsest::format::{read_instance, read_points, read_summary, read_sweep, read_trace, points_text, PointCloud};
use sparsest::harness::{self, INLIER, OUTLIER, SKIPPED};
use sparsest::{ExperimentConfig, KvConfig};
use sparsest_core::models::gen_dpcp;
use sparsest_core::TargetSet;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsest"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn write_matrix(path: &Path, rows: &[&[f64]]) {
    let mut s = format!("# rows={} cols={} kind=custom seed=none\n", rows.len(), rows[0].len());
    for r in rows {
        let f: Vec<String> = r.iter().map(|x| format!("{x:.16e}")).collect();
        s.push_str(&f.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn gen_writes_header_and_is_deterministic() {
    let d = tmp();
    let args = ["--seed", "1", "--out", "a", "gen", "model=dpcp", "n=4", "r=1", "p1=10", "p2=5"];
    let out = run(d.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = read(d.path().join("a/dpcp-seed1.csv"));
    let header = text.lines().next().unwrap();
    for token in ["rows=4", "cols=15", "kind=dpcp", "seed=1", "r=1", "p1=10", "p2=5"] {
        assert!(header.split_whitespace().any(|t| t == token), "{header} lacks {token}");
    }
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 15));
    assert!(read(d.path().join("a/dpcp-seed1.meta")).contains("seed=1\n"));

    let mut again = args;
    again[3] = "b";
    assert_eq!(code(&run(d.path(), &again)), 0);
    assert_eq!(
        std::fs::read(d.path().join("a/dpcp-seed1.csv")).unwrap(),
        std::fs::read(d.path().join("b/dpcp-seed1.csv")).unwrap()
    );
}

#[test]
fn gen_rejects_codimension_at_ambient_dimension() {
    let d = tmp();
    let out = run(d.path(), &["gen", "model=dpcp", "n=4", "r=4", "p1=10", "p2=5"]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("r < n"), "{msg}");
    assert!(!d.path().join("dpcp-seed0.csv").exists());
}

#[test]
fn instance_round_trip_is_lossless() {
    let d = tmp();
    assert_eq!(code(&run(d.path(), &["--seed", "3", "gen", "model=odl", "n=6", "p=40", "theta=0.3"])), 0);
    let inst = read_instance(&d.path().join("odl-seed3.csv")).unwrap();
    let fresh = sparsest_core::models::gen_odl(6, 40, 0.3, 3).unwrap();
    // Exact equality of the data is what lets the reader regenerate ground truth.
    assert_eq!(inst.data, fresh.data);
    assert!(matches!(inst.targets, Some(TargetSet::SignedColumns { .. })));
}

#[test]
fn solve_identity_data_reaches_a_target() {
    let d = tmp();
    let eye: [&[f64]; 3] = [&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]];
    write_matrix(&d.path().join("eye.csv"), &eye);
    write_matrix(&d.path().join("targets.csv"), &eye);
    let out = run(
        d.path(),
        &["--out", "o", "solve", "--instance", "eye.csv", "--targets", "targets.csv", "solver=irls", "init=random"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_summary(&d.path().join("o/summary.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].dist.unwrap() <= 1e-8, "{:?}", rows[0]);
    assert_eq!(rows[0].status, "converged");
}

#[test]
fn solve_missing_file_is_an_io_error() {
    let d = tmp();
    let out = run(d.path(), &["solve", "--instance", "nope.csv"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("nope.csv"));
}

#[test]
fn dist_column_is_omitted_without_tracking() {
    let d = tmp();
    write_matrix(&d.path().join("y.csv"), &[&[1.0, 0.5, 0.0, 2.0], &[0.0, 1.0, 1.0, -1.0]]);
    let out = run(d.path(), &["solve", "--instance", "y.csv", "--dist-tracking", "off", "solver=rsg"]);
    assert!(matches!(code(&out), 0 | 1), "{}", stderr(&out));
    let trace = read_trace(&d.path().join("trace-rsg-seed0.csv")).unwrap();
    assert_eq!(trace.columns, ["iter", "f", "grad_norm", "elapsed_ms"]);
    // Custom data without a targets file has nothing to measure against either way.
    let out = run(d.path(), &["solve", "--instance", "y.csv", "solver=rsg"]);
    assert!(matches!(code(&out), 0 | 1));
    let trace = read_trace(&d.path().join("trace-rsg-seed0.csv")).unwrap();
    assert!(!trace.columns.iter().any(|c| c == "dist"));
}

#[test]
fn iteration_cap_gives_exit_code_one() {
    let d = tmp();
    let out = run(d.path(), &["solve", "model=odl", "n=8", "p=200", "theta=0.2", "solver=rsg", "max_iters=3"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let rows = read_summary(&d.path().join("summary.csv")).unwrap();
    assert_eq!(rows[0].status, "max_iters");
    assert_eq!(rows[0].iters, 3);
}

#[test]
fn config_errors_exit_with_code_two() {
    let d = tmp();
    assert_eq!(code(&run(d.path(), &["solve", "model=odl", "n=8", "bogus=1"])), 2);
    assert_eq!(code(&run(d.path(), &["solve", "model=odl", "n=8", "solver=rtr", "loss=l1"])), 2);
    assert_eq!(code(&run(d.path(), &["solve", "model=odl", "n=8", "seeds="])), 2);
    assert_eq!(code(&run(d.path(), &["solve", "model=odl", "n=8", "beta=1.5"])), 2);
    assert_eq!(code(&run(d.path(), &["reproduce", "mnist"])), 2);
}

#[test]
fn later_config_sources_win() {
    let d = tmp();
    std::fs::write(d.path().join("run.cfg"), "# base\nmodel = odl\nn = 8\np = 200\ntheta = 0.2\nsolver = rgd\nmax_iters = 7\n").unwrap();
    let out = run(d.path(), &["--config", "run.cfg", "--seed", "4", "solve", "max_iters=5"]);
    assert!(matches!(code(&out), 0 | 1), "{}", stderr(&out));
    let trace = read_trace(&d.path().join("trace-rgd-seed4.csv")).unwrap();
    assert_eq!(trace.config.get("max_iters"), Some("5"));
    assert_eq!(trace.config.get("n"), Some("8"));
    assert_eq!(trace.config.get("seeds"), Some("4"));
    assert_eq!(trace.meta("seed"), Some("4"));
}

#[test]
fn trace_header_recreates_the_run() {
    let d = tmp();
    let args = ["--out", "first", "solve", "model=dpcp", "n=8", "r=2", "p1=60", "p2=30", "solver=rsg", "timing=off"];
    assert_eq!(code(&run(d.path(), &args)), 0);
    let first = d.path().join("first/trace-rsg-seed0.csv");
    // Every key the resolver knows appears in the header.
    let trace = read_trace(&first).unwrap();
    let cfg = ExperimentConfig::resolve(&trace.config).unwrap();
    assert_eq!(ExperimentConfig::resolve(&cfg.to_kv()).unwrap(), cfg);

    let out = run(d.path(), &["--config", first.to_str().unwrap(), "--out", "second", "solve"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let strip = |p: PathBuf| -> String { read(p).lines().filter(|l| !l.starts_with("# output_dir=")).collect() };
    assert_eq!(strip(first), strip(d.path().join("second/trace-rsg-seed0.csv")));
}

#[test]
fn reruns_are_byte_identical() {
    let d = tmp();
    for out in ["a", "b"] {
        let args = ["--out", out, "solve", "model=odl", "n=10", "p=300", "theta=0.2", "seeds=0..3", "timing=off", "solver=irls"];
        assert!(matches!(code(&run(d.path(), &args)), 0 | 1));
    }
    for name in ["summary.csv", "trace-irls-seed0.csv", "trace-irls-seed2.csv"] {
        let a = read(d.path().join("a").join(name)).replace("output_dir=a", "");
        let b = read(d.path().join("b").join(name)).replace("output_dir=b", "");
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn outputs_leave_no_temporary_files() {
    let d = tmp();
    assert_eq!(code(&run(d.path(), &["--out", "o", "--seed", "2", "gen", "model=psv", "n=4", "p=50"])), 0);
    let names: Vec<String> = std::fs::read_dir(d.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(sorted, ["psv-seed2.csv", "psv-seed2.meta"]);
}

#[test]
fn whitened_mcsbd_solve_tracks_whitened_targets() {
    let d = tmp();
    let args = ["solve", "model=mcsbd", "n=16", "p=32", "theta=0.2", "whiten=on", "round_lp=on", "max_iters=400", "timing=off"];
    let out = run(d.path(), &args);
    assert!(matches!(code(&out), 0 | 1), "{}", stderr(&out));
    let rows = read_summary(&d.path().join("summary.csv")).unwrap();
    assert!(rows[0].dist.unwrap() <= 1e-6, "{:?}", rows[0]);
}

fn check_reproduction(dir: &Path, which: &str, n: usize, p: usize) {
    let names = ["rgd", "rtr", "rsg", "manppa", "irls"];
    let mut hashes = Vec::new();
    for s in names {
        let t = read_trace(&dir.join(format!("{which}-{s}.csv"))).unwrap();
        assert_eq!(t.config.get("solver"), Some(s));
        assert_eq!(t.config.get("init"), Some("random"));
        assert_eq!(t.config.get("n"), Some(n.to_string().as_str()));
        let loss = if matches!(s, "rgd" | "rtr") { "logcosh" } else { "l1" };
        assert_eq!(t.config.get("loss"), Some(loss));
        assert!(!t.rows.is_empty());
        hashes.push(t.meta("init_sha256").unwrap().to_string());
    }
    assert!(hashes.windows(2).all(|w| w[0] == w[1]), "{hashes:?}");
    let init = read(dir.join(format!("{which}-init.csv")));
    assert_eq!(init.lines().count(), n);

    let cfg = ExperimentConfig::resolve(&read_trace(&dir.join(format!("{which}-irls.csv"))).unwrap().config).unwrap();
    assert_eq!(cfg.model.n, n);
    assert_eq!(cfg.model.p, p);
}

#[test]
fn reproduce_odl_shares_one_initial_point() {
    let d = tmp();
    let out = run(d.path(), &["--out", "r", "reproduce", "odl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // ceil(10 * 64^1.5) = 5120
    check_reproduction(&d.path().join("r"), "odl", 64, 5120);
}

#[test]
fn reproduce_dpcp_shares_one_initial_point_within_budget() {
    let d = tmp();
    let start = Instant::now();
    let out = run(d.path(), &["--out", "r", "reproduce", "dpcp"]);
    let secs = start.elapsed().as_secs_f64();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    check_reproduction(&d.path().join("r"), "dpcp", 100, 5000);
    assert!(secs <= 600.0, "{secs} s");
}

#[test]
fn sweep_row_count_and_easy_regime() {
    let d = tmp();
    let out = run(d.path(), &["--out", "s", "sweep-psv", "thetas=0.05,0.1", "seeds=0..10", "timing=off"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_sweep(&d.path().join("s/sweep-psv.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 2);
    for r in rows.iter().filter(|r| r.theta == 0.05) {
        assert!(r.success_rate >= 0.9, "{r:?}");
    }
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.success_rate)));
}

fn dpcp_cloud(n: usize, p1: usize, p2: usize, seed: u64) -> (PointCloud, Vec<bool>) {
    let inst = gen_dpcp(n, 1, p1, p2, seed).unwrap();
    let mask = inst.inliers.clone().unwrap();
    let points = inst.data.column_iter().map(|c| c.iter().copied().collect()).collect();
    let labels = mask.iter().map(|&b| Some(if b { INLIER } else { OUTLIER }.to_string())).collect();
    (PointCloud { points, labels }, mask)
}

fn label_cfg(extra: &[&str]) -> ExperimentConfig {
    let mut kv = KvConfig::from_overrides(&["model=custom", "solver=irls", "max_iters=100"]).unwrap();
    kv = kv.merged(&KvConfig::from_overrides(extra).unwrap());
    ExperimentConfig::resolve(&kv).unwrap()
}

#[test]
fn labels_a_synthetic_cloud() {
    let d = tmp();
    let (cloud, mask) = dpcp_cloud(3, 150, 150, 11);
    std::fs::write(d.path().join("cloud.csv"), points_text(&cloud)).unwrap();
    let out = run(d.path(), &["--out", "o", "label-pointcloud", "cloud.csv", "--codim", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let labeled = read_points(&d.path().join("o/cloud-labeled.csv")).unwrap();
    assert_eq!(labeled.points, cloud.points);
    let correct = labeled
        .labels
        .iter()
        .zip(&mask)
        .filter(|(l, &m)| l.as_deref() == Some(if m { INLIER } else { OUTLIER }))
        .count();
    assert!(correct as f64 >= 0.99 * mask.len() as f64, "{correct} of {}", mask.len());
}

#[test]
fn hyperplane_cloud_is_all_inliers() {
    let (cloud, _) = dpcp_cloud(4, 80, 0, 5);
    let lab = harness::label_points(&cloud, &label_cfg(&[])).unwrap();
    assert!(lab.labels.iter().all(|l| l == INLIER));
}

#[test]
fn tau_zero_labels_match_default_tau() {
    let (cloud, _) = dpcp_cloud(3, 150, 150, 12);
    let default = harness::label_points(&cloud, &label_cfg(&[])).unwrap();
    let exact = harness::label_points(&cloud, &label_cfg(&["tau=0"])).unwrap();
    let differing: Vec<usize> = (0..cloud.points.len()).filter(|&i| default.labels[i] != exact.labels[i]).collect();
    assert!(differing.is_empty(), "labels differ at {differing:?}");
}

#[test]
fn labeling_errors_are_outliers_inside_the_tau_band() {
    for seed in [11, 12] {
        let inst = gen_dpcp(3, 1, 150, 150, seed).unwrap();
        let Some(TargetSet::SubspaceComplement { basis }) = &inst.targets else { unreachable!() };
        let normal = basis.column(0).into_owned();
        let (cloud, mask) = dpcp_cloud(3, 150, 150, seed);

        let exact = harness::label_points(&cloud, &label_cfg(&["tau=0"])).unwrap();
        for (l, &m) in exact.labels.iter().zip(&mask) {
            assert_eq!(l, if m { INLIER } else { OUTLIER });
        }

        let lab = harness::label_points(&cloud, &label_cfg(&[])).unwrap();
        for (j, (l, &m)) in lab.labels.iter().zip(&mask).enumerate() {
            let y = inst.data.column(j);
            let true_residual = normal.dot(&y).abs() / y.norm();
            let expected = if m || true_residual <= 0.05 { INLIER } else { OUTLIER };
            if (true_residual - 0.05).abs() > 1e-8 {
                assert_eq!(l, expected, "point {j}, residual {true_residual}");
            }
        }
    }
}

#[test]
fn zero_points_are_skipped_and_small_clouds_rejected() {
    let (mut cloud, _) = dpcp_cloud(3, 40, 10, 2);
    cloud.points.push(vec![0.0; 3]);
    cloud.labels.push(None);
    let lab = harness::label_points(&cloud, &label_cfg(&[])).unwrap();
    assert_eq!(lab.skipped, 1);
    assert_eq!(lab.labels.last().map(String::as_str), Some(SKIPPED));

    let tiny = PointCloud { points: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]], labels: vec![None, None] };
    assert!(harness::label_points(&tiny, &label_cfg(&[])).is_err());
    let d = tmp();
    std::fs::write(d.path().join("tiny.csv"), points_text(&tiny)).unwrap();
    assert_eq!(code(&run(d.path(), &["label-pointcloud", "tiny.csv"])), 2);
}
