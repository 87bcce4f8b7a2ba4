use std::path::Path;
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use regkit::cli::{self, EXIT_MODEL, EXIT_NOT_CONVERGED, EXIT_USAGE, EXIT_VERIFY_FAILED, SEED_ENV};
use regkit::kernel::tc_kernel;
use regkit::Dataset;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("regkit").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> std::path::PathBuf {
    let data = dir.join("data.csv");
    let mut args = vec!["simulate", "--out", p(&data)];
    args.extend_from_slice(extra);
    let (code, _, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    data
}

fn read_g(path: &Path) -> DVector<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,g"));
    let v: Vec<f64> = lines.map(|l| l.split_once(',').unwrap().1.parse().unwrap()).collect();
    DVector::from_vec(v)
}

fn dense_problem(data: &Path, n_g: usize) -> (DMatrix<f64>, DVector<f64>) {
    let ds = Dataset::load_csv(data, "v", n_g).unwrap();
    (ds.phi().into_matrix(), ds.y_vector())
}

#[test]
fn simulate_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), &["--n", "64", "--seed", "3", "--sigma2", "0.01"]);
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,u,v,y"));
    assert_eq!(lines.count(), 64);
}

#[test]
fn simulate_without_output_is_a_usage_error() {
    assert_eq!(run(&["simulate", "--n", "10"]).0, EXIT_USAGE);
}

#[test]
fn identify_ls_matches_normal_equations() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), &["--system", "bench2", "--n", "200", "--input", "gaussian", "--seed", "5", "--sigma2", "0.01"]);
    let g_out = dir.path().join("g.csv");
    let (code, out, err) = run(&["identify", "--data", p(&data), "--n-g", "15", "--method", "ls", "--g-out", p(&g_out)]);
    assert_eq!(code, 0, "{err}");
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["method"], "ls");
    let (phi, y) = dense_problem(&data, 15);
    let expect = (phi.transpose() * &phi).cholesky().unwrap().solve(&(phi.transpose() * y));
    let g = read_g(&g_out);
    assert!((&g - &expect).norm() <= 1e-9 * expect.norm());
}

#[test]
fn identify_krls_at_matched_radius_equals_regls() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), &["--n", "60", "--input", "gaussian", "--seed", "9", "--sigma2", "0.05"]);
    let g_out = dir.path().join("g.csv");
    let (code, _, err) = run(&[
        "identify", "--data", p(&data), "--n-g", "10", "--method", "krls", "--rho", "from-lambda", "--lambda", "2",
        "--tc-alpha", "0.9", "--g-out", p(&g_out),
    ]);
    assert_eq!(code, 0, "{err}");
    let (phi, y) = dense_problem(&data, 10);
    let kinv = tc_kernel(1.0, 0.9, 10).unwrap().matrix().clone().try_inverse().unwrap();
    let expect = (phi.transpose() * &phi + kinv * 2.0).cholesky().unwrap().solve(&(phi.transpose() * y));
    let g = read_g(&g_out);
    assert!((&g - &expect).norm() <= 1e-6 * expect.norm(), "{}", (&g - &expect).norm());
}

#[test]
fn identify_reb_trace_is_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), &["--system", "bench4", "--n", "100", "--input", "gaussian", "--seed", "2", "--sigma2", "0.01"]);
    let trace = dir.path().join("trace.csv");
    let (code, _, err) = run(&[
        "identify", "--data", p(&data), "--n-g", "30", "--method", "reb", "--lambda", "1", "--grid-angles", "8", "--grid-radii",
        "5", "--trace-out", p(&trace),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&trace).unwrap();
    let vals: Vec<f64> = text.lines().skip(1).map(|l| l.split_once(',').unwrap().1.parse().unwrap()).collect();
    assert!(vals.len() >= 2);
    for w in vals.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{vals:?}");
    }
}

#[test]
fn identify_rejects_unknown_method() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), &["--n", "40"]);
    assert_eq!(run(&["identify", "--data", p(&data), "--n-g", "5", "--method", "bogus"]).0, EXIT_USAGE);
}

#[test]
fn identify_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), &["--n", "80", "--input", "gaussian", "--seed", "4", "--sigma2", "0.01"]);
    let (code, _, err) = run(&[
        "identify", "--data", p(&data), "--n-g", "20", "--method", "atom", "--weight", "1", "--max-iters", "1", "--grid-angles", "4",
        "--grid-radii", "3",
    ]);
    assert_eq!(code, EXIT_NOT_CONVERGED, "{err}");
    assert!(err.contains("did not converge"));
}

const SMALL: [&str; 10] = [
    "--set", "n_d=30", "--set", "n_g=8", "--set", "solver.subgradient_iters=20", "--set", "cv.regls_lambda=0.1,1", "--set",
    "tc.alpha=0.7,0.9",
];

#[test]
fn mc_zero_runs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc");
    assert_eq!(run(&["mc", "--experiment", "disturbed-input", "--runs", "0", "--out", p(&out)]).0, EXIT_USAGE);
}

#[test]
fn mc_unwritable_output_is_a_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("mc");
    let mut args = vec!["mc", "--experiment", "disturbed-input", "--runs", "1", "--out", p(&out)];
    args.extend_from_slice(&SMALL);
    assert_eq!(run(&args).0, EXIT_MODEL);
}

#[test]
fn mc_writes_reproducible_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let mut args = vec!["mc", "--experiment", "disturbed-input", "--runs", "2", "--seed", "11", "--out", p(&out)];
        args.extend_from_slice(&SMALL);
        let (code, stdout, err) = run(&args);
        assert_eq!(code, 0, "{err}");
        assert!(stdout.starts_with("method"));
        for f in ["runs.csv", "summary.csv", "config.echo"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + 8);
        outputs.push(std::fs::read(out.join("runs.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

fn echo_value(echo: &str, key: &str) -> String {
    echo.lines().find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string())).unwrap()
}

#[test]
fn mc_config_layers_file_then_set_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("mc.conf");
    std::fs::write(&conf, "experiment = atomic-noise\nruns = 9\nseed = 5\n[grid]\nn_angles = 6\n").unwrap();
    let out = dir.path().join("mc");
    let (code, echo, err) = run(&["mc", "--config", p(&conf), "--set", "runs=12", "--seed", "77", "--out", p(&out), "--echo"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(echo_value(&echo, "experiment"), "atomic-noise");
    assert_eq!(echo_value(&echo, "runs"), "12");
    assert_eq!(echo_value(&echo, "seed"), "77");
    assert_eq!(echo_value(&echo, "grid.n_angles"), "6");
    assert!(!out.exists(), "--echo must not run the experiment");
}

#[test]
fn seed_environment_variable_sits_below_flags() {
    let exe = env!("CARGO_BIN_EXE_regkit");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc");
    let echo = |extra: &[&str]| {
        let o = Command::new(exe)
            .args(["mc", "--experiment", "disturbed-input", "--out", p(&out), "--echo"])
            .args(extra)
            .env(SEED_ENV, "31")
            .output()
            .unwrap();
        assert!(o.status.success());
        String::from_utf8(o.stdout).unwrap()
    };
    assert_eq!(echo_value(&echo(&[]), "seed"), "31");
    assert_eq!(echo_value(&echo(&["--seed", "4"]), "seed"), "4");
    let bad = Command::new(exe).args(["mc", "--experiment", "disturbed-input", "--out", p(&out)]).env(SEED_ENV, "x").stderr(std::process::Stdio::null()).status().unwrap();
    assert_eq!(bad.code(), Some(EXIT_USAGE));
}

#[test]
fn verify_runs_selected_checks() {
    let (code, out, _) = run(&["verify", "--check", "theorem1", "--trials", "50"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains("PASS"));
}

#[test]
fn verify_injected_failure_exits_nonzero() {
    let (code, out, _) = run(&["verify", "--check", "lemma,theorem1", "--trials", "3", "--inject-failure"]);
    assert_eq!(code, EXIT_VERIFY_FAILED);
    assert_eq!(out.lines().filter(|l| l.contains("FAIL")).count(), 2);
}
