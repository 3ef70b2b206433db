use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infcomp")).args(args).output().unwrap()
}

fn run_with_config(sub: &str, config: &str, extra: &[&str]) -> Output {
    let path = configs().join(config);
    let mut args = vec![sub, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_one_line_error(o: &Output, code: i32) {
    assert_eq!(o.status.code(), Some(code), "stdout: {}", stdout(o));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err:?}");
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|t| t.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
}

#[test]
fn eval_origin_is_zero() {
    let o = run_with_config("eval", "eval_exp.conf", &["--set", "points=0"]);
    assert!(o.status.success());
    assert_eq!(field(stdout(&o).trim(), "value"), "0+0i");
}

#[test]
fn eval_regular_point() {
    let o = run_with_config("eval", "eval_exp.conf", &["--set", "points=0.3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let depth: usize = field(out.trim(), "depth").parse().unwrap();
    assert!(depth <= 64, "{out}");
}

#[test]
fn eval_at_lattice_point_fails_with_pole() {
    let o = run_with_config("eval", "eval_exp.conf", &["--set", "points=-4"]);
    assert_one_line_error(&o, 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pole"));
}

#[test]
fn flags_override_config() {
    let o = run_with_config("eval", "eval_exp.conf", &["--set", "points=0.3", "--nmax", "3"]);
    assert_one_line_error(&o, 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no convergence"));
}

#[test]
fn verify_sweep_passes() {
    let o = run_with_config("verify", "verify_exp.conf", &["--set", "draws=10"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().all(|l| !l.contains(" FAIL")));
    assert!(out.contains("taylor_recurrence"));
}

#[test]
fn verify_forced_threshold_fails() {
    let o = run_with_config("verify", "verify_exp.conf", &["--set", "draws=3", "--threshold", "0"]);
    assert_one_line_error(&o, 1);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn bad_config_is_usage_error() {
    let o = run_with_config("verify", "verify_exp.conf", &["--set", "lambda=1.5"]);
    assert_one_line_error(&o, 2);
    let o = run_with_config("eval", "eval_exp.conf", &["--set", "f=exp(q)"]);
    assert_one_line_error(&o, 2);
    let o = run(&["eval", "--config", "/nonexistent/file.conf"]);
    assert_one_line_error(&o, 2);
    let o = run(&["bogus"]);
    assert_one_line_error(&o, 2);
    let o = run(&["eval", "--tol", "abc"]);
    assert_one_line_error(&o, 2);
}

#[test]
fn schroeder_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run_with_config("schroeder", "schroeder_exp.conf", &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for run in runs {
        assert_eq!(run["converged"], true);
        assert!(run["ratios"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() < 1.0));
    }
    assert!(runs[0]["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn schroeder_usage_and_failure() {
    let o = run_with_config("schroeder", "schroeder_exp.conf", &["--nmax", "0"]);
    assert_one_line_error(&o, 2);
    let o = run_with_config("schroeder", "schroeder_exp.conf", &["--set", "points=5"]);
    assert_one_line_error(&o, 1);
    let o = run_with_config("schroeder", "eval_exp.conf", &[]);
    assert_one_line_error(&o, 2);
}

#[test]
fn schroeder_slopes() {
    let o = run_with_config("schroeder", "slope_exp.conf", &[]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let slope = report["slope"]["slope"].as_f64().unwrap();
    assert!((0.7..=1.3).contains(&slope), "{slope}");
    let o = run_with_config("schroeder", "abel_slope.conf", &[]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let slope = report["slope"]["slope"].as_f64().unwrap();
    assert!((-1.3..=-0.7).contains(&slope), "{slope}");
}

fn read_ppm(path: &Path) -> (usize, usize, Vec<u8>) {
    let bytes = std::fs::read(path).unwrap();
    let text = String::from_utf8_lossy(&bytes[..20]).into_owned();
    let mut parts = text.split_whitespace();
    assert_eq!(parts.next(), Some("P6"));
    let w: usize = parts.next().unwrap().parse().unwrap();
    let h: usize = parts.next().unwrap().parse().unwrap();
    assert_eq!(parts.next(), Some("255"));
    let header = format!("P6\n{w} {h}\n255\n").len();
    (w, h, bytes[header..].to_vec())
}

#[test]
fn render_small_grid_and_masked_cell() {
    let dir = tempfile::tempdir().unwrap();
    let ppm = dir.path().join("tiny.ppm");
    let o = run_with_config(
        "render",
        "eval_exp.conf",
        &[
            "--set", "center=-3", "--set", "half_width=1", "--set", "half_height=1",
            "--set", "cols=3", "--set", "rows=1", "--set", "exclusion_radius=1e-9",
            "--out", ppm.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (w, h, pixels) = read_ppm(&ppm);
    assert_eq!((w, h), (3, 1));
    assert_eq!(&pixels[0..3], &[0, 0, 0]);
    assert_eq!(&pixels[6..9], &[0, 0, 0]);
    assert_ne!(&pixels[3..6], &[0, 0, 0]);
    let csv = std::fs::read_to_string(ppm.with_extension("csv")).unwrap();
    let statuses: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(statuses, ["masked", "ok", "masked"]);

    let square = dir.path().join("square.ppm");
    let o = run_with_config(
        "render",
        "eval_exp.conf",
        &["--set", "cols=2", "--set", "rows=2", "--set", "half_width=0.2", "--out", square.to_str().unwrap()],
    );
    assert!(o.status.success());
    let (w, h, pixels) = read_ppm(&square);
    assert_eq!((w, h, pixels.len()), (2, 2, 12));
}

#[test]
fn render_needs_output() {
    let o = run_with_config("render", "render_exp.conf", &["--set", "cols=2", "--set", "rows=2"]);
    assert_one_line_error(&o, 2);
}

#[test]
fn taylor_prints_coefficients() {
    let o = run_with_config("taylor", "eval_exp.conf", &["--set", "order=3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("c1 = 0.5+0i"), "{out}");
    assert!(out.contains("c2 = -0.125+0i"), "{out}");
    let o = run_with_config("taylor", "eval_exp.conf", &["--set", "order=65"]);
    assert_one_line_error(&o, 2);
}
