use std::process::{Command, Output};

fn dppmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dppmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Drops the trailing timing column.
fn without_timing(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn sample_emits_points() {
    let out = dppmc(&["sample", "-d", "2", "-n", "12", "--seed", "5", "--a", "-0.5,0.1", "--b", "0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().flatten().all(|x| x.abs() < 1.0));
}

#[test]
fn sample_is_reproducible() {
    let args = ["sample", "-n", "30", "--seed", "9", "--replicate", "4"];
    assert_eq!(stdout(&dppmc(&args)), stdout(&dppmc(&args)));
}

#[test]
fn estimate_constant_like_integrand() {
    let out = dppmc(&["estimate", "-n", "10", "--seed", "1", "--integrand", "eigsum", "--eigsum-m", "1", "--estimator", "ez"]);
    assert_eq!(out.status.code(), Some(0));
    let value: f64 = stdout(&out).trim().parse().unwrap();
    // a = b = -1/2: μ(X) = π and the integral is √π
    assert!((value - std::f64::consts::PI.sqrt()).abs() < 1e-8, "{value}");
}

#[test]
fn experiment_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.conf");
    std::fs::write(
        &cfg,
        "# small sweep\nintegrand = cosine\nd = 2\nn_grid = 5, 8\nreplicates = 4\nestimators = bh, ez, mc\npolicy = paper-random\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let first = dppmc(&["experiment", "--config", cfg, "--seed", "17"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let second = dppmc(&["experiment", "--config", cfg, "--seed", "17"]);
    let text = stdout(&first);
    assert!(text.starts_with("estimator,d,N,replicate,value,failed,cond_estimate,rejections,elapsed_ns\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 4);
    assert!(!text.contains('\r'));
    assert_eq!(without_timing(&text), without_timing(&stdout(&second)));
}

#[test]
fn flags_override_config_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.conf");
    let out_path = dir.path().join("rows.csv");
    std::fs::write(&cfg, "integrand = abs\nn_grid = 4, 6\nreplicates = 3\nestimators = bh\n").unwrap();
    let out = dppmc(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "2",
        "--estimators",
        "mc,bh",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_path).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert!(text.lines().nth(1).unwrap().starts_with("MC,"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(dppmc(&["experiment"]).status.code(), Some(1));
    assert_eq!(dppmc(&["experiment", "--seed", "1", "--n-grid", "9,3"]).status.code(), Some(1));
    assert_eq!(dppmc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dppmc(&["sample", "-d", "2", "-n", "3", "--seed", "1", "--a", "0.9"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(
        dppmc(&["experiment", "--seed", "1", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(dppmc(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_reports_rejection_ratio() {
    let out = dppmc(&["bench", "--d-grid", "1,2", "--n-grid", "10,20", "-r", "2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,N,method,replicates,mean_elapsed_ns,mean_rejections,ratio");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1,10,tridiagonal,2,"));
    assert!(lines[3].starts_with("2,10,chain-rule,2,"));
}
