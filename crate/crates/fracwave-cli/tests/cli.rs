//! End-to-end tests of the command-line front-end: determinism, the
//! simulate -> reconstruct round trip, noise statistics, and exit codes.

use std::path::Path;
use std::process::Command;

fn fracwave() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracwave"))
}

fn run(args: &[&str]) -> std::process::Output {
    fracwave().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const TABLE1_BODY: &str = r#"
[model]
big_lambda = 4.0
alpha = [0.25, 0.5, 0.75]
b = [0.2, 0.25, 0.1]

[excitation]
kind = "velocity"

[sampling]
grid = "uniform"
t_min = 0.0
t_max = 40.0
count = 16000

[method]
kind = "fulltime"
initial_alpha = [0.3, 0.6, 0.8]
initial_b = [0.3, 0.375, 0.15]
initial_lambda = 3.5
"#;

#[test]
fn simulate_and_reports_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "noisy.toml",
        r#"
[model]
big_lambda = 4.0
alpha = [0.5]
b = [0.2]

[sampling]
grid = "uniform"
t_min = 0.0
t_max = 20.0
count = 400

[noise]
level = 1e-3
seed = 7

[method]
kind = "fulltime"
initial_alpha = [0.45]
initial_b = [0.25]
"#,
    );
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let st = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let t1 = std::fs::read(out1.join("trace.csv")).unwrap();
    let t2 = std::fs::read(out2.join("trace.csv")).unwrap();
    assert_eq!(t1, t2, "same seed must give byte-identical traces");

    // a different seed must actually change the artifact
    let st = run(&["simulate", "--config", &cfg, "--out", out2.to_str().unwrap(), "--seed", "8"]);
    assert!(st.status.success());
    let t3 = std::fs::read(out2.join("trace.csv")).unwrap();
    assert_ne!(t1, t3);

    // reconstruction twice from the same trace gives identical reports
    for out in [&out1, &out2] {
        let st = run(&[
            "reconstruct",
            "--config",
            &cfg,
            "--analytic-data",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let r1 = std::fs::read(out1.join("report.txt")).unwrap();
    let r2 = std::fs::read(out2.join("report.txt")).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn simulate_then_reconstruct_recovers_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "table1.toml", TABLE1_BODY);
    let out = dir.path().to_str().unwrap();
    let st = run(&["simulate", "--config", &cfg, "--out", out]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let st = run(&["reconstruct", "--config", &cfg, "--out", out]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();

    let field = |key: &str| -> Vec<f64> {
        report
            .lines()
            .find(|l| l.starts_with(key))
            .unwrap_or_else(|| panic!("missing {key} in report:\n{report}"))
            .split('=')
            .nth(1)
            .unwrap()
            .split(',')
            .map(|x| x.trim().parse().unwrap())
            .collect()
    };
    assert!(report.contains("status = Converged"), "{report}");
    let lam = field("recovered_lambda")[0];
    let alpha = field("recovered_alpha");
    let b = field("recovered_b");
    assert!((lam - 4.0).abs() < 1e-2, "lambda = {lam}");
    for (got, want) in alpha.iter().zip([0.25, 0.5, 0.75]) {
        assert!((got - want).abs() < 0.05, "alpha {got} vs {want}");
    }
    for (got, want) in b.iter().zip([0.2, 0.25, 0.1]) {
        assert!((got - want).abs() < 0.05, "b {got} vs {want}");
    }
}

#[test]
fn noise_statistics_match_the_requested_level() {
    let dir = tempfile::tempdir().unwrap();
    let base = r#"
[model]
big_lambda = 4.0
alpha = [0.5]
b = [0.2]

[sampling]
grid = "uniform"
t_min = 1.0
t_max = 30.0
count = 4000

[method]
kind = "fulltime"
initial_alpha = [0.5]
initial_b = [0.2]
"#;
    let clean_cfg = write_config(dir.path(), "clean.toml", base);
    let noisy_cfg = write_config(
        dir.path(),
        "noisy.toml",
        &format!("{base}\n[noise]\nlevel = 1e-3\nseed = 11\n"),
    );
    let c_out = dir.path().join("clean");
    let n_out = dir.path().join("noisy");
    assert!(run(&["simulate", "--config", &clean_cfg, "--out", c_out.to_str().unwrap()])
        .status
        .success());
    assert!(run(&["simulate", "--config", &noisy_cfg, "--out", n_out.to_str().unwrap()])
        .status
        .success());
    let parse = |p: &Path| -> Vec<f64> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let clean = parse(&c_out.join("trace.csv"));
    let noisy = parse(&n_out.join("trace.csv"));
    let rel: Vec<f64> =
        clean.iter().zip(&noisy).map(|(c, n)| (n - c) / c).collect();
    let var = rel.iter().map(|x| x * x).sum::<f64>() / rel.len() as f64;
    let level2 = 1e-6;
    assert!(
        (var - level2).abs() < 0.1 * level2,
        "sample variance {var:.3e} vs level^2 {level2:.3e}"
    );
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    // a typo'd key must be rejected, not silently ignored
    let cfg = write_config(
        dir.path(),
        "typo.toml",
        &TABLE1_BODY.replace("initial_lambda", "initial_lamda"),
    );
    let out = run(&["reconstruct", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("initial_lamda"),
        "error should name the offending key"
    );

    let missing = dir.path().join("nope.toml");
    let out = run(&["simulate", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn method_failures_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    // a tail window spanning less than a factor 2 cannot separate exponents
    let cfg = write_config(
        dir.path(),
        "narrow.toml",
        r#"
[model]
big_lambda = 1.0
alpha = [0.25]
b = [0.1]

[sampling]
grid = "geometric"
t_min = 100000.0
t_max = 150000.0
count = 64

[method]
kind = "largetime"
initial_alpha = [0.2]
initial_b = [0.1]
"#,
    );
    let out = run(&["reconstruct", "--config", &cfg, "--analytic-data"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn io_failures_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "table1.toml", TABLE1_BODY);
    // reconstruct without a prior simulate: the trace artifact is missing
    let out = run(&["reconstruct", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_passes_on_a_valid_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "table1.toml", TABLE1_BODY);
    let out = run(&["verify", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("poles-left-half-plane: pass"), "{text}");
    assert!(!text.contains("FAIL"), "{text}");
}
