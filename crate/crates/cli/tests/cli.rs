//! Exit statuses, determinism and outputs of the `spde-lab` binary.

use std::path::Path;
use std::process::{Command, Output};

const SMALL_SPDE: &[&str] = &["--grid", "16", "--dt", "1e-3", "--horizon", "0.02"];

fn spde_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spde-lab"))
        .args(args)
        .env_remove("SPDE_LAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

#[test]
fn repeated_runs_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (run, workers) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let dir = tmp.path().join(run);
        let mut args = vec!["spde-martingale", "--paths", "1", "--seed", "7", "--workers", workers, "--out"];
        let out = out_arg(&dir);
        args.push(&out);
        args.extend_from_slice(SMALL_SPDE);
        let o = spde_lab(&args);
        assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((o.stdout, read(&dir, "summary.json"), read(&dir, "series.csv"), read(&dir, "config.echo.json")));
        assert!(dir.join("runtime.json").exists());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let summary = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(summary.contains("\"seed\": 7"));
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    let out = tmp.path().join("run");
    for text in ["paths = [1, 2", "paths = 0", "no_such_key = 3", "kind = \"lp-norms\""] {
        std::fs::write(&config, text).unwrap();
        let o = spde_lab(&["spde-martingale", "--config", config.to_str().unwrap(), "--out", &out_arg(&out)]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{text}");
        assert!(!o.stderr.is_empty());
    }
    let o = spde_lab(&["spde-martingale", "--config", "/nonexistent/config.toml", "--out", &out_arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn bad_flags_exit_2() {
    for args in [
        &["spde-martingale", "--no-such-flag"][..],
        &["spde-martingale", "--scheme", "leapfrog"],
        &["spde-martingale", "--paths", "many"],
        &["no-such-experiment"],
        &["sode-bounds", "--workers", "0", "--paths", "1", "--horizon", "0.01", "--dt", "1e-3"],
    ] {
        assert_eq!(spde_lab(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.toml");
    std::fs::write(&config, "seed = 1\npaths = 3\ngrid = 16\ndt = 1e-3\nhorizon = 0.02\nstability = false\n").unwrap();
    let out = tmp.path().join("run");
    let o = spde_lab(&["lp-norms", "--config", config.to_str().unwrap(), "--seed", "5", "--alpha", "0.25,0.5", "--out", &out_arg(&out)]);
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = String::from_utf8(read(&out, "config.echo.json")).unwrap();
    assert!(echo.contains("\"seed\": 5"));
    assert!(echo.contains("\"paths\": 3"));
    assert!(echo.contains("0.25") && echo.contains("0.5"));
}

#[test]
fn workers_default_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = Command::new(env!("CARGO_BIN_EXE_spde-lab"))
        .args(["blowup-scan", "--paths", "2", "--trunc", "inf", "--out", &out_arg(&out)])
        .args(SMALL_SPDE)
        .env("SPDE_LAB_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
    let runtime = String::from_utf8(read(&out, "runtime.json")).unwrap();
    assert!(runtime.contains("\"workers\": 2"));
    assert!(String::from_utf8(read(&out, "config.echo.json")).unwrap().contains("\"trunc\": \"inf\""));
}

#[test]
fn failed_check_exits_1() {
    // Far from the asymptotic regime the rescaled statistic is not chi-square.
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = spde_lab(&["sode-asymptotic", "--paths", "5000", "--horizon", "0.05", "--out", &out_arg(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("[FAIL] ks(chi-square)"));
    assert!(stdout.contains("result: fail"));
}

#[test]
fn passing_run_exits_0_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let o = spde_lab(&["sode-asymptotic", "--paths", "5000", "--out", &out_arg(&run)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = spde_lab(&["plot", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(run.join("plots").join("table-histogram.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("chi-square"));

    let spde = tmp.path().join("spde");
    let mut args = vec!["spde-martingale", "--paths", "3", "--retain-fields", "--out"];
    let s = out_arg(&spde);
    args.push(&s);
    args.extend_from_slice(SMALL_SPDE);
    assert!(spde_lab(&args).status.code().is_some_and(|c| c <= 1));
    let plots = tmp.path().join("plots");
    let o = spde_lab(&["plot", spde.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["mass.svg", "mass-terminal.svg", "fields.svg"] {
        assert!(plots.join(f).exists(), "{f}");
    }
    assert!(!plots.join("u_0_.svg").exists());
}

#[test]
fn plot_of_a_missing_run_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(spde_lab(&["plot", tmp.path().join("none").to_str().unwrap()]).status.code(), Some(2));
}
