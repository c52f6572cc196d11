//! End-to-end behaviour of the ensemble harness on small configurations.

use spde_lab::harness::{load, persist, ExperimentKind, InitialCondition, SERIES_FILE, SUMMARY_FILE};
use spde_lab::sode::simulate_euler;
use spde_lab::spde::simulate_truncated;
use spde_lab::{derive_stream, run_ensemble, Error, ExperimentConfig, RunOptions};

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(kind);
    c.seed = 7;
    c.paths = 6;
    c.stability = false;
    match kind {
        ExperimentKind::SodeBounds => {
            c.horizon = 0.5;
            c.dt = 1e-3;
            c.sample_every = 100;
        }
        ExperimentKind::SodeAsymptotic => c.paths = 200,
        ExperimentKind::SpdeMartingale | ExperimentKind::LpNorms => {
            c.grid = 16;
            c.dt = 1e-3;
            c.horizon = 0.02;
            c.sample_every = 5;
        }
        ExperimentKind::SpdeConverge => {
            c.grid = 16;
            c.dt = 1e-3;
            c.horizon = 0.02;
        }
        ExperimentKind::BlowupScan => {
            c.grid = 16;
            c.dt = 1e-3;
            c.horizon = 0.02;
            c.sample_every = 10;
        }
        ExperimentKind::FourierCheck => {
            c.grid = 16;
            c.dt_ladder = vec![2e-3, 1e-3];
            c.horizon = 0.02;
        }
    }
    c
}

#[test]
fn summaries_do_not_depend_on_worker_count() {
    for kind in ExperimentKind::ALL {
        let c = small(kind);
        let one = run_ensemble(&c, &RunOptions::workers(1)).unwrap();
        let three = run_ensemble(&c, &RunOptions::workers(3)).unwrap();
        assert_eq!(one.to_json(), three.to_json(), "{kind}");
        assert_eq!(one.series, three.series, "{kind}");
        assert_eq!(one.content_hash, one.compute_content_hash());
    }
}

#[test]
fn single_sode_path_matches_the_simulator() {
    let mut c = small(ExperimentKind::SodeBounds);
    c.paths = 1;
    let summary = run_ensemble(&c, &RunOptions::workers(1)).unwrap();
    let direct = simulate_euler(&c.sode_config().unwrap(), &derive_stream(c.seed, 0)).unwrap();
    let rows = summary.series_of("u");
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), direct.values);
    assert_eq!(rows.iter().map(|r| r.time).collect::<Vec<_>>(), direct.times);
    assert_eq!(summary.statistics["sup"].mean, direct.running_max);
}

#[test]
fn single_spde_path_matches_the_simulator() {
    let mut c = small(ExperimentKind::SpdeMartingale);
    c.paths = 1;
    c.initial = InitialCondition::Cosine {
        mean: 1.0,
        amplitude: 0.5,
        mode: 1,
    };
    let summary = run_ensemble(&c, &RunOptions::workers(1)).unwrap();
    let direct = simulate_truncated(&c.spde_config().unwrap(), &derive_stream(c.seed, 0)).unwrap();
    let mass: Vec<f64> = summary.series_of("mass").iter().map(|r| r.value).collect();
    assert_eq!(mass, direct.mass);
    assert_eq!(summary.statistics["terminal_mass"].mean, direct.terminal_mass);
    assert_eq!(summary.statistics["accumulated_qv"].mean, direct.accumulated_qv);
}

#[test]
fn series_rows_cover_every_path_time_and_functional() {
    let c = small(ExperimentKind::SpdeMartingale);
    let summary = run_ensemble(&c, &RunOptions::workers(2)).unwrap();
    let steps = (c.horizon / c.dt).round() as usize;
    let times = steps / c.sample_every + 1;
    assert_eq!(summary.series_rows, c.paths * times * summary.series_functionals.len());

    let dir = tempfile::tempdir().unwrap();
    persist(&summary, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join(SERIES_FILE)).unwrap();
    assert_eq!(csv.lines().count(), summary.series_rows + 1);
}

#[test]
fn retained_fields_add_one_series_per_cell() {
    let mut c = small(ExperimentKind::SpdeMartingale);
    c.retain_fields = true;
    let summary = run_ensemble(&c, &RunOptions::workers(1)).unwrap();
    assert_eq!(summary.series_of("u[0]").len(), c.paths * 5);
    assert!(summary.series_functionals.contains(&format!("u[{}]", c.grid - 1)));
}

#[test]
fn persisted_runs_load_back_identically() {
    for kind in [ExperimentKind::SodeBounds, ExperimentKind::FourierCheck, ExperimentKind::BlowupScan] {
        let summary = run_ensemble(&small(kind), &RunOptions::workers(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        persist(&summary, dir.path()).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(back, summary, "{kind}");
    }
}

#[test]
fn empty_series_writes_only_the_header() {
    let summary = run_ensemble(&small(ExperimentKind::SodeAsymptotic), &RunOptions::workers(1)).unwrap();
    assert_eq!(summary.series_rows, 0);
    let dir = tempfile::tempdir().unwrap();
    persist(&summary, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join(SERIES_FILE)).unwrap();
    assert_eq!(csv, "path_index,functional,time,value\n");
    assert_eq!(load(dir.path()).unwrap(), summary);
}

#[test]
fn tampered_series_is_detected() {
    let summary = run_ensemble(&small(ExperimentKind::SodeBounds), &RunOptions::workers(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    persist(&summary, dir.path()).unwrap();
    let path = dir.path().join(SERIES_FILE);
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = csv.lines().collect();
    lines.pop();
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert!(matches!(load(dir.path()), Err(Error::Format { .. })));

    persist(&summary, dir.path()).unwrap();
    let summary_path = dir.path().join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&summary_path).unwrap().replacen("\"paths\": 6", "\"paths\": 7", 1);
    std::fs::write(&summary_path, text).unwrap();
    assert!(load(dir.path()).is_err());
}

#[test]
fn seeds_change_results() {
    let a = small(ExperimentKind::SpdeMartingale);
    let mut b = a.clone();
    b.seed += 1;
    let ra = run_ensemble(&a, &RunOptions::workers(1)).unwrap();
    let rb = run_ensemble(&b, &RunOptions::workers(1)).unwrap();
    assert_ne!(ra.series_digest, rb.series_digest);
    assert_ne!(ra.config_hash, rb.config_hash);
}

#[test]
fn malformed_configs_are_rejected() {
    let kind = Some(ExperimentKind::SpdeMartingale);
    for text in [
        "paths = 0",
        "grid = 2",
        "dt = -1.0",
        "gamma = 0.5",
        "unknown_key = 1",
        "trunc = \"lots\"",
        "paths = \"many\"",
        "kind = \"sode-bounds\"",
        "scheme = \"explicit\"\ndt = 0.01",
        "alphas = [1.5]",
        "this is not toml",
    ] {
        let parsed = ExperimentConfig::from_toml_str(text, kind).and_then(|c| c.validate().map(|_| c));
        assert!(
            matches!(parsed, Err(Error::Config(_))),
            "accepted {text:?}"
        );
    }
    assert!(ExperimentConfig::from_toml_str("", None).is_err());
    let mut c = small(ExperimentKind::SodeBounds);
    c.paths = 0;
    assert!(run_ensemble(&c, &RunOptions::workers(1)).is_err());
    assert!(run_ensemble(&small(ExperimentKind::SodeBounds), &RunOptions::workers(0)).is_err());
}

#[test]
fn untruncated_levels_round_trip_through_toml() {
    let c = ExperimentConfig::from_toml_str("trunc = \"inf\"", Some(ExperimentKind::SpdeMartingale)).unwrap();
    assert!(c.trunc.is_infinite());
    let back = ExperimentConfig::from_toml_str(&c.to_toml_string(), None).unwrap();
    assert_eq!(back, c);
}
