use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use tvpsv::synth::{ScenarioKind, SyntheticScenario};
use tvpsv::QuarterDate;
use tvpsv_cli::config::{load_config, RunConfig};
use tvpsv_cli::manifest::read_manifest;
use tvpsv_cli::pipeline::{run, RunOptions, Stage};

fn q(y: i32, n: u8) -> QuarterDate {
    QuarterDate::new(y, n).unwrap()
}

fn cli(args: &[&str]) -> i32 {
    let mut full = vec!["tvpsv"];
    full.extend_from_slice(args);
    tvpsv_cli::main_with_args(full)
}

fn write_json(path: &Path, value: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

/// Two-variable synthetic panel from 1960Q1 plus a small, fast run config.
fn synthetic_setup(dir: &Path) -> PathBuf {
    let scenario = SyntheticScenario {
        kind: ScenarioKind::ConstantVar,
        periods: 160,
        seed: 3,
        b: vec![vec![0.9, 0.05], vec![-0.1, 0.8]],
        a: vec![vec![1.0, 0.0], vec![0.4, 1.0]],
        sigma: vec![1.0, 0.5],
        q: None,
        s: None,
        w: None,
        variables: Some(vec!["x".into(), "y".into()]),
        start: Some(q(1960, 1)),
    };
    let (panel, _) = scenario.simulate().unwrap();
    panel.save_csv(dir.join("panel.csv")).unwrap();
    let config = json!({
        "panel": "panel.csv",
        "variables": ["x", "y"],
        "sample": {"start": null, "end": null},
        "scales": {"x": 100.0},
        "peaks": ["1969Q4", "1973Q4", "1981Q3", "1990Q3"],
        "eras": [{"label": "early", "start": "1963Q1", "end": "1979Q4"}],
        "describe": {
            "phase_pairs": [["x", "y"]],
            "reference": [{"window": "1969Q4-1973Q4", "variable": "x", "value": 1000.0}]
        },
        "model": {"n_draws": 700, "burn_in": 100, "thinning": 1, "seed": 11},
        "priors": {"training_size": 20},
        "irf": {"dates": ["1975Q1", "1985Q2"], "horizons": [1, 4, 8]},
        "output": "out"
    });
    let path = dir.join("run.json");
    write_json(&path, &config);
    path
}

fn files_in(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out
}

#[test]
fn default_config_matches_golden_file_and_reference_settings() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/us_default.json");
    let loaded = load_config(&golden).unwrap();
    assert!(loaded.warnings.is_empty());
    assert_eq!(loaded.config, RunConfig::default());
    assert!(loaded.config.validate().is_empty());

    let c = RunConfig::default();
    assert_eq!((c.filter.lookahead, c.filter.lags), (8, 4));
    assert_eq!(
        c.peaks,
        vec![q(1969, 4), q(1973, 4), q(1981, 3), q(1990, 3), q(2001, 1), q(2007, 4), q(2019, 4)]
    );
    assert_eq!(c.describe.cycle_extension, 4);
    assert_eq!(c.model.lags, 1);
    assert_eq!((c.model.n_draws, c.model.burn_in), (55_000, 5_000));
    assert_eq!(c.irf.horizons, vec![1, 4, 8, 12, 20]);
    assert_eq!(
        c.irf.dates,
        vec![q(1973, 1), q(1981, 3), q(1990, 3), q(2001, 1), q(2007, 4), q(2019, 4)]
    );
    assert_eq!(c.variables, ["psi", "e", "g", "s"]);
    assert_eq!((c.sample.start, c.sample.end), (Some(q(1953, 2)), Some(q(2022, 4))));
    let eras: Vec<_> = c.eras.iter().map(|e| (e.start, e.end)).collect();
    assert_eq!(eras, vec![(q(1956, 1), q(1984, 4)), (q(1985, 1), q(2019, 4))]);
}

#[test]
fn describe_stage_emits_only_descriptive_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = synthetic_setup(dir.path());
    let out = dir.path().join("describe_only");
    let code = cli(&["run", "--config", config.to_str().unwrap(), "--stages", "describe", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let mut expected: BTreeSet<String> = ["cycles.csv", "ccf.csv", "manifest.json"].map(String::from).into();
    for (a, b) in [("1969Q4", "1973Q4"), ("1973Q4", "1981Q3"), ("1981Q3", "1990Q3")] {
        expected.insert(format!("phase_x_y_{a}_{b}.csv"));
    }
    assert_eq!(files_in(&out), expected);

    let cycles = std::fs::read_to_string(out.join("cycles.csv")).unwrap();
    assert!(cycles.starts_with("window_start,window_end,variable,std\n"));
    // Three cycles and one era, two variables each.
    assert_eq!(cycles.lines().count(), 1 + 4 * 2);
    assert!(cycles.contains("\n1969Q4,1974Q4,x,"));
    assert!(cycles.contains("\n1963Q1,1979Q4,y,"));
    let ccf = std::fs::read_to_string(out.join("ccf.csv")).unwrap();
    assert!(ccf.starts_with("x,y,lag,rho,threshold\n"));
    assert_eq!(ccf.lines().count(), 1 + 17);
    let phase = std::fs::read_to_string(out.join("phase_x_y_1969Q4_1973Q4.csv")).unwrap();
    assert!(phase.starts_with("date,x,y,is_first,is_last\n1969Q4,"));
    assert_eq!(phase.lines().count(), 1 + 21);
}

#[test]
fn full_run_is_reproducible_and_reuses_saved_chains() {
    let dir = tempfile::tempdir().unwrap();
    let config = synthetic_setup(dir.path());
    let loaded = load_config(&config).unwrap();
    let opts = |out: &str| RunOptions {
        out: Some(dir.path().join(out)),
        ..RunOptions::default()
    };
    let first = run(&loaded, &opts("a")).unwrap();
    let second = run(&loaded, &opts("b")).unwrap();
    assert_eq!(first.manifest.stable_hashes(), second.manifest.stable_hashes());
    let names: BTreeSet<&str> = first.manifest.files.iter().map(|f| f.path.as_str()).collect();
    for f in [
        "panel.csv",
        "cyclical.csv",
        "cycles.csv",
        "ccf.csv",
        "diagnostics.csv",
        "timing.json",
        "irf.csv",
        "irf_density.csv",
        "volatility.csv",
        "summary.txt",
    ] {
        assert!(names.contains(f), "missing {f}");
    }
    assert!(first.manifest.files.iter().any(|f| f.path == "timing.json" && f.volatile));
    assert_eq!(read_manifest(&first.out_dir).unwrap(), first.manifest);

    let summary = std::fs::read_to_string(first.out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("0 of 1 cells within tolerance"), "{summary}");
    assert!(summary.contains("NOTE: cells outside tolerance"));
    assert!(summary.contains("retained draws 600"));
    assert!(summary.contains("IMPULSE RESPONSES"));

    let irf = std::fs::read_to_string(first.out_dir.join("irf.csv")).unwrap();
    assert!(irf.starts_with("peak,shock,response,horizon,median,p17,p83\n"));
    // 2 dates x 2 shocks x 2 responses x 3 horizons.
    assert_eq!(irf.lines().count(), 1 + 24);

    // Save the chain, then run the response stage alone: it must reuse the
    // archive and reproduce the same responses.
    let mut saving = loaded.clone();
    saving.config.save_chain = true;
    let c_dir = dir.path().join("c");
    run(
        &saving,
        &RunOptions {
            stages: vec![Stage::Estimate],
            out: Some(c_dir.clone()),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(c_dir.join("chain/0/meta.json").is_file());
    run(
        &saving,
        &RunOptions {
            stages: vec![Stage::Irf],
            out: Some(c_dir.clone()),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(std::fs::read(c_dir.join("irf.csv")).unwrap(), irf.into_bytes());
}

#[test]
fn seed_override_and_multiple_chains() {
    let dir = tempfile::tempdir().unwrap();
    let config = synthetic_setup(dir.path());
    let loaded = load_config(&config).unwrap();
    let go = |out: &str, seed: Option<u64>, chains: usize| {
        run(
            &loaded,
            &RunOptions {
                stages: vec![Stage::Estimate, Stage::Irf, Stage::Report],
                out: Some(dir.path().join(out)),
                seed,
                chains,
            },
        )
        .unwrap()
    };
    let base = go("base", None, 1);
    let other = go("other", Some(12), 1);
    let hash = |m: &tvpsv_cli::manifest::Manifest, f: &str| {
        m.files.iter().find(|e| e.path == f).unwrap().sha256.clone()
    };
    assert_ne!(hash(&base.manifest, "irf.csv"), hash(&other.manifest, "irf.csv"));
    assert_eq!(other.manifest.seed, 12);

    let two = go("two", None, 2);
    let summary = std::fs::read_to_string(two.out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("chains 2, retained draws 1200"), "{summary}");
    let diag = std::fs::read_to_string(two.out_dir.join("diagnostics.csv")).unwrap();
    assert!(diag.lines().any(|l| l.starts_with("1,")));
}

#[test]
fn raw_sources_are_constructed_and_aligned() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let quarters: Vec<QuarterDate> = (0..160).map(|i| q(1958, 1) + i).collect();
    let quarterly = |name: &str, f: &dyn Fn(usize) -> f64| {
        let mut s = String::from("date,value\n");
        for (i, d) in quarters.iter().enumerate() {
            writeln!(s, "{d},{}", f(i)).unwrap();
        }
        std::fs::write(data.join(format!("{name}.csv")), s).unwrap();
    };
    quarterly("compensation", &|i| 600.0 + 3.0 * i as f64 + 10.0 * (i as f64 / 5.0).sin());
    quarterly("net_interest", &|i| 50.0 + i as f64 * 0.2);
    quarterly("rental_income", &|i| 40.0 + (i as f64 / 3.0).cos());
    quarterly("corporate_profits", &|i| 150.0 + 20.0 * (i as f64 / 7.0).sin());
    quarterly("capital_consumption", &|i| 100.0 + i as f64);
    quarterly("residential_investment", &|i| 80.0 + 0.5 * i as f64 + 8.0 * (i as f64 / 6.0).sin());
    // Monthly FRED-style files, starting a year earlier than the others.
    let monthly = |id: &str, f: &dyn Fn(usize) -> f64| {
        let mut s = format!("observation_date,{id}\n");
        for m in 0..(172 * 3) {
            let (year, month) = (1957 + m / 12, m % 12 + 1);
            writeln!(s, "{year}-{month:02}-01,{}", f(m)).unwrap();
        }
        std::fs::write(data.join(format!("{id}.csv")), s).unwrap();
    };
    monthly("UNRATE", &|m| 5.0 + (m as f64 / 20.0).sin());
    monthly("GS10", &|m| 5.0 + (m as f64 / 30.0).sin());
    monthly("TB3MS", &|m| 3.0 + (m as f64 / 25.0).cos());

    let mut config = serde_json::to_value(RunConfig::default()).unwrap();
    config["sample"] = json!({"start": "1958Q1", "end": "1997Q4"});
    config["eras"] = json!([{"label": "all", "start": "1961Q1", "end": "1989Q4"}]);
    config["peaks"] = json!(["1969Q4", "1973Q4", "1981Q3"]);
    config["describe"]["reference"] = json!([]);
    config["irf"]["dates"] = json!(["1980Q1"]);
    let path = dir.path().join("run.json");
    write_json(&path, &config);

    let out = dir.path().join("out");
    let code = cli(&["run", "--config", path.to_str().unwrap(), "--stages", "ingest,filter", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let panel = tvpsv::ingest::AlignedPanel::load_csv(out.join("panel.csv")).unwrap();
    assert_eq!(panel.variables(), ["psi", "e", "g", "s"]);
    assert_eq!((panel.start(), panel.end(), panel.len()), (q(1958, 1), q(1997, 4), 160));
    // Row 0: psi = ln(600 / (600 + 50 + 41 + 150 + 100)).
    let psi0 = panel.values()[(0, 0)];
    assert!((psi0 - (600.0f64 / 941.0).ln()).abs() < 1e-12, "{psi0}");
    // 1958Q1 employment: months 12, 13, 14 of the monthly file.
    let e0 = 100.0 - (12..15).map(|m| 5.0 + (m as f64 / 20.0).sin()).sum::<f64>() / 3.0;
    assert!((panel.values()[(0, 1)] - e0).abs() < 1e-12);
    let cyc = tvpsv::ingest::AlignedPanel::load_csv(out.join("cyclical.csv")).unwrap();
    assert_eq!((cyc.start(), cyc.len()), (q(1960, 4), 149));
}

#[test]
fn missing_input_exits_2_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    write_json(&path, &json!({"sample": {"start": "1953Q2", "end": "2022Q4"}}));
    let bin = env!("CARGO_BIN_EXE_tvpsv");
    let out = std::process::Command::new(bin)
        .args(["run", "--config", path.to_str().unwrap(), "--stages", "ingest"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("data/compensation.csv"), "{stderr}");
}

#[test]
fn stage_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = synthetic_setup(dir.path());
    let mut value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    // A training sample longer than the data cannot be fitted.
    value["priors"]["training_size"] = json!(400);
    write_json(&config, &value);
    let code = cli(&["run", "--config", config.to_str().unwrap(), "--stages", "estimate"]);
    assert_eq!(code, 1);
}

#[test]
fn validate_reports_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    write_json(&bad, &json!({"model": {"burn_in": 60000, "n_draws": 55000}}));
    assert_eq!(cli(&["validate", "--config", bad.to_str().unwrap()]), 2);

    let warn = dir.path().join("warn.json");
    write_json(&warn, &json!({"modle": {"seed": 1}}));
    assert_eq!(cli(&["validate", "--config", warn.to_str().unwrap()]), 0);
    let loaded = load_config(&warn).unwrap();
    assert_eq!(loaded.warnings.len(), 1);
    assert_eq!(loaded.warnings[0].field, "modle");

    let diags = load_config(&bad).unwrap().config.validate();
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].field, "model.burn_in");

    assert_eq!(cli(&["validate", "--config", dir.path().join("nope.json").to_str().unwrap()]), 2);
    assert_eq!(cli(&["run", "--config", bad.to_str().unwrap()]), 2);
    assert_eq!(cli(&["frobnicate"]), 2);
}

#[test]
fn simulate_writes_panel_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic_scenario.json");
    let out = dir.path().join("sim");
    assert_eq!(cli(&["simulate", "--config", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let panel = tvpsv::ingest::AlignedPanel::load_csv(out.join("panel.csv")).unwrap();
    assert_eq!(panel.variables(), ["psi", "e", "g", "s"]);
    assert_eq!(panel.len(), 268);
    let truth = std::fs::read_to_string(out.join("truth.csv")).unwrap();
    // 16 coefficients, 6 contemporaneous elements and 4 log-volatilities.
    assert_eq!(truth.lines().count(), 1 + 268 * 26);
    let again = dir.path().join("sim2");
    cli(&["simulate", "--config", scenario.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(read_manifest(&out).unwrap().files, read_manifest(&again).unwrap().files);
    let reseeded = dir.path().join("sim3");
    cli(&["simulate", "--config", scenario.to_str().unwrap(), "--out", reseeded.to_str().unwrap(), "--seed", "5"]);
    assert_ne!(
        std::fs::read(out.join("panel.csv")).unwrap(),
        std::fs::read(reseeded.join("panel.csv")).unwrap()
    );
}
