use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn ndsim(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ndsim"));
    cmd.args(args).env_remove("ND_SEED_BASE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("ndsim runs")
}

fn run_cmd(sub: &str, config: &Value, dir: &Path, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let cfg = dir.join(format!("{sub}.json"));
    fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out = dir.join(format!("{sub}-out"));
    let mut args = vec![
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    ndsim(&args, env)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn small_config() -> Value {
    json!({
        "a": 1500, "b": 1500, "node_count": 40, "r": 500,
        "beam_count": 4, "p_t": 0.3,
        "variant": { "base": "CRA", "sic_mode": "perfect" },
        "slot_budget": 300,
        "seeds": { "count": 3, "base": 1 },
        "thresholds": [0.5, 0.95]
    })
}

#[test]
fn sim_writes_curve_and_summary() {
    let dir = TempDir::new().unwrap();
    let o = run_cmd("sim", &small_config(), dir.path(), &[], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("sim-out");
    let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("slot,fraction_mean,fraction_std,seeds"));
    let slots: Vec<u64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(slots.first(), Some(&1));
    assert!(slots.windows(2).all(|w| w[1] == w[0] + 1));
    assert!(*slots.last().unwrap() <= 300);

    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["seeds"], json!([1, 2, 3]));
    assert_eq!(summary["config"]["node_count"], json!(40));
    assert_eq!(summary["tool"], json!("ndsim"));
}

#[test]
fn missing_radius_is_a_parse_error_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let mut c = small_config();
    c.as_object_mut().unwrap().remove("r");
    let o = run_cmd("sim", &c, dir.path(), &[], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`r`"), "{}", stderr(&o));
}

#[test]
fn malformed_json_reports_position() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"node_count\": 10,\n  oops\n}").unwrap();
    let out = dir.path().join("o");
    let o = ndsim(
        &[
            "sim",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn invalid_values_exit_with_code_3() {
    let dir = TempDir::new().unwrap();
    let mut c = small_config();
    c["p_t"] = json!(1.5);
    let o = run_cmd("sim", &c, dir.path(), &[], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let mut c = small_config();
    c["beam_count"] = json!(5);
    let o = run_cmd("sim", &c, dir.path(), &[], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn theory_reports_unpack_bound_and_neighbors_per_beam() {
    let dir = TempDir::new().unwrap();
    let c = json!({
        "node_count": 300, "r": 800, "beam_count": 12, "p_t": 0.5,
        "variant": { "base": "SBA", "sic_mode": "perfect" },
        "slot_budget": 200, "pbar_samples": 2000
    });
    let o = run_cmd("theory", &c, dir.path(), &[], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("theory-out");
    let t = read_json(&out.join("theory.json"));
    assert_eq!(t["n0"], json!(15));
    let k = t["K"].as_f64().unwrap();
    assert!((k - 4.52).abs() < 0.005, "{k}");
    assert_eq!(t["K_int"], json!(5));
    assert!((t["n_bar"].as_f64().unwrap() - 54.2332291116).abs() < 1e-8);

    let csv = fs::read_to_string(out.join("theory.csv")).unwrap();
    assert!(csv.starts_with("slot,expected_fraction\n"));
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn too_few_neighbors_per_beam_is_an_invariant_error() {
    let dir = TempDir::new().unwrap();
    let c = json!({
        "node_count": 20, "r": 800, "beam_count": 12, "p_t": 0.5,
        "variant": { "base": "CRA", "sic_mode": "none" },
        "pbar_samples": 1000
    });
    let o = run_cmd("theory", &c, dir.path(), &[], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("rounds to 0"), "{}", stderr(&o));
}

#[test]
fn sweep_cap_exceeded_exits_with_code_4() {
    let dir = TempDir::new().unwrap();
    let spec = json!({
        "base": small_config(),
        "axes": [
            { "name": "p_t", "start": 0.05, "stop": 0.5, "step": 0.05 },
            { "name": "node_count", "values": [10, 20, 30] }
        ],
        "cap": 20
    });
    let o = run_cmd("sweep", &spec, dir.path(), &[], &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("30"), "{}", stderr(&o));
}

#[test]
fn reruns_give_identical_files() {
    let dir = TempDir::new().unwrap();
    let spec = json!({
        "base": small_config(),
        "axes": [{ "name": "variant", "values": ["CRA", "SBA-SIC-MPR2"] }],
        "fraction_at": [100]
    });
    for sub in ["sim", "sweep"] {
        let cfg = if sub == "sim" {
            small_config()
        } else {
            spec.clone()
        };
        let a = run_cmd(sub, &cfg, dir.path(), &[], &[]);
        assert!(a.status.success(), "{}", stderr(&a));
        let first: Vec<(String, Vec<u8>)> = files(&dir.path().join(format!("{sub}-out")));
        let b = run_cmd(sub, &cfg, dir.path(), &["--jobs", "2"], &[]);
        assert!(b.status.success(), "{}", stderr(&b));
        let second = files(&dir.path().join(format!("{sub}-out")));
        assert_eq!(first, second, "{sub}");
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn single_point_sweep_matches_sim() {
    let dir = TempDir::new().unwrap();
    let spec = json!({ "base": small_config(), "axes": [{ "name": "p_t", "values": [0.3] }] });
    let s = run_cmd("sweep", &spec, dir.path(), &[], &[]);
    assert!(s.status.success(), "{}", stderr(&s));
    let m = run_cmd("sim", &small_config(), dir.path(), &[], &[]);
    assert!(m.status.success(), "{}", stderr(&m));

    let sim = read_json(&dir.path().join("sim-out/summary.json"));
    let sweep = read_json(&dir.path().join("sweep-out/sweep.json"));
    assert_eq!(sweep["points"][0]["seeds"], sim["seeds"]);
    let csv = fs::read_to_string(dir.path().join("sweep-out/results.csv")).unwrap();
    for stats in sim["slots_to_threshold"].as_array().unwrap() {
        let t = stats["threshold"].as_f64().unwrap();
        let metric = format!("slots_to_{t}");
        let row = csv
            .lines()
            .find(|l| l.split(',').nth(2) == Some(metric.as_str()))
            .unwrap_or_else(|| panic!("{metric} missing from {csv}"));
        let mean = row.split(',').nth(3).unwrap();
        match stats["mean"].as_f64() {
            Some(x) => assert_eq!(mean.parse::<f64>().unwrap(), x, "{metric}"),
            None => assert_eq!(mean, "", "{metric}"),
        }
    }
}

#[test]
fn seed_base_override_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = run_cmd(
        "sim",
        &small_config(),
        dir.path(),
        &["--seeds", "2"],
        &[("ND_SEED_BASE", "40")],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_json(&dir.path().join("sim-out/summary.json"));
    assert_eq!(summary["seeds"], json!([40, 41]));
}

#[test]
fn compare_writes_overlays_and_reductions() {
    let dir = TempDir::new().unwrap();
    let spec = json!({
        "base": {
            "a": 1500, "b": 1500, "node_count": 60, "r": 600,
            "beam_count": 4, "p_t": 0.2,
            "variant": { "base": "CRA", "sic_mode": "none" },
            "slot_budget": 300, "seeds": { "count": 2, "base": 1 },
            "pbar_samples": 2000
        },
        "bases": [{ "base": "CRA", "p_t": 0.2, "beam_count": 4 }]
    });
    let o = run_cmd("compare", &spec, dir.path(), &[], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("compare-out");
    let overlay = fs::read_to_string(out.join("overlay.csv")).unwrap();
    assert!(overlay.lines().count() > 1);
    let reductions = fs::read_to_string(out.join("reductions.csv")).unwrap();
    // header plus SIC and SIC+MPR rows for one N
    assert_eq!(reductions.lines().count(), 3, "{reductions}");
    let c = read_json(&out.join("compare.json"));
    assert_eq!(c["gaps"].as_array().unwrap().len(), 3);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for e in fs::read_dir(root).unwrap() {
        let path = e.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let ok = if name.starts_with("sim_") || name.starts_with("theory_") {
            serde_json::from_str::<nd_core::SimConfig>(&text)
                .map(|_| ())
                .map_err(|e| e.to_string())
        } else if name.starts_with("sweep_") {
            serde_json::from_str::<nd_cli::specs::SweepSpec>(&text)
                .map_err(|e| e.to_string())
                .and_then(|s| s.grid().map(|_| ()).map_err(|e| e.to_string()))
        } else {
            serde_json::from_str::<nd_cli::specs::CompareSpec>(&text)
                .map(|_| ())
                .map_err(|e| e.to_string())
        };
        assert!(ok.is_ok(), "{name}: {ok:?}");
    }
}
