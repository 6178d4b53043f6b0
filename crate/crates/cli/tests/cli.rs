use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use celldiv::analysis::identities::IdentityCheck;
use celldiv::analysis::{ConsistencyReport, RateEstimate, Verdict};
use celldiv::engine::dump::read_dump;
use serde_json::{json, Value};
use tempfile::TempDir;

const SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

fn stit_config() -> Value {
    json!({
        "version": 1,
        "seed": 42,
        "measures": {"lambda": {"intensity": 1.0, "directions": "isotropic"}},
        "rules": {
            "selection": {"kind": "hitting_measure", "measure": "lambda"},
            "division": {"kind": "restricted_measure", "measure": "lambda"}
        },
        "simulate": {"window": SQUARE, "time": 3.0},
        "consistency": {
            "inner": SQUARE,
            "outer": [[0, 0], [3, 0], [3, 3], [0, 3]],
            "times": [0.75, 1.5],
            "n_reps": 2000
        },
        "verify": {"identities": ["fundamental_equation", "nu_limit", "corollary", "lambda_nu", "division_law"]},
        "rate": {
            "window": SQUARE,
            "probe": [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]],
            "dt": [0.01],
            "n_reps": 5000
        }
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(cmd: &str, cfg: &Value, out: &Path, extra: &[&str]) -> Output {
    let tmp = TempDir::new().unwrap();
    let path = write_config(tmp.path(), cfg);
    Command::new(env!("CARGO_BIN_EXE_celldiv"))
        .arg(cmd)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("process exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_is_byte_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = run("simulate", &stit_config(), d.path(), &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["dump.txt", "plot.svg"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn dump_round_trips_and_matches_plot() {
    let d = TempDir::new().unwrap();
    let o = run("simulate", &stit_config(), d.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let file = fs::File::open(d.path().join("dump.txt")).unwrap();
    let (header, segments) = read_dump(BufReader::new(file)).unwrap();
    assert_eq!(header.seed, 42);
    assert_eq!(header.time, 3.0);
    assert_eq!(header.window.len(), 4);
    assert!(!segments.is_empty());
    assert!(segments.iter().all(|s| s.birth_time <= 3.0));
    let svg = fs::read_to_string(d.path().join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<line ").count(), segments.len());
}

#[test]
fn tiny_time_gives_empty_dump() {
    let d = TempDir::new().unwrap();
    let mut cfg = stit_config();
    cfg["simulate"]["time"] = json!(1e-12);
    let o = run("simulate", &cfg, d.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let file = fs::File::open(d.path().join("dump.txt")).unwrap();
    let (_, segments) = read_dump(BufReader::new(file)).unwrap();
    assert!(segments.is_empty());
    let svg = fs::read_to_string(d.path().join("plot.svg")).unwrap();
    assert!(svg.contains("<polygon") && !svg.contains("<line"));
}

#[test]
fn seeds_change_the_dump() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&run("simulate", &stit_config(), a.path(), &[])), 0);
    assert_eq!(code(&run("simulate", &stit_config(), b.path(), &["--seed", "43"])), 0);
    let (da, db) = (
        fs::read(a.path().join("dump.txt")).unwrap(),
        fs::read(b.path().join("dump.txt")).unwrap(),
    );
    assert_ne!(da, db);
    let (ha, _) = read_dump(&da[..]).unwrap();
    let (hb, _) = read_dump(&db[..]).unwrap();
    assert_eq!((ha.seed, hb.seed), (42, 43));
}

#[test]
fn stit_consistency_exits_zero() {
    let d = TempDir::new().unwrap();
    let o = run("consistency", &stit_config(), d.path(), &["--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: ConsistencyReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.verdict, Verdict::ConsistentNotRejected);
    assert_eq!(report.tests.len(), 24);
    assert_eq!(fs::read_to_string(d.path().join("report.txt")).unwrap(), report.to_table());
}

#[test]
fn point_driven_consistency_exits_two() {
    let d = TempDir::new().unwrap();
    let mut cfg = stit_config();
    cfg["rules"]["division"] = json!({"kind": "point_driven", "directions": "isotropic"});
    cfg["consistency"]["n_reps"] = json!(10000);
    cfg["consistency"]["alpha"] = json!(0.001);
    let o = run("consistency", &cfg, d.path(), &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let report: ConsistencyReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.verdict, Verdict::InconsistentDetected);
}

#[test]
fn self_intersecting_window_exits_one() {
    let d = TempDir::new().unwrap();
    let mut cfg = stit_config();
    cfg["consistency"]["inner"] = json!([[0, 0], [1, 1], [1, 0], [0, 1]]);
    let o = run("consistency", &cfg, d.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("consistency.inner"), "{}", stderr(&o));
    assert!(!d.path().join("report.json").exists());
}

#[test]
fn unknown_keys_and_versions_rejected() {
    let d = TempDir::new().unwrap();
    let mut typo = stit_config();
    typo["rules"]["selection"]["mesure"] = json!("lambda");
    let o = run("simulate", &typo, d.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("mesure"), "{}", stderr(&o));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let mut version = stit_config();
    version["version"] = json!(2);
    assert_eq!(code(&run("simulate", &version, d.path(), &[])), 1);

    let mut unknown = stit_config();
    unknown["rules"]["division"]["measure"] = json!("mu");
    let o = run("simulate", &unknown, d.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rules.division.measure"), "{}", stderr(&o));

    let mut no_seed = stit_config();
    no_seed.as_object_mut().unwrap().remove("seed");
    assert_eq!(code(&run("simulate", &no_seed, d.path(), &[])), 1);
}

#[test]
fn missing_block_and_bad_flags_exit_one() {
    let d = TempDir::new().unwrap();
    let mut cfg = stit_config();
    cfg.as_object_mut().unwrap().remove("rate");
    let o = run("rate", &cfg, d.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rate"));
    assert_eq!(code(&run("simulate", &stit_config(), d.path(), &["--threads", "0"])), 1);
    assert_eq!(code(&run("simulate", &stit_config(), d.path(), &["--bogus"])), 1);
}

#[test]
fn verify_shared_measure_passes() {
    let d = TempDir::new().unwrap();
    let o = run("verify", &stit_config(), d.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let checks: Vec<IdentityCheck> =
        serde_json::from_str(&fs::read_to_string(d.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(checks.len(), 5);
    assert!(checks.iter().all(|c| c.passed && c.residual < 1e-10));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("pass")).count(), 5);
}

#[test]
fn verify_vertex_count_fails() {
    let d = TempDir::new().unwrap();
    let mut cfg = stit_config();
    cfg["rules"]["selection"] = json!({"kind": "vertex_count"});
    cfg["verify"]["identities"] = json!(["lambda_nu"]);
    let o = run("verify", &cfg, d.path(), &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL"));
}

#[test]
fn verify_empty_list_exits_one() {
    let d = TempDir::new().unwrap();
    let mut cfg = stit_config();
    cfg["verify"]["identities"] = json!([]);
    let o = run("verify", &cfg, d.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nothing to verify"));
}

#[test]
fn inline_measures_are_not_shared() {
    let d = TempDir::new().unwrap();
    let spec = json!({"intensity": 1.0, "directions": "isotropic"});
    let mut cfg = stit_config();
    cfg["rules"]["selection"]["measure"] = spec.clone();
    cfg["rules"]["division"]["measure"] = spec;
    let o = run("consistency", &cfg, d.path(), &[]);
    let report: ConsistencyReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    assert!(!report.rules.contains("(stit)"), "{}", report.rules);
    assert!(code(&o) == 0 || code(&o) == 2);
}

#[test]
fn rate_writes_estimates() {
    let d = TempDir::new().unwrap();
    let o = run("rate", &stit_config(), d.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let est: Vec<RateEstimate> =
        serde_json::from_str(&fs::read_to_string(d.path().join("rate.json")).unwrap()).unwrap();
    assert_eq!(est.len(), 1);
    assert_eq!(est[0].n_reps, 5000);
    assert!((est[0].estimate - 2.0 / std::f64::consts::PI).abs() < 5.0 * est[0].std_error + 0.01);
}
