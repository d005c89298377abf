use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_tmreadout");

fn sample() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/current_sample.toml");
    std::fs::read_to_string(path).unwrap()
}

/// Sample config with a smaller shot budget so the binary runs quickly.
fn small_sample() -> String {
    sample()
        .replace("shots = 1_000_000", "shots = 20_000\nemit_shots = true")
        .replace("shots_per_cell = 10_000", "shots_per_cell = 2_000")
}

fn write(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn tmreadout(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn derive_succeeds_and_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &sample());
    let out = tmp.path().join("out");
    let o = tmreadout(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "derive"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("parameters.csv")).unwrap();
    assert!(table.starts_with("name,value,unit\n"));
    assert!(table.contains("chi_qu,"));
    let s = summary(&out);
    assert_eq!(s["provenance"]["command"], "derive");
    assert_eq!(s["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn structured_format_writes_json_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &sample());
    let out = tmp.path().join("out");
    let o = tmreadout(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "structured-document",
        "limits",
    ]);
    assert!(o.status.success());
    let rows: Vec<Value> = serde_json::from_slice(&std::fs::read(out.join("limits.json")).unwrap()).unwrap();
    assert!(rows.iter().any(|r| r["name"] == "n_crit"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &sample().replace("kappa_r = 17.9e6", "kappa_rr = 17.9e6"));
    let o = tmreadout(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "derive"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa_rr"));
}

#[test]
fn missing_field_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &sample().replace("e_j = 3.84e9\n", ""));
    let o = tmreadout(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "derive"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("e_j"));
}

#[test]
fn missing_section_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = sample();
    let cut = text.find("[sweep]").unwrap();
    let end = text[cut..].find("\n\n").unwrap() + cut;
    let cfg = write(tmp.path(), &format!("{}{}", &text[..cut], &text[end..]));
    let o = tmreadout(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "qnd-sweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep"));
}

#[test]
fn simulate_without_seed_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &small_sample().replace("seed = 20240611\n", ""));
    let o = tmreadout(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn unreadable_config_is_an_io_error() {
    let o = tmreadout(&["--config", "/nonexistent/run.toml", "derive"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_physics_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &sample().replace("c_s = 132e-15", "c_s = -132e-15"));
    let o = tmreadout(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "derive"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config_and_changes_shots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &small_sample());
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = tmreadout(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed, "simulate"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out.join("shots.csv")).unwrap(), summary(&out))
    };
    let (a, sa) = run("5", "a");
    let (b, _) = run("6", "b");
    let (a2, _) = run("5", "c");
    assert_ne!(a, b);
    assert_eq!(a, a2);
    assert_eq!(sa["provenance"]["seed"], 5);
    let header = String::from_utf8_lossy(&a);
    assert!(header.starts_with("index,prep,i,q,label,jump_count\n"));
}

#[test]
fn single_cell_sweep_matches_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_sample()
        .replace(
            "durations = [100e-9, 200e-9, 400e-9, 600e-9, 800e-9, 1000e-9, 1200e-9, 1600e-9]",
            "durations = [400e-9]",
        )
        .replace("photons = [50, 100, 150, 200, 250, 300, 420, 450]", "photons = [89]")
        .replace("shots_per_cell = 2_000", "shots_per_cell = 20_000");
    let cfg = write(tmp.path(), &text);
    let a = tmp.path().join("sim");
    let b = tmp.path().join("sweep");
    assert!(tmreadout(&["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "simulate"]).status.success());
    assert!(tmreadout(&["--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "qnd-sweep"]).status.success());
    let sim = summary(&a)["result"]["qnd"]["p_qnd"].as_f64().unwrap();
    let sweep = summary(&b)["result"]["one_minus_p_qnd"][0][0].as_f64().unwrap();
    assert_eq!(1.0 - sim, sweep);
}

#[test]
fn calibrate_reads_back_its_own_map() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &sample());
    let first = tmp.path().join("first");
    assert!(tmreadout(&["--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap(), "calibrate"]).status.success());
    let map = first.join("stark_map.csv");
    let text = sample();
    let start = text.find("[calibration]").unwrap();
    let end = text.find("[limits.coherence]").unwrap();
    let replay = format!(
        "{}[calibration]\nmap_file = \"{}\"\nchi_qr = -0.77e6\n\n{}",
        &text[..start],
        map.display(),
        &text[end..]
    );
    let cfg2 = tmp.path().join("replay.toml");
    std::fs::write(&cfg2, replay).unwrap();
    let second = tmp.path().join("second");
    let o = tmreadout(&["--config", cfg2.to_str().unwrap(), "--out", second.to_str().unwrap(), "calibrate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s1 = summary(&first)["result"]["calibration"]["slope"].as_f64().unwrap();
    let s2 = summary(&second)["result"]["calibration"]["slope"].as_f64().unwrap();
    assert!((s1 / s2 - 1.0).abs() < 1e-9, "{s1} {s2}");
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &small_sample());
    let files = |workers: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = tmreadout(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers, "qnd-sweep"]);
        assert!(o.status.success());
        (std::fs::read(out.join("qnd_sweep.csv")).unwrap(), std::fs::read(out.join("summary.json")).unwrap())
    };
    assert_eq!(files("1", "w1"), files("3", "w3"));
}
