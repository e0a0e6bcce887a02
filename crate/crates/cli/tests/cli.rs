use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fewlase::config::RunConfig;
use fewlase::output::config_from_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fewlase"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, body).unwrap();
    p
}

const PAIR: &str = "\
n_atoms = 2
position_0 = 0 0 0
position_1 = 0.7 0 0
dipole_0 = 0 0 1
dipole_1 = 0 0 1
pumped = 0
W = 2
";

#[test]
fn spectrum_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spectrum.csv");
    let cfg = example("triangle4.cfg");
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--grid", "-8:8:161", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(&out).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 161);
    assert!(csv.lines().any(|l| l == "omega,intensity"));
    for r in &rows {
        assert_eq!(r.len(), 2);
        let v: f64 = r[1].parse().unwrap();
        assert!(v >= -1e-12);
    }

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum.csv.terms.json")).unwrap()).unwrap();
    let terms = sidecar["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 56);
    for key in ["nu", "gamma_hwhm", "w_re", "w_im"] {
        assert!(terms[0][key].is_f64(), "{key}");
    }
    assert!(sidecar["total_rate"].as_f64().unwrap() > 0.0);
    let weight: f64 = terms.iter().map(|t| t["w_re"].as_f64().unwrap()).sum();
    assert!((weight - sidecar["total_rate"].as_f64().unwrap()).abs() < 1e-8);
}

#[test]
fn config_echo_reparses_identically() {
    let cfg = example("triangle4.cfg");
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--grid", "-1:1:3"]);
    assert!(o.status.success());
    let echoed = config_from_csv(&String::from_utf8(o.stdout).unwrap());
    let original = RunConfig::parse(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_eq!(RunConfig::parse(&echoed).unwrap(), original);
}

#[test]
fn output_is_deterministic() {
    let cfg = example("triangle4.cfg");
    let a = run(&["spectrum", cfg.to_str().unwrap(), "--normalized"]);
    let b = run(&["spectrum", cfg.to_str().unwrap(), "--normalized"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn normalized_spectrum_peaks_at_one() {
    let cfg = example("triangle4.cfg");
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--normalized", "--grid", "-5:5:1001"]);
    let rows = data_rows(&String::from_utf8(o.stdout).unwrap());
    let max = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert_eq!(max, 1.0);
}

#[test]
fn couplings_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAIR);
    let o = run(&["couplings", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = data_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 8);
    let find = |m: &str, i: &str, j: &str| -> f64 {
        rows.iter().find(|r| r[0] == m && r[1] == i && r[2] == j).unwrap()[3].parse().unwrap()
    };
    // Transverse pair: Γ = 3/2 [sin ξ/ξ + cos ξ/ξ² − sin ξ/ξ³].
    let x: f64 = 0.7;
    let gamma = 1.5 * (x.sin() / x + x.cos() / (x * x) - x.sin() / (x * x * x));
    assert!((find("gamma", "0", "1") - gamma).abs() < 1e-11);
    assert_eq!(find("gamma", "1", "1"), 1.0);
    assert_eq!(find("delta", "0", "0"), 0.0);
    assert_eq!(find("delta", "0", "1"), find("delta", "1", "0"));
}

#[test]
fn single_atom_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = example("single.cfg");
    let o = run(&["sweep", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 40);
    for r in &rows {
        let w: f64 = r[0].parse().unwrap();
        let dw: f64 = r[1].parse().unwrap();
        let n: f64 = r[3].parse().unwrap();
        assert!((dw - (1.0 + w)).abs() < 1e-9 * (1.0 + w));
        assert!((n - w / (2.0 * (1.0 + w))).abs() < 1e-9);
        assert!(r[6].is_empty());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.csv.summary.json")).unwrap()).unwrap();
    for key in ["delta_omega_min", "n_max", "efficiency", "status"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert_eq!(summary["status"], "saturation not bracketed");
    assert!(summary["efficiency"].is_null());
}

#[test]
fn sweep_range_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAIR);
    let o = run(&["sweep", cfg.to_str().unwrap(), "--w-range", "1:10:5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(data_rows(&text).len(), 5);
    assert!(text.lines().last().unwrap().starts_with("# summary: {"));
}

#[test]
fn scan_over_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let unit = PAIR.replace("0.7 0 0", "1 0 0");
    let cfg = write_config(dir.path(), &unit);
    let o = run(&["scan", cfg.to_str().unwrap(), "--lengths", "0.5:1.5:3", "--w-range", "1:20:8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "1.000000000000e+00");
    assert!(rows.iter().all(|r| r[7].is_empty()));
}

#[test]
fn non_unit_dipole_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &PAIR.replace("dipole_1 = 0 0 1", "dipole_1 = 0 1 1"));
    let o = run(&["spectrum", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 5") && err.contains("dipole_1"), "{err}");
}

#[test]
fn coincident_atoms_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &PAIR.replace("0.7 0 0", "0 0 0"));
    let o = run(&["couplings", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_config_rejected_by_spectrum() {
    let o = run(&["spectrum", example("single.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_grid_exits_2() {
    let o = run(&["spectrum", example("triangle4.cfg").to_str().unwrap(), "--grid", "1:0:10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_exits_1() {
    let o = run(&["couplings", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ninety_percent_rule() {
    use fewlase::commands::check_success;
    assert!(check_success(36, 40, "points").is_ok());
    let err = check_success(35, 40, "points").unwrap_err();
    assert_eq!(err.code, 5);
}
