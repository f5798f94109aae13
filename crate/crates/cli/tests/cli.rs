use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dfhn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfhn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .map(|it| it.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn invalid_flag_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dfhn(tmp.path(), &["atlas", "--no-such-flag", "1", "--out-dir", "out"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
    assert!(files_in(tmp.path()).is_empty());
}

#[test]
fn invalid_value_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--tau", "-1", "--out-dir", "out"][..],
        &["hopf-curves", "--k", "3..1", "--out-dir", "out"][..],
        &["atlas", "--tau", "0.4:0.3:0.1", "--out-dir", "out"][..],
        &["network", "--n", "0", "--out-dir", "out"][..],
        &["reproduce", "fig99", "--out-dir", "out"][..],
    ] {
        let out = dfhn(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!tmp.path().join("out").exists(), "{args:?} wrote output");
    }
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // With eps = 0 the slow variable never reaches the section y = -0.4.
    let out = dfhn(tmp.path(), &["poincare", "--eps", "0", "--t-end", "50", "--out-dir", "out"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn hopf_curves_writes_csv_sidecar_and_script() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dfhn(tmp.path(), &["hopf-curves", "--J", "2", "--eps", "0.01", "--k", "0..3", "--grid", "32"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("dfhn-out");
    assert_eq!(
        files_in(&dir),
        vec!["hopf_curves.csv", "hopf_curves.csv.json", "hopf_curves.gp", "hopf_curves.gp.json"]
    );
    let csv = fs::read_to_string(dir.join("hopf_curves.csv")).unwrap();
    for label in ["hopf_full_1,3", "hopf_full_2,0", "hopf_fast,2"] {
        assert!(csv.contains(label), "missing {label}");
    }
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("hopf_curves.csv.json")).unwrap()).unwrap();
    assert_eq!(side["command"], "hopf-curves");
    assert_eq!(side["params"]["k"], "0..3");
    assert_eq!(side["version"], env!("CARGO_PKG_VERSION"));
    let gp = fs::read_to_string(dir.join("hopf_curves.gp")).unwrap();
    assert!(gp.contains("'hopf_curves.csv'"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |d: &'static str| {
        vec!["atlas", "--a", "1.01", "--tau", "0.4:0.55:0.15", "--workers", "2", "--out-dir", d]
    };
    assert!(dfhn(tmp.path(), &args("r1")).status.success());
    assert!(dfhn(tmp.path(), &args("r2")).status.success());
    for f in ["atlas.csv", "atlas.csv.json", "atlas.gp"] {
        let a = fs::read(tmp.path().join("r1").join(f)).unwrap();
        let b = fs::read(tmp.path().join("r2").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let net = |d: &'static str| vec!["network", "--n", "3", "--sigma", "0.2", "--seed", "5", "--t-end", "10", "--out-dir", d];
    assert!(dfhn(tmp.path(), &net("n1")).status.success());
    assert!(dfhn(tmp.path(), &net("n2")).status.success());
    assert_eq!(
        fs::read(tmp.path().join("n1/network.csv")).unwrap(),
        fs::read(tmp.path().join("n2/network.csv")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), "# stability settings\nJ = 3\ntau = 0.5\n").unwrap();
    let out = dfhn(tmp.path(), &["--config", "run.cfg", "stability", "--J", "2.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("dfhn-out/stability.csv.json")).unwrap()).unwrap();
    assert_eq!(side["params"]["system"]["j"], 2.5);
    assert_eq!(side["params"]["system"]["tau"], 0.5);
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.cfg"), "colour = blue\n").unwrap();
    let out = dfhn(tmp.path(), &["--config", "bad.cfg", "stability"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("dfhn-out").exists());
}

#[test]
fn print_defaults_lists_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dfhn(tmp.path(), &["--print-defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "simulate",
        "stability",
        "hopf-curves",
        "fast-diagram",
        "lyapunov",
        "bautin",
        "atlas",
        "portrait",
        "poincare",
        "average-manifold",
        "network",
        "reproduce",
    ] {
        assert!(text.contains(&format!("[{sub}]")), "missing {sub}");
    }
    assert!(text.contains("tau=0.35:1.1:0.01"));
    assert!(files_in(tmp.path()).is_empty());
}

#[test]
fn reproduce_prints_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dfhn(tmp.path(), &["reproduce", "fig4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS"));
    assert!(text.contains("4 of 4 checks pass"));
    let dir = tmp.path().join("dfhn-out/fig4");
    assert!(dir.join("fig4_fast_diagram.csv.json").exists());
    assert!(dir.join("fig4_fast_diagram.gp").exists());
}
