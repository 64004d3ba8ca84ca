use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

const P2: &str = r#"
[scenario]
name = "p2"
links = [1, 1]
qx = "Q"

[grid]
start = 0.0
stop = 0.12
step = 0.04

[masks]
list = ["00", "11", "10"]

[validate]
q = [0.1]
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn sweep_writes_stable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "p2.toml", P2);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = scad(&[
            "sweep",
            &spec,
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            "1",
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 1 + 4 * 3);
    assert!(text.contains("\n0,11,1,1,0,0.5,0.5,1\n"));
    // stdout form matches the file
    let o = scad(&["sweep", &spec]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), text);
}

#[test]
fn search_emits_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "p2.toml", P2);
    let o = scad(&["search", &spec]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let masks: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(masks, ["00", "00", "00", "11"]);
}

#[test]
fn config_errors_exit_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "bad.toml",
        &P2.replace(r#"["00", "11", "10"]"#, "[]"),
    );
    let o = scad(&["sweep", &spec]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(
        err.contains("bad.toml:13:") && err.contains("empty"),
        "{err}"
    );
    assert_eq!(scad(&["sweep", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(scad(&["frobnicate"]).status.code(), Some(2));
    let good = write(dir.path(), "p2.toml", P2);
    let o = scad(&["sweep", &good, "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_passes_and_self_test_fails() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "p2.toml", P2);
    let report = dir.path().join("r.txt");
    let base = [
        "validate",
        &spec,
        "--rounds",
        "200000",
        "--seeds",
        "4",
        "--attacks",
        "2",
    ];
    let o = scad(&[&base[..], &["--out", report.to_str().unwrap()]].concat());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert_eq!(std::fs::read_to_string(&report).unwrap(), stdout);
    assert!(stdout.contains("PASS  mc p_accept Q=0.1 mask=11"));
    let o = scad(&[&base[..], &["--perturb-analytic", "0.01"]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL"));
    let o = scad(&[&base[..], &["--rounds", "3"]].concat());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_checks_attack_file() {
    let attack = specs().join("attacks/p2_mixed.toml");
    let o = scad(&["oracle", attack.to_str().unwrap()]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS  soundness mask=11"));
    assert!(stdout.contains("PASS  message symmetry mask=10"));
}

#[test]
fn bundled_specs_all_parse() {
    let out = scad(&["sweep", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let mut n = 0;
    for e in std::fs::read_dir(specs()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let o = scad(&["validate", p.to_str().unwrap(), "--seeds", "0"]);
            // zero seeds is rejected only after the scenario parsed
            let err = String::from_utf8(o.stderr).unwrap();
            assert!(err.contains("seed count"), "{}: {err}", p.display());
            n += 1;
        }
    }
    assert_eq!(n, 14);
}
