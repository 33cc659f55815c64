use std::path::Path;
use std::process::{Command, Output};

fn apollon(args: &[&str]) -> Output {
    apollon_env(args, &[])
}

fn apollon_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_apollon"));
    cmd.current_dir(env!("CARGO_MANIFEST_DIR")).args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn split_csv_line(line: &str) -> Vec<String> {
    let (mut fields, mut cur, mut quoted) = (Vec::new(), String::new(), false);
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

/// Data rows (no `#` metadata), header first.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().filter(|l| !l.starts_with('#')).map(split_csv_line).collect()
}

fn column(table: &[Vec<String>], name: &str) -> usize {
    table[0].iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn metric_j_on_half_plane() {
    let o = apollon(&["metric", "--spec", "tests/fixtures/half_plane.toml", "--metric", "j", "--pair", "0,1;0,2.718281828459045"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("# apollon "));
    assert!(out.lines().nth(1).unwrap().starts_with("# manifest-sha256: "));
    let t = rows(&out);
    assert_eq!(&t[0][..7], ["metric", "x", "y", "value", "method", "bound", "level"]);
    assert_eq!(t.len(), 2);
    let v: f64 = t[1][column(&t, "value")].parse().unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn sampled_alpha_is_flagged_lower() {
    let o = apollon(&["metric", "--spec", "tests/fixtures/square.json", "--metric", "alpha", "--level", "5", "--pair", "0.5,0.5;1.5,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = rows(&stdout(&o));
    assert_eq!(t[1][column(&t, "bound")], "lower");
    assert_eq!(t[1][column(&t, "level")], "5");
    assert_eq!(t[1][column(&t, "method")], "sampled(5)");
}

#[test]
fn unknown_variant_exits_2() {
    let o = apollon(&["metric", "--spec", "tests/fixtures/misspelled.toml", "--metric", "j", "--pair", "0,1;0,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown variant"));
    assert!(stderr(&o).contains("variant"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(apollon(&["metric", "--spec", "tests/fixtures/half_plane.toml", "--metric", "beta", "--pair", "0,1;0,2"]).status.code(), Some(2));
    assert_eq!(apollon(&["metric", "--spec", "tests/fixtures/half_plane.toml", "--metric", "j", "--pair", "0,1;0,x"]).status.code(), Some(2));
    assert_eq!(apollon(&["metric", "--spec", "tests/fixtures/no_such.toml", "--metric", "j", "--pair", "0,1;0,2"]).status.code(), Some(2));
    assert_eq!(apollon(&["frobnicate"]).status.code(), Some(2));
    let o = apollon(&["verify", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown suite"));
    let o = apollon_env(&["verify", "segment", "--count", "5"], &[("APOLLON_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rejected_point_names_the_pair() {
    let o = apollon(&["metric", "--spec", "tests/fixtures/half_plane.toml", "--metric", "j", "--pair", "0,1;0,-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pair 0"), "{}", stderr(&o));
}

#[test]
fn grid_fault_exits_1_naming_the_pair() {
    // a resolution coarser than the distance to the boundary leaves no grid near the pair
    let o = apollon(&["metric", "--spec", "tests/fixtures/unit_disk.toml", "--metric", "k", "--resolution", "0.5", "--pair", "0.9,0;0,0.9"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("pair 0"), "{}", stderr(&o));
}

#[test]
fn uniformity_with_one_pair() {
    let o = apollon(&[
        "estimate", "--spec", "tests/fixtures/half_plane.toml", "--estimator", "uniformity",
        "--window=-2,0:2,4", "--count", "1", "--seed", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = rows(&stdout(&o));
    assert_eq!(t.len(), 2);
    assert_eq!(t[1][column(&t, "d")], "0");
    assert_eq!(t[1][column(&t, "tight_pair")], "0");
    let c: f64 = t[1][column(&t, "c")].parse().unwrap();
    assert!(c >= 1.0);
}

#[test]
fn rough_bilipschitz_of_identity() {
    let o = apollon(&[
        "estimate", "--spec", "tests/fixtures/unit_disk.toml", "--estimator", "rough_bilip",
        "--map", "tests/fixtures/identity.toml", "--count", "200",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = rows(&stdout(&o));
    let m: f64 = t[1][column(&t, "M")].parse().unwrap();
    let c: f64 = t[1][column(&t, "C")].parse().unwrap();
    assert!((m - 1.0).abs() < 1e-9 && c.abs() < 1e-9, "M = {m}, C = {c}");
}

#[test]
fn estimator_requirements_are_usage_errors() {
    let o = apollon(&["estimate", "--spec", "tests/fixtures/half_plane.toml", "--estimator", "uniformity", "--count", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--window"));
    let o = apollon(&["estimate", "--spec", "tests/fixtures/unit_disk.toml", "--estimator", "dilatation", "--point", "0,0", "--radii", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--map"));
    let o = apollon(&["estimate", "--spec", "tests/fixtures/unit_disk.toml", "--estimator", "curvature"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gromov_reports_skips() {
    let o = apollon(&[
        "estimate", "--spec", "tests/fixtures/half_plane.toml", "--estimator", "gromov",
        "--window=-5,0:5,5", "--count", "500", "--seed", "7",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("# evaluated: 500, skipped: 0"));
    let t = rows(&out);
    let delta: f64 = t[1][column(&t, "delta")].parse().unwrap();
    assert!(delta > 0.0 && delta <= 2f64.ln());
}

#[test]
fn verify_prints_a_pass_table() {
    let o = apollon(&["verify", "mobius_invariance", "--count", "100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = rows(&stdout(&o));
    let status = column(&t, "status");
    assert!(t.len() > 1);
    assert!(t[1..].iter().all(|r| r[status] == "pass"));
}

#[test]
fn geodesic_warns_when_the_window_truncates() {
    let args = ["geodesic", "--spec", "tests/fixtures/punctured_plane.toml", "--pair", "1,0;-1,0", "--resolution", "0.05"];
    let o = apollon(&[&args[..], &["--window=-1.2,-0.3:1.2,0.3"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("touches the window"));
    let o = apollon(&args);
    assert!(o.status.success());
    assert!(!stderr(&o).contains("touches the window"));
    let t = rows(&stdout(&o));
    assert_eq!(t[0], ["step", "x0", "x1", "cumulative"]);
    let total: f64 = t.last().unwrap()[3].parse().unwrap();
    assert!((total - std::f64::consts::PI).abs() < 0.05 * std::f64::consts::PI);
}

#[test]
fn out_writes_csv_and_manifest_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let o = apollon(&[
        "metric", "--spec", "tests/fixtures/half_plane.toml", "--metric", "k", "--resolution", "0.05",
        "--window=-2,0:2,4", "--count", "3", "--seed", "4", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let manifest = dir.path().join("k.csv.manifest.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["command"], "metric");
    assert_eq!(m["seed"], 4);
    assert_eq!(m["count"], 3);
    assert_eq!(m["resolution"], 0.05);
    assert!(m["spec_hashes"]["spec"].as_str().unwrap().len() == 64);
    assert!(!m["arguments"].as_array().unwrap().iter().any(|a| a == "--out"));
}

fn replay_matches(args: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let o = apollon(&[args, &["--out", first.to_str().unwrap()]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = format!("{}.manifest.json", first.display());
    let second = dir.path().join("second.csv");
    let o = apollon(&["replay", &manifest, "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    assert_eq!(
        std::fs::read(&manifest).unwrap(),
        std::fs::read(format!("{}.manifest.json", second.display())).unwrap()
    );
}

#[test]
fn replay_is_byte_identical() {
    replay_matches(&["metric", "--spec", "tests/fixtures/half_plane.toml", "--batch", "tests/fixtures/queries.toml"]);
    replay_matches(&[
        "estimate", "--spec", "tests/fixtures/unit_disk.toml", "--estimator", "phi", "--count", "300",
        "--pool", "20", "--resolution", "0.02", "--bins", "6",
    ]);
    replay_matches(&[
        "estimate", "--spec", "tests/fixtures/punctured_plane.toml", "--estimator", "qm_theta",
        "--map", "tests/fixtures/unit_inversion.toml", "--window=-2,-2:2,2", "--count", "500", "--bins", "6",
    ]);
}

#[test]
fn replay_rejects_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("g.toml");
    std::fs::copy(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/half_plane.toml"), &spec).unwrap();
    let out = dir.path().join("j.csv");
    let o = apollon(&["metric", "--spec", spec.to_str().unwrap(), "--metric", "j", "--pair", "0,1;0,2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    std::fs::write(&spec, "variant = \"half_space\"\nnormal = [0.0, 1.0]\noffset = -1.0\n").unwrap();
    let o = apollon(&["replay", &format!("{}.manifest.json", out.display())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("changed"));
}

#[test]
fn thread_count_does_not_change_output() {
    let args = [
        "estimate", "--spec", "tests/fixtures/unit_disk.toml", "--estimator", "uniformity", "--count", "200",
        "--pool", "16", "--resolution", "0.02",
    ];
    let one = apollon_env(&args, &[("APOLLON_THREADS", "1")]);
    let two = apollon_env(&args, &[("APOLLON_THREADS", "3")]);
    assert!(one.status.success() && two.status.success());
    assert_eq!(one.stdout, two.stdout);
}
