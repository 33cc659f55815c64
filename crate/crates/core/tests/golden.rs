//! Pinned CLI outputs. Regenerate with `APOLLON_BLESS=1 cargo test --test golden`.

use std::path::PathBuf;
use std::process::Command;

const CASES: &[(&str, &[&str])] = &[
    (
        "metric_batch_half_plane",
        &["metric", "--spec", "tests/fixtures/half_plane.toml", "--batch", "tests/fixtures/queries.toml"],
    ),
    (
        "uniformity_half_plane",
        &[
            "estimate", "--spec", "tests/fixtures/half_plane.toml", "--estimator", "uniformity",
            "--window=-5,0:5,5", "--count", "200", "--seed", "7",
        ],
    ),
    (
        "geodesic_punctured_plane",
        &["geodesic", "--spec", "tests/fixtures/punctured_plane.toml", "--pair", "1,0;-1,0", "--resolution", "0.05"],
    ),
];

fn run(args: &[&str]) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_apollon"))
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .args(args)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

#[test]
fn golden_outputs() {
    let bless = std::env::var_os("APOLLON_BLESS").is_some();
    for (name, args) in CASES {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.csv"));
        let got = run(args);
        if bless {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert!(got == want, "{name} differs from {}", path.display());
    }
}

#[test]
fn reruns_are_byte_identical() {
    for (_, args) in CASES {
        assert_eq!(run(args), run(args));
    }
}
