use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lem")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PLANES: &str = "n = 64\nphi1 = affine(0, -1, 1)\nphi2 = affine(1, -1, -1)\n";

#[test]
fn phases_of_the_crossing_planes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "planes.cfg", PLANES);
    let out = dir.path().join("o");
    let r = lem(&["phases", "--config", &cfg, "--out", arg(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["labels.pgm", "interfaces.csv", "areas.csv", "config.echo"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let tp = fs::read_to_string(out.join("tuple_points.csv")).unwrap();
    let row: Vec<f64> = tp.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[0] - 0.5).abs() < 1e-8 && (row[1] - 0.5).abs() < 1e-8);
    let angles = fs::read_to_string(out.join("angles.csv")).unwrap();
    let b: Vec<f64> = angles.lines().nth(1).unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    for (got, want) in b.iter().zip([PI / 2.0, 3.0 * PI / 4.0, 3.0 * PI / 4.0]) {
        assert!((got - want).abs() < 1e-10);
    }
    assert!(fs::read_to_string(out.join("labels.pgm")).unwrap().starts_with("P2\n64 64\n255\n"));
}

#[test]
fn non_empty_output_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "planes.cfg", PLANES);
    let out = dir.path().join("o");
    assert_eq!(lem(&["check", "--config", &cfg, "--out", arg(&out)]).status.code(), Some(0));
    let again = lem(&["check", "--config", &cfg, "--out", arg(&out)]);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_eq!(lem(&["check", "--config", &cfg, "--out", arg(&out), "--force"]).status.code(), Some(0));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("result = pass"));
}

#[test]
fn unknown_flags_and_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "planes.cfg", PLANES);
    let out = dir.path().join("o");
    let r = lem(&["phases", "--config", &cfg, "--out", arg(&out), "--frobnicate"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("--frobnicate"));
    let bad = write(dir.path(), "bad.cfg", "n = 15\nwobble = 2\n");
    let r = lem(&["synthesize", "--config", &bad, "--out", arg(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("wobble"));
    let r = lem(&["phases", "--config", &bad, "--out", arg(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("wobble"));
}

#[test]
fn degenerate_junction_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "deg.cfg", "n = 16\nphi1 = affine(0, -1, 1)\nphi2 = affine(0, -2, 2)\n");
    let r = lem(&["phases", "--config", &cfg, "--out", arg(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn synthesize_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.cfg", "n = 15\ndelta = 0.01\nseed = 9\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(lem(&["synthesize", "--config", &cfg, "--out", arg(&a)]).status.code(), Some(0));
    assert_eq!(lem(&["synthesize", "--config", &cfg, "--out", arg(&b)]).status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 13);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
    // the flag overrides the configured seed
    let c = dir.path().join("c");
    assert_eq!(lem(&["synthesize", "--config", &cfg, "--out", arg(&c), "--seed", "10"]).status.code(), Some(0));
    assert_ne!(fs::read(a.join("h01.csv")).unwrap(), fs::read(c.join("h01.csv")).unwrap());
}

#[test]
fn reconstruct_needs_existing_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.cfg", "n = 15\n");
    let missing = dir.path().join("nowhere");
    let r = lem(&["reconstruct", "--config", &cfg, "--out", arg(&dir.path().join("o")), "--measurements", arg(&missing)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nowhere"));
}

#[test]
fn reconstruct_writes_history_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.cfg", "n = 15\nmax_iter = 4\n");
    let m = dir.path().join("m");
    assert_eq!(lem(&["synthesize", "--config", &cfg, "--out", arg(&m)]).status.code(), Some(0));
    let runs: Vec<_> = ["r1", "r2"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let r = lem(&[
                "reconstruct", "--config", &cfg, "--out", arg(&out), "--measurements", arg(&m),
                "--snapshot-every", "2", "--threads", "1",
            ]);
            assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
            assert!(String::from_utf8_lossy(&r.stderr).lines().any(|l| l.contains("iter=1 ")));
            out
        })
        .collect();
    for f in ["history.csv", "labels.pgm", "phi0.csv", "phi1.csv", "phi2.csv", "summary.txt", "config.echo"] {
        assert_eq!(fs::read(runs[0].join(f)).unwrap(), fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
    let history = fs::read_to_string(runs[0].join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 6);
    for s in ["iter_0000.pgm", "iter_0002.pgm", "iter_0004.pgm"] {
        assert!(runs[0].join("snapshots").join(s).is_file(), "{s}");
    }
}

#[test]
fn advect_for_zero_time_reproduces_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let cfg = write(dir.path(), "a.cfg", "n = 20\nphi1 = wavy(0.5, 0.1, 2)\nphi2 = affine(0.3, -1, 0.2)\ntheta.x = const(0.2)\nt0 = 0.1\n");
    assert_eq!(lem(&["advect", "--config", &cfg, "--out", arg(&first)]).status.code(), Some(0));
    let text = format!(
        "n = 20\nphi1 = csv({})\nphi2 = csv({})\ntheta.x = const(0.2)\nt0 = 0\n",
        arg(&first.join("phi1.csv")),
        arg(&first.join("phi2.csv"))
    );
    let cfg0 = write(dir.path(), "b.cfg", &text);
    let second = dir.path().join("second");
    assert_eq!(lem(&["advect", "--config", &cfg0, "--out", arg(&second)]).status.code(), Some(0));
    for f in ["phi1.csv", "phi2.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap());
    }
}
