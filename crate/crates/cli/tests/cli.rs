use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bzlm_core::parse_config;

fn bzlm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bzlm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let o = bzlm(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(bzlm(&["sweep-phi", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(bzlm(&["analyze"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = bzlm(&["analyze", path(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario = \"run\"\n[geometry]\nshape = \"disc\"\nradius = -5\n").unwrap();
    let o = bzlm(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry.radius"));
}

#[test]
fn analyze_sine_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sine.csv");
    let h = 0.1;
    let mut text = String::from("time,potential\n");
    for k in 0..6000 {
        let t = k as f64 * h;
        text.push_str(&format!("{t},{}\n", (std::f64::consts::TAU * t / 50.0).sin()));
    }
    fs::write(&file, text).unwrap();
    let o = bzlm(&["analyze", path(&file)]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("mean_period,sigma,frequency,n_events"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mean: f64 = row[0].parse().unwrap();
    assert!((mean - 50.0).abs() <= h, "{mean}");

    let o = bzlm(&["analyze", path(&file), "--hi", "0.5", "--lo", "-0.5"]);
    assert!(o.status.success());
    let mean: f64 = stdout(&o).lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((mean - 50.0).abs() <= h, "{mean}");
}

#[test]
fn run_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "scenario = \"run\"\nn_steps = 1500\nsnapshot_stride = 500\n\
         [geometry]\nshape = \"disc\"\nradius = 30\n\
         [[stimuli]]\nsite = \"NE\"\n",
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = bzlm(&["run", "--config", path(&cfg), "--out", path(out)]);
        assert!(o.status.success(), "{o:?}");
    }
    let names = ["trace.csv", "segments.csv", "config.toml", "snapshots/u_00000500.pgm", "snapshots/u_00001500.pgm"];
    for name in names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("time,potential"));
    assert_eq!(trace.lines().count(), 151);

    // The echo alone reproduces the run.
    let echo = fs::read_to_string(a.join("config.toml")).unwrap();
    let parsed = parse_config(&echo).unwrap();
    assert_eq!(parsed.n_steps, Some(1500));
    let c = dir.path().join("c");
    let o = bzlm(&["run", "--config", path(&a.join("config.toml")), "--out", path(&c)]);
    assert!(o.status.success());
    assert_eq!(fs::read(c.join("trace.csv")).unwrap(), fs::read(a.join("trace.csv")).unwrap());
}

#[test]
fn spike_shapes_on_a_small_disc() {
    let dir = tempfile::tempdir().unwrap();
    let o = bzlm(&[
        "spike-shapes",
        "--out",
        path(dir.path()),
        "--set",
        "geometry.radius=40",
        "--set",
        "geometry.shape=disc",
    ]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3, "{out}");
    for (line, origin) in out.lines().zip(["S", "E", "NE"]) {
        assert!(line.starts_with(&format!("{origin}: ")), "{line}");
        assert!(dir.path().join(format!("trace_{origin}.csv")).exists());
        let snaps = fs::read_dir(dir.path().join(format!("snapshots_{origin}"))).unwrap().count();
        assert!(snaps > 0);
    }
    assert!(out.lines().next().unwrap().contains("flat"), "{out}");
    let summary = fs::read_to_string(dir.path().join("spike_shapes.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn sweep_table_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = bzlm(&[
        "sweep-phi",
        "--out",
        path(dir.path()),
        "--phi",
        "0.02,0.04",
        "--steps",
        "2000",
        "--set",
        "geometry.outer_radius=40",
        "--set",
        "geometry.inner_radius=30",
        "--set",
        "geometry.shape=annulus",
        "--set",
        "analysis.settle_time=0.5",
    ]);
    assert!(o.status.success(), "{o:?}");
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(stdout(&o), table);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "phi,mean_period,sigma,n_events");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.02,") && lines[2].starts_with("0.04,"));
    assert!(lines.iter().all(|l| l.split(',').count() == 4));
}
