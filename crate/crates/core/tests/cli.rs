use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quasiprob"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn simulate(dir: &Path, name: &str, n: &str) {
    let o = run(
        dir,
        &[
            "simulate", "--vx", "0.36", "--vp", "5.28", "--squeeze-angle", "1.5707963267948966",
            "--phases", "21", "--n-per-phase", n, "--seed", "7", "--out", name,
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_is_deterministic_and_writes_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a.csv", "300");
    simulate(dir.path(), "b.csv", "300");
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some("phi_rad,x"));
    assert_eq!(text.lines().count(), 1 + 21 * 300);
    assert!(dir.path().join("a.meta.json").exists());
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seeds"]["seed"], 7);
    assert_eq!(m["dataset_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn invalid_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["simulate", "--vx", "1", "--vp", "1", "--phases", "0", "--n-per-phase", "10", "--seed", "1", "--out", "x.csv"],
    );
    assert_eq!(code(&o), 2);
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());

    simulate(dir.path(), "d.csv", "50");
    let o = run(dir.path(), &["estimate", "--in", "d.csv", "--width", "-1", "--out", "g.csv"]);
    assert_eq!(code(&o), 2);
    let o = run(dir.path(), &["estimate", "--in", "d.csv", "--width", "1.3", "--axis", "im:3,-3,0.1", "--out", "g.csv"]);
    assert_eq!(code(&o), 2);
    let o = run(dir.path(), &["frobnicate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["estimate", "--in", "missing.csv", "--width", "1.3", "--out", "g.csv"]);
    assert_eq!(code(&o), 3);

    fs::write(dir.path().join("bad.csv"), "phi_rad,x\n0.0,1.0\n0.0,abc\n").unwrap();
    let o = run(dir.path(), &["estimate", "--in", "bad.csv", "--width", "1.3", "--out", "g.csv"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn estimate_rect_grid_has_3721_rows_and_reports_sigma() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", "40");
    let o = run(
        dir.path(),
        &["estimate", "--in", "d.csv", "--width", "1.3", "--grid", "re:-3,3,0.1,im:-3,3,0.1", "--fast-kernel", "--out", "g.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("re_alpha,im_alpha,p,std_err"));
    assert_eq!(csv.lines().count(), 1 + 3721);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("sigma "), "{stdout}");
    let m = fs::read_to_string(dir.path().join("g.csv.manifest.json")).unwrap();
    assert!(m.contains("dither_seed"));
}

#[test]
fn estimate_output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", "200");
    for t in ["1", "2", "4"] {
        let out = format!("g{t}.csv");
        let o = run(
            dir.path(),
            &["--threads", t, "estimate", "--in", "d.csv", "--width", "1.3", "--axis", "im:-2,2,0.25", "--out", &out],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let g1 = fs::read(dir.path().join("g1.csv")).unwrap();
    assert_eq!(g1, fs::read(dir.path().join("g2.csv")).unwrap());
    assert_eq!(g1, fs::read(dir.path().join("g4.csv")).unwrap());
}

#[test]
fn scan_singleton_width() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", "100");
    let o = run(
        dir.path(),
        &["scan", "--in", "d.csv", "--widths", "1.3", "--axis", "im:-1.5,1.5,0.1", "--fast-kernel", "--out", "s.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "w,sigma,argmin_re,argmin_im,note");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1.3"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("optimum width"));
}

#[test]
fn oracle_columns_and_resolution_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "oracle", "--vx", "0.36", "--vp", "5.28", "--squeeze-angle", "1.5707963267948966", "--width", "1.3",
            "--axis", "im:-1,1,0.5", "--phases", "21", "--riemann", "--out", "o.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("o.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("re_alpha,im_alpha,p,std_err,p_discrete,systematic_error,p_riemann")
    );
    assert_eq!(csv.lines().count(), 6);
    for line in csv.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[3], 0.0);
        assert!(cols[5] < 3.6e-4);
    }

    let o = run(
        dir.path(),
        &["oracle", "--vx", "1", "--vp", "1", "--width", "1.3", "--axis", "re:0,3,1", "--angular-nodes", "100", "--out", "x.csv"],
    );
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("required"));
}

#[test]
fn compare_self_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = |axis: &str, out: &str| {
        let o = run(dir.path(), &["oracle", "--vx", "1", "--vp", "1", "--width", "1.3", "--axis", axis, "--out", out]);
        assert_eq!(code(&o), 0);
    };
    oracle("im:-1,1,0.5", "a.csv");
    oracle("im:-1,1,0.25", "b.csv");
    let o = run(dir.path(), &["compare", "--sampled", "a.csv", "--oracle", "a.csv", "--out", "r.json"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["n_points"], 5);
    assert_eq!(r["fraction_within_4"], 1.0);
    assert_eq!(r["max_abs_z"], 0.0);

    let o = run(dir.path(), &["compare", "--sampled", "a.csv", "--oracle", "b.csv", "--out", "r2.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing from sampled"));
}

#[test]
fn sampled_grid_agrees_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "d.csv", "5000");
    let o = run(
        dir.path(),
        &["estimate", "--in", "d.csv", "--width", "1.3", "--axis", "im:-3,3,0.1", "--fast-kernel", "--out", "g.csv"],
    );
    assert_eq!(code(&o), 0);
    let o = run(
        dir.path(),
        &[
            "oracle", "--vx", "0.36", "--vp", "5.28", "--squeeze-angle", "1.5707963267948966", "--width", "1.3",
            "--axis", "im:-3,3,0.1", "--out", "o.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let o = run(dir.path(), &["compare", "--sampled", "g.csv", "--oracle", "o.csv", "--out", "r.json"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(r["fraction_within_4"].as_f64().unwrap() >= 0.95, "{}", r["fraction_within_4"]);
}

#[test]
fn kernel_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["kernel", "--width", "1.3", "--xi-max", "5", "--step", "0.5", "--out", "k.csv", "--filter-out", "f.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let k = fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert_eq!(k.lines().next(), Some("xi,chi"));
    let f = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert_eq!(f.lines().next(), Some("b,omega"));
}
