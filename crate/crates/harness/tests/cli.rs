use std::path::Path;
use std::process::{Command, Output};

fn twf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_params_prints_defaults() {
    let o = twf(&["validate-params"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("zeta1=0.236965"), "{s}");
    assert!(s.contains("zeta2=0.133168"), "{s}");
    assert!(s.contains("mu0=0.247474"), "{s}");
    assert!(s.contains("ok=true"), "{s}");
}

#[test]
fn validate_params_flags_bad_thresholds() {
    let o = twf(&["validate-params", "--params", "0.9,1.2,1,1,5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ok=false"));
}

#[test]
fn missing_out_exits_2() {
    let o = twf(&["phase-transition", "--n", "8", "--ratio", "4", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--out"));
}

#[test]
fn invalid_arguments_exit_2() {
    assert_eq!(twf(&["solve", "--design", "square"]).status.code(), Some(2));
    assert_eq!(twf(&["solve", "--step", "fixed"]).status.code(), Some(2));
    assert_eq!(twf(&["solve", "--params", "1,2,3"]).status.code(), Some(2));
    assert_eq!(twf(&["solve", "--step", "fixed:-1"]).status.code(), Some(2));
    assert_eq!(twf(&["solve", "--strict", "--step", "fixed:0.3"]).status.code(), Some(2));
    assert_eq!(twf(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = twf(&["phase-transition", "--trials", "0", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = twf(&["cg-compare", "--design", "cdp", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let o = twf(&[
        "init-compare", "--n", "8", "--ratio", "6", "--trials", "1",
        "--out", "/nonexistent-dir/sub/out.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solve_reaches_exact_recovery() {
    let o = twf(&["solve", "--design", "gaussian-real", "--n", "64", "--ratio", "8", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let err: f64 = s
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("final_relative_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err <= 1e-5, "{s}");
}

#[test]
fn solve_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let est = dir.path().join("est.csv");
    std::fs::write(
        &cfg,
        format!(
            "# single CDP instance\ndesign = cdp\nn = 32\nmasks = 6\nseed = 3\nout = {}\n",
            est.display()
        ),
    )
    .unwrap();
    let o = twf(&["solve", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("design=cdp") && s.contains("m=192"), "{s}");
    let text = std::fs::read_to_string(&est).unwrap();
    assert_eq!(text.lines().next(), Some("index,re,im"));
    assert_eq!(text.lines().count(), 33);

    // Flags override the file.
    let o = twf(&["solve", "--config", path_str(&cfg), "--n", "16"]);
    assert!(stdout(&o).contains("m=96"));

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(twf(&["solve", "--config", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn experiment_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &Path| {
        vec![
            "phase-transition".to_string(),
            "--n".into(), "16,24".into(),
            "--ratio".into(), "0.5,6".into(),
            "--trials".into(), "4".into(),
            "--solvers".into(), "twf,wf".into(),
            "--max-iters".into(), "300".into(),
            "--seed".into(), "11".into(),
            "--out".into(), p.display().to_string(),
        ]
    };
    let run = |p: &Path, threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_twf"))
            .args(args(p))
            .env("TWF_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(&a, "1");
    run(&b, "3");
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);

    let text = String::from_utf8(ta).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "design,n,m,ratio,solver,trials,successes,success_rate,median_rel_error,seed"
    );
    assert_eq!(lines.len(), 1 + 8 + 1);
    assert!(lines[9].starts_with("# twf-harness ") && lines[9].contains("seed=11"));
    for row in &lines[1..9] {
        let f: Vec<&str> = row.split(',').collect();
        let rate: f64 = f[7].parse().unwrap();
        assert!((0.0..=1.0).contains(&rate));
        if f[3] == "0.5" {
            assert_eq!(rate, 0.0, "underdetermined cells cannot succeed: {row}");
        }
    }
}

#[test]
fn cg_compare_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cg.csv");
    let trace = dir.path().join("trace.csv");
    let o = twf(&[
        "cg-compare", "--n", "32", "--trials", "2",
        "--out", path_str(&out), "--trace-out", path_str(&trace),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = std::fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("n,trial,solver,iteration,matvecs,relative_error\n"));
    assert!(t.contains(",cg,") && t.contains(",twf,"));
    let rows = std::fs::read_to_string(&out).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn backtracking_defaults_to_line_search_thresholds() {
    let o = twf(&["solve", "--n", "16", "--step", "backtrack:0.5", "--max-iters", "50", "--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = twf(&["solve", "--n", "16", "--step", "backtrack:0.5", "--params", "0.3,5,5,3,5", "--strict"]);
    assert_eq!(o.status.code(), Some(2));
}
