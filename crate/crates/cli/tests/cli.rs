use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deception-game"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("DECEPTION_GAME_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn field(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in report"))
        .parse()
        .unwrap()
}

#[test]
fn solve_fig4_reports_partition() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["solve", "--preset", "fig4"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("equilibrium_report.txt")).unwrap();
    assert_eq!(text, stdout(&o));
    assert_eq!(field(&text, "theta_b"), 0.0);
    let bounds: Vec<f64> = text
        .lines()
        .find_map(|l| l.strip_prefix("boundaries = "))
        .unwrap()
        .split(", ")
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(bounds.len(), 3);
    for (a, b) in bounds.iter().zip([0.0, 0.25, 1.0]) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!(text.contains("a_bar = 0.125\n"));
    assert!(text.contains("a_bar = 0.625\n"));
    assert!(text.contains("passed = true\n"));
}

#[test]
fn solve_fig3b_reports_cutoff() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["solve", "--preset", "fig3b"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!((field(&stdout(&o), "theta_hat") - 0.3117).abs() < 5e-4);
}

#[test]
fn solve_with_evidence_includes_gain_report() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["solve", "--preset", "fig5"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("[gain.0]") && text.contains("[gain.1]"));
    assert!(field(&text, "delta_total") > 0.0);
}

#[test]
fn demo_presets_solve_and_verify() {
    for preset in ["gps-spoofing-demo", "mitm-demo"] {
        let tmp = TempDir::new().unwrap();
        let o = run(&["verify", "--preset", preset], tmp.path());
        assert_eq!(code(&o), 0, "{preset}: {}", stderr(&o));
    }
}

#[test]
fn missing_b_exits_1() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[game]\nk = 0.1\n");
    let o = run(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("missing field"), "{}", stderr(&o));
}

#[test]
fn malformed_config_names_the_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[game]\nb = 0.1\nk = 0.1\nthis line is wrong\n");
    let o = run(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("run.conf:4"), "{}", stderr(&o));
}

#[test]
fn cheap_talk_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[game]\nb = 0.1\nk = 0\n");
    let o = run(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn verify_exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["verify", "--preset", "fig4"], tmp.path())), 0);

    let cfg = write_config(tmp.path(), "preset = fig4\n[equilibrium]\nboundaries = 0, 0.5, 1\n");
    let o = run(&["verify", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(fs::read_to_string(tmp.path().join("verification.txt")).unwrap().contains("passed = false"));

    let o = run(&["verify", "--preset", "fig4", "--grid", "10"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("grid too coarse"));
}

#[test]
fn saved_report_reverifies() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["solve", "--preset", "fig3b"], tmp.path())), 0);
    let report = tmp.path().join("equilibrium_report.txt");
    let cfg = write_config(
        tmp.path(),
        &format!("preset = fig3b\n[equilibrium]\nfrom_report = {}\n", report.display()),
    );
    let o = run(&["verify", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["frobnicate"], tmp.path())), 1);
    assert_eq!(code(&run(&["solve"], tmp.path())), 1);
    assert_eq!(code(&run(&["solve", "--preset", "fig9"], tmp.path())), 1);
}

#[test]
fn invalid_thread_cap_exits_1() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_deception-game"))
        .args(["verify", "--preset", "fig4", "--out"])
        .arg(tmp.path())
        .env("DECEPTION_GAME_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn sweep_cutoff_is_monotone_and_hits_known_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "preset = fig4\n[sweep]\nkb_min = 0.125\nkb_max = 0.8\n");
    let o = run(&["sweep-cutoff", "--config", &cfg, "--points", "2"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("cutoff_sweep.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows[0].0, 0.125);
    assert!((rows[0].1 - 0.05997).abs() < 1e-5);
    assert_eq!(rows[1].0, 0.8);
    assert!((rows[1].1 - 0.3116).abs() < 1e-4);

    let o = run(&["sweep-cutoff", "--preset", "fig4", "--points", "300"], tmp.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("cutoff_sweep.csv")).unwrap();
    assert!(csv.starts_with("k_over_b,theta_hat\n") && csv.ends_with('\n'));
    let hats: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(hats.len(), 300);
    assert!(hats.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn strategy_profile_rows() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["strategy-profile", "--preset", "fig3b", "--points", "11"], tmp.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("strategy_profile.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "theta,sigma,regime");
    assert_eq!(lines[1], "0,0,separating");
    assert_eq!(lines[6], "0.5,1,pooled");
    let sigma: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(lines[2].starts_with("0.1,") && lines[2].ends_with(",separating"));
    assert!((sigma - 0.535).abs() < 1e-3);
}

#[test]
fn simulate_is_byte_stable_and_evidence_helps() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg_text = "preset = fig5\n[simulation]\nn_rounds = 100000\nrecord_trace = true\nshards = 3\n";
    let cfg_a = write_config(a.path(), cfg_text);
    let cfg_b = write_config(b.path(), cfg_text);
    let oa = run(&["simulate", "--config", &cfg_a, "--seed", "5"], a.path());
    let ob = run(&["simulate", "--config", &cfg_b, "--seed", "5"], b.path());
    assert_eq!(code(&oa), 0, "{}", stderr(&oa));
    assert_eq!(code(&ob), 0);
    for name in [
        "simulation_summary.csv",
        "simulation_pools.csv",
        "trace_with_evidence.csv",
        "trace_without_evidence.csv",
        "simulation_report.txt",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let summary = fs::read_to_string(a.path().join("simulation_summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][0], "without");
    assert_eq!(rows[1][0], "with");
    let mean = |r: &Vec<&str>| r[4].parse::<f64>().unwrap();
    let hw = |r: &Vec<&str>| r[5].parse::<f64>().unwrap();
    assert!(mean(&rows[1]) < mean(&rows[0]));
    assert!(hw(&rows[0]) < 2e-3 && hw(&rows[1]) < 2e-3);
    let trace = fs::read_to_string(a.path().join("trace_with_evidence.csv")).unwrap();
    assert_eq!(trace.lines().count(), 100_001);

    let other = TempDir::new().unwrap();
    let cfg_c = write_config(other.path(), cfg_text);
    run(&["simulate", "--config", &cfg_c, "--seed", "6"], other.path());
    assert_ne!(
        fs::read(a.path().join("simulation_summary.csv")).unwrap(),
        fs::read(other.path().join("simulation_summary.csv")).unwrap()
    );
}

#[test]
fn simulate_fig5_pool_costs() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["simulate", "--preset", "fig5"], tmp.path());
    assert_eq!(code(&o), 0);
    let pools = fs::read_to_string(tmp.path().join("simulation_pools.csv")).unwrap();
    let upper = |label: &str| -> f64 {
        pools
            .lines()
            .find(|l| l.starts_with(&format!("{label},1,0.25,1,")))
            .unwrap()
            .split(',')
            .nth(5)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((upper("with") - 0.0244).abs() < 5e-4);
    assert!((upper("without") - 0.0469).abs() < 5e-4);
}

#[test]
fn simulate_without_block_is_config_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["simulate", "--preset", "fig4"], tmp.path())), 1);
}
