use std::path::Path;
use std::process::{Command, Output};

use wigner_lab::ensemble::WignerMatrix;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wigner-lab"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--out").arg(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn delta_happy_path_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["delta", "--law", "rademacher", "--n", "20,40,80", "--replicas", "30", "--seed", "7", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 1);
    let csv = std::fs::read_to_string(dir.path().join("delta_scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,replicas,delta_hat,mc_stderr,seed"));
    let ns: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns, vec!["20", "40", "80"]);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], 1);
    assert!(summary["fit"]["slope"].is_number());
    assert_eq!(summary["config"]["law"], "rademacher");

    let refit = run_in(dir.path(), &["rate-fit"]);
    assert_eq!(refit.status.code(), Some(0));
    assert!(stdout(&refit).contains("slope="));
    assert!(dir.path().join("rate_fit.json").exists());
}

#[test]
fn delta_single_n_reports_undefined_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["delta", "--law", "gaussian", "--n", "30", "--replicas", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["fit"].is_null());
    assert!(summary["fit_error"].as_str().unwrap().contains("at least 3"));
    assert_eq!(run_in(dir.path(), &["rate-fit"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing_law = run_in(dir.path(), &["delta", "--n", "100"]);
    assert_eq!(missing_law.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing_law.stderr).contains("--law"));
    assert_eq!(run_in(dir.path(), &["delta", "--law", "pareto:3"]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &["delta", "--law", "gaussian", "--n", "200,100"]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &["identity-check", "--z", "1+x"]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &["spectrum", "--law", "gaussian", "--n", "4,8"]).status.code(), Some(1));
    assert_eq!(bin().args(["delta", "--unknown-flag"]).output().unwrap().status.code(), Some(1));
    assert!(!dir.path().join("delta_scan.csv").exists());
}

#[test]
fn help_lists_every_flag() {
    for sub in ["sample", "spectrum", "delta", "stieltjes-scan", "rate-fit", "identity-check", "inequality-check"] {
        let o = bin().args([sub, "--help"]).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for flag in [
            "--law", "--truncate", "--n", "--replicas", "--seed", "--z", "--grid", "--a0", "--a ", "--d-const", "--kappa",
            "--threads", "--out", "--config",
        ] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
        assert!(text.contains("default"), "{sub} help lacks defaults");
    }
}

#[test]
fn identity_check_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["identity-check", "--n", "64", "--z", "1+0.05i", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("max_residual="));
    let csv = std::fs::read_to_string(dir.path().join("identity_report.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("n,seed,u,v,max_residual_schur,max_residual_rjj1,max_eps4_ratio,residual_73,residual_lambda")
    );
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn identity_check_flags_violation_with_exit_two() {
    // placing z within 1e-12 of an eigenvalue drives the resolvent to ~1e12
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["spectrum", "--law", "gaussian", "--n", "32", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let lambda: f64 = csv.lines().nth(16).unwrap().parse().unwrap();
    let z = format!("{lambda}+1e-12i");
    let o = run_in(dir.path(), &["identity-check", "--law", "gaussian", "--n", "32", "--z", &z, "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(dir.path().join("identity_report.csv").exists());

    // away from the spectrum a tiny v is harmless
    let o = run_in(dir.path(), &["identity-check", "--law", "gaussian", "--n", "32", "--z", "5+1e-13i", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "law = gaussian\nn = 10, 20, 30\nreplicas = 4\nseed = 1\n").unwrap();
    let o = run_in(dir.path(), &["delta", "--config", cfg.to_str().unwrap(), "--n", "12,24,36"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("delta_scan.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("12,4,"));
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "flavour = strange\n").unwrap();
    assert_eq!(run_in(dir.path(), &["delta", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn sample_round_trips_and_spectrum_emits_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["sample", "--law", "pareto:4.5", "--truncate", "D=1,kappa=0.5", "--n", "16", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let file = std::fs::File::open(dir.path().join("matrix_n16_seed5.wgnr")).unwrap();
    let w = WignerMatrix::read_from(file).unwrap();
    let direct = WignerMatrix::build(16, "pareto:4.5".parse().unwrap(), 5, Some("D=1,kappa=0.5".parse().unwrap())).unwrap();
    assert_eq!(w.as_slice(), direct.as_slice());

    let o = run_in(dir.path(), &["spectrum", "--law", "rademacher", "--n", "50", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let vals: Vec<f64> = csv.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(csv.lines().next(), Some("lambda"));
    assert_eq!(vals.len(), 50);
    assert!(vals.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn stieltjes_scan_and_inequality_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["stieltjes-scan", "--law", "gaussian", "--n", "40,80", "--replicas", "20", "--grid", "3x2"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("stieltjes_scan.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,u,v,re_m,im_m,re_s,im_s,abs_diff,bound,ratio"));
    assert_eq!(csv.lines().count(), 1 + 2 * 6);

    let o = run_in(dir.path(), &["inequality-check", "--n", "4,6", "--q", "4", "--matrices", "2", "--replicas", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("inequality_report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("dim,q,law,mc,stderr,exact,rhs,k_hat"));
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(run_in(dir.path(), &["inequality-check", "--q", "5"]).status.code(), Some(1));
}
