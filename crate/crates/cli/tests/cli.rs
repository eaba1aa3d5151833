use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isochron"))
}

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demos").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn run_text(args: &[&str], text: &str) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, text).unwrap();
    let out = run(args, &cfg, &dir.path().join("out"));
    (out, dir)
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn every_demo_runs_cleanly() {
    let mut demos: Vec<PathBuf> = fs::read_dir(demo("")).unwrap().map(|e| e.unwrap().path()).collect();
    demos.sort();
    assert!(demos.len() >= 6);
    for d in demos {
        let out_dir = tempfile::tempdir().unwrap();
        let out = run(&[], &d, out_dir.path());
        assert_eq!(out.status.code(), Some(0), "{}: {}", d.display(), String::from_utf8_lossy(&out.stderr));
        let files: Vec<_> = fs::read_dir(out_dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert!(!files.is_empty(), "{}", d.display());
        for f in files {
            let f = f.to_string_lossy().into_owned();
            assert!(f.ends_with(".csv") || f.ends_with(".txt"), "stray file {f}");
        }
    }
}

#[test]
fn check_reports_the_resonant_branch() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = run(&["check"], &demo("resonant_check.cfg"), out_dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("resonant branch"));
    assert!(stdout.contains("all solutions are bounded"));
    let report = fs::read_to_string(out_dir.path().join("check_report.txt")).unwrap();
    assert_eq!(report.trim_end(), stdout.trim_end());
    let (header, rows) = csv_rows(&out_dir.path().join("zero_set.csv"));
    assert_eq!(header, "theta,phi_prime");
    assert_eq!(rows.len(), 2);
}

#[test]
fn linear_resonance_fails_the_condition() {
    let (out, _d) = run_text(&["check"], "[system]\npotential = harmonic\ncos1 = 1\n");
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn exact_equality_is_borderline() {
    // 4 [g(+inf) - g(-inf)] = 2π = max of 2Φ for f = cos
    let (out, _d) = run_text(&["check"], "[system]\npotential = harmonic\nperturbation = arctan\nscale = 0.5\ncos1 = 1\n");
    assert_eq!(out.status.code(), Some(5));
    let (out, _d) = run_text(
        &["check", "--tol", "0.1"],
        "[system]\npotential = harmonic\nperturbation = arctan\nscale = 0.55\ncos1 = 1\n",
    );
    assert_eq!(out.status.code(), Some(5));
    let (out, _d) = run_text(
        &["check", "--tol", "1e-9"],
        "[system]\npotential = harmonic\nperturbation = arctan\nscale = 0.55\ncos1 = 1\n",
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn configuration_errors_exit_1() {
    for (args, text) in [
        (vec!["check"], "[system]\npotential = harmonic\nbogus = 1\n"),
        (vec!["check"], "[system]\npotential = wobbly\n"),
        (vec!["check"], "not a config"),
        (vec!["phi"], "[system]\npotential = harmonic\n[command]\nrun = check\n"),
        (vec![], "[system]\npotential = harmonic\n"),
        (vec!["phi"], "[system]\npotential = harmonic\n[command]\nperiods = 4\n"),
        (vec!["verify"], "[system]\npotential = harmonic\n[command]\nladder = 1e2, 1e3\n"),
        (vec!["sweep"], "[system]\npotential = harmonic\n[command]\nescape_threshold = 1\n"),
    ] {
        let (out, _d) = run_text(&args, text);
        assert_eq!(out.status.code(), Some(1), "{args:?} {text:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    }
    let missing = bin().args(["check", "--config", "/nonexistent/run.cfg"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(bin().output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_2() {
    let (out, _d) = run_text(&["simulate"], "[system]\npotential = harmonic\n[command]\nx0 = 1e300\nperiods = 2\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn phi_matches_pi_cos() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = run(&["phi"], &demo("phi_cosine.cfg"), out_dir.path());
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&out_dir.path().join("phi.csv"));
    assert_eq!(header, "theta,phi,phi_prime");
    assert_eq!(rows.len(), 64);
    for r in rows {
        assert!((r[1] - PI * r[0].cos()).abs() < 1e-8);
        assert!((r[2] + PI * r[0].sin()).abs() < 1e-8);
    }
}

#[test]
fn harmonic_closed_orbit_repeats() {
    let (out, d) = run_text(
        &["simulate"],
        "[system]\npotential = harmonic\n[command]\nx0 = 2\ny0 = -1\nperiods = 20\n",
    );
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&d.path().join("out/simulate.csv"));
    assert_eq!(header, "k,t,x,y,energy");
    assert_eq!(rows.len(), 21);
    for r in &rows {
        assert!((r[2] - 2.0).abs() < 1e-8 && (r[3] + 1.0).abs() < 1e-8, "{r:?}");
        assert!((r[4] - 2.5).abs() < 1e-8);
    }
}

#[test]
fn verify_writes_the_convergence_table() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], &demo("verify_resonant.cfg"), out_dir.path());
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&out_dir.path().join("verify.csv"));
    assert_eq!(header, "t0,I0,eps,measured_dt,predicted_dt,measured_drho,predicted_drho,residual");
    assert_eq!(rows.len(), 12);
    for ladder in rows.chunks(3) {
        assert!(ladder[1][7] < ladder[0][7] && ladder[2][7] < ladder[1][7]);
    }
}

#[test]
fn verify_flags_a_flat_ladder() {
    // without forcing or g the residuals sit at integration noise
    let (out, _d) = run_text(
        &["verify"],
        "[system]\npotential = harmonic\n[command]\nladder = 1e2, 1e3, 1e4\nt0_samples = 1\nfloor = -1\n",
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn seed_is_accepted_and_ignored() {
    let text = "[system]\npotential = harmonic\ncos1 = 1\n[command]\nrun = phi\nsamples = 8\n";
    let (a, da) = run_text(&["--seed", "1"], text);
    let (b, db) = run_text(&["--seed", "2"], text);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(
        fs::read(da.path().join("out/phi.csv")).unwrap(),
        fs::read(db.path().join("out/phi.csv")).unwrap()
    );
}
