use std::path::Path;
use std::process::{Command, Output};

use nsflab::sweep::SweepManifest;

fn nsflab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsflab")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn thermo_check_reports_h7_failure_with_zero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let o = nsflab(dir.path(), &["thermo-check", "--out", "tc"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("H7") && l.contains("FAIL")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("H3 ") && l.contains("PASS")));
    let csv = std::fs::read_to_string(dir.path().join("tc/gibbs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 900);
}

#[test]
fn misspelled_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[grid]\ncells = [16]\nbcs = [\"slip\"]\n").unwrap();
    let o = nsflab(dir.path(), &["simulate", "--config", "c.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bcs"));
}

#[test]
fn coercivity_depends_only_on_seed() {
    let dir = tempfile::tempdir().unwrap();
    for (out, threads) in [("a", "1"), ("b", "3")] {
        let o = nsflab(dir.path(), &["coercivity", "--samples", "2000", "--seed", "5", "--out", out, "--threads", threads]);
        assert!(o.status.success());
    }
    let a = std::fs::read(dir.path().join("a/coercivity.toml")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/coercivity.toml")).unwrap());
    nsflab(dir.path(), &["coercivity", "--samples", "2000", "--seed", "6", "--out", "c"]);
    assert_ne!(a, std::fs::read(dir.path().join("c/coercivity.toml")).unwrap());
}

#[test]
fn simulate_writes_diagnostics_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "t_end = 0.1\n[grid]\ncells = [32]\n[output]\nstride = 0.05\n").unwrap();
    let o = nsflab(dir.path(), &["simulate", "--config", "c.toml", "--out", "nsf"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("nsf/diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("nsf/snapshots/state_0002.snap").exists());

    let o = nsflab(dir.path(), &["simulate", "--solver", "euler", "--config", "c.toml", "--out", "eu"]);
    assert!(o.status.success());
    let lifespan = std::fs::read_to_string(dir.path().join("eu/lifespan.toml")).unwrap();
    let table: toml::Table = lifespan.parse().unwrap();
    assert_eq!(table["lifespan"]["verdict"].as_str(), Some("smooth"));
    assert!(dir.path().join("eu/formulation_residuals.csv").exists());
}

#[test]
fn sweep_rate_fit_and_diag_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "t_end = 0.2\n[grid]\ncells = [32]\n[sweep]\na_values = [1e-2, 1e-3]\n").unwrap();
    let o = nsflab(dir.path(), &["sweep", "--config", "c.toml", "--out", "sw"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = SweepManifest::load(&dir.path().join("sw/manifest_well.toml")).unwrap();
    let fit = manifest.fit.clone().unwrap();

    let o = nsflab(dir.path(), &["rate-fit", "--manifest", "sw/manifest_well.toml", "--out", "rf"]);
    assert!(o.status.code().is_some_and(|c| c <= 1));
    let csv = std::fs::read_to_string(dir.path().join("rf/rate_fit.csv")).unwrap();
    let ratios: Vec<f64> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ratios, fit.ratios);

    let run = dir.path().join("sw/runs").join(&manifest.points[1].run_id);
    let o = nsflab(dir.path(), &["diag", "--run", run.to_str().unwrap(), "--out", "dg"]);
    assert!(o.status.success(), "{}", stdout(&o));
    for name in ["relative_energy.csv", "r1.csv"] {
        assert_eq!(std::fs::read(run.join(name)).unwrap(), std::fs::read(dir.path().join("dg").join(name)).unwrap());
    }
    let plot = std::fs::read_to_string(dir.path().join("sw/plot_well.dat")).unwrap();
    assert!(plot.starts_with("# a envelope E_sup E_sup/envelope\n"));
    assert_eq!(plot.lines().count(), 3);
}
