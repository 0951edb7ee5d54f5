use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn divrec(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divrec"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("DIVREC_OUT_DIR")
        .env_remove("DIVREC_THREADS")
        .output()
        .expect("spawn divrec")
}

fn ok(out: &Path, args: &[&str]) {
    let o = divrec(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// simulate → ingest → evaluate → fairness in `dir`; returns the report files.
pub fn pipeline(dir: &Path, seed: u64) -> Vec<PathBuf> {
    let seed = seed.to_string();
    ok(dir, &["simulate", "--users", "200", "--domains", "60", "--seed", &seed]);
    let t1 = dir.join("traffic_wave1.csv");
    let t2 = dir.join("traffic_wave2.csv");
    ok(
        dir,
        &[
            "ingest",
            "--traffic",
            s(&t1),
            "--traffic",
            s(&t2),
            "--survey",
            s(&dir.join("survey.csv")),
            "--scores",
            s(&dir.join("scores.csv")),
            "--slants",
            s(&dir.join("slants.csv")),
            "--min-visitors",
            "5",
            "--seed",
            &seed,
        ],
    );
    let panel = dir.join("panel.json");
    ok(dir, &["evaluate", "--panel", s(&panel), "--seed", &seed, "--min-bin-users", "1"]);
    ok(dir, &["fairness", "--panel", s(&panel), "--seed", &seed]);
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = pipeline(a.path(), 11);
    let fb = pipeline(b.path(), 11);
    let names = |f: &[PathBuf]| -> Vec<String> {
        f.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect()
    };
    assert_eq!(names(&fa), names(&fb));
    for name in ["panel.json", "ratings.csv", "per_k.csv", "fairness.csv", "manifest.json"] {
        assert!(names(&fa).iter().any(|n| n == name), "missing {name}");
    }
    for (x, y) in fa.iter().zip(&fb) {
        if x.extension().is_some_and(|e| e == "json") && x.to_string_lossy().ends_with(".config.json") {
            // resolved configs embed the output directory
            continue;
        }
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{} differs", x.display());
    }
}

#[test]
fn evaluate_reports_all_four_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), 5);
    let mut r = csv::Reader::from_path(dir.path().join("per_k.csv")).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "algorithm").unwrap();
    let algos: std::collections::BTreeSet<String> =
        r.records().map(|rec| rec.unwrap()[col].to_string()).collect();
    assert_eq!(algos.len(), 4, "{algos:?}");
}

#[test]
fn thread_count_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), 7);
    let panel = dir.path().join("panel.json");
    let reference = std::fs::read(dir.path().join("per_k.csv")).unwrap();
    let other = tempfile::tempdir().unwrap();
    ok(
        other.path(),
        &["--threads", "3", "evaluate", "--panel", s(&panel), "--seed", "7", "--min-bin-users", "1"],
    );
    assert_eq!(std::fs::read(other.path().join("per_k.csv")).unwrap(), reference);
}

#[test]
fn resolved_config_is_written() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--users", "100", "--domains", "80", "--seed", "2"]);
    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("simulate.config.json")).unwrap()).unwrap();
    assert_eq!(cfg["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(cfg["command"]["simulate"]["seed"], 2);
}

fn error_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().rev().find(|l| l.starts_with('{')).expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = divrec(d, &["evaluate", "--panel", s(&d.join("missing.json"))]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_json(&o);
    assert_eq!(e["error"], "io");
    assert_eq!(e["exit_code"], 1);

    let o = divrec(d, &["simulate", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "usage");

    pipeline(d, 3);
    let panel = d.join("panel.json");
    let o = divrec(d, &["evaluate", "--panel", s(&panel), "--split", "longitudinal"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "invalid_input");

    let o = divrec(d, &["evaluate", "--panel", s(&panel), "--boundary", "2024-01-01T00:00:00Z"]);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(d.join("bad.json"), "{ not json").unwrap();
    let o = divrec(d, &["stats", "--panel", s(&d.join("bad.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "json");

    let o = divrec(d, &["--threads", "0", "stats", "--panel", s(&panel)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn computation_errors_map_to_exit_two() {
    // well-formed inputs are screened before any numerical stage, so the
    // computation classes are checked on the error type the binary maps
    use divrec::Error;
    for e in [
        Error::EmptyProfile,
        Error::Degenerate("x".into()),
        Error::RankDeficient,
        Error::NsbNonConvergence { residual: 1.0 },
    ] {
        assert!(!e.is_input(), "{}", e.kind());
    }
    assert!(Error::InvalidInput("x".into()).is_input());
}

#[test]
fn small_panel_errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let survey = "user_id,partisanship\nu1,1\nu2,7\nu3,4\n";
    let scores = "domain,score,category\na.com,70,green\nb.com,20,red\nc.com,80,green\n";
    let traffic = "user_id,domain,timestamp,pageviews\nu1,a.com,,1\nu2,b.com,,1\nu3,c.com,,2\nu1,c.com,,1\n";
    for (name, body) in [("survey.csv", survey), ("scores.csv", scores), ("t.csv", traffic)] {
        std::fs::write(d.join(name), body).unwrap();
    }
    ok(
        d,
        &[
            "ingest",
            "--traffic",
            s(&d.join("t.csv")),
            "--survey",
            s(&d.join("survey.csv")),
            "--scores",
            s(&d.join("scores.csv")),
            "--min-visitors",
            "1",
        ],
    );
    let panel = d.join("panel.json");
    for cmd in ["nulltest", "fairness", "stratify"] {
        let o = divrec(d, &[cmd, "--panel", s(&panel)]);
        assert_eq!(o.status.code(), Some(1), "{cmd}");
        let e = error_json(&o);
        assert_eq!(e["error"], "invalid_input");
        assert!(e["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    ok(d, &["evaluate", "--panel", s(&panel)]);
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        assert!(divrec(dir.path(), &[flag]).status.success());
    }
}
