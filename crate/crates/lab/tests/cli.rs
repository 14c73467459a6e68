use std::path::PathBuf;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bivariant-lab")).args(args).output().unwrap()
}

fn scenario(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn strict_inclusion_passes_and_prints_the_witness() {
    let o = lab(&["check", &scenario("strict_inclusion.scn")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("4/4 checks ok"));
    assert!(out.contains("witness:"));
    assert!(out.contains("probe = pt:(0)"));
    assert!(out.contains("g1 = pt->X[a]"));
    assert!(out.contains("g2 = pt->X[b]"));
}

#[test]
fn axioms_small_passes() {
    let o = lab(&["check", &scenario("axioms_small.scn")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn corrupted_fixture_reports_a_counterexample() {
    let o = lab(&["check", &scenario("fixtures/corrupted.scn")]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("[FAIL] equal(d1, d2)"));
    assert!(out.contains("counterexample:"));
    assert!(out.contains("lhs   = "));
}

#[test]
fn every_fixture_exits_one() {
    for f in ["corrupted", "non_pointwise", "wrong_correspondence"] {
        let o = lab(&["check", &scenario(&format!("fixtures/{f}.scn"))]);
        assert_eq!(o.status.code(), Some(1), "{f}");
    }
}

#[test]
fn configuration_errors_exit_two_with_a_position() {
    let dir = tempdir();
    let path = dir.join("bad.scn");
    std::fs::write(&path, "site {\n  object X = [a, b]\n  f: X -> X [a, c]\n}\nfunctor = rankvect {}\n").unwrap();
    let p = path.to_string_lossy().into_owned();
    for cmd in ["check", "validate"] {
        let o = lab(&[cmd, &p]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains(":3:17: `c` is not an element of `X`"), "{}", stderr(&o));
    }
    assert_eq!(lab(&["check", "no/such/file.scn"]).status.code(), Some(2));
    assert_eq!(lab(&["check", "x", "--format", "yaml"]).status.code(), Some(2));
    assert_eq!(lab(&["demo", "nonsense"]).status.code(), Some(2));
}

#[test]
fn validate_counts_checks() {
    let o = lab(&["validate", &scenario("strict_inclusion.scn")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "ok: 4 checks");
}

#[test]
fn machine_format_is_json_and_matches_the_report_file() {
    let dir = tempdir();
    let report = dir.join("out.json");
    let o = lab(&[
        "check",
        "finiteness",
        "--seed",
        "7",
        "--format",
        "machine",
        "--report",
        &report.to_string_lossy(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let written = std::fs::read_to_string(&report).unwrap();
    assert_eq!(written, stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&written).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["status"], "pass");
    assert_eq!(v["checks"][0]["witness"][0], "p = x^2+2");
    assert!(v.get("time").is_none());
}

#[test]
fn every_demo_runs() {
    for name in [
        "pushforward-identity",
        "subtheory-closure",
        "strict-inclusion",
        "delta-cap",
        "grothendieck",
        "quillen",
        "finiteness",
    ] {
        let o = lab(&["demo", name]);
        assert_eq!(o.status.code(), Some(0), "{name}");
        assert!(stdout(&o).contains("checks ok"), "{name}");
    }
}

fn tempdir() -> PathBuf {
    use std::sync::atomic::{AtomicU32, Ordering};
    static N: AtomicU32 = AtomicU32::new(0);
    let d = std::env::temp_dir().join(format!(
        "bivariant-lab-cli-{}-{}",
        std::process::id(),
        N.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&d).unwrap();
    d
}
