use std::path::Path;
use std::process::Command;

use furuta_es::output::split_comment;

const BIN: &str = env!("CARGO_BIN_EXE_furuta-es");

const SMALL: &str = r#"{
    "sim": {"tf": 2.0},
    "es": {"max_iter": 2, "n_cand": 30, "n_min_samples": 100, "n_fantasy": 8},
    "search": {"n": 20}
}"#;

fn run(dir: &Path, args: &[&str], out: &str) -> (i32, String) {
    let out_path = dir.join(out);
    let status = Command::new(BIN)
        .args(["--config", dir.join("cfg.json").to_str().unwrap(), "--seed", "5"])
        .args(["--out", out_path.to_str().unwrap()])
        .args(args)
        .output()
        .unwrap();
    let text = std::fs::read_to_string(&out_path).unwrap_or_default();
    (status.status.code().unwrap(), text)
}

#[test]
fn every_subcommand_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), SMALL).unwrap();
    let cases: [&[&str]; 6] = [
        &["simulate"],
        &["lqr"],
        &["random-search", "--threads", "2"],
        &["es-optimize"],
        &["sweep", "--axis", "q2_0", "--points", "5"],
        &["sweep", "--axis", "q1_0", "--values", "-1.0,0.5", "--gains", "a=600,5e6,50,500"],
    ];
    for args in cases {
        let (c1, a) = run(dir.path(), args, "a.csv");
        let (c2, b) = run(dir.path(), args, "b.csv");
        assert_eq!((c1, c2), (0, 0), "{args:?}");
        let (comments, body_a) = split_comment(&a);
        let (_, body_b) = split_comment(&b);
        assert!(comments[0].starts_with("# furuta-es "), "{args:?}");
        assert!(body_a.lines().count() > 1, "{args:?}");
        assert_eq!(body_a, body_b, "{args:?}");
    }
}

#[test]
fn random_search_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), SMALL).unwrap();
    let (_, a) = run(dir.path(), &["random-search", "--threads", "1"], "a.csv");
    let (_, b) = run(dir.path(), &["random-search", "--threads", "3"], "b.csv");
    assert_eq!(split_comment(&a).1, split_comment(&b).1);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"sim": {"dt": 0.0}}"#).unwrap();
    assert_eq!(run(dir.path(), &["simulate"], "x.csv").0, 2);
    std::fs::write(dir.path().join("cfg.json"), "{}").unwrap();
    assert_eq!(run(dir.path(), &["simulate", "--gains", "-1,1,1,1"], "x.csv").0, 2);
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"sim": {"tf": 1.0, "guard": 1e3, "guard_enabled": false}}"#)
        .unwrap();
    assert_eq!(run(dir.path(), &["simulate"], "x.csv").0, 3);
}
