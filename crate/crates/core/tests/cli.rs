use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_squad-mt")).current_dir(dir).args(args).env_remove("DEEPL_API_KEY").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn translate_resume_and_floor() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(cli(d, &["synth", "--output", "in.json", "--scale", "small"]).status.success());

    let o = cli(d, &["translate", "--input", "in.json", "--output", "out.json", "--target-lang", "fi"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("(100.0%)"));
    assert!(d.join("out.json.run/manifest.json").exists());
    assert!(d.join("out.json.report.json").exists());

    let o = cli(d, &["resume", "--run-dir", "out.json.run", "--target-lang", "de"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target_lang"));
    assert!(cli(d, &["resume", "--run-dir", "out.json.run"]).status.success());

    let o = cli(
        d,
        &["translate", "--input", "in.json", "--output", "lossy.json", "--target-lang", "fi", "--backend", "mock"]
            .into_iter()
            .chain(["--mock-drop", "0.9", "--min-retention", "0.95"])
            .collect::<Vec<_>>(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(cli(d, &["synth", "--output", "in.json", "--scale", "small"]).status.success());
    std::fs::write(
        d.join("run.toml"),
        "target_lang = \"sv\"\njobs = 2\n[backend]\nkind = \"mock\"\n[backend.mock]\nreverse_words = true\n",
    )
    .unwrap();
    let o = cli(d, &["translate", "--input", "in.json", "--output", "a.json", "--config", "run.toml"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("en→sv"));
    let o = cli(d, &["translate", "--input", "in.json", "--output", "b.json", "--config", "run.toml", "--target-lang", "fi"]);
    assert!(stdout(&o).contains("en→fi"));
    std::fs::write(d.join("bad.toml"), "target_langg = \"sv\"\n").unwrap();
    let o = cli(d, &["translate", "--input", "in.json", "--output", "c.json", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn service_backend_needs_confirmation_and_a_key() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(cli(d, &["synth", "--output", "in.json", "--scale", "small"]).status.success());
    let base = ["translate", "--input", "in.json", "--output", "o.json", "--target-lang", "fi", "--backend", "service"];
    let o = cli(d, &base);
    let err = String::from_utf8_lossy(&o.stderr).into_owned();
    assert_eq!(o.status.code(), Some(1));
    assert!(err.contains("characters") && err.contains("--yes"), "{err}");
    let o = cli(d, &[&base[..], &["--yes"]].concat());
    assert!(String::from_utf8_lossy(&o.stderr).contains("DEEPL_API_KEY"));
}

#[test]
fn stats_score_and_review() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/metric/");
    let o = cli(d, &["score", "--dataset", &format!("{fixtures}dataset.json"), "--predictions", &format!("{fixtures}predictions.json")]);
    assert!(stdout(&o).starts_with("exact 42.8571  f1 54.0816  total 14"), "{}", stdout(&o));

    let o = cli(d, &["stats", "--input", &format!("{fixtures}dataset.json")]);
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["questions"], 14);

    assert!(cli(d, &["synth", "--output", "in.json", "--scale", "small"]).status.success());
    let o = cli(d, &["sample-review", "--source", "in.json", "--translated", "in.json", "-n", "5", "--output", "s.tsv"]);
    assert!(o.status.success());
    let o = cli(d, &["aggregate-review", "--sheet", "s.tsv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no category"));
    let sheet = std::fs::read_to_string(d.join("s.tsv")).unwrap();
    let filled: String = sheet
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 0 { format!("{l}\n") } else { format!("{}\tCorrect\t\n", l.strip_suffix("\t\t").unwrap()) })
        .collect();
    std::fs::write(d.join("s.tsv"), filled).unwrap();
    let o = cli(d, &["aggregate-review", "--sheet", "s.tsv"]);
    assert!(stdout(&o).contains("Correct"), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("100.0"));
}
