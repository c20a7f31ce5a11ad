use std::path::Path;
use std::process::{Command, Output};

fn facsca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facsca"))
        .args(args)
        .env_remove("FACSCA_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = facsca(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

fn bypass_fixture(dir: &Path) -> String {
    let manifest = r#"[
  {"shot_id": "a", "aus": [[6, 12], [6, 12], [6, 12]], "label": "Happiness"},
  {"shot_id": "b", "aus": [[1, 7, 15, 63], [1, 7, 15, 63]], "label": "Sadness"},
  {"shot_id": "c", "aus": [[6, 12], [], [6, 12], [6, 12]], "label": "Happiness"}
]"#;
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest).unwrap();
    let index = dir.join("index.json");
    ok(&["ingest", "--manifest", path.to_str().unwrap(), "--out", index.to_str().unwrap()]);
    index.to_str().unwrap().to_string()
}

#[test]
fn rules_prints_512_lines() {
    let out = ok(&["rules"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 512);
    assert_eq!(lines[0], "0: 000/000/000");
    assert_eq!(lines[1], "1: 000/010/000");
}

#[test]
fn build_patterns_contains_happiness_row() {
    let out = ok(&["build-patterns"]);
    assert!(out.lines().any(|l| l == "Happiness\t00$000$0000$1$00000$100000$"));
    assert_eq!(out.lines().filter(|l| l.starts_with("Disgust\t")).count(), 1);
    assert_eq!(out.lines().filter(|l| l.starts_with("Neutral\t")).count(), 1);
    assert_eq!(out, ok(&["build-patterns"]));

    let compressed = ok(&["build-patterns", "--mode", "paper"]);
    assert!(compressed.lines().any(|l| l == "Happiness\t00$000$0000$1$100000$"));
}

#[test]
fn bypass_query_returns_happiness_shots() {
    let dir = tempfile::tempdir().unwrap();
    let index = bypass_fixture(dir.path());
    let out = ok(&["query", "--index", &index, "--aus", "6,12"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "label\tHappiness");
    assert_eq!(lines[1], "pattern\t00$000$0000$1$00000$100000$");
    // a has a run of 3 Happiness frames, c only 2.
    assert_eq!(&lines[2..], ["a\tscore=3\tframes=0-2", "c\tscore=2\tframes=0-3"]);
}

#[test]
fn eval_on_perfect_run_reports_unit_f() {
    let dir = tempfile::tempdir().unwrap();
    let index = bypass_fixture(dir.path());
    let json = dir.path().join("metrics.json");
    let out = ok(&["eval", "--index", &index, "--out", json.to_str().unwrap()]);
    assert!(out.lines().any(|l| l == "micro precision=1.0000 recall=1.0000 F=1.0000"), "{out}");
    let happiness = out.lines().find(|l| l.starts_with("Happiness")).unwrap();
    assert_eq!(happiness.split_whitespace().collect::<Vec<_>>()[1..5], ["2", "0", "0", "1"]);
    let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(metrics[0]["label"], "Happiness");
    assert_eq!(metrics[0]["f_measure"], 1.0);
}

#[test]
fn missing_index_names_the_path() {
    let o = facsca(&["query", "--index", "/nonexistent/index.json", "--aus", "6,12"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("ERROR io: "), "{err}");
    assert!(err.contains("/nonexistent/index.json"));
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn bad_inputs_give_one_line_errors() {
    let o = facsca(&["query", "--index", "x.json", "--aus", "6,99"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("ERROR "));

    let o = facsca(&["rules", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("ERROR usage: "));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "no.such.key = 1\n").unwrap();
    let o = facsca(&["--config", cfg.to_str().unwrap(), "rules"]);
    assert!(stderr(&o).starts_with("ERROR config: "), "{}", stderr(&o));
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a.cfg");
    std::fs::write(&cfg, "eval.beta = 2\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_facsca"))
        .arg("config")
        .env("FACSCA_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(stdout(&o).lines().any(|l| l == "eval.beta = 2"), "{}", stdout(&o));
    assert!(ok(&["config"]).lines().any(|l| l == "eval.beta = 1"));
}

#[test]
fn help_lists_defaults() {
    for cmd in ["rules", "build-patterns", "train", "ingest", "query", "eval", "fixtures"] {
        let help = ok(&[cmd, "--help"]);
        assert!(help.contains("--config"), "{cmd}");
    }
    assert!(ok(&["query", "--help"]).contains("[default: index.json]"));
    assert!(ok(&["build-patterns", "--help"]).contains("[default: canonical]"));
}

#[test]
fn vision_fixtures_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = |p: &str| dir.path().join(p).to_str().unwrap().to_string();
    ok(&["fixtures", "--out", &d("")]);
    ok(&["train", "--gallery", &d("gallery"), "--models", &d("models")]);
    let first = ok(&["ingest", "--manifest", &d("manifest.json"), "--models", &d("models"), "--out", &d("i1.json")]);
    let second = ok(&["ingest", "--manifest", &d("manifest.json"), "--models", &d("models"), "--out", &d("i2.json")]);
    assert_eq!(first.replace("i1.json", ""), second.replace("i2.json", ""));
    assert_eq!(std::fs::read(d("i1.json")).unwrap(), std::fs::read(d("i2.json")).unwrap());

    let eval = ok(&["eval", "--index", &d("i1.json"), "--manifest", &d("manifest.json")]);
    assert!(eval.contains("F=1.0000"), "{eval}");

    let probe = d("frames/shot00_f0.ppm");
    let out = ok(&["query", "--index", &d("i1.json"), "--frame", &probe, "--models", &d("models")]);
    assert!(out.starts_with("label\tHappiness\n"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("shot00\t")));

    let o = facsca(&["query", "--index", &d("i1.json"), "--frame", &probe]);
    assert!(stderr(&o).starts_with("ERROR model: "));
}
