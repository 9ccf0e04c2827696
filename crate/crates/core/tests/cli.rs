use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn sociopol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sociopol")).args(args).output().expect("binary runs")
}

fn run(config: &Path, out: &Path, scenario: &str) -> Output {
    sociopol(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--scenario",
        scenario,
        "--seed-set",
        "cli",
    ])
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_then_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let desk = root().join("configs/desk.json");
    let control = tmp.path().join("control");
    let social = tmp.path().join("social");
    for (dir, scenario) in [(&control, "control"), (&social, "social_staggered")] {
        let out = run(&desk, dir, scenario);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["summary.json", "turnout.csv", "intentions.csv", "assignment.csv", "posts.jsonl", "rounds.jsonl"] {
        assert!(social.join(f).exists(), "missing {f}");
    }

    let analysis = tmp.path().join("analysis");
    let out = sociopol(&[
        "export-figure-data",
        control.to_str().unwrap(),
        social.to_str().unwrap(),
        "--out",
        analysis.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let effects = String::from_utf8(read(analysis.join("effects_turnout.csv"))).unwrap();
    assert!(effects.lines().count() > 1);
    assert!(analysis.join("figure_meta.json").exists());

    let out = sociopol(&["analyze", control.to_str().unwrap(), "--out", analysis.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn effective_config_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    assert_eq!(run(&root().join("configs/desk.json"), &first, "info_all").status.code(), Some(0));
    assert_eq!(run(&first.join("effective_config.json"), &second, "info_all").status.code(), Some(0));
    for f in ["rounds.jsonl", "intentions.csv", "turnout.csv", "summary.json"] {
        assert!(read(first.join(f)) == read(second.join(f)), "{f} differs");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(sociopol(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sociopol(&["run", "--config", "/nonexistent.json", "--out", "x"]).status.code(), Some(1));
    let desk = root().join("configs/desk.json");
    let out = sociopol(&["run", "--config", desk.to_str().unwrap(), "--out", "x", "--scenario", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(sociopol(&["--help"]).status.code(), Some(0));
}

#[test]
fn http_backend_without_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("http.json");
    let data = root().join("data");
    let body = serde_json::json!({
        "population_size": 50,
        "census_path": data.join("adult_sample.csv"),
        "graph_path": data.join("follow_graph.txt"),
        "backend": { "kind": "http", "base_url": "http://127.0.0.1:9" },
    });
    std::fs::write(&config, body.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sociopol"))
        .env_remove("SOCIOPOL_API_KEY")
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SOCIOPOL_API_KEY"));
}
