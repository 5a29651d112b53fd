//! Exit-code and surface behavior of the `curriculum` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("curriculum-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn curriculum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curriculum"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
steps = 400
seeds = [9]

[scenario]
preset = "two_task_paper_like"

[[schedulers]]
kind = "fair"
"#;

#[test]
fn run_succeeds_and_writes_outputs() {
    let dir = workdir("run");
    let config = write_config(&dir, SMALL);
    let out = dir.join("out");
    let result = curriculum(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{result:?}");
    assert!(out.join("fair_seed9.csv").exists());
    assert!(out.join("summary.json").exists());
}

#[test]
fn run_honors_steps_and_format_overrides() {
    let dir = workdir("overrides");
    let config = write_config(&dir, SMALL);
    let out = dir.join("out");
    let result = curriculum(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--steps",
        "50",
        "--format",
        "json",
    ]);
    assert!(result.status.success(), "{result:?}");
    let text = std::fs::read_to_string(out.join("fair_seed9.json")).unwrap();
    let log: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(log["records"].as_array().unwrap().len(), 50);
    assert!(!out.join("fair_seed9.csv").exists());
}

#[test]
fn compare_prints_the_scheduler_table() {
    let dir = workdir("compare");
    let config = write_config(
        &dir,
        r#"
steps = 300
seeds = [4]
output_dir = "OUTDIR"

[scenario]
preset = "two_task_paper_like"

[[schedulers]]
kind = "static"
lambda = 0.5

[[schedulers]]
kind = "warmup"
"#
        .replace("OUTDIR", dir.join("out").to_str().unwrap())
        .as_str(),
    );
    let result = curriculum(&["compare", "--config", config.to_str().unwrap()]);
    assert!(result.status.success(), "{result:?}");
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(stdout.contains("lambda_MT"), "{stdout}");
    assert!(stdout.contains("WARMUP"), "{stdout}");
    assert!(stdout.contains("loss[MT]"), "{stdout}");
}

#[test]
fn transfer_emits_the_requested_pair() {
    let dir = workdir("transfer");
    let config = write_config(
        &dir,
        &format!(
            "steps = 400\nseeds = [2]\noutput_dir = \"{}\"\n\n[scenario]\npreset = \"two_task_paper_like\"\n\n[[schedulers]]\nkind = \"static\"\nlambda = 0.5\n",
            dir.join("out").display()
        ),
    );
    let result = curriculum(&["transfer", "--config", config.to_str().unwrap(), "--pair", "MT,LM"]);
    assert!(result.status.success(), "{result:?}");
    let csv = std::fs::read_to_string(dir.join("out/transfer_0_1.csv")).unwrap();
    assert!(csv.starts_with("step,mean\n"));
    assert!(csv.lines().count() > 1);

    let bad = curriculum(&["transfer", "--config", config.to_str().unwrap(), "--pair", "MT,nope"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn svg_format_keeps_csv_for_the_summary() {
    let dir = workdir("svg");
    let config = write_config(&dir, SMALL);
    let out = dir.join("out");
    let result = curriculum(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "svg",
    ]);
    assert!(result.status.success(), "{result:?}");
    assert!(out.join("fair_seed9.svg").exists());
    assert!(out.join("fair_seed9.csv").exists());
}

#[test]
fn thread_cap_env_var_is_honored_and_validated() {
    let dir = workdir("threads");
    let config = write_config(&dir, SMALL);
    let out = dir.join("out");

    let ok = Command::new(env!("CARGO_BIN_EXE_curriculum"))
        .args(["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("CURRICULUM_THREADS", "1")
        .output()
        .unwrap();
    assert!(ok.status.success(), "{ok:?}");

    let bad = Command::new(env!("CARGO_BIN_EXE_curriculum"))
        .args(["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("CURRICULUM_THREADS", "banana")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1), "{bad:?}");
}

#[test]
fn validation_errors_exit_one() {
    let dir = workdir("validation");
    let config = write_config(
        &dir,
        r#"
steps = 10
seeds = [1]

[scenario]
preset = "two_task_paper_like"

[[schedulers]]
kind = "static"
lambda = 2.0
"#,
    );
    let result = curriculum(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1), "{result:?}");
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert!(stderr.contains("lambda"), "{stderr}");
}

#[test]
fn parse_errors_exit_one_with_position() {
    let dir = workdir("parse");
    let config = write_config(&dir, "seeds = [1\n");
    let result = curriculum(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1), "{result:?}");
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert!(stderr.contains("line"), "{stderr}");
}

#[test]
fn missing_files_exit_two() {
    let result = curriculum(&["run", "--config", "/definitely/not/there.toml"]);
    assert_eq!(result.status.code(), Some(2), "{result:?}");
}
