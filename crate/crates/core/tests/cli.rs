//! End-to-end runs of the `arcpursuit` binary.

use std::path::Path;
use std::process::{Command, Output};

use arcpursuit::cli::{RunConfig, CONFIG_KEYS};
use arcpursuit::sim::{EpisodeRecord, RecordHeader, Mode};
use arcpursuit::sim::record::{RECORD_SCHEMA, RECORD_VERSION};
use arcpursuit::world::EpisodeStatus;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arcpursuit"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("ARCPURSUIT_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const SHORT: [&str; 2] = ["--set", "episode.env.t_max=10.0"];

fn csv_width(path: &Path) -> (usize, usize) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let width = r.headers().unwrap().len();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert!(rows.iter().all(|row| row.len() == width), "{}: ragged rows", path.display());
    (width, rows.len())
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let help = run(dir.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    let help = text(&help.stdout);
    for (key, unit, _) in CONFIG_KEYS {
        assert!(help.contains(&format!("{key} [{unit}]")), "help lacks {key}");
    }
    assert_eq!(code(&run(dir.path(), &["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["bogus"])), 1);
    assert_eq!(code(&run(dir.path(), &["eval", "--episodes", "lots"])), 1);
    assert_eq!(code(&run(dir.path(), &["eval", "--mode", "sideways"])), 1);
    let o = run(dir.path(), &["eval", "--mode", "actor", "--episodes", "1"]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("--weights"));
}

#[test]
fn config_errors_exit_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[episode]\nn_defenders = 6\nc_neg = \"fast\"\n").unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "selftest"]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("line 3"), "{}", text(&o.stderr));

    assert_eq!(code(&run(dir.path(), &["--set", "episode.n_defenders=1", "config"])), 2);
    assert_eq!(code(&run(dir.path(), &["--set", "episode.no_such_key=1", "config"])), 2);
    assert_eq!(code(&run(dir.path(), &["--config", "/nonexistent/run.toml", "config"])), 2);
}

#[test]
fn printed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--set", "episode.n_defenders=8", "config"]);
    assert_eq!(code(&o), 0);
    let cfg = RunConfig::from_toml(&text(&o.stdout), "stdout").unwrap();
    assert_eq!(cfg.episode.n_defenders, 8);
    assert_eq!(cfg.session, RunConfig::default().session);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["selftest"]);
    let out = text(&o.stdout);
    assert_eq!(code(&o), 0, "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{out}");
}

#[test]
fn corrupt_inputs_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("weights.json");
    std::fs::write(&w, "{\"format\": \"something-else\"}").unwrap();
    let o = run(dir.path(), &["eval", "--weights", w.to_str().unwrap(), "--episodes", "1"]);
    assert_eq!(code(&o), 3, "{}", text(&o.stderr));

    let rec = dir.path().join("rec.jsonl");
    std::fs::write(&rec, "{\"schema\": \"arcpursuit-episode\", \"version\": 99}\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["replay", rec.to_str().unwrap()])), 3);
    assert_eq!(code(&run(dir.path(), &["replay", "/nonexistent.jsonl"])), 3);
}

#[test]
fn train_eval_replay_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let train_dir = dir.path().join("train");
    let o = run(&train_dir, &[&SHORT[..], &["train", "--episodes", "2", "--seed", "3"]].concat());
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    for f in ["weights.json", "loss_curves.csv", "train_episodes.csv", "train_manifest.json"] {
        assert!(train_dir.join(f).is_file(), "missing {f}");
    }
    assert_eq!(csv_width(&train_dir.join("train_episodes.csv")), (6, 2));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(train_dir.join("train_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 3);
    assert_eq!(manifest["config"]["session"]["episodes"], 2);
    assert!(manifest["weights_out"].as_str().unwrap().ends_with("weights.json"));

    let weights = train_dir.join("weights.json");
    let eval_dir = dir.path().join("eval");
    let o = run(
        &eval_dir,
        &[&SHORT[..], &["eval", "--weights", weights.to_str().unwrap(), "--episodes", "2", "--n-defenders", "5", "--records"]].concat(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("success"));
    assert_eq!(csv_width(&eval_dir.join("eval_summary.csv")), (10, 1));
    let records: Vec<_> = std::fs::read_dir(eval_dir.join("records")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(records.len(), 2);

    let rec = EpisodeRecord::load(&records[0]).unwrap();
    let replay_dir = dir.path().join("replay");
    let o = run(&replay_dir, &["replay", records[0].to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let n = 5;
    let rows = rec.rows.len();
    assert_eq!(csv_width(&replay_dir.join("theta.csv")), (1 + 5 * n, rows));
    assert_eq!(csv_width(&replay_dir.join("commands.csv")), (1 + 5 * n, rows));
    assert_eq!(csv_width(&replay_dir.join("trajectories.csv")), (2 + 4 * (n + 1), rows));
    assert_eq!(csv_width(&replay_dir.join("consensus.csv")), (4, rows));

    let aug_dir = dir.path().join("augment");
    let o = run(&aug_dir, &["augment", "--weights", weights.to_str().unwrap(), "--count", "3"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let lines = std::fs::read_to_string(aug_dir.join("augment_samples.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);
    assert!(lines.lines().all(|l| l.contains("\"is_virtual\":true")));
}

#[test]
fn replay_of_header_only_record_writes_header_only_tables() {
    let dir = tempfile::tempdir().unwrap();
    let rec = EpisodeRecord {
        header: RecordHeader {
            schema: RECORD_SCHEMA.into(),
            version: RECORD_VERSION,
            n_defenders: 4,
            mode: Mode::Expert,
            seed: 1,
            status: EpisodeStatus::Running,
            duration: 0.0,
            error: Some("spawn failed".into()),
        },
        rows: Vec::new(),
    };
    let path = rec.save(dir.path()).unwrap();
    let out = dir.path().join("replay");
    assert_eq!(code(&run(&out, &["replay", path.to_str().unwrap()])), 0);
    assert_eq!(csv_width(&out.join("theta.csv")), (21, 0));
    assert_eq!(csv_width(&out.join("trajectories.csv")), (22, 0));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_arcpursuit"))
        .args(["--set", "episode.env.t_max=5.0", "eval", "--mode", "expert", "--episodes", "1"])
        .env("ARCPURSUIT_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(dir.path().join("eval_summary.csv").is_file());
}
