//! End-to-end tests of the mdcn binary: exit codes, file outputs, replay
//! determinism, and the train/eval/permtest flows.

use std::path::Path;
use std::process::Command;

use manifold_dcn::data::load_dataset;

fn run_in(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mdcn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Stdout line "accuracy <v> (...)" parsed back to a float.
fn accuracy_of(stdout: &str) -> f64 {
    let line = stdout.lines().find(|l| l.starts_with("accuracy ")).expect("accuracy line");
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn gen_without_out_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run_in(dir.path(), &["gen", "--kind", "spd-rotating"]);
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("--out"), "stderr: {err}");
}

#[test]
fn unknown_gen_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run_in(dir.path(), &["gen", "--kind", "mystery", "--out", "x.msq"]);
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("mystery"));
}

#[test]
fn gen_writes_a_loadable_dataset_and_a_replayable_dump() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run_in(
        dir.path(),
        &[
            "gen",
            "--kind",
            "spd-rotating",
            "--classes",
            "30,60",
            "--n",
            "5",
            "--len",
            "6",
            "--dim",
            "3",
            "--seed",
            "7",
            "--out",
            "d.msq",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("wrote d.msq"));

    let ds = load_dataset(dir.path().join("d.msq")).unwrap();
    assert_eq!(ds.len(), 10);
    assert_eq!(ds.dim(), 3);

    let dump = std::fs::read_to_string(dir.path().join("d.msq.config.txt")).unwrap();
    assert!(dump.contains("command = gen"));
    assert!(dump.contains("seed = 7"));

    // Replaying from the dump alone reproduces the dataset byte for byte.
    let first = std::fs::read(dir.path().join("d.msq")).unwrap();
    let (code, _, err) =
        run_in(dir.path(), &["gen", "--config", "d.msq.config.txt", "--out", "replay.msq"]);
    assert_eq!(code, 0, "stderr: {err}");
    let second = std::fs::read(dir.path().join("replay.msq")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn gen_groups_writes_one_file_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run_in(
        dir.path(),
        &[
            "gen", "--kind", "groups", "--n", "3", "--len", "15", "--dim", "3", "--effect", "0",
            "--seed", "2", "--out", "g.msq",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("g_a.msq") && out.contains("g_b.msq"), "stdout: {out}");
    let a = load_dataset(dir.path().join("g_a.msq")).unwrap();
    let b = load_dataset(dir.path().join("g_b.msq")).unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(b.len(), 3);
    assert!(a.entries().iter().all(|(_, label)| label.is_none()));
}

#[test]
fn train_then_eval_separates_a_toy_task() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run_in(
        dir.path(),
        &[
            "gen",
            "--kind",
            "spd-rotating",
            "--classes",
            "0,90",
            "--n",
            "6",
            "--len",
            "8",
            "--dim",
            "3",
            "--noise",
            "0",
            "--seed",
            "7",
            "--out",
            "toy.msq",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");

    let (code, out, err) = run_in(
        dir.path(),
        &[
            "train", "--data", "toy.msq", "--out", "toy.mpar", "--blocks", "1,2,2", "--kernel",
            "2", "--templates", "2", "--epochs", "40", "--lr", "0.1", "--batch", "4", "--seed",
            "1",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("wrote toy.mpar"));
    assert!(dir.path().join("toy.mpar.config.txt").exists());

    // The training dump alone reconstructs the architecture for eval.
    let (code, out, err) = run_in(
        dir.path(),
        &[
            "eval",
            "--config",
            "toy.mpar.config.txt",
            "--data",
            "toy.msq",
            "--model",
            "toy.mpar",
            "--out",
            "metrics.csv",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert_eq!(accuracy_of(&out), 1.0, "stdout: {out}");
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(csv.starts_with("kind,row,col,value\naccuracy,,,1\n"), "csv: {csv}");
    assert!(csv.contains("confusion,0,0,6"));
    assert!(csv.contains("confusion,1,0,0"));
}

#[test]
fn eval_with_mismatched_dim_names_both_dims() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "gen", "--kind", "spd-rotating", "--classes", "0,90", "--n", "2", "--len", "5",
            "--dim", "3", "--seed", "1", "--out", "d.msq",
        ],
    );
    run_in(
        dir.path(),
        &[
            "train", "--data", "d.msq", "--out", "m.mpar", "--blocks", "1,1,1", "--kernel", "2",
            "--templates", "1", "--epochs", "1",
        ],
    );
    std::fs::write(
        dir.path().join("wrong.txt"),
        "dim = 5\nblocks = 1,1,1\nkernel = 2\ntemplates = 1\n",
    )
    .unwrap();
    let (code, _, err) = run_in(
        dir.path(),
        &["eval", "--config", "wrong.txt", "--data", "d.msq", "--model", "m.mpar"],
    );
    assert_eq!(code, 1, "stderr: {err}");
    assert!(err.contains("dim 5") && err.contains("dim 3"), "stderr: {err}");
}

#[test]
fn permtest_outputs_are_replay_identical() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "gen", "--kind", "groups", "--n", "4", "--len", "16", "--dim", "3", "--effect",
            "0.5", "--seed", "3", "--out", "g.msq",
        ],
    );
    let permtest = [
        "permtest",
        "--a",
        "g_a.msq",
        "--b",
        "g_b.msq",
        "--out",
        "perm.csv",
        "--perms",
        "7",
        "--pre-epochs",
        "1",
        "--epochs",
        "1",
        "--seed",
        "5",
    ];
    let (code, out, err) = run_in(dir.path(), &permtest);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("p_value "));
    assert!(out.contains("wall_time_s "));

    let results = std::fs::read(dir.path().join("perm.csv")).unwrap();
    let hist = std::fs::read(dir.path().join("perm.hist.csv")).unwrap();
    let text = String::from_utf8(results.clone()).unwrap();
    // Header, one row per permutation, one summary row.
    assert_eq!(text.lines().count(), 1 + 7 + 1, "results: {text}");
    assert!(text.lines().last().unwrap().starts_with("summary,"));

    let (code, _, err) = run_in(dir.path(), &permtest);
    assert_eq!(code, 0, "stderr: {err}");
    assert_eq!(results, std::fs::read(dir.path().join("perm.csv")).unwrap());
    assert_eq!(hist, std::fs::read(dir.path().join("perm.hist.csv")).unwrap());
}

#[test]
fn checkgrad_passes_and_fault_injection_names_the_group() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) =
        run_in(dir.path(), &["checkgrad", "--blocks", "1,1,1", "--seed", "2"]);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("PASS"), "stdout: {out}");

    let (code, out, err) = run_in(
        dir.path(),
        &["checkgrad", "--blocks", "1,1,1", "--seed", "2", "--inject-fault", "block0.conv1"],
    );
    assert_eq!(code, 1, "stderr: {err}");
    assert!(out.contains("FAIL") && out.contains("block0.conv1"), "stdout: {out}");
}
