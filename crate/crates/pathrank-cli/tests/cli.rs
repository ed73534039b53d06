//! Black-box tests of the binary: pipeline plumbing, option precedence,
//! error formatting, and manifest replay.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pathrank"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn pathrank")
}

fn ok_in(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(dir: &Path, args: &[&str]) -> (Option<i32>, String) {
    let out = run_in(dir, args);
    (out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).expect("read output")))
}

/// gen-network through evaluate on a 5x5 grid; every stage must exit 0 and
/// leave its declared artifacts behind.
#[test]
fn full_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    ok_in(d, &["gen-network", "--rows", "5", "--cols", "5", "--seed", "7", "--out", "net.txt"]);
    ok_in(
        d,
        &[
            "gen-data", "--network", "net.txt", "--count", "40", "--noise", "0.2", "--strategy",
            "D-TkM", "--k", "3", "--split", "0.7,0.1,0.2", "--seed", "11", "--out", "run",
        ],
    );
    ok_in(
        d,
        &[
            "embed", "--network", "net.txt", "--dim", "8", "--walks-per-vertex", "4",
            "--walk-length", "20", "--epochs", "2", "--seed", "3", "--out", "emb.txt",
        ],
    );
    ok_in(
        d,
        &[
            "train", "--network", "net.txt", "--train-instances", "run.train.instances.txt",
            "--val-instances", "run.val.instances.txt", "--embedding", "emb.txt",
            "--embedding-mode", "trainable", "--dim", "8", "--z-max", "16", "--epochs", "2",
            "--checkpoint-out", "ckpt.json", "--log-out", "log.csv",
        ],
    );
    ok_in(
        d,
        &[
            "rank", "--checkpoint", "ckpt.json", "--network", "net.txt", "--source", "0",
            "--dest", "24", "--strategy", "D-TkM", "--k", "4", "--out", "ranked.txt",
        ],
    );
    let report = ok_in(
        d,
        &[
            "evaluate", "--checkpoint", "ckpt.json", "--network", "net.txt", "--trajectories",
            "run.test.trajectories.txt", "--k", "3", "--out", "report.csv",
        ],
    );
    assert!(report.contains("scorer: bd-gru-8d"), "model section missing:\n{report}");
    assert!(report.contains("scorer: cost-baseline-fuel"), "baseline section missing:\n{report}");

    for file in [
        "net.txt",
        "run.train.instances.txt",
        "run.test.trajectories.txt",
        "emb.txt",
        "ckpt.json",
        "log.csv",
        "ranked.txt",
        "report.csv",
        "report.csv.manifest.json",
    ] {
        assert!(d.join(file).is_file(), "missing artifact {file}");
    }

    // ranked list is sorted by descending score
    let ranked = fs::read_to_string(d.join("ranked.txt")).unwrap();
    let scores: Vec<f64> = ranked
        .lines()
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "scores out of order: {scores:?}");
}

#[test]
fn missing_input_reports_io_missing() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = stderr_of(
        dir.path(),
        &["paths", "--network", "absent.txt", "--source", "0", "--dest", "1", "--out", "x.txt"],
    );
    assert_eq!(code, Some(1));
    assert!(stderr.starts_with("error: io.missing: "), "stderr: {stderr}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "no_such_option = 1\n").unwrap();
    let (code, stderr) = stderr_of(dir.path(), &["train", "--config", "bad.cfg"]);
    assert_eq!(code, Some(1));
    assert!(stderr.starts_with("error: config: "), "stderr: {stderr}");
    assert!(stderr.contains("no_such_option"), "stderr: {stderr}");
}

/// Flag beats environment variable beats config file.
#[test]
fn option_precedence_flag_env_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok_in(d, &["gen-network", "--rows", "4", "--cols", "4", "--seed", "1", "--out", "net.txt"]);
    ok_in(
        d,
        &[
            "gen-data", "--network", "net.txt", "--count", "12", "--strategy", "TkDI", "--k",
            "3", "--seed", "2", "--out", "run",
        ],
    );
    fs::write(
        d.join("train.cfg"),
        "network = net.txt\n\
         train_instances = run.instances.txt\n\
         val_instances = run.instances.txt\n\
         dim = 4\n\
         z_max = 12\n\
         epochs = 4\n\
         checkpoint_out = ckpt.json\n\
         log_out = log.csv\n",
    )
    .unwrap();

    let epochs_logged = |_: &str| {
        fs::read_to_string(d.join("log.csv")).unwrap().lines().count() - 1 // header
    };

    ok_in(d, &["train", "--config", "train.cfg"]);
    assert_eq!(epochs_logged("file"), 4);

    let out = bin()
        .current_dir(d)
        .env("PATHRANK_EPOCHS", "2")
        .args(["train", "--config", "train.cfg"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(epochs_logged("env"), 2);

    let out = bin()
        .current_dir(d)
        .env("PATHRANK_EPOCHS", "2")
        .args(["train", "--config", "train.cfg", "--epochs", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(epochs_logged("flag"), 3);
}

#[test]
fn sweep_emits_one_row_per_cell_and_survives_cell_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok_in(d, &["gen-network", "--rows", "4", "--cols", "4", "--seed", "5", "--out", "net.txt"]);
    // aux_tasks 0 makes the alpha 0.6 cells invalid; those rows must report
    // the error while the alpha 0 cells still produce numbers
    fs::write(
        d.join("sweep.cfg"),
        "network = net.txt\n\
         count = 20\n\
         split = 0.6,0.2,0.2\n\
         strategies = TkDI,D-TkM\n\
         dims = 4\n\
         alphas = 0,0.6\n\
         aux_tasks = 0\n\
         k = 3\n\
         epochs = 2\n\
         z_max = 16\n\
         seed = 4\n\
         out = table.csv\n",
    )
    .unwrap();
    let stdout = ok_in(d, &["sweep", "--config", "sweep.cfg"]);
    assert!(stdout.contains("4 sweep rows"), "{stdout}");
    assert!(stdout.contains("alpha=0.6: failed:"), "{stdout}");
    let table = fs::read_to_string(d.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 5, "header + 4 rows:\n{table}");
    assert!(table.starts_with("strategy,dim,alpha,"), "{table}");
    for prefix in ["TkDI,4,0,", "D-TkM,4,0,"] {
        let row = table.lines().find(|l| l.starts_with(prefix)).expect("numeric row");
        assert!(row.ends_with(','), "unexpected error column in {row}");
    }
    for prefix in ["TkDI,4,0.6,", "D-TkM,4,0.6,"] {
        let row = table.lines().find(|l| l.starts_with(prefix)).expect("failed row");
        assert!(row.contains("auxiliary task"), "error text missing in {row}");
    }
}

/// A rerun must reproduce outputs byte for byte, including when the original
/// run took options from the environment.
#[test]
fn rerun_replays_byte_identically_with_env_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok_in(d, &["gen-network", "--rows", "4", "--cols", "4", "--seed", "9", "--out", "net.txt"]);
    ok_in(
        d,
        &[
            "gen-data", "--network", "net.txt", "--count", "15", "--strategy", "D-TkDI", "--k",
            "3", "--seed", "8", "--out", "run",
        ],
    );
    let out = bin()
        .current_dir(d)
        .env("PATHRANK_SEED", "42")
        .env("PATHRANK_EPOCHS", "3")
        .args([
            "train", "--network", "net.txt", "--train-instances", "run.instances.txt",
            "--val-instances", "run.instances.txt", "--dim", "4", "--z-max", "12",
            "--checkpoint-out", "ckpt.json", "--log-out", "log.csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let watched: Vec<PathBuf> =
        ["ckpt.json", "log.csv", "ckpt.json.manifest.json"].iter().map(|f| d.join(f)).collect();
    let before: Vec<String> = watched.iter().map(|p| sha(p)).collect();

    // epochs/seed came from the environment; the rerun runs without it and
    // must take both from the manifest snapshot
    let out = bin()
        .current_dir(d)
        .env_remove("PATHRANK_SEED")
        .env_remove("PATHRANK_EPOCHS")
        .args(["rerun", "--manifest", "ckpt.json.manifest.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let after: Vec<String> = watched.iter().map(|p| sha(p)).collect();
    assert_eq!(before, after, "rerun changed output bytes");

    // drifted inputs must be refused
    let mut net = fs::read_to_string(d.join("net.txt")).unwrap();
    net.push('\n');
    fs::write(d.join("net.txt"), net).unwrap();
    let (code, stderr) = stderr_of(d, &["rerun", "--manifest", "ckpt.json.manifest.json"]);
    assert_eq!(code, Some(1));
    assert!(stderr.starts_with("error: validation: "), "stderr: {stderr}");
    assert!(stderr.contains("changed since the manifest"), "stderr: {stderr}");
}

#[test]
fn outputs_refuse_to_overwrite_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok_in(d, &["gen-network", "--rows", "4", "--cols", "4", "--out", "net.txt"]);
    let (code, stderr) = stderr_of(
        d,
        &["paths", "--network", "net.txt", "--source", "0", "--dest", "5", "--out", "net.txt"],
    );
    assert_eq!(code, Some(1));
    assert!(stderr.starts_with("error: validation: "), "stderr: {stderr}");
    assert!(stderr.contains("overwrite"), "stderr: {stderr}");
}
