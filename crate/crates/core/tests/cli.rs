//! End-to-end runs of the `relay` binary on a tiny configuration.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
desk_scale = true
seeds = [0]
baseline_seeds = [0]
checkpoint_every = 1

[goals]
count = 2

[demos]
count = 20

[il]
hidden = [8]
epochs = 2
batches_per_epoch = 5

[finetune]
iterations = 2
trajectories_per_iter = 4
demo_samples = 64
fisher_sample_fraction = 0.5

[eval]
episodes_per_goal = 2

[distill]
rollouts_per_goal = 4

[ablation]
windows = [10, 30]
rewards = ["sparse", "euclidean"]
goals = 1
"#;

fn relay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relay"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("relay binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("output_dir = \"{}\"\n{body}", dir.join("run").display())).unwrap();
    path
}

fn files_under(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_runs_are_byte_identical_and_verifiable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = write_config(a.path(), TINY);
    let cb = write_config(b.path(), TINY);
    let out = relay(&["run", "-c", ca.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("iril-rpl"));
    assert!(relay(&["run", "-c", cb.to_str().unwrap()]).status.success());

    let ma = files_under(&a.path().join("run/metrics"));
    let mb = files_under(&b.path().join("run/metrics"));
    let names: Vec<_> = ma.iter().map(|(p, _)| p.display().to_string()).collect();
    for want in [
        "eval.jsonl",
        "finetune.jsonl",
        "imitation.jsonl",
        "ablation.jsonl",
        "distill.jsonl",
    ] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    assert_eq!(ma, mb);
    assert_eq!(
        files_under(&a.path().join("run/policies")),
        files_under(&b.path().join("run/policies"))
    );

    // checkpoints were written every iteration
    let ckpt = a
        .path()
        .join("run/policies/seed0/iril-rpl/checkpoints/goal01_it0002_low.bin");
    assert!(ckpt.exists());

    assert_eq!(relay(&["verify", "-c", ca.to_str().unwrap()]).status.code(), Some(0));
    let tables = a.path().join("run/report/tables.txt");
    let mut text = std::fs::read_to_string(&tables).unwrap();
    text.push('x');
    std::fs::write(&tables, text).unwrap();
    assert_eq!(relay(&["verify", "-c", ca.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn stages_run_one_at_a_time_match_a_full_run() {
    let full = tempfile::tempdir().unwrap();
    let staged = tempfile::tempdir().unwrap();
    let cf = write_config(full.path(), TINY);
    let cs = write_config(staged.path(), TINY);
    assert!(relay(&["run", "-c", cf.to_str().unwrap()]).status.success());
    for stage in relay::harness::STAGES {
        let out = relay(&[stage, "-c", cs.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(
        files_under(&full.path().join("run/metrics")),
        files_under(&staged.path().join("run/metrics"))
    );
    assert_eq!(
        files_under(&full.path().join("run/report")),
        files_under(&staged.path().join("run/report"))
    );
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[finetune]\niterations = 2\ngamma = 1.5\n");
    let out = relay(&["check", "-c", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("finetune.gamma"), "{err}");

    let unknown = write_config(dir.path(), "[il]\nbatch = 3\n");
    assert_eq!(
        relay(&["check", "-c", unknown.to_str().unwrap()]).status.code(),
        Some(1)
    );

    let ok = write_config(dir.path(), TINY);
    let out = relay(&["evaluate", "-c", ok.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing artifact"));

    assert_eq!(relay(&["no-such-stage"]).status.code(), Some(1));
    assert_eq!(
        relay(&["check", "-c", "/nonexistent/config.toml"]).status.code(),
        Some(1)
    );
    let out = relay(&["default-config"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[finetune.reward]"));
}
