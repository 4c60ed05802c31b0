use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_metabayes"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path) -> PathBuf {
    let cfg = r#"{
      "tasks": ["pred-bernoulli-beta-1-1", "bandit-bernoulli-beta-1-1"],
      "runs": 2,
      "train": {
        "prediction": {"total_steps": 12800, "curve_episodes": 5, "checkpoints": 4, "width": 8},
        "bandit": {"total_steps": 1920, "width": 8, "curve_episodes": 5, "checkpoints": 4}
      },
      "analysis": {"episodes": 10, "structure_train_episodes": 10, "structure_test_episodes": 5,
                   "convergence_episodes": 5, "kl_samples": 50}
    }"#;
    let p = dir.join("cfg.json");
    std::fs::write(&p, cfg).unwrap();
    p
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn all_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn strict_train_and_compare_are_byte_identical_across_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        for cmd in ["train", "compare"] {
            let o = run(&[cmd, "--strict-determinism"], &cfg, out);
            assert!(
                o.status.success(),
                "{cmd}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
        }
    }
    let (ca, cb) = (csvs(&a), csvs(&b));
    assert!(ca.iter().any(|(n, _)| n == "compare.csv"));
    assert_eq!(ca, cb);

    // the summary has one row per task, metric and stage
    let text = String::from_utf8(
        ca.iter()
            .find(|(n, _)| n == "compare.csv")
            .unwrap()
            .1
            .clone(),
    )
    .unwrap();
    assert_eq!(text.lines().count(), 2 + 2 * 6 * 2);
    // the Bayes-optimal agent compared with itself
    let runs = String::from_utf8(
        ca.iter()
            .find(|(n, _)| n == "compare_runs.csv")
            .unwrap()
            .1
            .clone(),
    )
    .unwrap();
    assert!(
        runs.lines()
            .any(|l| l.ends_with(",bayes-optimal,final,behavioral_d,0.0")),
        "{runs}"
    );

    // the parallel schedule writes the same bytes
    let c = tmp.path().join("c");
    for cmd in ["train", "compare"] {
        assert!(run(&[cmd], &cfg, &c).status.success());
    }
    assert_eq!(csvs(&c), ca);
}

#[test]
fn interrupted_training_resumes_to_identical_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let (full, cut) = (tmp.path().join("full"), tmp.path().join("cut"));
    assert!(run(&["train"], &cfg, &full).status.success());
    assert!(run(&["train"], &cfg, &cut).status.success());
    // simulate an interrupt: drop every checkpoint after the second one of each run
    for entry in ["pred-bernoulli-beta-1-1", "bandit-bernoulli-beta-1-1"] {
        for r in ["run0", "run1"] {
            let dir = cut.join("runs").join(entry).join(r);
            let mut cks: Vec<PathBuf> = std::fs::read_dir(&dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|e| e == "ckpt"))
                .collect();
            cks.sort_by_key(|p| {
                let s = p.file_stem().unwrap().to_string_lossy().into_owned();
                s.rsplit("step").next().unwrap().parse::<u64>().unwrap()
            });
            assert!(cks.len() > 2);
            for p in &cks[2..] {
                std::fs::remove_file(p).unwrap();
            }
        }
    }
    assert_ne!(all_files(&full.join("runs")), all_files(&cut.join("runs")));
    let o = run(&["train"], &cfg, &cut);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(all_files(&full.join("runs")), all_files(&cut.join("runs")));
}

#[test]
fn dry_run_prints_the_resolved_config_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("never");
    let o = run(&["train", "--dry-run", "--seed", "9"], &cfg, &out);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["experiment"]["master_seed"], 9);
    assert_eq!(v["runs"].as_array().unwrap().len(), 4);
    assert!(!out.exists());
}

#[test]
fn exit_codes_follow_the_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"train": {"bandit": {"widht": 3}}}"#).unwrap();
    let o = run(&["train"], &bad, &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.bandit"));

    // nothing has been trained in this directory
    let cfg = tiny_config(tmp.path());
    let o = run(&["eval"], &cfg, &tmp.path().join("empty"));
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let o = run(
        &["train"],
        &tmp.path().join("missing.json"),
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(4));

    // a learning rate this large overflows the logits within a few updates
    let diverge = tmp.path().join("diverge.json");
    std::fs::write(
        &diverge,
        r#"{"tasks": ["pred-gaussian-normal-0-1"], "runs": 1,
            "train": {"prediction": {"total_steps": 256000, "learning_rate": 1e6, "clip": 1e300, "curve_episodes": 0, "width": 4}}}"#,
    )
    .unwrap();
    let o = run(
        &["train", "--strict-determinism"],
        &diverge,
        &tmp.path().join("d"),
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn gittins_table_is_written_and_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t.csv");
    let o = bin()
        .env("METABAYES_CACHE", tmp.path().join("cache"))
        .args([
            "gittins-table",
            "--family",
            "bernoulli",
            "--prior",
            "1,1",
            "--max-pulls",
            "6",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("family,hyper1,hyper2,gamma,index"));
    assert_eq!(text.lines().count(), 1 + 28);
    assert!(std::fs::read_dir(tmp.path().join("cache")).unwrap().count() >= 1);
}
