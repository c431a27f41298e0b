#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const CONFIG: &str = "seed = 7
[train]
lr = 3e-3
batch_size = 8
max_epochs = 200
patience = 60
";

pub fn pwrules(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwrules"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn pwrules")
}

/// Runs and asserts success; returns stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pwrules(dir, args);
    assert!(
        out.status.success(),
        "pwrules {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// `key = value` line from command output.
pub fn field(stdout: &str, key: &str) -> Option<String> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

/// Every file under `dir`, relative path to contents.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Synthetic data through screening metrics in `dir`; returns the metrics
/// output. `global` goes before each subcommand.
pub fn run_pipeline(dir: &Path, global: &[&str]) -> String {
    fs::write(dir.join("cfg.ini"), CONFIG).unwrap();
    let steps: &[&[&str]] = &[
        &["synth", "--out-dir", "d"],
        &[
            "data",
            "ingest",
            "--affinity",
            "d/affinity.jsonl",
            "--proteins",
            "d/proteins.jsonl",
            "--out",
            "rec.jsonl",
            "--ligands",
            "lig.tsv",
        ],
        &["fragments", "build", "--molecules", "lig.tsv", "--out", "lib.jsonl"],
        &["data", "split", "--records", "rec.jsonl", "--out", "splits.json"],
        &[
            "data",
            "label",
            "--records",
            "rec.jsonl",
            "--library",
            "lib.jsonl",
            "--splits",
            "splits.json",
            "--set",
            "train",
            "--out",
            "train.tsv",
        ],
        &[
            "data",
            "label",
            "--records",
            "rec.jsonl",
            "--library",
            "lib.jsonl",
            "--splits",
            "splits.json",
            "--set",
            "val",
            "--out",
            "val.tsv",
        ],
        &[
            "words",
            "segment",
            "--proteins",
            "d/proteins.jsonl",
            "--attention-dir",
            "d/attention",
            "--embeddings-dir",
            "d/embeddings",
            "--out",
            "w.jsonl",
            "--out-embeddings",
            "w.pweb",
        ],
        &[
            "words",
            "dict",
            "--words",
            "w.jsonl",
            "--embeddings",
            "w.pweb",
            "--out",
            "dict.tsv",
            "--filtered-words",
            "fw.jsonl",
            "--filtered-embeddings",
            "fw.pweb",
        ],
        &[
            "words",
            "segment",
            "--proteins",
            "d/query.jsonl",
            "--attention-dir",
            "d/attention",
            "--embeddings-dir",
            "d/embeddings",
            "--out",
            "qw.jsonl",
            "--out-embeddings",
            "qw.pweb",
        ],
        &[
            "model",
            "train",
            "--words",
            "fw.jsonl",
            "--embeddings",
            "fw.pweb",
            "--library",
            "lib.jsonl",
            "--train-labels",
            "train.tsv",
            "--val-labels",
            "val=val.tsv",
            "--out",
            "m.pwck",
            "--log",
            "log.tsv",
        ],
        &[
            "model",
            "predict",
            "--model",
            "m.pwck",
            "--words",
            "fw.jsonl",
            "--embeddings",
            "fw.pweb",
            "--library",
            "lib.jsonl",
            "--out",
            "pred.tsv",
        ],
        &[
            "rules",
            "extract",
            "--model",
            "m.pwck",
            "--words",
            "fw.jsonl",
            "--embeddings",
            "fw.pweb",
            "--library",
            "lib.jsonl",
            "--labels",
            "train.tsv",
            "--labels",
            "val.tsv",
            "--out",
            "raw.jsonl",
        ],
        &[
            "rules",
            "accuracy",
            "--rules",
            "raw.jsonl",
            "--words",
            "fw.jsonl",
            "--library",
            "lib.jsonl",
            "--labels",
            "train.tsv",
            "--labels",
            "val.tsv",
            "--out",
            "acc.jsonl",
        ],
        &[
            "rules",
            "filter",
            "--rules",
            "acc.jsonl",
            "--out",
            "rules.jsonl",
            "--db",
            "rules.pwdb",
        ],
        &[
            "screen",
            "score",
            "--db",
            "rules.pwdb",
            "--library",
            "lib.jsonl",
            "--molecules",
            "d/screening.tsv",
            "--query-words",
            "qw.jsonl",
            "--out",
            "screen.tsv",
            "--predictions",
            "qpred.jsonl",
        ],
        &[
            "screen",
            "metrics",
            "--scores",
            "screen.tsv",
            "--actives",
            "d/actives.txt",
            "--out",
            "metrics.json",
        ],
    ];
    let mut last = String::new();
    for s in steps {
        let mut args: Vec<&str> = vec!["--config", "cfg.ini"];
        args.extend(global);
        args.extend(*s);
        last = ok(dir, &args);
    }
    last
}
