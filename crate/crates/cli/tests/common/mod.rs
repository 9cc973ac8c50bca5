#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ghgrl_core::graph::{write_edges, write_nodes};
use ghgrl_core::synthetic::{synthetic_graph, SyntheticConfig};

pub fn ghgrl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghgrl"))
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "0")
        .env_remove("GHGRL_CACHE_DIR")
        .env_remove("GHGRL_LLM_ENDPOINT")
        .env_remove("GHGRL_EMBED_ENDPOINT")
        .args(args)
        .output()
        .expect("spawn ghgrl")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ghgrl(dir, args);
    assert!(
        out.status.success(),
        "ghgrl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Writes `nodes.jsonl` and `edges.csv` for a synthetic graph.
pub fn write_dataset(dir: &Path, nodes: usize, seed: u64) {
    let g = synthetic_graph(&SyntheticConfig {
        nodes,
        train_ratio: 0.4,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap();
    write_nodes(&g, &dir.join("nodes.jsonl")).unwrap();
    write_edges(&g, &dir.join("edges.csv")).unwrap();
}

const GRAPH: [&str; 4] = ["--nodes", "nodes.jsonl", "--edges", "edges.csv"];

/// gen-types, annotate, embed, train and eval under the mock backends.
pub fn run_pipeline(dir: &Path, seed: &str, epochs: &str) {
    let with_graph = |rest: &[&str]| -> Vec<String> { GRAPH.iter().chain(rest).map(|s| s.to_string()).collect() };
    let run = |cmd: &str, rest: &[&str]| {
        let mut args = vec![cmd.to_string()];
        args.extend(with_graph(rest));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(dir, &refs);
    };
    run("gen-types", &["--m-fmt", "2", "--m-cont", "1", "--backend", "mock", "--seed", seed, "--out", "schema.json"]);
    run("annotate", &["--schema", "schema.json", "--backend", "mock", "--max-in-flight", "4", "--out", "annotations.jsonl"]);
    run("embed", &["--annotations", "annotations.jsonl", "--backend", "mock", "--dim", "256", "--out", "features.bin"]);
    let inputs = ["--schema", "schema.json", "--annotations", "annotations.jsonl", "--features", "features.bin"];
    let mut train = inputs.to_vec();
    train.extend(["--seed", seed, "--epochs", epochs, "--checkpoint", "model.ckpt", "--history", "history.csv"]);
    run("train", &train);
    let mut eval = inputs.to_vec();
    eval.extend(["--seed", seed, "--checkpoint", "model.ckpt", "--split", "test", "--out", "report.json"]);
    run("eval", &eval);
}

/// Every regular file under `dir`, sorted.
pub fn artifacts(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    v.sort();
    v
}
