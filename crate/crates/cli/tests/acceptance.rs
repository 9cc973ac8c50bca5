//! Acceptance criteria A1-A8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ghgrl_core::analysis::{oversmoothing_profile, simplified_iterate, PagnnRunner, SimplifiedModelSpec, SimplifiedWeights};
use ghgrl_core::corruption::{corrupt, CorruptionSpec};
use ghgrl_core::graph::{write_nodes, HeteroGraph, Split};
use ghgrl_core::matrix::{cosine, Matrix};
use ghgrl_core::pagnn::{init_params, pagnn_forward, Activation, PagnnConfig, PagnnParams, TypedAdjacency};
use ghgrl_core::synthetic::{random_connected_edges, random_matrix, typed_fixture, TypedFixtureConfig};
use ghgrl_core::train::{evaluate, f1_report, train, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: u64, detail: String) -> Outcome {
    if elapsed > Duration::from_secs(limit_s) {
        return Err(format!("{detail}; runtime {:.2}s exceeds {limit_s}s", elapsed.as_secs_f64()));
    }
    Ok(format!("{detail}; {:.2}s", elapsed.as_secs_f64()))
}

fn a1() -> Outcome {
    let start = Instant::now();
    let config = support::small_config(2, 1, 2, 11);
    let (h0, adj) = support::random_setup(6, &config, 11);
    let mut params = init_params(&config).unwrap();
    support::jitter(&mut params, 12);
    let upstream = random_matrix(6, config.num_classes, 1.0, 13);
    let r = support::finite_difference_check(&h0, &adj, &config, &params, &upstream, 1e-4);
    let detail = format!("{} entries, max relative error {:.2e}", r.checked, r.max_rel_err);
    check(r.max_rel_err <= 1e-5, detail).and_then(|d| within(start.elapsed(), 10, d))
}

fn neighbor_lists(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut a = vec![Vec::new(); n];
    for &(x, y) in edges {
        a[x].push(y);
        a[y].push(x);
    }
    a.iter_mut().for_each(|l| l.sort_unstable());
    a
}

/// Rows of `(I + D^-1 A)^layers X`, rescaled by the global max each step.
fn power_iteration(n: usize, edges: &[(usize, usize)], x: &Matrix, layers: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    let nbrs = neighbor_lists(n, edges);
    for (v, list) in nbrs.iter().enumerate() {
        m[v][v] = 1.0;
        for &u in list {
            m[v][u] += 1.0 / list.len() as f64;
        }
    }
    let mut y: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    for _ in 0..layers {
        let mut next = vec![vec![0.0; x.cols()]; n];
        for i in 0..n {
            for k in 0..n {
                for c in 0..x.cols() {
                    next[i][c] += m[i][k] * y[k][c];
                }
            }
        }
        let s = next.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        y = next.into_iter().map(|r| r.into_iter().map(|v| v / s).collect()).collect();
    }
    y
}

fn a2() -> Outcome {
    let start = Instant::now();
    let n = 12;
    let edges = random_connected_edges(n, 0.5, 1);
    let nbrs = neighbor_lists(n, &edges);
    let x = random_matrix(n, 6, 1.0, 2);

    let plain = simplified_iterate(&nbrs, &x, &SimplifiedModelSpec::plain(50, SimplifiedWeights::ScaledIdentity(1.0), 0)).unwrap();
    let oracle = power_iteration(n, &edges, &x, 50);
    let (mut min_cos, mut max_gap) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let c = cosine(plain.row(i), plain.row(j));
            min_cos = min_cos.min(c);
            max_gap = max_gap.max((c - cosine(&oracle[i], &oracle[j])).abs());
        }
    }

    let types: Vec<usize> = (0..n).map(|v| v % 2).collect();
    let typed = simplified_iterate(&nbrs, &x, &SimplifiedModelSpec::typed(50, types.clone(), SimplifiedWeights::Random, 0)).unwrap();
    let mut min_cross = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            if types[i] != types[j] {
                min_cross = min_cross.min(cosine(typed.row(i), typed.row(j)));
            }
        }
    }
    let detail = format!(
        "plain min cosine {min_cos:.12}, oracle gap {max_gap:.1e}; typed min cross-type cosine {min_cross:.4}"
    );
    check(min_cos >= 0.999 && max_gap <= 1e-6 && min_cross <= 0.99, detail).and_then(|d| within(start.elapsed(), 5, d))
}

fn a3() -> Outcome {
    let start = Instant::now();
    let f = typed_fixture(&TypedFixtureConfig::default()).unwrap();
    let config = PagnnConfig {
        layers: 4,
        format_layers: 2,
        content_layers: 4,
        input_dim: f.features.cols(),
        hidden_dim: 16,
        alpha: 0.5,
        num_format_types: f.num_format_types,
        num_content_types: f.num_content_types,
        num_classes: 2,
        activation: Activation::Relu,
        use_input_projection: true,
        confidence_floor: 0.0,
        seed: 0,
    };
    let ablation = config.without_type_blocks();
    let types = &f.adjacency.content_index;
    let layer4 = |c: &PagnnConfig| {
        let params = init_params(c).unwrap();
        let runner = PagnnRunner {
            features: &f.features,
            adjacency: &f.adjacency,
            config: c,
            params: &params,
        };
        oversmoothing_profile(&runner, types, f.num_content_types, 4).unwrap().values[4]
    };
    let (full, abl) = (layer4(&config), layer4(&ablation));
    let detail = format!("layer 4: full {full:.4}, ablation {abl:.4}, margin {:.4}", abl - full);
    check(abl - full >= 0.05, detail).and_then(|d| within(start.elapsed(), 30, d))
}

fn a4() -> Outcome {
    let start = Instant::now();
    let (graph, ann, features, config) = support::mock_pipeline(0);
    let out = train(&graph, &ann, &features, &config, &TrainConfig::default()).unwrap();
    let adj = TypedAdjacency::from_graph(&graph, &ann).unwrap();
    let logits = pagnn_forward(&features.to_matrix(), &adj, &config, &out.params).unwrap();
    let report = evaluate(&logits, graph.labels().unwrap(), &graph.labeled_in(Split::Test), "test").unwrap();
    let detail = format!(
        "{} nodes, {} epochs run, test micro-F1 {:.4} (macro {:.4})",
        graph.node_count(),
        out.history.len(),
        report.micro_f1,
        report.macro_f1
    );
    check(report.micro_f1 >= 0.90 && out.history.len() <= 200, detail).and_then(|d| within(start.elapsed(), 60, d))
}

/// Single-type model written out layer by layer with one parameter set per
/// block.
fn straight_line(h0: &Matrix, nbrs: &[Vec<usize>], config: &PagnnConfig, p: &PagnnParams) -> Vec<Vec<f64>> {
    let matmul = |x: &[Vec<f64>], w: &Matrix| -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                (0..w.cols())
                    .map(|j| {
                        let mut s = 0.0;
                        for (k, &xk) in row.iter().enumerate() {
                            s += xk * w.row(k)[j];
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    };
    let mean = |x: &[Vec<f64>]| -> Vec<Vec<f64>> {
        nbrs.iter()
            .map(|list| {
                let mut s = vec![0.0; x[0].len()];
                for &u in list {
                    for (a, b) in s.iter_mut().zip(&x[u]) {
                        *a += b;
                    }
                }
                s.iter().map(|v| v / list.len() as f64).collect()
            })
            .collect()
    };
    let relu = |x: f64| if x > 0.0 { x } else { 0.0 };
    let add_bias_relu = |x: Vec<Vec<f64>>, b: &[f64]| -> Vec<Vec<f64>> {
        x.into_iter().map(|r| r.iter().zip(b).map(|(v, bb)| relu(v + bb)).collect()).collect()
    };

    let mut h: Vec<Vec<f64>> = (0..h0.rows()).map(|r| h0.row(r).to_vec()).collect();
    if let Some(w) = &p.input_projection {
        h = matmul(&h, w);
    }
    for layer in &p.layers {
        if let Some(f) = &layer.format {
            h = add_bias_relu(matmul(&h, &f.weights[0]), &f.biases[0]);
        }
        if let Some(c) = &layer.content {
            let act = add_bias_relu(matmul(&h, &c.weights[0]), &c.biases[0]);
            let msg = matmul(&mean(&act), &c.agg_weights[0]);
            h = act
                .iter()
                .zip(&msg)
                .map(|(a, m)| a.iter().zip(m).map(|(x, y)| config.alpha * x + y).collect())
                .collect();
        }
        let lin = matmul(&h, &layer.regular);
        let agg = mean(&lin);
        h = lin
            .iter()
            .zip(&agg)
            .map(|(l, a)| l.iter().zip(a).map(|(x, y)| relu(x + y)).collect())
            .collect();
    }
    matmul(&h, &p.classifier)
        .into_iter()
        .map(|r| r.iter().zip(&p.classifier_bias).map(|(v, b)| v + b).collect())
        .collect()
}

fn a5() -> Outcome {
    let mut compared = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..12);
        let layers = rng.gen_range(1..4);
        let format_layers = rng.gen_range(0..=layers);
        let config = PagnnConfig {
            layers,
            format_layers,
            content_layers: rng.gen_range(format_layers..=layers),
            input_dim: rng.gen_range(2..7),
            hidden_dim: rng.gen_range(2..7),
            alpha: rng.gen_range(0.0..2.0),
            num_format_types: 1,
            num_content_types: 1,
            num_classes: 3,
            activation: Activation::Relu,
            use_input_projection: seed % 2 == 0,
            confidence_floor: 0.0,
            seed,
        };
        let config = PagnnConfig {
            use_input_projection: config.use_input_projection || config.input_dim != config.hidden_dim,
            ..config
        };
        let edges = random_connected_edges(n, 0.4, seed);
        let adj = TypedAdjacency::from_edges(n, &edges, vec![0; n], vec![1.0; n], vec![0; n], vec![1.0; n]).unwrap();
        let h0 = random_matrix(n, config.input_dim, 1.0, seed + 100);
        let mut params = init_params(&config).unwrap();
        support::jitter(&mut params, seed + 200);
        let ours = pagnn_forward(&h0, &adj, &config, &params).unwrap();
        let reference = straight_line(&h0, &neighbor_lists(n, &edges), &config, &params);
        for (v, row) in reference.iter().enumerate() {
            for (a, b) in ours.row(v).iter().zip(row) {
                if a.to_bits() != b.to_bits() {
                    return Err(format!("seed {seed}, node {v}: {a:e} vs {b:e}"));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("20 random inputs, {compared} logits bitwise equal"))
}

/// Per-class counts tallied one pair at a time.
fn brute_force_f1(truth: &[usize], pred: &[usize], k: usize) -> (f64, f64) {
    let f1 = |tp: f64, fp: f64, fneg: f64| if 2.0 * tp + fp + fneg == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
    let (mut all_tp, mut all_fp, mut all_fn) = (0.0, 0.0, 0.0);
    let mut macro_sum = 0.0;
    for c in 0..k {
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fneg += 1.0,
                _ => {}
            }
        }
        macro_sum += f1(tp, fp, fneg);
        all_tp += tp;
        all_fp += fp;
        all_fn += fneg;
    }
    (macro_sum / k as f64, f1(all_tp, all_fp, all_fn))
}

fn a6() -> Outcome {
    let hand = f1_report(&[0, 0, 1, 1], &[0, 1, 1, 1], 2, "test");
    if (hand.macro_f1 - 0.7333).abs() > 1e-4 || (hand.macro_f1 - 11.0 / 15.0).abs() > 1e-6 || hand.micro_f1 != 0.75 {
        return Err(format!("hand example: macro {} micro {}", hand.macro_f1, hand.micro_f1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..50 {
        let k = rng.gen_range(2..6);
        let n = rng.gen_range(1..80);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let mut logits = Matrix::zeros(n, k);
        for (v, &p) in pred.iter().enumerate() {
            logits.row_mut(v)[p] = 1.0;
        }
        let labels: Vec<Option<usize>> = truth.iter().map(|&t| Some(t)).collect();
        let nodes: Vec<usize> = (0..n).collect();
        let got = evaluate(&logits, &labels, &nodes, "test").unwrap();
        let (ma, mi) = brute_force_f1(&truth, &pred, k);
        if (got.macro_f1 - ma).abs() > 1e-12 || (got.micro_f1 - mi).abs() > 1e-12 {
            return Err(format!("case {case}: got ({}, {}), oracle ({ma}, {mi})", got.macro_f1, got.micro_f1));
        }
    }
    Ok(format!("hand example macro {:.6} micro {}; 50 random cases agree", hand.macro_f1, hand.micro_f1))
}

fn a7() -> Outcome {
    let attrs: Vec<String> = (0..40)
        .map(|v| (0..30 + v % 11).map(|i| format!("t{v}_{i}")).collect::<Vec<_>>().join(" "))
        .collect();
    let n = attrs.len();
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
    let g = HeteroGraph::new(attrs, edges, None, None).unwrap();
    let tokens = |g: &HeteroGraph| (0..n).map(|v| g.attribute(v).split_whitespace().count()).sum::<usize>();
    let before = tokens(&g);

    let out = corrupt(&g, &CorruptionSpec::rid(1.0, 0.5, 9)).unwrap();
    let rate = (before - tokens(&out)) as f64 / before as f64;

    let dir = tempfile::tempdir().unwrap();
    let bytes = |h: &HeteroGraph, name: &str| {
        let p = dir.path().join(name);
        write_nodes(h, &p).unwrap();
        std::fs::read(p).unwrap()
    };
    let again = corrupt(&g, &CorruptionSpec::rid(1.0, 0.5, 9)).unwrap();
    let same_seed = bytes(&out, "a.jsonl") == bytes(&again, "b.jsonl");
    let identity = corrupt(&g, &CorruptionSpec::rid(0.0, 0.5, 9)).unwrap() == g;
    let detail = format!("{before} tokens, deletion rate {rate:.4}; same seed identical: {same_seed}; r=0 identity: {identity}");
    check(before >= 1000 && (rate - 0.5).abs() <= 0.02 && same_seed && identity, detail)
}

fn a8() -> Outcome {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        common::write_dataset(dir.path(), 300, 0);
        common::run_pipeline(dir.path(), "0", "200");
    }
    let (a, b) = (common::artifacts(runs[0].path()), common::artifacts(runs[1].path()));
    let names = |v: &[std::path::PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
    if names(&a) != names(&b) {
        return Err("runs produced different file sets".into());
    }
    for (x, y) in a.iter().zip(&b) {
        if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
            return Err(format!("{} differs between runs", x.file_name().unwrap().to_string_lossy()));
        }
    }
    Ok(format!("{} artifacts byte-identical across two runs", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(d) => println!("{name} PASS {d}"),
            Err(d) => {
                failed += 1;
                println!("{name} FAIL {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
