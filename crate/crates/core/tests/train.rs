mod support;

use ghgrl_core::graph::Split;
use ghgrl_core::pagnn::{init_params, pagnn_forward, TypedAdjacency};
use ghgrl_core::synthetic::random_matrix;
use ghgrl_core::train::*;
use support::mock_pipeline;

fn fixture() -> (ghgrl_core::Matrix, TypedAdjacency, Vec<Option<usize>>, SplitNodes, ghgrl_core::PagnnConfig) {
    let (graph, ann, features, config) = mock_pipeline(0);
    let adj = TypedAdjacency::from_graph(&graph, &ann).unwrap();
    let labels = graph.labels().unwrap().to_vec();
    (features.to_matrix(), adj, labels, SplitNodes::from_graph(&graph), config)
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let (h0, adj, labels, splits, config) = fixture();
    let tc = TrainConfig {
        epochs: 5,
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    let out = train_on(&h0, &adj, &labels, &splits, &config, &tc).unwrap();
    let init = init_params(&config).unwrap();
    assert_eq!(out.params.to_flat(), init.to_flat());
    let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    assert!(losses.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn first_step_reduces_training_loss() {
    let (h0, adj, labels, splits, config) = fixture();
    let tc = TrainConfig {
        epochs: 2,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let out = train_on(&h0, &adj, &labels, &splits, &config, &tc).unwrap();
    assert!(out.history[1].train_loss < out.history[0].train_loss);
}

#[test]
fn training_fits_the_mock_pipeline_and_is_repeatable() {
    let (graph, ann, features, config) = mock_pipeline(0);
    let tc = TrainConfig::default();
    let a = train(&graph, &ann, &features, &config, &tc).unwrap();
    let b = train(&graph, &ann, &features, &config, &tc).unwrap();
    assert_eq!(a.params.to_flat(), b.params.to_flat());
    assert_eq!(a.history, b.history);

    let adj = TypedAdjacency::from_graph(&graph, &ann).unwrap();
    let logits = pagnn_forward(&features.to_matrix(), &adj, &config, &a.params).unwrap();
    let labels = graph.labels().unwrap();
    let report = evaluate(&logits, labels, &graph.labeled_in(Split::Train), "train").unwrap();
    assert!(report.micro_f1 >= 0.95, "train micro-F1 {}", report.micro_f1);
}

#[test]
fn early_stopping_returns_the_best_epoch() {
    let (h0, adj, labels, splits, config) = fixture();
    let tc = TrainConfig {
        epochs: 200,
        early_stop_patience: 3,
        ..TrainConfig::default()
    };
    let out = train_on(&h0, &adj, &labels, &splits, &config, &tc).unwrap();
    let best = out.best_epoch;
    let scores: Vec<f64> = out.history.iter().map(|r| r.val_macro_f1.unwrap()).collect();
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(scores[best - 1], top);
    assert!(scores[..best - 1].iter().all(|&s| s < top));
    if out.history.len() < tc.epochs {
        assert_eq!(out.history.len(), best + tc.early_stop_patience);
    }

    // Same run cut at the best epoch ends on the same snapshot.
    let cut = TrainConfig {
        epochs: best,
        early_stop_patience: 1000,
        ..tc
    };
    let again = train_on(&h0, &adj, &labels, &splits, &config, &cut).unwrap();
    assert_eq!(again.best_epoch, best);
    assert_eq!(again.params.to_flat(), out.params.to_flat());
}

#[test]
fn no_validation_split_returns_final_parameters() {
    let (h0, adj, labels, mut splits, config) = fixture();
    splits.val.clear();
    let tc = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let out = train_on(&h0, &adj, &labels, &splits, &config, &tc).unwrap();
    assert_eq!(out.best_epoch, 3);
    assert!(out.history.iter().all(|r| r.val_macro_f1.is_none()));
}

#[test]
fn empty_training_split_is_rejected() {
    let (h0, adj, labels, mut splits, config) = fixture();
    splits.train.clear();
    assert!(matches!(
        train_on(&h0, &adj, &labels, &splits, &config, &TrainConfig::default()),
        Err(TrainError::EmptySplit("train"))
    ));
}

#[test]
fn adam_first_step_matches_closed_form() {
    let (_, _, _, _, config) = fixture();
    let tc = TrainConfig {
        learning_rate: 0.01,
        weight_decay: 0.1,
        ..TrainConfig::default()
    };
    let mut params = init_params(&config).unwrap();
    let before = params.to_flat();
    let mut grads = params.zeros_like();
    let g = random_matrix(1, before.len(), 2.0, 77);
    grads.load_flat(g.row(0)).unwrap();
    Adam::new(&tc, &params).step(&mut params, &grads);
    for ((&x, &gx), &after) in before.iter().zip(g.row(0)).zip(&params.to_flat()) {
        // After one step m_hat = g and v_hat = g^2.
        let g = gx + tc.weight_decay * x;
        let expected = x - tc.learning_rate * g / (g.abs() + tc.epsilon);
        assert!((after - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }
}

#[test]
fn history_csv_has_one_row_per_epoch() {
    let (h0, adj, labels, splits, config) = fixture();
    let tc = TrainConfig {
        epochs: 4,
        ..TrainConfig::default()
    };
    let out = train_on(&h0, &adj, &labels, &splits, &config, &tc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("history.csv");
    write_history(&out.history, &path).unwrap();
    let mut r = csv::Reader::from_path(&path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["epoch", "train_loss", "val_macro_f1", "val_micro_f1"]);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), out.history[0].train_loss);
}
