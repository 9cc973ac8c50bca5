//! Full-graph training loop, masked cross-entropy, Adam, and F1 evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::{HeteroGraph, Split};
use crate::llm::embed::FeatureMatrix;
use crate::llm::NodeAnnotation;
use crate::matrix::Matrix;
use crate::pagnn::{backward_from_cache, forward_cached, init_params, ModelError, PagnnConfig, PagnnParams, TypedAdjacency};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no labeled nodes in the {0} split")]
    EmptySplit(&'static str),
    #[error("loss mask selects no labeled node")]
    EmptyMask,
    #[error("node {0} is masked but has no label")]
    Unlabeled(usize),
    #[error("label {label} of node {node} is out of range for {classes} classes")]
    LabelRange { node: usize, label: usize, classes: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without a validation Macro-F1 improvement before stopping.
    pub early_stop_patience: usize,
    /// Seeds split generation when the dataset carries no splits.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 5e-3,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            early_stop_patience: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(TrainError::Config("learning rate must be finite and non-negative".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(TrainError::Config("weight decay must be finite and non-negative".into()));
        }
        if self.early_stop_patience == 0 {
            return Err(TrainError::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean negative log-likelihood over `nodes` and its gradient w.r.t. the logits.
/// Rows outside `nodes` receive zero gradient.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[Option<usize>], nodes: &[usize]) -> Result<(f64, Matrix), TrainError> {
    if nodes.is_empty() {
        return Err(TrainError::EmptyMask);
    }
    let classes = logits.cols();
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let scale = 1.0 / nodes.len() as f64;
    let mut total = 0.0;
    for &v in nodes {
        let label = labels.get(v).copied().flatten().ok_or(TrainError::Unlabeled(v))?;
        if label >= classes {
            return Err(TrainError::LabelRange { node: v, label, classes });
        }
        let row = logits.row(v);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        total += log_z - row[label];
        for (k, g) in grad.row_mut(v).iter_mut().enumerate() {
            let p = (row[k] - log_z).exp();
            *g = scale * (p - if k == label { 1.0 } else { 0.0 });
        }
    }
    Ok((total * scale, grad))
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub support: usize,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// F1 scores from true labels and predictions.
///
/// A class absent from both labels and predictions scores 0 and still counts
/// toward the Macro-F1 average.
pub fn f1_report(truth: &[usize], predicted: &[usize], num_classes: usize, split: &str) -> EvalReport {
    assert_eq!(truth.len(), predicted.len());
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let mut per_class_f1 = Vec::with_capacity(num_classes);
    let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
    for k in 0..num_classes {
        let tp = confusion[k][k];
        let fp: usize = (0..num_classes).filter(|&t| t != k).map(|t| confusion[t][k]).sum();
        let fneg: usize = (0..num_classes).filter(|&p| p != k).map(|p| confusion[k][p]).sum();
        tp_all += tp;
        fp_all += fp;
        fn_all += fneg;
        let denom = 2 * tp + fp + fneg;
        per_class_f1.push(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 });
    }
    let macro_f1 = if num_classes == 0 {
        0.0
    } else {
        per_class_f1.iter().sum::<f64>() / num_classes as f64
    };
    let micro_denom = 2 * tp_all + fp_all + fn_all;
    let micro_f1 = if micro_denom == 0 {
        0.0
    } else {
        2.0 * tp_all as f64 / micro_denom as f64
    };
    EvalReport {
        split: split.to_string(),
        support: truth.len(),
        macro_f1,
        micro_f1,
        per_class_f1,
        confusion,
    }
}

/// Evaluates argmax predictions of `logits` on the labeled `nodes`.
pub fn evaluate(logits: &Matrix, labels: &[Option<usize>], nodes: &[usize], split: &str) -> Result<EvalReport, TrainError> {
    let classes = logits.cols();
    let mut truth = Vec::with_capacity(nodes.len());
    let mut predicted = Vec::with_capacity(nodes.len());
    for &v in nodes {
        let label = labels.get(v).copied().flatten().ok_or(TrainError::Unlabeled(v))?;
        if label >= classes {
            return Err(TrainError::LabelRange { node: v, label, classes });
        }
        truth.push(label);
        predicted.push(argmax(logits.row(v)));
    }
    Ok(f1_report(&truth, &predicted, classes, split))
}

/// Adam with L2 weight decay folded into the gradient.
pub struct Adam {
    config: TrainConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(config: &TrainConfig, params: &PagnnParams) -> Self {
        let n = params.scalar_count();
        Self {
            config: config.clone(),
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut PagnnParams, grads: &PagnnParams) {
        self.step += 1;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(self.step);
        let bias2 = 1.0 - c.beta2.powi(self.step);
        let mut i = 0;
        for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            for (x, &gx) in p.iter_mut().zip(g) {
                let g = gx + c.weight_decay * *x;
                self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
                self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = self.m[i] / bias1;
                let v_hat = self.v[i] / bias2;
                *x -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
                i += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_f1: Option<f64>,
    pub val_micro_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation Macro-F1 (the last
    /// epoch when there is no validation split).
    pub params: PagnnParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Node lists per split, labeled nodes only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitNodes {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitNodes {
    pub fn from_graph(graph: &HeteroGraph) -> Self {
        Self {
            train: graph.labeled_in(Split::Train),
            val: graph.labeled_in(Split::Val),
            test: graph.labeled_in(Split::Test),
        }
    }

    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
            Split::None => &[],
        }
    }
}

/// Trains from explicit inputs.
pub fn train_on(
    h0: &Matrix,
    adj: &TypedAdjacency,
    labels: &[Option<usize>],
    splits: &SplitNodes,
    pagnn: &PagnnConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if splits.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    let mut params = init_params(pagnn)?;
    let mut adam = Adam::new(config, &params);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, PagnnParams)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        let cache = forward_cached(h0, adj, pagnn, &params)?;
        let (loss, grad) = cross_entropy_loss(cache.logits(), labels, &splits.train)?;
        let val = if splits.val.is_empty() {
            None
        } else {
            Some(evaluate(cache.logits(), labels, &splits.val, "val")?)
        };
        history.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_macro_f1: val.as_ref().map(|r| r.macro_f1),
            val_micro_f1: val.as_ref().map(|r| r.micro_f1),
        });
        if let Some(report) = &val {
            match &best {
                Some((score, _, _)) if report.macro_f1 <= *score => stale += 1,
                _ => {
                    best = Some((report.macro_f1, epoch, params.clone()));
                    stale = 0;
                }
            }
            if stale >= config.early_stop_patience {
                break;
            }
        }
        if epoch == config.epochs && best.is_none() {
            break;
        }
        let grads = backward_from_cache(&cache, h0, adj, pagnn, &params, &grad)?;
        adam.step(&mut params, &grads.params);
        if !params.is_finite() {
            return Err(ModelError::NonFinite {
                layer: 0,
                block: crate::pagnn::Block::Classifier,
            }
            .into());
        }
    }

    let (params, best_epoch) = match best {
        Some((_, epoch, p)) => (p, epoch),
        None => (params, history.len()),
    };
    Ok(TrainOutcome {
        params,
        best_epoch,
        history,
    })
}

/// Trains on a loaded graph. Uses the graph's own splits.
pub fn train(
    graph: &HeteroGraph,
    annotations: &[NodeAnnotation],
    features: &FeatureMatrix,
    pagnn: &PagnnConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let adj = TypedAdjacency::from_graph(graph, annotations)?;
    let labels: Vec<Option<usize>> = graph
        .labels()
        .map(<[_]>::to_vec)
        .unwrap_or_else(|| vec![None; graph.node_count()]);
    train_on(&features.to_matrix(), &adj, &labels, &SplitNodes::from_graph(graph), pagnn, config)
}

/// Writes `epoch,train_loss,val_macro_f1,val_micro_f1` rows.
pub fn write_history(history: &[EpochRecord], path: &Path) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "val_macro_f1", "val_micro_f1"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            opt(r.val_macro_f1),
            opt(r.val_micro_f1),
        ])?;
    }
    w.flush()?;
    Ok(())
}
