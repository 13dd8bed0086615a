use super::*;
use crate::dataflow::build_pdg;
use crate::frontend::compile;
use crate::model::{GraphInput, ModelConfig, Variant};

fn graph(src: &str) -> GraphInput {
    GraphInput::from_pdg(&build_pdg(&compile(src).unwrap()).unwrap()).unwrap()
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        d_hidden: 8,
        heads1: 2,
        head_dim1: 4,
        heads2: 2,
        out_dim2: 8,
        lstm_hidden: 8,
        rounds: 2,
        graph_dim: 8,
        classifier_hidden: 4,
        variant: Variant::Ea,
        ..ModelConfig::default()
    }
}

const SUM: &str = "def f(a, n) { s = 0; i = 0; while (i < n) { s = s + a[i]; i = i + 1; } return s; }";
const SUM_FOR: &str = "def f(a, n) { s = 0; for (i = 0; i < n; i = i + 1) { s = s + a[i]; } return s; }";
const GCD: &str = "def g(x, y) { while (y != 0) { t = x % y; x = y; y = t; } return x; }";
const MAX: &str = "def m(a, n) { b = a[0]; i = 1; while (i < n) { if (a[i] > b) { b = a[i]; } i = i + 1; } return b; }";

fn toy_set() -> PairSet {
    let mut set = PairSet::new();
    let ids: Vec<usize> = [SUM, SUM_FOR, GCD, MAX].iter().map(|s| set.intern(graph(s))).collect();
    let pairs = vec![
        PairIndex { a: ids[0], b: ids[1], label: 1.0 },
        PairIndex { a: ids[2], b: ids[2], label: 1.0 },
        PairIndex { a: ids[0], b: ids[2], label: 0.0 },
        PairIndex { a: ids[3], b: ids[2], label: 0.0 },
    ];
    set.train = pairs.clone();
    set.val = pairs;
    set
}

#[test]
fn interning_dedupes_identical_graphs() {
    let mut set = PairSet::new();
    let a = set.intern(graph(SUM));
    let b = set.intern(graph(SUM));
    let c = set.intern(graph(GCD));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(set.graphs.len(), 2);
}

#[test]
fn split_is_seeded_and_proportional() {
    let s = split_indices(200, 0);
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (140, 30, 30));
    assert_eq!(s, split_indices(200, 0));
    assert_ne!(s, split_indices(200, 1));
    let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..200).collect::<Vec<_>>());
    let small = split_indices(40, 0);
    assert_eq!((small.train.len(), small.val.len(), small.test.len()), (28, 6, 6));
}

#[test]
fn config_validation() {
    TrainConfig::default().validate().unwrap();
    let bad = [
        TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { threshold_grid: vec![0.5, 0.4], ..TrainConfig::default() },
        TrainConfig { threshold_grid: vec![], ..TrainConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(cfg.validate(), Err(TrainError::Config(_))));
    }
}

#[test]
fn one_pair_one_epoch_smoke() {
    let mut set = PairSet::new();
    let a = set.intern(graph(SUM));
    let b = set.intern(graph(GCD));
    set.train = vec![PairIndex { a, b, label: 0.0 }];
    set.val = set.train.clone();
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let mut seen = 0;
    let out = train(&set, tiny_model(), &cfg, |_| seen += 1).unwrap();
    assert_eq!(seen, 1);
    assert_eq!(out.history.len(), 1);
    assert!(out.history[0].loss.is_finite());
    for (name, p) in out.model.params.iter() {
        assert!(p.grad.iter().all(|g| g.is_finite()), "{name}");
        if p.trainable && !name.ends_with(".b") {
            assert!(p.grad.iter().any(|&g| g != 0.0), "{name} got no gradient");
        }
    }
}

#[test]
fn empty_splits_are_rejected() {
    let set = PairSet::new();
    assert!(matches!(
        train(&set, tiny_model(), &TrainConfig::default(), |_| {}),
        Err(TrainError::EmptyDataset)
    ));
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let set = toy_set();
    let cfg = TrainConfig {
        epochs: 40,
        learning_rate: 1e-2,
        batch_size: 3,
        patience: 0,
        ..TrainConfig::default()
    };
    let a = train(&set, tiny_model(), &cfg, |_| {}).unwrap();
    let b = train(&set, tiny_model(), &cfg, |_| {}).unwrap();
    assert_eq!(a.model.to_json(), b.model.to_json());
    assert_eq!(a.history, b.history);
    assert!(a.history.last().unwrap().loss < a.history[0].loss);
    assert!(cfg.threshold_grid.contains(&a.model.threshold));
    let scores = score_pairs(&a.model, &set.graphs, &set.val).unwrap();
    assert_eq!(scores, a.val_scores);
}

#[test]
fn early_stop_after_patience() {
    let set = toy_set();
    let cfg = TrainConfig {
        epochs: 200,
        learning_rate: 1e-2,
        batch_size: 4,
        patience: 3,
        ..TrainConfig::default()
    };
    let out = train(&set, tiny_model(), &cfg, |_| {}).unwrap();
    let tail: Vec<f64> = out.history.iter().rev().take(3).map(|r| r.val_f1).collect();
    assert!(out.history.len() < 200, "did not stop early");
    assert_eq!(tail, vec![1.0; 3]);
}
