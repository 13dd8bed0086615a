use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{adam_step, threshold_moving, AdamState, Confusion, TrainConfig, TrainError};
use crate::autodiff::Tape;
use crate::model::{GraphInput, Model, ModelConfig};

/// A pair of graphs from a [`PairSet`], by index, with a 0/1 label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairIndex {
    pub a: usize,
    pub b: usize,
    pub label: f64,
}

/// Distinct graphs plus the pairs of each split that refer to them. Identical
/// graphs are stored once, so a batch evaluates each of them once.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pub graphs: Vec<GraphInput>,
    pub train: Vec<PairIndex>,
    pub val: Vec<PairIndex>,
    pub test: Vec<PairIndex>,
    seen: HashMap<Vec<u64>, usize>,
}

fn fingerprint(g: &GraphInput) -> Vec<u64> {
    let mut key = vec![g.len() as u64];
    for m in [&g.features, &g.control_mask, &g.data_mask] {
        key.extend(m.iter().map(|x| x.to_bits()));
    }
    key
}

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, g: GraphInput) -> usize {
        let key = fingerprint(&g);
        if let Some(&id) = self.seen.get(&key) {
            return id;
        }
        self.graphs.push(g);
        self.seen.insert(key, self.graphs.len() - 1);
        self.graphs.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// Validation scores of the returned model.
    pub val_scores: Vec<f64>,
}

/// Index split of `n` items: 70% train, 15% validation, the rest test, after a
/// seeded shuffle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, seed: u64) -> Split {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * 0.7).round() as usize;
    let n_val = ((n as f64 * 0.15).round() as usize).min(n - n_train);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Split { train, val, test }
}

/// Scores every pair. Each distinct graph is pooled once.
pub fn score_pairs(model: &Model, graphs: &[GraphInput], pairs: &[PairIndex]) -> Result<Vec<f64>, TrainError> {
    let mut pooled: HashMap<usize, ndarray::Array2<f64>> = HashMap::new();
    for p in pairs {
        for id in [p.a, p.b] {
            if pooled.contains_key(&id) {
                continue;
            }
            let g = graphs.get(id).ok_or(TrainError::BadPair(id))?;
            let mut t = Tape::new();
            let (v, _) = model.graph_features(&mut t, g, None)?;
            pooled.insert(id, t.value(v).clone());
        }
    }
    pairs
        .iter()
        .map(|p| {
            let mut t = Tape::new();
            let a = t.constant(pooled[&p.a].clone());
            let b = t.constant(pooled[&p.b].clone());
            let s = model.similarity(&mut t, a, b)?;
            Ok(t.scalar(s))
        })
        .collect()
}

fn labels(pairs: &[PairIndex]) -> Vec<f64> {
    pairs.iter().map(|p| p.label).collect()
}

/// Records mean BCE over `batch` on `t`.
fn batch_loss(
    model: &Model,
    graphs: &[GraphInput],
    batch: &[PairIndex],
    t: &mut Tape,
) -> Result<crate::autodiff::Var, TrainError> {
    let mut pooled = HashMap::new();
    let mut scores = Vec::with_capacity(batch.len());
    for p in batch {
        let mut vec_of = |id: usize, t: &mut Tape| -> Result<_, TrainError> {
            if let Some(&v) = pooled.get(&id) {
                return Ok(v);
            }
            let g = graphs.get(id).ok_or(TrainError::BadPair(id))?;
            let (v, _) = model.graph_features(t, g, None)?;
            pooled.insert(id, v);
            Ok(v)
        };
        let ga = vec_of(p.a, t)?;
        let gb = vec_of(p.b, t)?;
        scores.push(model.similarity(t, ga, gb)?);
    }
    let row = t.concat_cols(&scores).map_err(crate::model::ModelError::from)?;
    let column = t.transpose(row);
    Ok(t
        .bce(column, &labels(batch))
        .map_err(crate::model::ModelError::from)?)
}

/// Mini-batch Adam on the training pairs. After every epoch the validation F1
/// at the best grid threshold is recorded; training stops early once it has been
/// 1.0 for `patience` consecutive epochs. The returned model carries the grid
/// threshold that maximizes validation F1.
pub fn train(
    data: &PairSet,
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut model = Model::init(model_cfg, cfg.seed)?;
    let mut adam = AdamState::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let val_labels = labels(&data.val);

    let mut history = Vec::new();
    let mut order = data.train.clone();
    let mut streak = 0;
    let mut val_scores = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            model.params.zero_grads();
            let mut t = Tape::new();
            let loss = batch_loss(&model, &data.graphs, batch, &mut t)?;
            total += t.scalar(loss) * batch.len() as f64;
            t.backward(loss, &mut model.params)
                .map_err(crate::model::ModelError::from)?;
            drop(t);
            adam_step(&mut model.params, &mut adam, cfg)?;
        }
        val_scores = score_pairs(&model, &data.graphs, &data.val)?;
        let eps = threshold_moving(&val_scores, &val_labels, &cfg.threshold_grid)?;
        let record = EpochRecord {
            epoch,
            loss: total / order.len() as f64,
            val_f1: Confusion::at(&val_scores, &val_labels, eps).f1(),
        };
        on_epoch(&record);
        history.push(record);
        streak = if record.val_f1 == 1.0 { streak + 1 } else { 0 };
        if cfg.patience > 0 && streak >= cfg.patience {
            break;
        }
    }
    if val_scores.is_empty() {
        val_scores = score_pairs(&model, &data.graphs, &data.val)?;
    }
    model.threshold = threshold_moving(&val_scores, &val_labels, &cfg.threshold_grid)?;
    Ok(TrainOutcome {
        model,
        history,
        val_scores,
    })
}
