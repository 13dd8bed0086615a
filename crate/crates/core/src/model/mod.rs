//! The siamese graph-attention similarity network.
//!
//! Each program's PDG is embedded, refined by rounds of two multi-head attention
//! blocks followed by a gate-only LSTM, and pooled to one vector. The edge-aware
//! variant runs separate stacks over data and control edges and sums them per
//! node. A small classifier scores the concatenation of two pooled vectors.

mod config;
mod io;
pub mod layers;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::autodiff::{AutodiffError, ParamStore, Tape, Var};
use crate::dataflow::Pdg;
use crate::graph::{adjacency_matrix, encode_node_features, EdgeClass, GraphError};
use crate::training::kaiming_uniform_init;

pub use config::{ModelConfig, PoolMode, Variant};

/// Standard deviation of the initial LSTM cell row.
pub const CELL_INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("malformed model file at {path}: {message}")]
    Format { path: String, message: String },
}

/// Numeric inputs for one PDG. Masks are in-neighbour masks with self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: Array2<f64>,
    pub control_mask: Array2<f64>,
    pub data_mask: Array2<f64>,
    pub union_mask: Array2<f64>,
}

impl GraphInput {
    pub fn from_pdg(pdg: &Pdg) -> Result<Self, ModelError> {
        let features = encode_node_features(pdg)?.0;
        let mask = |class| adjacency_matrix(pdg, class, true).in_neighbour_mask();
        Ok(Self {
            features,
            control_mask: mask(EdgeClass::Control),
            data_mask: mask(EdgeClass::Data),
            union_mask: mask(EdgeClass::Both),
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }
}

/// Attention matrices of one propagation round, one per head.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionRound {
    pub block1: Vec<Array2<f64>>,
    pub block2: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionTrace {
    /// `(branch name, rounds)` in branch order.
    pub branches: Vec<(String, Vec<AttentionRound>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Kaiming,
    Zero,
    Cell,
}

/// Every parameter of a model with this config, in canonical order.
fn layout(cfg: &ModelConfig) -> Vec<(String, (usize, usize), Init)> {
    let mut out = Vec::new();
    let mut push = |name: String, shape, init| out.push((name, shape, init));
    push("embed.w".into(), (cfg.d_in, cfg.d_hidden), Init::Kaiming);
    push("embed.b".into(), (1, cfg.d_hidden), Init::Zero);
    for branch in cfg.branches() {
        // Heads and gates are stored side by side; the Kaiming bound depends
        // only on the fan-in, so this matches per-head initialization.
        let block1 = cfg.block1_width();
        push(format!("{branch}.attn1.w"), (cfg.d_hidden, block1), Init::Kaiming);
        push(format!("{branch}.attn1.a"), (2 * cfg.head_dim1, cfg.heads1), Init::Kaiming);
        push(format!("{branch}.attn2.w"), (block1, cfg.heads2 * cfg.out_dim2), Init::Kaiming);
        push(format!("{branch}.attn2.a"), (2 * cfg.out_dim2, cfg.heads2), Init::Kaiming);
        if cfg.no_lstm {
            push(format!("{branch}.proj.w"), (cfg.out_dim2, cfg.d_hidden), Init::Kaiming);
        } else {
            push(format!("{branch}.lstm.w"), (cfg.out_dim2, 4 * cfg.lstm_hidden), Init::Kaiming);
            push(format!("{branch}.lstm.c0"), (1, cfg.lstm_hidden), Init::Cell);
        }
    }
    let width = cfg.node_feature_width();
    if cfg.pool == PoolMode::Soft {
        push("pool.gate.w".into(), (width, cfg.graph_dim), Init::Kaiming);
        push("pool.gate.b".into(), (1, cfg.graph_dim), Init::Zero);
    }
    push("pool.value.w".into(), (width, cfg.graph_dim), Init::Kaiming);
    push("pool.value.b".into(), (1, cfg.graph_dim), Init::Zero);
    push("cls.hidden.w".into(), (2 * cfg.graph_dim, cfg.classifier_hidden), Init::Kaiming);
    push("cls.hidden.b".into(), (1, cfg.classifier_hidden), Init::Zero);
    push("cls.out.w".into(), (cfg.classifier_hidden, 1), Init::Kaiming);
    push("cls.out.b".into(), (1, 1), Init::Zero);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    /// Decision threshold: a pair is a clone when its score is at least this.
    pub threshold: f64,
}

impl Model {
    /// Kaiming-uniform weights, zero biases and a frozen random initial LSTM cell
    /// row per branch, all drawn from one stream seeded by `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = Normal::new(0.0, CELL_INIT_STD).expect("valid std");
        let mut params = ParamStore::new();
        for (name, (rows, cols), init) in layout(&config) {
            let (value, trainable) = match init {
                Init::Kaiming => (kaiming_uniform_init(rows, cols, config.leaky_slope, &mut rng), true),
                Init::Zero => (Array2::zeros((rows, cols)), true),
                Init::Cell => (Array2::from_shape_simple_fn((rows, cols), || cell.sample(&mut rng)), false),
            };
            params.insert(name, value, trainable)?;
        }
        Ok(Self {
            config,
            params,
            threshold: 0.5,
        })
    }

    pub fn graph_features(
        &self,
        t: &mut Tape,
        g: &GraphInput,
        trace: Option<&mut AttentionTrace>,
    ) -> Result<(Var, Var), ModelError> {
        graph_features(&self.config, &self.params, t, g, trace)
    }

    pub fn similarity(&self, t: &mut Tape, g1: Var, g2: Var) -> Result<Var, ModelError> {
        Ok(layers::siamese_similarity(t, &self.params, &self.config, g1, g2)?)
    }

    /// Records the full pair score on `t`.
    pub fn pair_score(&self, t: &mut Tape, a: &GraphInput, b: &GraphInput) -> Result<Var, ModelError> {
        pair_score(&self.config, &self.params, t, a, b)
    }

    pub fn score(&self, a: &GraphInput, b: &GraphInput) -> Result<f64, ModelError> {
        let mut t = Tape::new();
        let s = self.pair_score(&mut t, a, b)?;
        Ok(t.scalar(s))
    }

    pub fn is_clone(&self, score: f64) -> bool {
        score >= self.threshold
    }

    pub fn attention(&self, g: &GraphInput) -> Result<AttentionTrace, ModelError> {
        let mut t = Tape::new();
        let mut trace = AttentionTrace::default();
        self.graph_features(&mut t, g, Some(&mut trace))?;
        Ok(trace)
    }

    pub fn to_json(&self) -> String {
        io::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        io::from_json(text)
    }
}

/// Records the pooled `1 x graph_dim` vector of `g`, and the summed per-node
/// representation that was pooled.
pub fn graph_features(
    cfg: &ModelConfig,
    store: &ParamStore,
    t: &mut Tape,
    g: &GraphInput,
    mut trace: Option<&mut AttentionTrace>,
) -> Result<(Var, Var), ModelError> {
    if g.is_empty() {
        return Err(GraphError::EmptyGraph.into());
    }
    let x = t.constant(g.features.clone());
    let h0 = layers::linear_embed(t, store, x)?;
    let mut total: Option<Var> = None;
    for &branch in cfg.branches() {
        let mask = match branch {
            "data" => &g.data_mask,
            "control" => &g.control_mask,
            _ => &g.union_mask,
        };
        let mut rounds = Vec::new();
        let sink = trace.is_some().then_some(&mut rounds);
        let hf = layers::compute_node_features(t, store, cfg, branch, h0, mask, sink)?;
        if let Some(tr) = trace.as_deref_mut() {
            tr.branches.push((branch.to_string(), rounds));
        }
        total = Some(match total {
            None => hf,
            Some(acc) => t.add(acc, hf)?,
        });
    }
    let h_final = total.expect("at least one branch");
    let pooled = layers::graph_pooling(t, store, cfg.pool, h_final)?;
    Ok((pooled, h_final))
}

/// Records the 1x1 score of the pair `(a, b)`.
pub fn pair_score(
    cfg: &ModelConfig,
    store: &ParamStore,
    t: &mut Tape,
    a: &GraphInput,
    b: &GraphInput,
) -> Result<Var, ModelError> {
    let (ga, _) = graph_features(cfg, store, t, a, None)?;
    let (gb, _) = graph_features(cfg, store, t, b, None)?;
    Ok(layers::siamese_similarity(t, store, cfg, ga, gb)?)
}
