//! Forward pass pieces, each recorded on a caller-supplied tape.

use ndarray::Array2;

use super::{AttentionRound, ModelConfig, PoolMode};
use crate::autodiff::{AutodiffError, ParamStore, Tape, Var};

type Result<T> = std::result::Result<T, AutodiffError>;

/// `H0 = X·W + b`.
pub fn linear_embed(t: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
    let w = t.param(store, "embed.w")?;
    let b = t.param(store, "embed.b")?;
    let xw = t.matmul(x, w)?;
    t.add_row_bias(xw, b)
}

/// Attention over projected features `z`. `a` stacks the source half over the
/// neighbour half; `mask[i][j] = 1` when `j` feeds `i`. Returns `(α·z, α)`.
pub fn attend(t: &mut Tape, z: Var, a: Var, mask: &Array2<f64>, slope: f64) -> Result<(Var, Var)> {
    let dim = t.value(z).ncols();
    let a_self = t.row_slice(a, 0, dim)?;
    let a_nbr = t.row_slice(a, dim, dim)?;
    let s = t.matmul(z, a_self)?;
    let d = t.matmul(z, a_nbr)?;
    let e = t.outer_sum(s, d)?;
    let e = t.leaky_relu(e, slope);
    let alpha = t.masked_row_softmax(e, mask)?;
    let out = t.matmul(alpha, z)?;
    Ok((out, alpha))
}

/// One GAT head: `z = H·W`, then [`attend`].
pub fn attention_head(t: &mut Tape, h: Var, w: Var, a: Var, mask: &Array2<f64>, slope: f64) -> Result<(Var, Var)> {
    let z = t.matmul(h, w)?;
    attend(t, z, a, mask, slope)
}

/// Sigmoid per head, heads concatenated. Head `k` owns columns
/// `k*head_dim1..(k+1)*head_dim1` of `attn1.w` and column `k` of `attn1.a`.
pub fn attention_block1(
    t: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    branch: &str,
    h: Var,
    mask: &Array2<f64>,
    alphas: Option<&mut Vec<Array2<f64>>>,
) -> Result<Var> {
    let w = t.param(store, &format!("{branch}.attn1.w"))?;
    let attn = t.param(store, &format!("{branch}.attn1.a"))?;
    let z = t.matmul(h, w)?;
    let mut outs = Vec::with_capacity(cfg.heads1);
    let mut seen = Vec::new();
    for k in 0..cfg.heads1 {
        let zk = t.col_slice(z, k * cfg.head_dim1, cfg.head_dim1)?;
        let a = t.col_slice(attn, k, 1)?;
        let (o, alpha) = attend(t, zk, a, mask, cfg.leaky_slope)?;
        seen.push(alpha);
        outs.push(t.sigmoid(o));
    }
    if let Some(sink) = alphas {
        sink.extend(seen.into_iter().map(|v| t.value(v).clone()));
    }
    if outs.len() == 1 {
        Ok(outs[0])
    } else {
        t.concat_cols(&outs)
    }
}

/// Heads summed, then one sigmoid. Heads are laid out as in [`attention_block1`].
pub fn attention_block2(
    t: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    branch: &str,
    h: Var,
    mask: &Array2<f64>,
    betas: Option<&mut Vec<Array2<f64>>>,
) -> Result<Var> {
    let w = t.param(store, &format!("{branch}.attn2.w"))?;
    let attn = t.param(store, &format!("{branch}.attn2.a"))?;
    let z = t.matmul(h, w)?;
    let mut total: Option<Var> = None;
    let mut seen = Vec::new();
    for k in 0..cfg.heads2 {
        let zk = t.col_slice(z, k * cfg.out_dim2, cfg.out_dim2)?;
        let a = t.col_slice(attn, k, 1)?;
        let (o, beta) = attend(t, zk, a, mask, cfg.leaky_slope)?;
        seen.push(beta);
        total = Some(match total {
            None => o,
            Some(acc) => t.add(acc, o)?,
        });
    }
    if let Some(sink) = betas {
        sink.extend(seen.into_iter().map(|v| t.value(v).clone()));
    }
    Ok(t.sigmoid(total.expect("at least one head")))
}

/// Gates read only the current input; there is no recurrent weight. `lstm.w`
/// holds the input, forget, output and candidate weights side by side.
/// Returns `(H, C')`.
pub fn lstm_step(t: &mut Tape, store: &ParamStore, branch: &str, input: Var, cell: Var) -> Result<(Var, Var)> {
    let w = t.param(store, &format!("{branch}.lstm.w"))?;
    let width = t.value(w).ncols() / 4;
    let pre = t.matmul(input, w)?;
    let slice = |t: &mut Tape, k: usize| t.col_slice(pre, k * width, width);
    let (i, f, o, c) = (slice(t, 0)?, slice(t, 1)?, slice(t, 2)?, slice(t, 3)?);
    let i = t.sigmoid(i);
    let f = t.sigmoid(f);
    let o = t.sigmoid(o);
    let candidate = t.tanh(c);
    let keep = t.hadamard(f, cell)?;
    let write = t.hadamard(i, candidate)?;
    let next = t.add(keep, write)?;
    let squashed = t.tanh(next);
    let h = t.hadamard(o, squashed)?;
    Ok((h, next))
}

/// The initial cell state: the branch's stored row repeated for every node.
pub fn initial_cell(t: &mut Tape, store: &ParamStore, branch: &str, nodes: usize) -> Result<Var> {
    let c0 = t.param(store, &format!("{branch}.lstm.c0"))?;
    let ones = t.constant(Array2::ones((nodes, 1)));
    t.matmul(ones, c0)
}

/// Runs `rounds` propagation rounds from `h0` and returns the jumping-knowledge
/// concatenation `[H0 ‖ H1 ‖ … ‖ HT]` (or just `HT` without JK).
pub fn compute_node_features(
    t: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    branch: &str,
    h0: Var,
    mask: &Array2<f64>,
    mut trace: Option<&mut Vec<AttentionRound>>,
) -> Result<Var> {
    let nodes = t.value(h0).nrows();
    let mut cell = if cfg.no_lstm {
        None
    } else {
        Some(initial_cell(t, store, branch, nodes)?)
    };
    let mut h = h0;
    let mut layers = vec![h0];
    for _ in 0..cfg.rounds {
        let mut round = AttentionRound::default();
        let record = trace.is_some();
        let h1 = attention_block1(t, store, cfg, branch, h, mask, record.then_some(&mut round.block1))?;
        let h2 = attention_block2(t, store, cfg, branch, h1, mask, record.then_some(&mut round.block2))?;
        h = match cell {
            Some(c) => {
                let (next_h, next_c) = lstm_step(t, store, branch, h2, c)?;
                cell = Some(next_c);
                next_h
            }
            None => {
                let p = t.param(store, &format!("{branch}.proj.w"))?;
                t.matmul(h2, p)?
            }
        };
        layers.push(h);
        if let Some(sink) = trace.as_deref_mut() {
            sink.push(round);
        }
    }
    if cfg.no_jk {
        Ok(h)
    } else {
        t.concat_cols(&layers)
    }
}

pub fn graph_pooling(t: &mut Tape, store: &ParamStore, pool: PoolMode, hf: Var) -> Result<Var> {
    let wv = t.param(store, "pool.value.w")?;
    let bv = t.param(store, "pool.value.b")?;
    let v = t.matmul(hf, wv)?;
    let v = t.add_row_bias(v, bv)?;
    match pool {
        PoolMode::Soft => {
            let wg = t.param(store, "pool.gate.w")?;
            let bg = t.param(store, "pool.gate.b")?;
            let g = t.matmul(hf, wg)?;
            let g = t.add_row_bias(g, bg)?;
            let g = t.sigmoid(g);
            let gated = t.hadamard(g, v)?;
            Ok(t.sum_rows(gated))
        }
        PoolMode::Gap => {
            let n = t.value(hf).nrows() as f64;
            let s = t.sum_rows(v);
            Ok(t.scale(s, 1.0 / n))
        }
    }
}

fn ordered_score(t: &mut Tape, store: &ParamStore, slope: f64, g1: Var, g2: Var) -> Result<Var> {
    let r = t.concat_cols(&[g1, g2])?;
    let w1 = t.param(store, "cls.hidden.w")?;
    let b1 = t.param(store, "cls.hidden.b")?;
    let w2 = t.param(store, "cls.out.w")?;
    let b2 = t.param(store, "cls.out.b")?;
    let hdn = t.matmul(r, w1)?;
    let hdn = t.add_row_bias(hdn, b1)?;
    let hdn = t.leaky_relu(hdn, slope);
    let out = t.matmul(hdn, w2)?;
    let out = t.add_row_bias(out, b2)?;
    Ok(t.sigmoid(out))
}

/// 1x1 similarity in (0, 1) for two pooled graph vectors.
pub fn siamese_similarity(t: &mut Tape, store: &ParamStore, cfg: &ModelConfig, g1: Var, g2: Var) -> Result<Var> {
    let forward = ordered_score(t, store, cfg.leaky_slope, g1, g2)?;
    if !cfg.symmetrize {
        return Ok(forward);
    }
    let backward = ordered_score(t, store, cfg.leaky_slope, g2, g1)?;
    let both = t.add(forward, backward)?;
    Ok(t.scale(both, 0.5))
}
