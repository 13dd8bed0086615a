//! Per-edge attention export.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::Serialize;

use pdgsim::dataflow::Pdg;
use pdgsim::model::{AttentionRound, AttentionTrace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeAttention {
    pub src: usize,
    pub dst: usize,
    /// `control`, `data` or `self`.
    pub kind: String,
    /// Branch whose attention is reported: `unified`, `data` or `control`.
    pub branch: String,
    pub attn_block1: f64,
    pub attn_block2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionExport {
    pub edges: Vec<EdgeAttention>,
}

/// Mean over rounds and heads of the weight node `dst` gives to `src`.
fn mean_weight(rounds: &[AttentionRound], pick: fn(&AttentionRound) -> &Vec<Array2<f64>>, src: usize, dst: usize) -> f64 {
    let all: Vec<f64> = rounds
        .iter()
        .flat_map(|r| pick(r).iter().map(|m| m[[dst, src]]))
        .collect();
    all.iter().sum::<f64>() / all.len().max(1) as f64
}

/// One entry per distinct PDG edge, plus a self-loop entry per node and branch.
/// Control edges read the control branch and data edges the data branch; with
/// a single unified branch every edge reads that one.
pub fn export(pdg: &Pdg, trace: &AttentionTrace) -> AttentionExport {
    let data: BTreeSet<(usize, usize)> = pdg.data_edges.iter().map(|(s, d, _)| (*s, *d)).collect();
    let mut wanted: Vec<(usize, usize, &str)> = Vec::new();
    wanted.extend(pdg.control_edges.iter().map(|&(s, d)| (s, d, "control")));
    wanted.extend(data.iter().map(|&(s, d)| (s, d, "data")));
    let mut edges = Vec::new();
    for (branch, rounds) in &trace.branches {
        let entry = |src: usize, dst: usize, kind: &str| EdgeAttention {
            src,
            dst,
            kind: kind.to_string(),
            branch: branch.clone(),
            attn_block1: mean_weight(rounds, |r| &r.block1, src, dst),
            attn_block2: mean_weight(rounds, |r| &r.block2, src, dst),
        };
        for &(s, d, kind) in &wanted {
            if branch == "unified" || branch == kind {
                edges.push(entry(s, d, kind));
            }
        }
        for n in 0..pdg.len() {
            edges.push(entry(n, n, "self"));
        }
    }
    edges.sort_by(|a, b| (a.src, a.dst, &a.kind, &a.branch).cmp(&(b.src, b.dst, &b.kind, &b.branch)));
    AttentionExport { edges }
}
