//! Finite-difference self-check of every layer and of both full models.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdgsim::autodiff::{grad_check, EntrySelection, GradCheckOptions, GradCheckReport, ParamStore, Tape, Var};
use pdgsim::dataflow::build_pdg;
use pdgsim::frontend::compile;
use pdgsim::model::{layers, pair_score, GraphInput, Model, ModelConfig, ModelError, PoolMode, Variant};

pub const TOLERANCE: f64 = 1e-3;

/// Programs whose PDGs have six nodes each.
pub const PROGRAMS: [&str; 4] = [
    "def f(x) { if (x > 0) { x = x * 2; } else { x = 0 - x; } call log(x); return x; }",
    "def g(n) { i = 0; while (i < n) { i = i + 1; } return i; }",
    "def h(x) { z = x * input(); if (z == 0) { throw z; } call out(z); return z; }",
    "def k(a, b) { switch (a % 3) { case 0: { b = b * 2; } default: { skip; } } return b; }",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub report: GradCheckReport,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.report.checked > 0 && self.report.max_rel_error < TOLERANCE
    }
}

fn graph(src: &str) -> GraphInput {
    let pdg = build_pdg(&compile(src).expect("built-in program compiles")).expect("built-in program has a PDG");
    GraphInput::from_pdg(&pdg).expect("non-empty graph")
}

/// The seeded pair used for the end-to-end checks, and its label.
pub fn seeded_pair(seed: u64) -> (GraphInput, GraphInput, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rng.random_range(0..PROGRAMS.len());
    let b = rng.random_range(0..PROGRAMS.len());
    (graph(PROGRAMS[a]), graph(PROGRAMS[b]), (a == b) as u8 as f64)
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn subset(store: &ParamStore, names: &[&str]) -> ParamStore {
    let mut out = ParamStore::new();
    for &n in names {
        let p = store.get(n).expect("layer parameter exists");
        out.insert(n, p.value.clone(), p.trainable).expect("names are distinct");
    }
    out
}

/// `sum(out ⊙ r)`: a scalar whose gradient reaches every output entry.
fn probe(t: &mut Tape, out: Var, r: &Array2<f64>) -> Result<Var, ModelError> {
    let c = t.constant(r.clone());
    let p = t.hadamard(out, c)?;
    Ok(t.sum_all(p))
}

type LayerFn = Box<dyn Fn(&ParamStore, &mut Tape) -> Result<Var, ModelError>>;

/// Runs every check for `seed`. `fault_scale` other than 1 corrupts the analytic
/// gradients, which must make the check fail.
pub fn run(seed: u64, fault_scale: f64) -> Result<Vec<CheckLine>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let (ga, gb, label) = seeded_pair(seed);
    let cfg = ModelConfig {
        variant: Variant::Eu,
        ..ModelConfig::default()
    };
    let base = Model::init(cfg.clone(), seed)?.params;
    let nodes = ga.len();
    let mask = ga.union_mask.clone();
    let b1 = cfg.block1_width();
    let x = ga.features.clone();
    let h = uniform(&mut rng, nodes, cfg.d_hidden);
    let h1 = uniform(&mut rng, nodes, b1);
    let h2 = uniform(&mut rng, nodes, cfg.out_dim2);
    let cell = uniform(&mut rng, nodes, cfg.lstm_hidden);
    let hf = uniform(&mut rng, nodes, cfg.node_feature_width());
    let g1 = uniform(&mut rng, 1, cfg.graph_dim);
    let g2 = uniform(&mut rng, 1, cfg.graph_dim);
    let r_hidden = uniform(&mut rng, nodes, cfg.d_hidden);
    let r_head = uniform(&mut rng, nodes, cfg.head_dim1);
    let r_b1 = uniform(&mut rng, nodes, b1);
    let r_b2 = uniform(&mut rng, nodes, cfg.out_dim2);
    let r_pool = uniform(&mut rng, 1, cfg.graph_dim);

    let mut layer_checks: Vec<(&str, ParamStore, LayerFn)> = Vec::new();
    {
        let (x, r) = (x.clone(), r_hidden.clone());
        layer_checks.push((
            "embed",
            subset(&base, &["embed.w", "embed.b"]),
            Box::new(move |s, t| {
                let xv = t.constant(x.clone());
                let out = layers::linear_embed(t, s, xv)?;
                probe(t, out, &r)
            }),
        ));
    }
    {
        let mut head = ParamStore::new();
        let w = base.value("unified.attn1.w")?;
        let a = base.value("unified.attn1.a")?;
        head.insert("w", w.slice(ndarray::s![.., 0..cfg.head_dim1]).to_owned(), true)?;
        head.insert("a", a.slice(ndarray::s![.., 0..1]).to_owned(), true)?;
        let (h, r, mask, slope) = (h.clone(), r_head.clone(), mask.clone(), cfg.leaky_slope);
        layer_checks.push((
            "attention_head",
            head,
            Box::new(move |s, t| {
                let hv = t.constant(h.clone());
                let w = t.param(s, "w")?;
                let a = t.param(s, "a")?;
                let (out, _) = layers::attention_head(t, hv, w, a, &mask, slope)?;
                probe(t, out, &r)
            }),
        ));
    }
    {
        let (h, r, mask, c) = (h.clone(), r_b1.clone(), mask.clone(), cfg.clone());
        layer_checks.push((
            "attention_block1",
            subset(&base, &["unified.attn1.w", "unified.attn1.a"]),
            Box::new(move |s, t| {
                let hv = t.constant(h.clone());
                let out = layers::attention_block1(t, s, &c, "unified", hv, &mask, None)?;
                probe(t, out, &r)
            }),
        ));
    }
    {
        let (h1, r, mask, c) = (h1.clone(), r_b2.clone(), mask.clone(), cfg.clone());
        layer_checks.push((
            "attention_block2",
            subset(&base, &["unified.attn2.w", "unified.attn2.a"]),
            Box::new(move |s, t| {
                let hv = t.constant(h1.clone());
                let out = layers::attention_block2(t, s, &c, "unified", hv, &mask, None)?;
                probe(t, out, &r)
            }),
        ));
    }
    {
        let (h2, cell, r) = (h2.clone(), cell.clone(), r_hidden.clone());
        layer_checks.push((
            "lstm",
            subset(&base, &["unified.lstm.w"]),
            Box::new(move |s, t| {
                let input = t.constant(h2.clone());
                let c = t.constant(cell.clone());
                let (out, next) = layers::lstm_step(t, s, "unified", input, c)?;
                let a = probe(t, out, &r)?;
                let b = probe(t, next, &r)?;
                Ok(t.add(a, b)?)
            }),
        ));
    }
    for (name, pool, names) in [
        ("pool_soft", PoolMode::Soft, &["pool.gate.w", "pool.gate.b", "pool.value.w", "pool.value.b"][..]),
        ("pool_gap", PoolMode::Gap, &["pool.value.w", "pool.value.b"][..]),
    ] {
        let (hf, r) = (hf.clone(), r_pool.clone());
        layer_checks.push((
            name,
            subset(&base, names),
            Box::new(move |s, t| {
                let v = t.constant(hf.clone());
                let out = layers::graph_pooling(t, s, pool, v)?;
                probe(t, out, &r)
            }),
        ));
    }
    {
        let (g1, g2, c) = (g1.clone(), g2.clone(), cfg.clone());
        layer_checks.push((
            "classifier",
            subset(&base, &["cls.hidden.w", "cls.hidden.b", "cls.out.w", "cls.out.b"]),
            Box::new(move |s, t| {
                let a = t.constant(g1.clone());
                let b = t.constant(g2.clone());
                let score = layers::siamese_similarity(t, s, &c, a, b)?;
                Ok(t.bce(score, &[label])?)
            }),
        ));
    }

    let layer_opts = GradCheckOptions {
        selection: EntrySelection::Sample { per_param: 32, seed },
        fault_scale,
        ..GradCheckOptions::default()
    };
    let mut lines = Vec::new();
    for (name, mut store, f) in layer_checks {
        let report = grad_check(&mut store, f, &layer_opts)?;
        lines.push(CheckLine {
            name: name.to_string(),
            report,
        });
    }

    let model_opts = GradCheckOptions {
        selection: EntrySelection::Sample { per_param: 6, seed },
        fault_scale,
        ..GradCheckOptions::default()
    };
    for (name, variant) in [("model_eu", Variant::Eu), ("model_ea", Variant::Ea)] {
        let cfg = ModelConfig {
            variant,
            ..ModelConfig::default()
        };
        let mut store = Model::init(cfg.clone(), seed)?.params;
        let report = grad_check(
            &mut store,
            |s: &ParamStore, t: &mut Tape| -> Result<Var, ModelError> {
                let score = pair_score(&cfg, s, t, &ga, &gb)?;
                Ok(t.bce(score, &[label])?)
            },
            &model_opts,
        )?;
        lines.push(CheckLine {
            name: name.to_string(),
            report,
        });
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn programs_have_six_nodes() {
        for p in PROGRAMS {
            assert_eq!(graph(p).len(), 6, "{p}");
        }
    }
}
