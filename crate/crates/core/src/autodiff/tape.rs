use std::collections::HashMap;

use ndarray::{s, Array2, Axis, Zip};

use super::{AutodiffError, ParamStore};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRowBias(Var, Var),
    Hadamard(Var, Var),
    ConcatCols(Vec<Var>),
    ColSlice(Var, usize),
    RowSlice(Var, usize),
    SumRows(Var),
    SumAll(Var),
    Transpose(Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    OuterSum(Var, Var),
    MaskedRowSoftmax(Var),
    Bce(Var, Vec<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Lower clamp applied to probabilities before taking logs in [`Tape::bce`].
pub const PROB_EPS: f64 = 1e-7;

/// Append-only record of a computation. Nodes are stored in creation order, which
/// is a topological order, so the backward pass is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<usize, Var>,
    store: Option<u64>,
    /// Sign of every LeakyReLU input, recorded only when tracking is on.
    kinks: Option<Vec<bool>>,
}

fn shape(m: &Array2<f64>) -> (usize, usize) {
    m.dim()
}

fn shape_err(op: &'static str, expected: (usize, usize), found: (usize, usize)) -> AutodiffError {
    AutodiffError::Shape { op, expected, found }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape that remembers which side of zero each LeakyReLU input fell on,
    /// so two evaluations can tell whether a kink lies between them.
    pub fn tracking_kinks() -> Self {
        Self {
            kinks: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub fn kink_signature(&self) -> Option<&[bool]> {
        self.kinks.as_deref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Loads a parameter onto the tape. Repeated calls return the same node, so a
    /// parameter shared by several sub-computations accumulates all of its gradient.
    /// A tape reads from a single store.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var, AutodiffError> {
        match self.store {
            Some(id) if id != store.id() => return Err(AutodiffError::ForeignStore),
            _ => self.store = Some(store.id()),
        }
        let idx = store
            .index_of(name)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))?;
        if let Some(&v) = self.params.get(&idx) {
            return Ok(v);
        }
        let (_, p) = store.by_index(idx).expect("index from lookup");
        let v = self.push(p.value.clone(), Op::Param(idx), p.trainable);
        self.params.insert(idx, v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", (sa.1, sb.1), sb));
        }
        let out = self.value(a).dot(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        if sa != sb {
            return Err(shape_err("add", sa, sb));
        }
        let out = self.value(a) + self.value(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    /// `a + 1·bias` where `bias` is a single row broadcast over the rows of `a`.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(bias)));
        if sb != (1, sa.1) {
            return Err(shape_err("add_row_bias", (1, sa.1), sb));
        }
        let out = self.value(a) + self.value(bias);
        let ng = self.needs(a) || self.needs(bias);
        Ok(self.push(out, Op::AddRowBias(a, bias), ng))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        if sa != sb {
            return Err(shape_err("hadamard", sa, sb));
        }
        let out = self.value(a) * self.value(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Hadamard(a, b), ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = parts.first().ok_or(AutodiffError::EmptyConcat)?;
        let rows = self.value(*first).nrows();
        let mut cols = 0;
        for &p in parts {
            let sp = shape(self.value(p));
            if sp.0 != rows {
                return Err(shape_err("concat_cols", (rows, sp.1), sp));
            }
            cols += sp.1;
        }
        let mut out = Array2::zeros((rows, cols));
        let mut at = 0;
        for &p in parts {
            let v = self.value(p);
            out.slice_mut(s![.., at..at + v.ncols()]).assign(v);
            at += v.ncols();
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn col_slice(&mut self, a: Var, start: usize, width: usize) -> Result<Var, AutodiffError> {
        let sa = shape(self.value(a));
        if start + width > sa.1 {
            return Err(shape_err("col_slice", (sa.0, start + width), sa));
        }
        let out = self.value(a).slice(s![.., start..start + width]).to_owned();
        let ng = self.needs(a);
        Ok(self.push(out, Op::ColSlice(a, start), ng))
    }

    pub fn row_slice(&mut self, a: Var, start: usize, height: usize) -> Result<Var, AutodiffError> {
        let sa = shape(self.value(a));
        if start + height > sa.0 {
            return Err(shape_err("row_slice", (start + height, sa.1), sa));
        }
        let out = self.value(a).slice(s![start..start + height, ..]).to_owned();
        let ng = self.needs(a);
        Ok(self.push(out, Op::RowSlice(a, start), ng))
    }

    /// Column-wise sum over all rows, giving a single row.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let out = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0));
        let ng = self.needs(a);
        self.push(out, Op::SumRows(a), ng)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        let ng = self.needs(a);
        self.push(out, Op::SumAll(a), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).t().to_owned();
        let ng = self.needs(a);
        self.push(out, Op::Transpose(a), ng)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        let ng = self.needs(a);
        self.push(out, Op::Scale(a, c), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        let ng = self.needs(a);
        self.push(out, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        let ng = self.needs(a);
        self.push(out, Op::Tanh(a), ng)
    }

    /// Zero takes the positive branch.
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).mapv(|x| leaky_relu(x, slope));
        if let Some(k) = self.kinks.as_mut() {
            k.extend(self.nodes[a.0].value.iter().map(|&x| x >= 0.0));
        }
        let ng = self.needs(a);
        self.push(out, Op::LeakyRelu(a, slope), ng)
    }

    /// `out[i][j] = rows[i] + cols[j]` for two column vectors of equal length.
    pub fn outer_sum(&mut self, rows: Var, cols: Var) -> Result<Var, AutodiffError> {
        let (sr, sc) = (shape(self.value(rows)), shape(self.value(cols)));
        if sr.1 != 1 || sc != sr {
            return Err(shape_err("outer_sum", (sr.0, 1), sc));
        }
        let r = self.value(rows).column(0).to_owned();
        let c = self.value(cols).column(0).to_owned();
        let n = r.len();
        let out = Array2::from_shape_fn((n, n), |(i, j)| r[i] + c[j]);
        let ng = self.needs(rows) || self.needs(cols);
        Ok(self.push(out, Op::OuterSum(rows, cols), ng))
    }

    /// Row-wise softmax over entries where `mask` is 1; masked entries come out as
    /// exactly 0. The mask is not differentiated. Every mask row needs a 1.
    pub fn masked_row_softmax(&mut self, scores: Var, mask: &Array2<f64>) -> Result<Var, AutodiffError> {
        let ss = shape(self.value(scores));
        if mask.dim() != ss {
            return Err(shape_err("masked_row_softmax", ss, mask.dim()));
        }
        let mut out = Array2::zeros(ss);
        for (i, (srow, mrow)) in self.value(scores).rows().into_iter().zip(mask.rows()).enumerate() {
            let mut max = f64::NEG_INFINITY;
            for (&s, &m) in srow.iter().zip(mrow) {
                if m != 0.0 && s > max {
                    max = s;
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(AutodiffError::Mask { row: i });
            }
            let mut total = 0.0;
            let mut orow = out.row_mut(i);
            for ((o, &s), &m) in orow.iter_mut().zip(srow).zip(mrow) {
                if m != 0.0 {
                    *o = (s - max).exp();
                    total += *o;
                }
            }
            orow /= total;
        }
        let ng = self.needs(scores);
        Ok(self.push(out, Op::MaskedRowSoftmax(scores), ng))
    }

    /// Mean binary cross-entropy of a column of probabilities against 0/1 labels,
    /// with probabilities clamped to `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn bce(&mut self, probs: Var, labels: &[f64]) -> Result<Var, AutodiffError> {
        let sp = shape(self.value(probs));
        if sp != (labels.len(), 1) || labels.is_empty() {
            return Err(AutodiffError::LengthMismatch {
                scores: sp.0 * sp.1,
                labels: labels.len(),
            });
        }
        let p = self.value(probs);
        let n = labels.len() as f64;
        let total: f64 = p
            .column(0)
            .iter()
            .zip(labels)
            .map(|(&p, &y)| {
                let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
                y * p.ln() + (1.0 - y) * (1.0 - p).ln()
            })
            .sum();
        let ng = self.needs(probs);
        Ok(self.push(Array2::from_elem((1, 1), -total / n), Op::Bce(probs, labels.to_vec()), ng))
    }

    /// Reverse sweep from a 1x1 `loss`, accumulating (`+=`) into the gradients of
    /// every trainable parameter loaded onto this tape.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<(), AutodiffError> {
        let sl = shape(self.value(loss));
        if sl != (1, 1) {
            return Err(AutodiffError::NotScalar { rows: sl.0, cols: sl.1 });
        }
        if self.store.is_some_and(|id| id != store.id()) {
            return Err(AutodiffError::ForeignStore);
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let mut acc = |v: Var, delta: Array2<f64>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &delta,
                    slot @ None => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(idx) => {
                    let (_, p) = store.by_index_mut(*idx).expect("param index recorded from this store");
                    p.grad += &g;
                }
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        acc(*a, g.dot(&self.value(*b).t()));
                    }
                    if self.needs(*b) {
                        acc(*b, self.value(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::AddRowBias(a, b) => {
                    acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, g);
                }
                Op::Hadamard(a, b) => {
                    acc(*a, &g * self.value(*b));
                    acc(*b, &g * self.value(*a));
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(p, g.slice(s![.., at..at + w]).to_owned());
                        at += w;
                    }
                }
                // Slices add straight into the parent's gradient block.
                Op::ColSlice(a, start) => {
                    if self.needs(*a) {
                        let slot = grads[a.0].get_or_insert_with(|| Array2::zeros(self.value(*a).raw_dim()));
                        let mut block = slot.slice_mut(s![.., *start..*start + g.ncols()]);
                        block += &g;
                    }
                }
                Op::RowSlice(a, start) => {
                    if self.needs(*a) {
                        let slot = grads[a.0].get_or_insert_with(|| Array2::zeros(self.value(*a).raw_dim()));
                        let mut block = slot.slice_mut(s![*start..*start + g.nrows(), ..]);
                        block += &g;
                    }
                }
                Op::SumRows(a) => {
                    let rows = self.value(*a).nrows();
                    let full = g.broadcast((rows, g.ncols())).expect("row broadcast").to_owned();
                    acc(*a, full);
                }
                Op::SumAll(a) => {
                    acc(*a, Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]]));
                }
                Op::Transpose(a) => acc(*a, g.t().to_owned()),
                Op::Scale(a, c) => acc(*a, g * *c),
                Op::Sigmoid(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= y * (1.0 - y));
                    acc(*a, d);
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                    acc(*a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| *d *= if x >= 0.0 { 1.0 } else { *slope });
                    acc(*a, d);
                }
                Op::OuterSum(r, c) => {
                    acc(*r, g.sum_axis(Axis(1)).insert_axis(Axis(1)));
                    acc(*c, g.sum_axis(Axis(0)).insert_axis(Axis(1)));
                }
                Op::MaskedRowSoftmax(a) => {
                    let alpha = &node.value;
                    let mut d = &g * alpha;
                    let dots = d.sum_axis(Axis(1));
                    Zip::from(d.rows_mut())
                        .and(alpha.rows())
                        .and(&dots)
                        .for_each(|mut drow, arow, &dot| {
                            Zip::from(&mut drow).and(&arow).for_each(|dv, &av| *dv -= av * dot);
                        });
                    acc(*a, d);
                }
                Op::Bce(p, labels) => {
                    let n = labels.len() as f64;
                    let scale = g[[0, 0]];
                    let probs = self.value(*p);
                    let d = Array2::from_shape_fn(probs.raw_dim(), |(i, _)| {
                        let raw = probs[[i, 0]];
                        if raw <= PROB_EPS || raw >= 1.0 - PROB_EPS {
                            return 0.0;
                        }
                        let y = labels[i];
                        -scale * (y / raw - (1.0 - y) / (1.0 - raw)) / n
                    });
                    acc(*p, d);
                }
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}
