//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! sweeps it once in reverse and adds the resulting parameter gradients into a
//! [`ParamStore`]. Gradients accumulate, so callers zero them between batches.

mod gradcheck;
mod params;
mod tape;

use thiserror::Error;

pub use gradcheck::{grad_check, relative_error, EntryError, EntrySelection, GradCheckOptions, GradCheckReport};
pub use params::{Param, ParamStore};
pub use tape::{leaky_relu, sigmoid, Tape, Var, PROB_EPS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{op}: expected shape {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("mask row {row} has no unmasked entry")]
    Mask { row: usize },
    #[error("backward needs a 1x1 loss, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("parameter '{0}' already exists")]
    DuplicateParam(String),
    #[error("tape already holds parameters from a different store")]
    ForeignStore,
    #[error("concat_cols of nothing")]
    EmptyConcat,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};

    fn store_with(name: &str, value: Array2<f64>) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert(name, value, true).unwrap();
        s
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(leaky_relu(-1.0, 0.02), -0.02);
        assert_eq!(leaky_relu(0.0, 0.02), 0.0);
        assert!((sigmoid(-800.0)).is_finite());
    }

    #[test]
    fn masked_softmax_zeroes_masked_entries() {
        let mut t = Tape::new();
        let s = t.constant(arr2(&[[1.0, 1.0, 1.0]]));
        let a = t.masked_row_softmax(s, &arr2(&[[1.0, 0.0, 1.0]])).unwrap();
        assert_eq!(t.value(a), &arr2(&[[0.5, 0.0, 0.5]]));
        let err = t.masked_row_softmax(s, &arr2(&[[0.0, 0.0, 0.0]]));
        assert_eq!(err, Err(AutodiffError::Mask { row: 0 }));
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let mut store = store_with("w", arr2(&[[1.0, -2.0], [3.0, 0.5]]));
        let mut t = Tape::new();
        let w = t.param(&store, "w").unwrap();
        let loss = t.sum_all(w);
        t.backward(loss, &mut store).unwrap();
        assert_eq!(store.get("w").unwrap().grad, Array2::<f64>::ones((2, 2)));
    }

    #[test]
    fn grad_of_square_is_twice_value() {
        let value = arr2(&[[1.0, -2.0], [3.0, 0.5]]);
        let mut store = store_with("w", value.clone());
        let mut t = Tape::new();
        let w = t.param(&store, "w").unwrap();
        let sq = t.hadamard(w, w).unwrap();
        let loss = t.sum_all(sq);
        t.backward(loss, &mut store).unwrap();
        assert_eq!(store.get("w").unwrap().grad, value * 2.0);
    }

    #[test]
    fn backward_accumulates() {
        let mut store = store_with("w", arr2(&[[1.0]]));
        for _ in 0..2 {
            let mut t = Tape::new();
            let w = t.param(&store, "w").unwrap();
            let loss = t.sum_all(w);
            t.backward(loss, &mut store).unwrap();
        }
        assert_eq!(store.get("w").unwrap().grad[[0, 0]], 2.0);
        store.zero_grads();
        assert_eq!(store.get("w").unwrap().grad[[0, 0]], 0.0);
    }

    #[test]
    fn frozen_and_unused_params_get_no_gradient() {
        let mut store = ParamStore::new();
        store.insert("frozen", arr2(&[[2.0]]), false).unwrap();
        store.insert("unused", arr2(&[[2.0]]), true).unwrap();
        let mut t = Tape::new();
        let f = t.param(&store, "frozen").unwrap();
        let loss = t.sum_all(f);
        t.backward(loss, &mut store).unwrap();
        assert_eq!(store.get("frozen").unwrap().grad[[0, 0]], 0.0);
        assert_eq!(store.get("unused").unwrap().grad[[0, 0]], 0.0);
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Array2::zeros((2, 3)));
        let b = t.constant(Array2::zeros((2, 3)));
        assert!(matches!(t.matmul(a, b), Err(AutodiffError::Shape { op: "matmul", .. })));
        let store = ParamStore::new();
        assert_eq!(t.param(&store, "x"), Err(AutodiffError::UnknownParam("x".into())));
        let mut store = store_with("w", Array2::zeros((2, 2)));
        assert!(matches!(
            store.insert("w", Array2::zeros((1, 1)), true),
            Err(AutodiffError::DuplicateParam(_))
        ));
        assert_eq!(
            t.backward(a, &mut store),
            Err(AutodiffError::NotScalar { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn one_store_per_tape() {
        let a = store_with("w", arr2(&[[1.0]]));
        let mut b = a.clone();
        assert_eq!(a, b);
        let mut t = Tape::new();
        let w = t.param(&a, "w").unwrap();
        assert_eq!(t.param(&b, "w"), Err(AutodiffError::ForeignStore));
        let loss = t.sum_all(w);
        assert_eq!(t.backward(loss, &mut b), Err(AutodiffError::ForeignStore));
    }

    #[test]
    fn bce_clamps_saturated_scores() {
        let mut t = Tape::new();
        let p = t.constant(arr2(&[[1.0], [0.0]]));
        let loss = t.bce(p, &[1.0, 0.0]).unwrap();
        let expected = -(1.0 - PROB_EPS).ln();
        assert!((t.scalar(loss) - expected).abs() < 1e-15);
        assert!((t.scalar(loss) - 1e-7).abs() < 1e-12);
        let half = t.constant(arr2(&[[0.5]]));
        let l = t.bce(half, &[1.0]).unwrap();
        assert!((t.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn sum_of_squares_grad_check() {
        let mut store = store_with("w", arr2(&[[0.3, -1.2, 2.0], [0.7, 0.1, -0.4]]));
        let report = grad_check(
            &mut store,
            |s: &ParamStore, t: &mut Tape| -> Result<Var, AutodiffError> {
                let w = t.param(s, "w")?;
                let sq = t.hadamard(w, w)?;
                Ok(t.sum_all(sq))
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.checked, 6);
        assert!(report.max_rel_error < 1e-8, "{report:?}");
    }

    #[test]
    fn sigmoid_chain_grad_check() {
        let mut store = store_with("w", arr2(&[[0.3, -1.2], [0.7, 0.1]]));
        let report = grad_check(
            &mut store,
            |s: &ParamStore, t: &mut Tape| -> Result<Var, AutodiffError> {
                let mut h = t.param(s, "w")?;
                for _ in 0..5 {
                    h = t.sigmoid(h);
                }
                Ok(t.sum_all(h))
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn every_op_grad_checks() {
        let mut store = ParamStore::new();
        store.insert("a", arr2(&[[0.3, -1.2, 0.5], [0.7, 0.1, -0.9]]), true).unwrap();
        store.insert("b", arr2(&[[0.2, 0.4], [-0.6, 1.1], [0.8, -0.3]]), true).unwrap();
        store.insert("bias", arr2(&[[0.05, -0.15]]), true).unwrap();
        store.insert("u", arr2(&[[0.4], [-0.2]]), true).unwrap();
        let mask = arr2(&[[1.0, 0.0], [1.0, 1.0]]);
        let report = grad_check(
            &mut store,
            |s: &ParamStore, t: &mut Tape| -> Result<Var, AutodiffError> {
                let a = t.param(s, "a")?;
                let b = t.param(s, "b")?;
                let ab = t.matmul(a, b)?;
                let bias = t.param(s, "bias")?;
                let ab = t.add_row_bias(ab, bias)?;
                let u = t.param(s, "u")?;
                let e = t.outer_sum(u, u)?;
                let e = t.leaky_relu(e, 0.02);
                let alpha = t.masked_row_softmax(e, &mask)?;
                let mixed = t.matmul(alpha, ab)?;
                let th = t.tanh(mixed);
                let cat = t.concat_cols(&[th, ab, a])?;
                let mid = t.col_slice(cat, 1, 4)?;
                let top = t.row_slice(mid, 0, 1)?;
                let tt = t.transpose(top);
                let rows = t.sum_rows(mid);
                let rows = t.scale(rows, 0.5);
                let prod = t.matmul(rows, tt)?;
                let sq = t.hadamard(mid, mid)?;
                let sum = t.add(sq, mid)?;
                let pooled = t.sum_rows(sum);
                let pooled = t.transpose(pooled);
                let w = t.row_slice(pooled, 0, 1)?;
                let w = t.add(w, prod)?;
                let p = t.sigmoid(w);
                t.bce(p, &[1.0])
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.checked, 6 + 6 + 2 + 2);
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn kink_crossings_are_skipped() {
        // 3e-5 sits within one step of zero; the central difference straddles the kink.
        let mut store = store_with("w", arr2(&[[3e-5, 0.5, -0.4]]));
        let report = grad_check(
            &mut store,
            |s: &ParamStore, t: &mut Tape| -> Result<Var, AutodiffError> {
                let w = t.param(s, "w")?;
                let h = t.leaky_relu(w, 0.02);
                Ok(t.sum_all(h))
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!((report.checked, report.kinks_skipped), (2, 1));
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert!(Tape::new().kink_signature().is_none());
    }

    #[test]
    fn injected_fault_is_detected() {
        let mut store = store_with("w", arr2(&[[0.3, -1.2]]));
        let opts = GradCheckOptions {
            fault_scale: 1.01,
            ..GradCheckOptions::default()
        };
        let report = grad_check(
            &mut store,
            |s: &ParamStore, t: &mut Tape| -> Result<Var, AutodiffError> {
                let w = t.param(s, "w")?;
                let h = t.sigmoid(w);
                Ok(t.sum_all(h))
            },
            &opts,
        )
        .unwrap();
        assert!(report.max_rel_error > 5e-3);
    }
}
