use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AutodiffError, ParamStore, Tape, Var};

/// Which parameter entries are perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntrySelection {
    All,
    /// At most `per_param` entries of each trainable tensor, chosen by `seed`.
    /// Tensors with no more entries than that are checked in full.
    Sample { per_param: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub selection: EntrySelection,
    /// Multiplies every analytic gradient before comparison. Anything but 1.0
    /// deliberately breaks the check; used to show the check can fail.
    pub fault_scale: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-4,
            selection: EntrySelection::All,
            fault_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryError {
    pub param: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries left out because `θ ± h` put some LeakyReLU input on different
    /// sides of zero, where a central difference says nothing about the slope.
    pub kinks_skipped: usize,
    pub worst: Option<EntryError>,
}

/// Gradients below `ABS_FLOOR` in magnitude are compared on absolute error:
/// round-off in a central difference with `h = 1e-4` is already around 1e-11.
pub const ABS_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(ABS_FLOOR)
}

/// Compares reverse-mode gradients of `f` against central differences
/// `(f(θ + h e) - f(θ - h e)) / 2h`. Parameter values are restored afterwards;
/// gradients are left holding the analytic result.
pub fn grad_check<F, E>(store: &mut ParamStore, f: F, opts: &GradCheckOptions) -> Result<GradCheckReport, E>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var, E>,
    E: From<AutodiffError>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let loss = f(store, &mut tape)?;
    tape.backward(loss, store)?;
    drop(tape);

    let eval = |store: &ParamStore| -> Result<(f64, Vec<bool>), E> {
        let mut t = Tape::tracking_kinks();
        let v = f(store, &mut t)?;
        Ok((t.scalar(v), t.kink_signature().unwrap_or_default().to_vec()))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        kinks_skipped: 0,
        worst: None,
    };
    for idx in 0..store.len() {
        let (name, p) = store.by_index(idx).expect("in range");
        if !p.trainable {
            continue;
        }
        let name = name.to_string();
        let cols = p.value.ncols();
        let total = p.value.len();
        let entries: Vec<usize> = match opts.selection {
            EntrySelection::All => (0..total).collect(),
            EntrySelection::Sample { per_param, .. } if total <= per_param => (0..total).collect(),
            EntrySelection::Sample { per_param, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut picked = sample(&mut rng, total, per_param).into_vec();
                picked.sort_unstable();
                picked
            }
        };
        for flat in entries {
            let (r, c) = (flat / cols, flat % cols);
            let analytic = store.by_index(idx).expect("in range").1.grad[[r, c]] * opts.fault_scale;
            let original = store.by_index(idx).expect("in range").1.value[[r, c]];
            let set = |store: &mut ParamStore, v: f64| store.by_index_mut(idx).expect("in range").1.value[[r, c]] = v;
            set(store, original + opts.step);
            let plus = eval(store);
            set(store, original - opts.step);
            let minus = eval(store);
            set(store, original);
            let ((plus, plus_signs), (minus, minus_signs)) = (plus?, minus?);
            if plus_signs != minus_signs {
                report.kinks_skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let rel_error = relative_error(analytic, numeric);
            report.checked += 1;
            if report.worst.is_none() || rel_error > report.max_rel_error {
                report.max_rel_error = rel_error;
                report.worst = Some(EntryError {
                    param: name.clone(),
                    row: r,
                    col: c,
                    analytic,
                    numeric,
                    rel_error,
                });
            }
        }
    }
    Ok(report)
}
