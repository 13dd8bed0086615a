use std::sync::atomic::{AtomicU64, Ordering};

use indexmap::IndexMap;
use ndarray::Array2;

use super::AutodiffError;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
    /// Frozen parameters are read by the forward pass but never updated.
    pub trainable: bool,
}

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(0);

fn fresh_id() -> u64 {
    NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Named parameters in insertion order. Iteration order is what makes optimizer
/// updates and serialization reproducible.
#[derive(Debug)]
pub struct ParamStore {
    params: IndexMap<String, Param>,
    /// Distinguishes stores so a tape never mixes parameters from two of them.
    id: u64,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self {
            params: IndexMap::new(),
            id: fresh_id(),
        }
    }
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        Self {
            params: self.params.clone(),
            id: fresh_id(),
        }
    }
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn id(&self) -> u64 {
        self.id
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>, trainable: bool) -> Result<usize, AutodiffError> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(AutodiffError::DuplicateParam(name));
        }
        let grad = Array2::zeros(value.raw_dim());
        let (idx, _) = self.params.insert_full(
            name,
            Param {
                value,
                grad,
                trainable,
            },
        );
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.get_index_of(name)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.get_mut(name)
    }

    pub fn by_index(&self, idx: usize) -> Option<(&str, &Param)> {
        self.params.get_index(idx).map(|(k, v)| (k.as_str(), v))
    }

    pub fn by_index_mut(&mut self, idx: usize) -> Option<(&str, &mut Param)> {
        self.params.get_index_mut(idx).map(|(k, v)| (k.as_str(), v))
    }

    pub fn value(&self, name: &str) -> Result<&Array2<f64>, AutodiffError> {
        self.get(name)
            .map(|p| &p.value)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.fill(0.0);
        }
    }

    /// Total number of scalar entries over trainable parameters.
    pub fn trainable_entries(&self) -> usize {
        self.params.values().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }
}
