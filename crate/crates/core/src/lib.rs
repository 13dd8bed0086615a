//! Program dependence graphs for a small imperative language, and a siamese
//! graph-attention network that scores pairs of programs for functional similarity.

pub mod frontend;
pub mod dataflow;
pub mod graph;
pub mod autodiff;
pub mod model;
pub mod training;
pub mod datagen;
