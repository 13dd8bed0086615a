//! Labeled clone / non-clone program pairs built from seed programs by
//! semantics-preserving rewrites.

mod seeds;
mod transforms;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::build_pdg;
use crate::frontend::{compile, lower_to_ir, parse_source, Method};
use crate::model::GraphInput;
use crate::training::{split_indices, PairIndex, PairSet};

pub use seeds::builtin_groups;
pub use transforms::{random_rename_map, rename_with, transform, TransformKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatagenError {
    #[error("no legal site for transform {0}")]
    NotApplicable(TransformKind),
    #[error("need at least two functionality groups with one seed each")]
    InsufficientSeeds,
    #[error("seed {group}/{index} does not compile: {message}")]
    InvalidSeed {
        group: String,
        index: usize,
        message: String,
    },
    #[error("pair {id}: {message}")]
    InvalidPair { id: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed corpus file {path}: {message}")]
    Format { path: String, message: String },
}

pub const DISTINCT: &str = "distinct-functionality";
pub const VARIANT: &str = "variant";

/// Source programs solving one problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedGroup {
    pub name: String,
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub source_a: String,
    pub source_b: String,
    /// 1 for a clone, 0 otherwise.
    pub label: u8,
    /// Transform chain such as `rename>reorder`; [`VARIANT`] for two variants of
    /// one group, [`DISTINCT`] for non-clones.
    pub provenance: String,
    pub group_a: String,
    pub group_b: String,
}

fn parse_groups(groups: &[SeedGroup]) -> Result<Vec<Vec<Method>>, DatagenError> {
    if groups.len() < 2 || groups.iter().any(|g| g.variants.is_empty()) {
        return Err(DatagenError::InsufficientSeeds);
    }
    groups
        .iter()
        .map(|g| {
            g.variants
                .iter()
                .enumerate()
                .map(|(index, src)| {
                    let bad = |message: String| DatagenError::InvalidSeed {
                        group: g.name.clone(),
                        index,
                        message,
                    };
                    let m = parse_source(src).map_err(|e| bad(e.to_string()))?;
                    let ir = lower_to_ir(&m).map_err(|e| bad(e.to_string()))?;
                    build_pdg(&ir).map_err(|e| bad(e.to_string()))?;
                    Ok(m)
                })
                .collect()
        })
        .collect()
}

/// One to three rewrites with kinds drawn uniformly; a kind without a legal
/// site is replaced by another.
fn transform_chain<R: Rng + ?Sized>(m: &Method, rng: &mut R) -> (Method, Vec<TransformKind>) {
    let len = rng.random_range(1..=3);
    let mut cur = m.clone();
    let mut applied = Vec::with_capacity(len);
    for _ in 0..len {
        let mut kinds = TransformKind::ALL;
        kinds.shuffle(rng);
        for kind in kinds {
            if let Ok(next) = transform(&cur, kind, rng) {
                cur = next;
                applied.push(kind);
                break;
            }
        }
    }
    (cur, applied)
}

fn chain_name(chain: &[TransformKind]) -> String {
    chain.iter().map(|k| k.name()).collect::<Vec<_>>().join(">")
}

/// `n_pairs` pairs, half of them clones (rounded up). Clones pair a seed with a
/// rewritten copy of itself or with another variant of the same group; non-clones
/// pair a seed with a rewritten seed from a different group. Sides are swapped
/// at random and the list is shuffled.
pub fn generate_dataset<R: Rng + ?Sized>(
    groups: &[SeedGroup],
    n_pairs: usize,
    rng: &mut R,
) -> Result<Vec<LabeledPair>, DatagenError> {
    let parsed = parse_groups(groups)?;
    let n_clone = n_pairs.div_ceil(2);
    let mut pairs = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let clone = k < n_clone;
        let ga = rng.random_range(0..groups.len());
        let gb = if clone {
            ga
        } else {
            let other = rng.random_range(0..groups.len() - 1);
            if other >= ga {
                other + 1
            } else {
                other
            }
        };
        let va = rng.random_range(0..parsed[ga].len());
        let vb = if clone && parsed[ga].len() > 1 && rng.random_bool(0.5) {
            let other = rng.random_range(0..parsed[ga].len() - 1);
            if other >= va {
                other + 1
            } else {
                other
            }
        } else if clone {
            va
        } else {
            rng.random_range(0..parsed[gb].len())
        };
        let (b, provenance) = match (clone, va == vb) {
            (false, _) => (transform_chain(&parsed[gb][vb], rng).0, DISTINCT.to_string()),
            (true, true) => {
                let (b, chain) = transform_chain(&parsed[gb][vb], rng);
                (b, chain_name(&chain))
            }
            (true, false) => (parsed[gb][vb].clone(), VARIANT.to_string()),
        };
        let mut pair = LabeledPair {
            source_a: parsed[ga][va].to_source(),
            source_b: b.to_source(),
            label: clone as u8,
            provenance,
            group_a: groups[ga].name.clone(),
            group_b: groups[gb].name.clone(),
        };
        if rng.random_bool(0.5) {
            std::mem::swap(&mut pair.source_a, &mut pair.source_b);
            std::mem::swap(&mut pair.group_a, &mut pair.group_b);
        }
        pairs.push(pair);
    }
    pairs.shuffle(rng);
    Ok(pairs)
}

/// The 40-pair corpus generated from the built-in seeds with seed 0.
pub fn builtin_corpus() -> Corpus {
    let pairs = generate_dataset(&builtin_groups(), 40, &mut ChaCha8Rng::seed_from_u64(0))
        .expect("built-in seeds are valid");
    Corpus::from_pairs(pairs, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: String,
    pub split: SplitName,
    pub pair: LabeledPair,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    label: u8,
    provenance: String,
    group_a: String,
    group_b: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexEntry {
    id: String,
    split: SplitName,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Index {
    pairs: Vec<IndexEntry>,
}

fn io_err(path: &Path, e: impl ToString) -> DatagenError {
    DatagenError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, DatagenError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), DatagenError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

impl Corpus {
    /// Ids `0000, 0001, ...` and a seeded 70/15/15 split.
    pub fn from_pairs(pairs: Vec<LabeledPair>, split_seed: u64) -> Self {
        let split = split_indices(pairs.len(), split_seed);
        let mut names = vec![SplitName::Train; pairs.len()];
        for &i in &split.val {
            names[i] = SplitName::Val;
        }
        for &i in &split.test {
            names[i] = SplitName::Test;
        }
        let entries = pairs
            .into_iter()
            .zip(names)
            .enumerate()
            .map(|(i, (pair, split))| CorpusEntry {
                id: format!("{i:04}"),
                split,
                pair,
            })
            .collect();
        Corpus { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split(&self, name: SplitName) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(move |e| e.split == name)
    }

    /// `pairs/<id>/{a.src, b.src, meta.json}` plus `index.json`.
    pub fn write(&self, dir: &Path) -> Result<(), DatagenError> {
        for e in &self.entries {
            let pdir = dir.join("pairs").join(&e.id);
            fs::create_dir_all(&pdir).map_err(|err| io_err(&pdir, err))?;
            write(&pdir.join("a.src"), &e.pair.source_a)?;
            write(&pdir.join("b.src"), &e.pair.source_b)?;
            let meta = Meta {
                label: e.pair.label,
                provenance: e.pair.provenance.clone(),
                group_a: e.pair.group_a.clone(),
                group_b: e.pair.group_b.clone(),
            };
            write(&pdir.join("meta.json"), &to_json(&meta))?;
        }
        let index = Index {
            pairs: self
                .entries
                .iter()
                .map(|e| IndexEntry {
                    id: e.id.clone(),
                    split: e.split,
                })
                .collect(),
        };
        write(&dir.join("index.json"), &to_json(&index))
    }

    pub fn read(dir: &Path) -> Result<Self, DatagenError> {
        let index_path = dir.join("index.json");
        let format = |path: &Path, message: String| DatagenError::Format {
            path: path.display().to_string(),
            message,
        };
        let index: Index =
            serde_json::from_str(&read(&index_path)?).map_err(|e| format(&index_path, e.to_string()))?;
        let mut entries = Vec::with_capacity(index.pairs.len());
        for IndexEntry { id, split } in index.pairs {
            if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
                return Err(format(&index_path, format!("bad pair id '{id}'")));
            }
            let pdir = dir.join("pairs").join(&id);
            let meta_path = pdir.join("meta.json");
            let meta: Meta =
                serde_json::from_str(&read(&meta_path)?).map_err(|e| format(&meta_path, e.to_string()))?;
            if meta.label > 1 {
                return Err(format(&meta_path, format!("label must be 0 or 1, got {}", meta.label)));
            }
            entries.push(CorpusEntry {
                pair: LabeledPair {
                    source_a: read(&pdir.join("a.src"))?,
                    source_b: read(&pdir.join("b.src"))?,
                    label: meta.label,
                    provenance: meta.provenance,
                    group_a: meta.group_a,
                    group_b: meta.group_b,
                },
                id,
                split,
            });
        }
        if entries.is_empty() {
            return Err(format(&index_path, "corpus lists no pairs".into()));
        }
        Ok(Corpus { entries })
    }

    /// Compiles every program to model inputs and sorts the pairs into splits.
    pub fn pair_set(&self) -> Result<PairSet, DatagenError> {
        let mut set = PairSet::new();
        for e in &self.entries {
            let mut graph = |src: &str| -> Result<usize, DatagenError> {
                let bad = |message: String| DatagenError::InvalidPair {
                    id: e.id.clone(),
                    message,
                };
                let ir = compile(src).map_err(|err| bad(err.to_string()))?;
                let pdg = build_pdg(&ir).map_err(|err| bad(err.to_string()))?;
                Ok(set.intern(GraphInput::from_pdg(&pdg).map_err(|err| bad(err.to_string()))?))
            };
            let pair = PairIndex {
                a: graph(&e.pair.source_a)?,
                b: graph(&e.pair.source_b)?,
                label: e.pair.label as f64,
            };
            match e.split {
                SplitName::Train => set.train.push(pair),
                SplitName::Val => set.val.push(pair),
                SplitName::Test => set.test.push(pair),
            }
        }
        Ok(set)
    }
}

/// Seed groups from a directory: one subdirectory per group, one `.src` file per
/// variant, both taken in name order.
pub fn load_seed_groups(dir: &Path) -> Result<Vec<SeedGroup>, DatagenError> {
    let sorted = |d: &Path| -> Result<Vec<std::path::PathBuf>, DatagenError> {
        let mut paths: Vec<_> = fs::read_dir(d)
            .map_err(|e| io_err(d, e))?
            .map(|r| r.map(|e| e.path()).map_err(|e| io_err(d, e)))
            .collect::<Result<_, _>>()?;
        paths.sort();
        Ok(paths)
    };
    let mut groups = Vec::new();
    for gdir in sorted(dir)?.into_iter().filter(|p| p.is_dir()) {
        let variants = sorted(&gdir)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|x| x == "src"))
            .map(|p| read(&p))
            .collect::<Result<Vec<_>, _>>()?;
        let name = gdir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        groups.push(SeedGroup { name, variants });
    }
    Ok(groups)
}

/// Convenience for callers that only need a deterministic generator.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests;
