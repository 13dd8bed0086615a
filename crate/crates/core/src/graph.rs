//! Numeric views of a PDG (one-hot node features, adjacency matrices) and the
//! canonical PDG JSON form.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::dataflow::{Pdg, PdgNode};
use crate::frontend::StatementKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("malformed PDG JSON at {path}: {message}")]
    Format { path: String, message: String },
}

/// `|V| x 18` one-hot statement-kind matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(pub Array2<f64>);

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }
}

pub fn encode_node_features(pdg: &Pdg) -> Result<FeatureMatrix, GraphError> {
    if pdg.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let mut x = Array2::zeros((pdg.len(), StatementKind::COUNT));
    for node in &pdg.nodes {
        x[[node.id, node.kind.index()]] = 1.0;
    }
    Ok(FeatureMatrix(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    Control,
    Data,
    Both,
}

/// Square 0/1 matrix with row = source, column = destination.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub matrix: Array2<f64>,
    pub self_loops: bool,
}

impl Adjacency {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// Aggregation mask: entry `(i, j)` is 1 iff `j` is an in-neighbour of `i`.
    pub fn in_neighbour_mask(&self) -> Array2<f64> {
        self.matrix.t().to_owned()
    }
}

pub fn adjacency_matrix(pdg: &Pdg, class: EdgeClass, self_loops: bool) -> Adjacency {
    let n = pdg.len();
    let mut a = Array2::zeros((n, n));
    if matches!(class, EdgeClass::Control | EdgeClass::Both) {
        for &(s, d) in &pdg.control_edges {
            a[[s, d]] = 1.0;
        }
    }
    if matches!(class, EdgeClass::Data | EdgeClass::Both) {
        for (s, d, _) in &pdg.data_edges {
            a[[*s, *d]] = 1.0;
        }
    }
    if self_loops {
        for i in 0..n {
            a[[i, i]] = 1.0;
        }
    }
    Adjacency {
        matrix: a,
        self_loops,
    }
}

/// Canonical JSON: keys sorted, nodes by id, edges by `(src, dst, kind, var)`.
pub fn serialize_pdg(pdg: &Pdg) -> String {
    let nodes: Vec<Value> = pdg
        .nodes
        .iter()
        .map(|n| json!({"id": n.id, "kind": n.kind.name(), "line": n.line}))
        .collect();
    let mut edges: Vec<(usize, usize, &str, Option<&str>)> = pdg
        .control_edges
        .iter()
        .map(|&(s, d)| (s, d, "control", None))
        .chain(pdg.data_edges.iter().map(|(s, d, v)| (*s, *d, "data", Some(v.as_str()))))
        .collect();
    edges.sort();
    let edges: Vec<Value> = edges
        .into_iter()
        .map(|(s, d, kind, var)| {
            let mut m = Map::new();
            m.insert("src".into(), json!(s));
            m.insert("dst".into(), json!(d));
            m.insert("kind".into(), json!(kind));
            if let Some(v) = var {
                m.insert("var".into(), json!(v));
            }
            Value::Object(m)
        })
        .collect();
    // serde_json's default map is ordered by key
    json!({"nodes": nodes, "edges": edges}).to_string()
}

pub fn deserialize_pdg(text: &str) -> Result<Pdg, GraphError> {
    let fail = |path: &str, message: &str| GraphError::Format {
        path: path.to_string(),
        message: message.to_string(),
    };
    let root: Value = serde_json::from_str(text).map_err(|e| fail("$", &e.to_string()))?;
    let root = root.as_object().ok_or_else(|| fail("$", "expected an object"))?;
    let array = |key: &str| -> Result<&Vec<Value>, GraphError> {
        root.get(key)
            .ok_or_else(|| fail(&format!("$.{key}"), "missing key"))?
            .as_array()
            .ok_or_else(|| fail(&format!("$.{key}"), "expected an array"))
    };
    let raw_nodes = array("nodes")?;
    let raw_edges = array("edges")?;

    let field = |v: &Value, path: &str, key: &str| -> Result<Value, GraphError> {
        v.get(key)
            .cloned()
            .ok_or_else(|| fail(&format!("{path}.{key}"), "missing key"))
    };
    let uint = |v: Value, path: &str| -> Result<usize, GraphError> {
        v.as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| fail(path, "expected a non-negative integer"))
    };
    let string = |v: Value, path: &str| -> Result<String, GraphError> {
        v.as_str().map(str::to_string).ok_or_else(|| fail(path, "expected a string"))
    };

    let mut nodes = Vec::with_capacity(raw_nodes.len());
    for (i, n) in raw_nodes.iter().enumerate() {
        let path = format!("$.nodes[{i}]");
        let id = uint(field(n, &path, "id")?, &format!("{path}.id"))?;
        let kind_path = format!("{path}.kind");
        let kind = string(field(n, &path, "kind")?, &kind_path)?
            .parse::<StatementKind>()
            .map_err(|e| fail(&kind_path, &e))?;
        let line = uint(field(n, &path, "line")?, &format!("{path}.line"))?;
        if id != i {
            return Err(fail(&format!("{path}.id"), "node ids must be dense and ascending"));
        }
        nodes.push(PdgNode { id, kind, line });
    }

    let mut control_edges = BTreeSet::new();
    let mut data_edges = BTreeSet::new();
    for (i, e) in raw_edges.iter().enumerate() {
        let path = format!("$.edges[{i}]");
        let src = uint(field(e, &path, "src")?, &format!("{path}.src"))?;
        let dst = uint(field(e, &path, "dst")?, &format!("{path}.dst"))?;
        if src >= nodes.len() || dst >= nodes.len() || src == dst {
            return Err(fail(&path, "edge endpoints must be distinct node ids"));
        }
        match string(field(e, &path, "kind")?, &format!("{path}.kind"))?.as_str() {
            "control" => {
                control_edges.insert((src, dst));
            }
            "data" => {
                let var = string(field(e, &path, "var")?, &format!("{path}.var"))?;
                data_edges.insert((src, dst, var));
            }
            other => return Err(fail(&format!("{path}.kind"), &format!("unknown edge kind '{other}'"))),
        }
    }
    Ok(Pdg {
        nodes,
        control_edges,
        data_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::build_pdg;
    use crate::frontend::compile;
    use proptest::prelude::*;

    fn two_node() -> Pdg {
        build_pdg(&compile("def m(a){ x = a; }").unwrap()).unwrap()
    }

    #[test]
    fn assignment_one_hot() {
        let x = encode_node_features(&two_node()).unwrap();
        let mut expected = [0.0; 18];
        expected[1] = 1.0;
        assert_eq!(x.0.row(1).to_vec(), expected.to_vec());
        assert_eq!(x.0[[0, 0]], 1.0);
        assert_eq!(x.0.dim(), (2, 18));
        for row in x.0.rows() {
            assert_eq!(row.sum(), 1.0);
        }
    }

    #[test]
    fn empty_graph() {
        assert_eq!(encode_node_features(&Pdg::default()), Err(GraphError::EmptyGraph));
    }

    #[test]
    fn adjacency_classes() {
        let g = two_node();
        let data = adjacency_matrix(&g, EdgeClass::Data, false);
        assert_eq!(data.matrix, ndarray::arr2(&[[0.0, 1.0], [0.0, 0.0]]));
        let control = adjacency_matrix(&g, EdgeClass::Control, false);
        assert_eq!(control.matrix, Array2::<f64>::zeros((2, 2)));
        let both = adjacency_matrix(&g, EdgeClass::Both, true);
        assert_eq!(both.matrix, ndarray::arr2(&[[1.0, 1.0], [0.0, 1.0]]));
        assert_eq!(both.in_neighbour_mask(), ndarray::arr2(&[[1.0, 0.0], [1.0, 1.0]]));
    }

    #[test]
    fn json_is_canonical() {
        let g = two_node();
        let text = serialize_pdg(&g);
        assert_eq!(
            text,
            r#"{"edges":[{"dst":1,"kind":"data","src":0,"var":"a"}],"nodes":[{"id":0,"kind":"Identity","line":1},{"id":1,"kind":"Assignment","line":1}]}"#
        );
        assert_eq!(serialize_pdg(&g), text);
        assert_eq!(deserialize_pdg(&text).unwrap(), g);
    }

    #[test]
    fn json_errors_carry_paths() {
        assert_eq!(
            deserialize_pdg(r#"{"nodes":[]}"#),
            Err(GraphError::Format {
                path: "$.edges".into(),
                message: "missing key".into()
            })
        );
        let bad_kind = r#"{"nodes":[{"id":0,"kind":"Nope","line":1}],"edges":[]}"#;
        assert!(matches!(
            deserialize_pdg(bad_kind),
            Err(GraphError::Format { path, .. }) if path == "$.nodes[0].kind"
        ));
        let self_edge = r#"{"nodes":[{"id":0,"kind":"Nop","line":1}],"edges":[{"src":0,"dst":0,"kind":"control"}]}"#;
        assert!(deserialize_pdg(self_edge).is_err());
    }

    fn arb_pdg() -> impl Strategy<Value = Pdg> {
        (1usize..=10).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..StatementKind::COUNT, n),
                proptest::collection::btree_set((0..n, 0..n), 0..=n * 2),
                proptest::collection::btree_set((0..n, 0..n, "[a-c]"), 0..=n * 2),
            )
        })
        .prop_map(|(kinds, control, data)| Pdg {
            nodes: kinds
                .iter()
                .enumerate()
                .map(|(id, &k)| PdgNode {
                    id,
                    kind: StatementKind::from_index(k).unwrap(),
                    line: id + 1,
                })
                .collect(),
            control_edges: control.into_iter().filter(|(s, d)| s != d).collect(),
            data_edges: data.into_iter().filter(|(s, d, _)| s != d).collect(),
        })
    }

    proptest! {
        #[test]
        fn json_round_trip(g in arb_pdg()) {
            let text = serialize_pdg(&g);
            prop_assert_eq!(deserialize_pdg(&text).unwrap(), g);
        }

        #[test]
        fn permutation_equivariance(
            (g, perm) in arb_pdg().prop_flat_map(|g| {
                let n = g.len();
                (Just(g), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
            })
        ) {
            let n = g.len();
            let mut p = Array2::<f64>::zeros((n, n));
            for (i, &j) in perm.iter().enumerate() {
                p[[j, i]] = 1.0;
            }
            let pg = g.permuted(&perm);
            let x = encode_node_features(&g).unwrap().0;
            prop_assert_eq!(encode_node_features(&pg).unwrap().0, p.dot(&x));
            for class in [EdgeClass::Control, EdgeClass::Data, EdgeClass::Both] {
                for loops in [false, true] {
                    let a = adjacency_matrix(&g, class, loops).matrix;
                    let pa = adjacency_matrix(&pg, class, loops).matrix;
                    prop_assert_eq!(pa, p.dot(&a).dot(&p.t()));
                }
            }
        }
    }
}
