use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::frontend::{IrMethod, StatementKind};

use super::{compute_postdominators, control_dependences, data_dependences, reaching_definitions, DataflowError};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PdgNode {
    pub id: usize,
    pub kind: StatementKind,
    pub line: usize,
}

/// Program dependence graph: one node per statement, control and data dependence
/// edges oriented from the statement depended upon to the dependent one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Pdg {
    pub nodes: Vec<PdgNode>,
    pub control_edges: BTreeSet<(usize, usize)>,
    /// `(src, dst, variable)`
    pub data_edges: BTreeSet<(usize, usize, String)>,
}

impl Pdg {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks id density, endpoint ranges, and the absence of self edges.
    pub fn validate(&self) -> Result<(), DataflowError> {
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(DataflowError::InvalidPdg(format!("node at position {i} has id {}", node.id)));
            }
        }
        let pairs = self
            .control_edges
            .iter()
            .copied()
            .chain(self.data_edges.iter().map(|(s, d, _)| (*s, *d)));
        for (s, d) in pairs {
            if s >= n || d >= n {
                return Err(DataflowError::InvalidPdg(format!("edge {s}->{d} out of range")));
            }
            if s == d {
                return Err(DataflowError::InvalidPdg(format!("self edge on {s}")));
            }
        }
        Ok(())
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Pdg {
        assert_eq!(perm.len(), self.len(), "permutation length");
        let mut nodes = self.nodes.clone();
        for (old, node) in self.nodes.iter().enumerate() {
            nodes[perm[old]] = PdgNode {
                id: perm[old],
                ..node.clone()
            };
        }
        Pdg {
            nodes,
            control_edges: self.control_edges.iter().map(|&(s, d)| (perm[s], perm[d])).collect(),
            data_edges: self
                .data_edges
                .iter()
                .map(|(s, d, v)| (perm[*s], perm[*d], v.clone()))
                .collect(),
        }
    }

    /// Applies a variable renaming to the data-edge annotations. Unmapped names are kept.
    pub fn rename_vars(&self, map: &BTreeMap<String, String>) -> Pdg {
        Pdg {
            nodes: self.nodes.clone(),
            control_edges: self.control_edges.clone(),
            data_edges: self
                .data_edges
                .iter()
                .map(|(s, d, v)| (*s, *d, map.get(v).cloned().unwrap_or_else(|| v.clone())))
                .collect(),
        }
    }

    /// Graphviz rendering: control edges solid, data edges dashed and labelled.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{name}\" {{");
        out.push_str("  node [shape=box];\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  n{} [label=\"{}: {} (line {})\"];", n.id, n.id, n.kind, n.line);
        }
        for (s, d) in &self.control_edges {
            let _ = writeln!(out, "  n{s} -> n{d} [style=solid];");
        }
        for (s, d, v) in &self.data_edges {
            let _ = writeln!(out, "  n{s} -> n{d} [style=dashed, label=\"{v}\"];");
        }
        out.push_str("}\n");
        out
    }
}

/// Assembles the PDG of a method. The virtual exit is not a node, and self
/// dependences (loop headers, loop-carried `i = i + 1`) are dropped.
pub fn build_pdg(ir: &IrMethod) -> Result<Pdg, DataflowError> {
    let pdom = compute_postdominators(ir)?;
    let control = control_dependences(ir, &pdom);
    let reach = reaching_definitions(ir);
    let data = data_dependences(ir, &reach);
    Ok(Pdg {
        nodes: ir
            .statements
            .iter()
            .map(|s| PdgNode {
                id: s.id,
                kind: s.kind,
                line: s.line,
            })
            .collect(),
        control_edges: control.into_iter().filter(|(s, d)| s != d).collect(),
        data_edges: data.into_iter().filter(|(s, d, _)| s != d).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile;

    fn pdg(src: &str) -> Pdg {
        build_pdg(&compile(src).unwrap()).unwrap()
    }

    #[test]
    fn single_parameter_flow() {
        let g = pdg("def m(a){ x = a; }");
        assert_eq!(g.len(), 2);
        assert!(g.control_edges.is_empty());
        assert_eq!(g.data_edges, BTreeSet::from([(0, 1, "a".to_string())]));
        g.validate().unwrap();
    }

    #[test]
    fn diamond_control_edges() {
        let g = pdg("def m(a){ if (a > 0) { x = 1; } else { x = 2; } y = x; }");
        // 0 Identity, 1 If, 2 x=1, 3 x=2, 4 y=x
        assert_eq!(g.control_edges, BTreeSet::from([(1, 2), (1, 3)]));
        assert!(g.data_edges.contains(&(2, 4, "x".into())));
        assert!(g.data_edges.contains(&(3, 4, "x".into())));
        assert!(g.data_edges.contains(&(0, 1, "a".into())));
    }

    #[test]
    fn independent_statements_have_no_edge() {
        let g = pdg("def m(){ x = 1; y = 2; }");
        assert_eq!(g.len(), 2);
        assert!(g.control_edges.is_empty());
        assert!(g.data_edges.is_empty());
    }

    #[test]
    fn loop_self_dependences_are_dropped() {
        let g = pdg("def m(n){ i = 0; while (i < n) { i = i + 1; } }");
        // 0 Identity n, 1 i=0, 2 If, 3 i=i+1, 4 Goto
        assert_eq!(g.control_edges, BTreeSet::from([(2, 3), (2, 4)]));
        assert!(g.data_edges.contains(&(3, 2, "i".into())));
        assert!(!g.data_edges.iter().any(|(s, d, _)| s == d));
        g.validate().unwrap();
    }

    #[test]
    fn dot_styles() {
        let dot = pdg("def m(a){ if (a) { x = a; } }").to_dot("m");
        assert!(dot.contains("n1 -> n2 [style=solid]"));
        assert!(dot.contains("n0 -> n2 [style=dashed, label=\"a\"]"));
    }

    #[test]
    fn permutation_relabels_everything() {
        let g = pdg("def m(a){ if (a) { x = a; } y = x; }");
        let perm = vec![3, 1, 0, 2];
        let p = g.permuted(&perm);
        p.validate().unwrap();
        assert_eq!(p.nodes[3].kind, g.nodes[0].kind);
        let inverse: Vec<usize> = (0..4).map(|i| perm.iter().position(|&x| x == i).unwrap()).collect();
        assert_eq!(p.permuted(&inverse), g);
    }
}
