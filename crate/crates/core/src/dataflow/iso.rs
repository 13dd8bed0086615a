use std::collections::{BTreeMap, BTreeSet};

use super::Pdg;
use crate::frontend::StatementKind;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Label {
    Control,
    Data(String),
}

type LabelMatrix = Vec<Vec<BTreeSet<Label>>>;
type Signature = (StatementKind, BTreeMap<Label, usize>, BTreeMap<Label, usize>);

fn labels(g: &Pdg) -> LabelMatrix {
    let n = g.len();
    let mut m = vec![vec![BTreeSet::new(); n]; n];
    for &(s, d) in &g.control_edges {
        m[s][d].insert(Label::Control);
    }
    for (s, d, v) in &g.data_edges {
        m[*s][*d].insert(Label::Data(v.clone()));
    }
    m
}

/// Exact isomorphism test by backtracking, with statement kinds as node colours and
/// edge kinds (plus data-edge variables) as edge colours. Line numbers are ignored.
/// Exponential in the worst case; intended for graphs of a dozen nodes or so.
pub fn is_isomorphic(a: &Pdg, b: &Pdg) -> bool {
    find_isomorphism(a, b).is_some()
}

/// A mapping `a`-node → `b`-node preserving colours, if one exists.
pub fn find_isomorphism(a: &Pdg, b: &Pdg) -> Option<Vec<usize>> {
    let n = a.len();
    if n != b.len()
        || a.control_edges.len() != b.control_edges.len()
        || a.data_edges.len() != b.data_edges.len()
    {
        return None;
    }
    let (la, lb) = (labels(a), labels(b));
    fn signature(g: &Pdg, l: &LabelMatrix, v: usize) -> Signature {
        let mut out = BTreeMap::new();
        for x in l[v].iter().flatten() {
            *out.entry(x.clone()).or_default() += 1;
        }
        let mut inc = BTreeMap::new();
        for x in l.iter().flat_map(|row| row[v].iter()) {
            *inc.entry(x.clone()).or_default() += 1;
        }
        (g.nodes[v].kind, out, inc)
    }
    let sig_a: Vec<_> = (0..n).map(|v| signature(a, &la, v)).collect();
    let sig_b: Vec<_> = (0..n).map(|v| signature(b, &lb, v)).collect();

    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn extend(
        v: usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        ok: &dyn Fn(usize, usize, &[usize]) -> bool,
    ) -> bool {
        let n = map.len();
        if v == n {
            return true;
        }
        for w in 0..n {
            if used[w] || !ok(v, w, map) {
                continue;
            }
            map[v] = w;
            used[w] = true;
            if extend(v + 1, map, used, ok) {
                return true;
            }
            used[w] = false;
            map[v] = usize::MAX;
        }
        false
    }

    let ok = |v: usize, w: usize, map: &[usize]| {
        sig_a[v] == sig_b[w]
            && la[v][v] == lb[w][w]
            && (0..v).all(|u| la[u][v] == lb[map[u]][w] && la[v][u] == lb[w][map[u]])
    };
    extend(0, &mut map, &mut used, &ok).then_some(map)
}
