use crate::frontend::IrMethod;

use super::DataflowError;

/// Immediate post-dominators over the CFG nodes `0..=n`, rooted at the virtual exit `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostDomTree {
    /// `ipdom[exit] == exit`.
    ipdom: Vec<usize>,
}

impl PostDomTree {
    pub fn exit(&self) -> usize {
        self.ipdom.len() - 1
    }

    /// `None` for the exit itself.
    pub fn ipdom(&self, node: usize) -> Option<usize> {
        (node != self.exit()).then(|| self.ipdom[node])
    }

    /// Reflexive: every node post-dominates itself.
    pub fn post_dominates(&self, p: usize, mut n: usize) -> bool {
        loop {
            if n == p {
                return true;
            }
            if n == self.exit() {
                return false;
            }
            n = self.ipdom[n];
        }
    }

    pub fn strictly_post_dominates(&self, p: usize, n: usize) -> bool {
        p != n && self.post_dominates(p, n)
    }

    /// Ancestors of `node` up to and including the exit, nearest first.
    pub fn chain(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = node;
        while cur != self.exit() {
            cur = self.ipdom[cur];
            out.push(cur);
        }
        out
    }
}

/// Iterative dominator computation on the reverse CFG (Cooper, Harvey & Kennedy),
/// visiting nodes in reverse post-order until no immediate dominator changes.
pub fn compute_postdominators(ir: &IrMethod) -> Result<PostDomTree, DataflowError> {
    let n = ir.node_count();
    let exit = ir.exit();
    let preds = ir.predecessors();

    // Post-order of the reverse graph from the exit; reverse-graph successors are CFG predecessors.
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut stack: Vec<(usize, usize)> = vec![(exit, 0)];
    visited[exit] = true;
    while let Some(&mut (v, ref mut next)) = stack.last_mut() {
        if let Some(&w) = preds[v].get(*next) {
            *next += 1;
            if !visited[w] {
                visited[w] = true;
                stack.push((w, 0));
            }
        } else {
            order.push(v);
            stack.pop();
        }
    }
    if let Some(v) = (0..n).find(|&v| !visited[v]) {
        return Err(DataflowError::UnreachableExit { statement: v });
    }

    let mut rank = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }
    const UNDEF: usize = usize::MAX;
    let mut ipdom = vec![UNDEF; n];
    ipdom[exit] = exit;

    let intersect = |ipdom: &[usize], mut a: usize, mut b: usize| {
        while a != b {
            while rank[a] < rank[b] {
                a = ipdom[a];
            }
            while rank[b] < rank[a] {
                b = ipdom[b];
            }
        }
        a
    };

    let mut changed = true;
    while changed {
        changed = false;
        for &v in order.iter().rev().filter(|&&v| v != exit) {
            let mut new = UNDEF;
            let mut succs = ir.successors(v).to_vec();
            succs.dedup();
            for &s in &succs {
                if ipdom[s] == UNDEF {
                    continue;
                }
                new = if new == UNDEF { s } else { intersect(&ipdom, s, new) };
            }
            if new != ipdom[v] {
                ipdom[v] = new;
                changed = true;
            }
        }
    }
    Ok(PostDomTree { ipdom })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::oracle;
    use crate::frontend::{IrMethod, IrStatement, StatementKind};
    use std::collections::BTreeSet;

    pub(crate) fn graph(kinds: &[StatementKind], succ: &[&[usize]]) -> IrMethod {
        IrMethod {
            name: "g".into(),
            statements: kinds
                .iter()
                .enumerate()
                .map(|(id, &kind)| IrStatement {
                    id,
                    kind,
                    defs: BTreeSet::new(),
                    uses: BTreeSet::new(),
                    line: id + 1,
                })
                .collect(),
            succ: succ.iter().map(|s| s.to_vec()).collect(),
            entry: 0,
        }
    }

    use StatementKind::{Assignment as A, Goto as G, If as I};

    #[test]
    fn chain() {
        let ir = graph(&[A, A], &[&[1], &[2]]);
        let pd = compute_postdominators(&ir).unwrap();
        assert_eq!(pd.ipdom(0), Some(1));
        assert_eq!(pd.ipdom(1), Some(2));
        assert_eq!(pd.ipdom(2), None);
    }

    #[test]
    fn diamond_matches_brute_force() {
        let ir = graph(&[I, A, A, A], &[&[1, 2], &[3], &[3], &[4]]);
        let pd = compute_postdominators(&ir).unwrap();
        assert_eq!(pd.ipdom(0), Some(3));
        assert_eq!(pd.ipdom(1), Some(3));
        assert_eq!(pd.ipdom(2), Some(3));
        for p in 0..ir.node_count() {
            for v in 0..ir.node_count() {
                assert_eq!(pd.post_dominates(p, v), oracle::post_dominates(&ir, p, v), "{p} pdom {v}");
            }
        }
    }

    #[test]
    fn while_loop() {
        // 0: If -> {1, 3}; 1: body -> 2; 2: Goto -> 0; 3 = exit
        let ir = graph(&[I, A, G], &[&[1, 3], &[2], &[0]]);
        let pd = compute_postdominators(&ir).unwrap();
        assert_eq!(pd.ipdom(1), Some(2));
        assert_eq!(pd.ipdom(2), Some(0));
        assert_eq!(pd.ipdom(0), Some(3));
        assert_eq!(pd.chain(1), vec![2, 0, 3]);
        for p in 0..ir.node_count() {
            for v in 0..ir.node_count() {
                assert_eq!(pd.post_dominates(p, v), oracle::post_dominates(&ir, p, v));
            }
        }
    }

    #[test]
    fn loop_body_postdominated_by_header() {
        // 0: If -> {1, 2}; 1: body -> 0; 2 = exit
        let ir = graph(&[I, A], &[&[1, 2], &[0]]);
        let pd = compute_postdominators(&ir).unwrap();
        assert_eq!(pd.ipdom(1), Some(0));
        assert_eq!(pd.ipdom(0), Some(2));
    }

    #[test]
    fn unreachable_exit() {
        let ir = graph(&[A, G], &[&[1], &[1]]);
        assert_eq!(
            compute_postdominators(&ir),
            Err(DataflowError::UnreachableExit { statement: 0 })
        );
    }
}
