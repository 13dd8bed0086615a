use std::collections::BTreeSet;

use crate::frontend::IrMethod;

use super::PostDomTree;

/// Control dependences `(branch, dependent)` by walking the post-dominator tree from
/// each successor of a node up to (excluding) that node's immediate post-dominator.
///
/// A loop header is reported as control dependent on itself; [`build_pdg`](super::build_pdg)
/// drops such self pairs.
pub fn control_dependences(ir: &IrMethod, pdom: &PostDomTree) -> BTreeSet<(usize, usize)> {
    let exit = ir.exit();
    let mut out = BTreeSet::new();
    for a in 0..ir.len() {
        let Some(stop) = pdom.ipdom(a) else { continue };
        let succs: BTreeSet<usize> = ir.successors(a).iter().copied().collect();
        if succs.len() < 2 {
            continue;
        }
        for s in succs {
            let mut runner = s;
            while runner != stop && runner != exit {
                out.insert((a, runner));
                runner = pdom.ipdom(runner).unwrap_or(exit);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::{compute_postdominators, oracle};
    use crate::frontend::{compile, IrMethod, IrStatement, StatementKind};

    fn graph(kinds: &[StatementKind], succ: &[&[usize]]) -> IrMethod {
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

    fn cd(ir: &IrMethod) -> BTreeSet<(usize, usize)> {
        control_dependences(ir, &compute_postdominators(ir).unwrap())
    }

    use StatementKind::{Assignment as A, Goto as G, If as I};

    #[test]
    fn straight_line_has_none() {
        let ir = graph(&[A, A, A], &[&[1], &[2], &[3]]);
        assert!(cd(&ir).is_empty());
        assert!(oracle::control_dependences(&ir).is_empty());
    }

    #[test]
    fn diamond() {
        let ir = graph(&[I, A, A, A], &[&[1, 2], &[3], &[3], &[4]]);
        let expected = BTreeSet::from([(0, 1), (0, 2)]);
        assert_eq!(oracle::control_dependences(&ir), expected);
        assert_eq!(cd(&ir), expected);
    }

    #[test]
    fn while_loop_self_dependence() {
        // 0: If -> {1, 3}; 1: body -> 2; 2: Goto -> 0
        let ir = graph(&[I, A, G], &[&[1, 3], &[2], &[0]]);
        let expected = BTreeSet::from([(0, 0), (0, 1), (0, 2)]);
        assert_eq!(oracle::control_dependences(&ir), expected);
        assert_eq!(cd(&ir), expected);
    }

    #[test]
    fn nested_branches_from_source() {
        let ir = compile(
            "def m(a, b){ if (a > 0) { if (b > 0) { x = 1; } else { return 2; } y = 3; } z = 4; }",
        )
        .unwrap();
        assert_eq!(cd(&ir), oracle::control_dependences(&ir));
    }

    #[test]
    fn switch_fanout() {
        let ir = compile(
            "def m(k){ switch (k) { case 1: { x = 1; } case 2: { x = 2; } case 5: { return 0; } default: { skip; } } y = x; }",
        )
        .unwrap();
        let got = cd(&ir);
        assert_eq!(got, oracle::control_dependences(&ir));
        // all four arms, plus the join that the returning arm bypasses
        assert_eq!(got.iter().filter(|(a, _)| *a == 1).count(), 5);
    }
}
