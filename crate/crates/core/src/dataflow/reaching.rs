use std::collections::{BTreeSet, VecDeque};

use crate::frontend::IrMethod;

pub type Definition = (String, usize);

/// Definitions reaching the entry and exit of each statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachInfo {
    pub in_defs: Vec<BTreeSet<Definition>>,
    pub out_defs: Vec<BTreeSet<Definition>>,
}

pub fn reaching_definitions(ir: &IrMethod) -> ReachInfo {
    let order: Vec<usize> = (0..ir.len()).collect();
    reaching_definitions_with_order(ir, &order)
}

/// Forward may-analysis with a FIFO worklist seeded in `order`. The fixpoint does
/// not depend on the order; it is exposed so tests can check that.
pub fn reaching_definitions_with_order(ir: &IrMethod, order: &[usize]) -> ReachInfo {
    let n = ir.len();
    let preds = ir.predecessors();

    let gen: Vec<BTreeSet<Definition>> = ir
        .statements
        .iter()
        .map(|s| s.defs.iter().map(|v| (v.clone(), s.id)).collect())
        .collect();

    let mut in_defs = vec![BTreeSet::new(); n];
    let mut out_defs = gen.clone();
    let mut queue: VecDeque<usize> = order.iter().copied().collect();
    let mut queued = vec![false; n];
    for &s in order {
        queued[s] = true;
    }

    while let Some(s) = queue.pop_front() {
        queued[s] = false;
        let mut incoming = BTreeSet::new();
        for &p in &preds[s] {
            incoming.extend(out_defs[p].iter().cloned());
        }
        let defs = &ir.statements[s].defs;
        let mut out: BTreeSet<Definition> = incoming
            .iter()
            .filter(|(v, _)| !defs.contains(v))
            .cloned()
            .collect();
        out.extend(gen[s].iter().cloned());
        in_defs[s] = incoming;
        if out != out_defs[s] {
            out_defs[s] = out;
            for &w in ir.successors(s) {
                if w < n && !queued[w] {
                    queued[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    ReachInfo { in_defs, out_defs }
}

/// `(s1, s2, v)` for every use of `v` at `s2` reached by the definition at `s1`.
///
/// Requiring `v` to be used at `s2` is the upward-exposed-use condition: each
/// statement reads its operands before writing its result.
pub fn data_dependences(ir: &IrMethod, reach: &ReachInfo) -> BTreeSet<(usize, usize, String)> {
    let mut out = BTreeSet::new();
    for (s2, stmt) in ir.statements.iter().enumerate() {
        for (v, s1) in &reach.in_defs[s2] {
            if stmt.uses.contains(v) {
                out.insert((*s1, s2, v.clone()));
            }
        }
    }
    out
}
