//! Brute-force reference evaluations of post-dominance, control dependence, and
//! def-clear paths, straight from their path-based definitions. Exponential in the
//! worst case; meant for checking the fast analyses on small CFGs.

use std::collections::BTreeSet;

use crate::frontend::{reachable, IrMethod};

/// `p` post-dominates `v` iff `v == p`, or the exit cannot be reached from `v` once `p` is removed.
pub fn post_dominates(ir: &IrMethod, p: usize, v: usize) -> bool {
    if p == v {
        return true;
    }
    let exit = ir.exit();
    if v == exit {
        return false;
    }
    if p == exit {
        return true;
    }
    let seen = reachable(ir.node_count(), v, |u| {
        if u == p {
            Vec::new()
        } else {
            ir.successors(u).iter().copied().filter(|&w| w != p).collect()
        }
    });
    !seen[exit]
}

/// Control dependence by definition: `b` depends on `a` iff there is a directed path
/// from `a` to `b` whose every node after `a` is post-dominated by `b`, and `b` does
/// not strictly post-dominate `a`. Simple paths are enumerated explicitly.
pub fn control_dependences(ir: &IrMethod) -> BTreeSet<(usize, usize)> {
    let n = ir.len();
    let nodes = ir.node_count();
    let pdom: Vec<Vec<bool>> = (0..nodes)
        .map(|p| (0..nodes).map(|v| post_dominates(ir, p, v)).collect())
        .collect();

    fn path_exists(
        ir: &IrMethod,
        at: usize,
        target: usize,
        allowed: &[bool],
        on_path: &mut Vec<bool>,
    ) -> bool {
        if at == target {
            return true;
        }
        on_path[at] = true;
        let found = ir.successors(at).iter().any(|&w| {
            allowed[w] && !on_path[w] && path_exists(ir, w, target, allowed, on_path)
        });
        on_path[at] = false;
        found
    }

    let mut out = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if b != a && pdom[b][a] {
                continue;
            }
            // nodes every path member after `a` must belong to
            let allowed: Vec<bool> = (0..nodes).map(|v| pdom[b][v]).collect();
            let mut on_path = vec![false; nodes];
            let hit = ir
                .successors(a)
                .iter()
                .any(|&s| allowed[s] && path_exists(ir, s, b, &allowed, &mut on_path));
            if hit {
                out.insert((a, b));
            }
        }
    }
    out
}

/// Definitions `(variable, defining statement)` that reach the entry of each
/// statement along some def-clear walk of at most `max_len` edges.
pub fn reaching_definitions(ir: &IrMethod, max_len: usize) -> Vec<BTreeSet<(String, usize)>> {
    let n = ir.len();
    let mut reach = vec![BTreeSet::new(); n];
    for d in 0..n {
        for v in &ir.statements[d].defs {
            // endpoints of walks with exactly k edges out of `d`, no interior node redefining v
            let mut frontier: BTreeSet<usize> = ir.successors(d).iter().copied().collect();
            for _ in 1..max_len {
                for &w in frontier.iter().filter(|&&w| w < n) {
                    reach[w].insert((v.clone(), d));
                }
                let next: BTreeSet<usize> = frontier
                    .iter()
                    .filter(|&&u| u < n && !ir.statements[u].defs.contains(v))
                    .flat_map(|&u| ir.successors(u).iter().copied())
                    .collect();
                if next.is_empty() {
                    break;
                }
                frontier = next;
            }
            for &w in frontier.iter().filter(|&&w| w < n) {
                reach[w].insert((v.clone(), d));
            }
        }
    }
    reach
}

/// Data dependences from def-clear walks: `(s1, s2, v)` iff `v` is defined at `s1`,
/// used at `s2`, and some walk of at most `max_len` edges from `s1` to `s2` has no
/// interior node that redefines `v`.
pub fn data_dependences(ir: &IrMethod, max_len: usize) -> BTreeSet<(usize, usize, String)> {
    let reach = reaching_definitions(ir, max_len);
    let mut out = BTreeSet::new();
    for (s2, defs) in reach.iter().enumerate() {
        for (v, s1) in defs {
            if ir.statements[s2].uses.contains(v) {
                out.insert((*s1, s2, v.clone()));
            }
        }
    }
    out
}
