use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::dataflow::{build_pdg, is_isomorphic};
use crate::frontend::{lower_to_ir, parse_source, Assign, BinOp, Expr, LValue, Method, Stmt, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Rename,
    Reorder,
    LoopConvert,
    DeadCode,
    Reassociate,
}

impl TransformKind {
    pub const ALL: [TransformKind; 5] = [
        TransformKind::Rename,
        TransformKind::Reorder,
        TransformKind::LoopConvert,
        TransformKind::DeadCode,
        TransformKind::Reassociate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Rename => "rename",
            TransformKind::Reorder => "reorder",
            TransformKind::LoopConvert => "loop_convert",
            TransformKind::DeadCode => "dead_code",
            TransformKind::Reassociate => "reassociate",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown transform '{s}'"))
    }
}

/// Applies one semantics-preserving rewrite at a randomly chosen legal site.
pub fn transform<R: Rng + ?Sized>(method: &Method, kind: TransformKind, rng: &mut R) -> Result<Method, DatagenError> {
    let out = match kind {
        TransformKind::Rename => random_rename(method, rng),
        TransformKind::Reorder => reorder(method, rng),
        TransformKind::LoopConvert => loop_convert(method, rng),
        TransformKind::DeadCode => dead_code(method, rng),
        TransformKind::Reassociate => reassociate(method, rng),
    };
    let out = out.ok_or(DatagenError::NotApplicable(kind))?;
    // printed text must come back to the same tree and still lower
    let reparsed = parse_source(&out.to_source()).ok().map(|m| strip_lines(&m));
    if reparsed != Some(strip_lines(&out)) || lower_to_ir(&out).is_err() {
        return Err(DatagenError::NotApplicable(kind));
    }
    Ok(out)
}

fn strip_lines(m: &Method) -> Method {
    let mut m = m.clone();
    walk_stmts_mut(&mut m.body, &mut |s| s.line = 0);
    m
}

// ---- traversal helpers ----

fn walk_stmts_mut(stmts: &mut [Stmt], f: &mut dyn FnMut(&mut Stmt)) {
    for s in stmts {
        f(s);
        for b in s.blocks_mut() {
            walk_stmts_mut(b, f);
        }
    }
}

fn walk_blocks_mut(stmts: &mut Vec<Stmt>, f: &mut dyn FnMut(&mut Vec<Stmt>)) {
    f(stmts);
    for s in stmts.iter_mut() {
        for b in s.blocks_mut() {
            walk_blocks_mut(b, f);
        }
    }
}

fn visit_expr_mut(e: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
    match e {
        Expr::Index(_, i) | Expr::Unary(_, i) => visit_expr_mut(i, f),
        Expr::Binary(_, l, r) => {
            visit_expr_mut(l, f);
            visit_expr_mut(r, f);
        }
        Expr::Int(_) | Expr::Var(_) | Expr::Input => {}
    }
    f(e);
}

fn assign_exprs_mut(a: &mut Assign, f: &mut dyn FnMut(&mut Expr)) {
    if let Some(i) = &mut a.target.index {
        visit_expr_mut(i, f);
    }
    visit_expr_mut(&mut a.value, f);
}

/// Every expression node of every statement (not descending into nested blocks).
fn stmt_exprs_mut(s: &mut Stmt, f: &mut dyn FnMut(&mut Expr)) {
    match &mut s.kind {
        StmtKind::Assign(a) => assign_exprs_mut(a, f),
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => visit_expr_mut(cond, f),
        StmtKind::For {
            init, cond, update, ..
        } => {
            assign_exprs_mut(init, f);
            visit_expr_mut(cond, f);
            assign_exprs_mut(update, f);
        }
        StmtKind::Switch { scrutinee, .. } => visit_expr_mut(scrutinee, f),
        StmtKind::Call { args, .. } => args.iter_mut().for_each(|a| visit_expr_mut(a, f)),
        StmtKind::Return(Some(e)) | StmtKind::Throw(e) => visit_expr_mut(e, f),
        StmtKind::Return(None) | StmtKind::Skip => {}
    }
}

fn all_exprs_mut(m: &mut Method, f: &mut dyn FnMut(&mut Expr)) {
    walk_stmts_mut(&mut m.body, &mut |s| stmt_exprs_mut(s, f));
}

// ---- rename ----

/// Consistent renaming of variables and parameters. Names missing from `map` stay.
pub fn rename_with(method: &Method, map: &BTreeMap<String, String>) -> Method {
    let get = |n: &String| map.get(n).cloned().unwrap_or_else(|| n.clone());
    let mut m = method.clone();
    m.params = m.params.iter().map(get).collect();
    all_exprs_mut(&mut m, &mut |e| match e {
        Expr::Var(v) | Expr::Index(v, _) => *v = get(v),
        _ => {}
    });
    let rename_target = |t: &mut LValue| t.name = get(&t.name);
    walk_stmts_mut(&mut m.body, &mut |s| match &mut s.kind {
        StmtKind::Assign(a) => rename_target(&mut a.target),
        StmtKind::For { init, update, .. } => {
            rename_target(&mut init.target);
            rename_target(&mut update.target);
        }
        _ => {}
    });
    m
}

const NAME_STEMS: [&str; 6] = ["v", "t", "tmp", "x", "q", "var"];

/// A random bijection from the method's variables onto `stem0..stemN`.
pub fn random_rename_map<R: Rng + ?Sized>(method: &Method, rng: &mut R) -> BTreeMap<String, String> {
    let vars: Vec<String> = method.variables().into_iter().collect();
    let stem = NAME_STEMS.choose(rng).copied().unwrap_or("v");
    let mut slots: Vec<usize> = (0..vars.len()).collect();
    slots.shuffle(rng);
    vars.into_iter()
        .zip(slots)
        .map(|(v, k)| (v, format!("{stem}{k}")))
        .collect()
}

fn random_rename<R: Rng + ?Sized>(method: &Method, rng: &mut R) -> Option<Method> {
    let map = random_rename_map(method, rng);
    if map.iter().all(|(k, v)| k == v) {
        return None;
    }
    Some(rename_with(method, &map))
}

// ---- reorder ----

/// Variables written and read by a straight-line statement; `None` for anything
/// whose position matters for reasons other than data flow.
fn simple_def_use(s: &Stmt) -> Option<(BTreeSet<String>, BTreeSet<String>)> {
    match &s.kind {
        StmtKind::Assign(a) if !a.value.has_input() && !a.target.index.as_ref().is_some_and(Expr::has_input) => {
            let mut uses = a.value.vars();
            if let Some(i) = &a.target.index {
                i.collect_vars(&mut uses);
                // an element write keeps the rest of the array alive
                uses.insert(a.target.name.clone());
            }
            Some((BTreeSet::from([a.target.name.clone()]), uses))
        }
        StmtKind::Skip => Some((BTreeSet::new(), BTreeSet::new())),
        _ => None,
    }
}

fn independent(a: &Stmt, b: &Stmt) -> bool {
    let (Some((da, ua)), Some((db, ub))) = (simple_def_use(a), simple_def_use(b)) else {
        return false;
    };
    da.is_disjoint(&db) && da.is_disjoint(&ub) && db.is_disjoint(&ua)
}

/// Positions `(block, i)` such that statements `i` and `i + 1` of the block may swap.
fn reorder_sites(m: &mut Method) -> Vec<(usize, usize)> {
    let mut sites = Vec::new();
    let mut block = 0;
    walk_blocks_mut(&mut m.body, &mut |stmts| {
        for i in 0..stmts.len().saturating_sub(1) {
            if independent(&stmts[i], &stmts[i + 1]) && stmts[i] != stmts[i + 1] {
                sites.push((block, i));
            }
        }
        block += 1;
    });
    sites
}

fn swap_at(m: &Method, site: (usize, usize)) -> Method {
    let mut out = m.clone();
    let mut block = 0;
    walk_blocks_mut(&mut out.body, &mut |stmts| {
        if block == site.0 {
            stmts.swap(site.1, site.1 + 1);
        }
        block += 1;
    });
    out
}

fn same_pdg_shape(a: &Method, b: &Method) -> bool {
    let pdg = |m: &Method| lower_to_ir(m).ok().and_then(|ir| build_pdg(&ir).ok());
    match (pdg(a), pdg(b)) {
        (Some(x), Some(y)) => is_isomorphic(&x, &y),
        _ => false,
    }
}

/// Swaps one pair of adjacent independent statements. A candidate is kept only
/// if the dependence graph is unchanged up to isomorphism.
fn reorder<R: Rng + ?Sized>(method: &Method, rng: &mut R) -> Option<Method> {
    let mut sites = reorder_sites(&mut method.clone());
    sites.shuffle(rng);
    sites
        .into_iter()
        .map(|site| swap_at(method, site))
        .find(|cand| same_pdg_shape(method, cand))
}

// ---- loop conversion ----

enum LoopSite {
    ForToWhile(usize, usize),
    WhileToFor(usize, usize),
}

fn loop_sites(m: &mut Method) -> Vec<LoopSite> {
    let mut sites = Vec::new();
    let mut block = 0;
    walk_blocks_mut(&mut m.body, &mut |stmts| {
        for (i, s) in stmts.iter().enumerate() {
            match &s.kind {
                StmtKind::For { .. } => sites.push(LoopSite::ForToWhile(block, i)),
                StmtKind::While { body, .. } => {
                    let init_before = i > 0 && matches!(stmts[i - 1].kind, StmtKind::Assign(_));
                    let update_last = matches!(body.last(), Some(Stmt { kind: StmtKind::Assign(_), .. }));
                    if init_before && update_last {
                        sites.push(LoopSite::WhileToFor(block, i));
                    }
                }
                _ => {}
            }
        }
        block += 1;
    });
    sites
}

fn convert_at(m: &Method, site: &LoopSite) -> Method {
    let mut out = m.clone();
    let mut block = 0;
    walk_blocks_mut(&mut out.body, &mut |stmts| {
        match *site {
            LoopSite::ForToWhile(b, i) if b == block => {
                let s = stmts.remove(i);
                if let StmtKind::For {
                    init,
                    cond,
                    update,
                    mut body,
                } = s.kind
                {
                    body.push(Stmt::new(StmtKind::Assign(update)));
                    stmts.insert(i, Stmt::new(StmtKind::While { cond, body }));
                    stmts.insert(i, Stmt::new(StmtKind::Assign(init)));
                }
            }
            LoopSite::WhileToFor(b, i) if b == block => {
                let s = stmts.remove(i);
                let prev = stmts.remove(i - 1);
                if let (StmtKind::While { cond, mut body }, StmtKind::Assign(init)) = (s.kind, prev.kind) {
                    if let Some(Stmt {
                        kind: StmtKind::Assign(update),
                        ..
                    }) = body.pop()
                    {
                        stmts.insert(
                            i - 1,
                            Stmt::new(StmtKind::For {
                                init,
                                cond,
                                update,
                                body,
                            }),
                        );
                    }
                }
            }
            _ => {}
        }
        block += 1;
    });
    out
}

/// Rewrites one `for` loop as `init; while (cond) { body; update; }` or the reverse.
fn loop_convert<R: Rng + ?Sized>(method: &Method, rng: &mut R) -> Option<Method> {
    let sites = loop_sites(&mut method.clone());
    sites.choose(rng).map(|site| convert_at(method, site))
}

// ---- dead code ----

fn fresh_name(taken: &BTreeSet<String>, stem: &str) -> String {
    (0..)
        .map(|k| format!("{stem}{k}"))
        .find(|n| !taken.contains(n))
        .expect("unbounded")
}

/// Inserts `skip;` or an assignment to a fresh variable that is never read.
fn dead_code<R: Rng + ?Sized>(method: &Method, rng: &mut R) -> Option<Method> {
    let mut out = method.clone();
    let vars: Vec<String> = method.variables().into_iter().collect();
    let stmt = if rng.random_bool(0.3) {
        Stmt::new(StmtKind::Skip)
    } else {
        let value = match vars.choose(rng) {
            Some(v) if rng.random_bool(0.7) => Expr::binary(BinOp::Add, Expr::Var(v.clone()), Expr::Int(rng.random_range(1..10))),
            _ => Expr::Int(rng.random_range(0..100)),
        };
        let target = LValue {
            name: fresh_name(&method.variables(), "unused"),
            index: None,
        };
        Stmt::new(StmtKind::Assign(Assign { target, value }))
    };
    let mut slots = Vec::new();
    let mut block = 0;
    walk_blocks_mut(&mut out.body, &mut |stmts| {
        // never after a return or throw
        let last = if stmts.last().is_some_and(Stmt::is_terminator) {
            stmts.len() - 1
        } else {
            stmts.len()
        };
        slots.extend((0..=last).map(|i| (block, i)));
        block += 1;
    });
    let &(target, pos) = slots.choose(rng)?;
    let mut block = 0;
    let mut stmt = Some(stmt);
    walk_blocks_mut(&mut out.body, &mut |stmts| {
        if block == target {
            if let Some(s) = stmt.take() {
                stmts.insert(pos, s);
            }
        }
        block += 1;
    });
    Some(out)
}

// ---- reassociation ----

fn swappable(e: &Expr) -> bool {
    match e {
        // `&&` and `||` short-circuit, so their operands keep their order
        Expr::Binary(op, l, r) => {
            !matches!(op, BinOp::And | BinOp::Or) && op.mirrored().is_some() && !l.has_input() && !r.has_input()
        }
        _ => false,
    }
}

/// Swaps the operands of one commutative operator, or mirrors one comparison.
fn reassociate<R: Rng + ?Sized>(method: &Method, rng: &mut R) -> Option<Method> {
    let mut count = 0;
    all_exprs_mut(&mut method.clone(), &mut |e| count += swappable(e) as usize);
    if count == 0 {
        return None;
    }
    let pick = rng.random_range(0..count);
    let mut out = method.clone();
    let mut seen = 0;
    all_exprs_mut(&mut out, &mut |e| {
        if swappable(e) {
            if seen == pick {
                if let Expr::Binary(op, l, r) = e {
                    *op = op.mirrored().unwrap_or(*op);
                    std::mem::swap(l, r);
                }
            }
            seen += 1;
        }
    });
    Some(out)
}
