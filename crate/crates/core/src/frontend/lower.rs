use std::collections::BTreeSet;

use super::ast::{Assign, Expr, Method, Stmt, StmtKind};
use super::ir::{IrMethod, IrStatement, StatementKind};
use super::FrontendError;

/// Lowers a parsed method into statement-typed IR with an explicit CFG.
///
/// Parameters become `Identity` statements at entry. `while` and `for` become an
/// `If` header plus a back-edge `Goto`; a `for` loop produces exactly the CFG of
/// the equivalent `init; while (cond) { body; update; }`. Return and throw jump to
/// the virtual exit.
pub fn lower_to_ir(method: &Method) -> Result<IrMethod, FrontendError> {
    let mut lw = Lowerer::default();
    for p in &method.params {
        lw.simple(StatementKind::Identity, BTreeSet::from([p.clone()]), BTreeSet::new(), 1)?;
    }
    lw.block(&method.body)?;

    let exit = lw.statements.len();
    let mut dangling = std::mem::take(&mut lw.pending);
    dangling.append(&mut lw.to_exit);
    for (id, slot) in dangling {
        lw.succ[id][slot] = Some(exit);
    }
    let succ = lw
        .succ
        .into_iter()
        .map(|s| s.into_iter().map(|d| d.expect("all successor slots patched")).collect())
        .collect();
    let ir = IrMethod {
        name: method.name.clone(),
        statements: lw.statements,
        succ,
        entry: 0,
    };
    ir.validate()?;
    Ok(ir)
}

#[derive(Default)]
struct Lowerer {
    statements: Vec<IrStatement>,
    succ: Vec<Vec<Option<usize>>>,
    /// Successor slots waiting for the next emitted statement.
    pending: Vec<(usize, usize)>,
    /// Slots that resolve to the virtual exit once the statement count is known.
    to_exit: Vec<(usize, usize)>,
}

impl Lowerer {
    fn emit(
        &mut self,
        kind: StatementKind,
        defs: BTreeSet<String>,
        uses: BTreeSet<String>,
        line: usize,
        slots: usize,
    ) -> Result<usize, FrontendError> {
        let id = self.statements.len();
        if id > 0 && self.pending.is_empty() {
            return Err(FrontendError::Unreachable { line });
        }
        for (src, slot) in std::mem::take(&mut self.pending) {
            self.succ[src][slot] = Some(id);
        }
        self.statements.push(IrStatement {
            id,
            kind,
            defs,
            uses,
            line,
        });
        self.succ.push(vec![None; slots]);
        Ok(id)
    }

    fn simple(&mut self, kind: StatementKind, defs: BTreeSet<String>, uses: BTreeSet<String>, line: usize) -> Result<usize, FrontendError> {
        let id = self.emit(kind, defs, uses, line, 1)?;
        self.pending.push((id, 0));
        Ok(id)
    }

    fn assign(&mut self, a: &Assign, line: usize) -> Result<(), FrontendError> {
        let mut uses = a.value.vars();
        if let Some(idx) = &a.target.index {
            idx.collect_vars(&mut uses);
        }
        self.simple(
            StatementKind::Assignment,
            BTreeSet::from([a.target.name.clone()]),
            uses,
            line,
        )?;
        Ok(())
    }

    fn exit_jump(&mut self, kind: StatementKind, uses: BTreeSet<String>, line: usize) -> Result<(), FrontendError> {
        let id = self.emit(kind, BTreeSet::new(), uses, line, 1)?;
        self.to_exit.push((id, 0));
        self.pending.clear();
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), FrontendError> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    /// Emits a loop header `If` and body. The header's false edge is left pending for
    /// whatever follows the loop.
    fn loop_with(&mut self, cond: &Expr, body: &[Stmt], update: Option<&Assign>, line: usize) -> Result<(), FrontendError> {
        if cond.const_value().is_some_and(|v| v != 0) && !contains_exit(body) {
            return Err(FrontendError::InfiniteLoop { line });
        }
        let header = self.emit(StatementKind::If, BTreeSet::new(), cond.vars(), line, 2)?;
        self.pending.push((header, 0));
        self.block(body)?;
        // A body that always returns leaves nothing to loop back from.
        if !self.pending.is_empty() {
            if let Some(upd) = update {
                self.assign(upd, line)?;
            }
            let goto = self.emit(StatementKind::Goto, BTreeSet::new(), BTreeSet::new(), line, 1)?;
            self.succ[goto][0] = Some(header);
        }
        self.pending.push((header, 1));
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), FrontendError> {
        let line = stmt.line;
        match &stmt.kind {
            StmtKind::Assign(a) => self.assign(a, line)?,
            StmtKind::Skip => {
                self.simple(StatementKind::Nop, BTreeSet::new(), BTreeSet::new(), line)?;
            }
            StmtKind::Call { args, .. } => {
                let mut uses = BTreeSet::new();
                args.iter().for_each(|a| a.collect_vars(&mut uses));
                self.simple(StatementKind::Invoke, BTreeSet::new(), uses, line)?;
            }
            StmtKind::Return(Some(e)) => self.exit_jump(StatementKind::Return, e.vars(), line)?,
            StmtKind::Return(None) => self.exit_jump(StatementKind::ReturnVoid, BTreeSet::new(), line)?,
            StmtKind::Throw(e) => self.exit_jump(StatementKind::Throw, e.vars(), line)?,
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let id = self.emit(StatementKind::If, BTreeSet::new(), cond.vars(), line, 2)?;
                self.pending.push((id, 0));
                self.block(then_body)?;
                let mut after_then = std::mem::take(&mut self.pending);
                self.pending.push((id, 1));
                if let Some(e) = else_body {
                    self.block(e)?;
                }
                self.pending.append(&mut after_then);
            }
            StmtKind::While { cond, body } => self.loop_with(cond, body, None, line)?,
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                self.assign(init, line)?;
                self.loop_with(cond, body, Some(update), line)?;
            }
            StmtKind::Switch {
                scrutinee,
                cases,
                default,
            } => {
                let mut labels = BTreeSet::new();
                for c in cases {
                    if !labels.insert(c.label) {
                        return Err(FrontendError::DuplicateCase { line, label: c.label });
                    }
                }
                let dense = match (labels.first(), labels.last()) {
                    (Some(&lo), Some(&hi)) => hi as i128 - lo as i128 + 1 == labels.len() as i128,
                    _ => false,
                };
                let kind = if dense {
                    StatementKind::TableSwitch
                } else {
                    StatementKind::LookupSwitch
                };
                let id = self.emit(kind, BTreeSet::new(), scrutinee.vars(), line, cases.len() + 1)?;
                let mut joined = Vec::new();
                for (slot, c) in cases.iter().enumerate() {
                    self.pending.push((id, slot));
                    self.block(&c.body)?;
                    joined.append(&mut self.pending);
                }
                self.pending.push((id, cases.len()));
                if let Some(d) = default {
                    self.block(d)?;
                }
                self.pending.append(&mut joined);
            }
        }
        Ok(())
    }
}

fn contains_exit(stmts: &[Stmt]) -> bool {
    stmts
        .iter()
        .any(|s| s.is_terminator() || s.blocks().into_iter().any(|b| contains_exit(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_source, IrMethod};

    fn lower_src(src: &str) -> Result<IrMethod, FrontendError> {
        lower_to_ir(&parse_source(src)?)
    }

    fn kinds(ir: &IrMethod) -> Vec<StatementKind> {
        ir.statements.iter().map(|s| s.kind).collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    /// Every cycle of the CFG passes through `node` iff removing it leaves the graph acyclic.
    fn all_cycles_pass_through(ir: &IrMethod, node: usize) -> bool {
        let n = ir.node_count();
        // 0 = unvisited, 1 = on stack, 2 = done
        fn dfs(ir: &IrMethod, v: usize, skip: usize, state: &mut [u8]) -> bool {
            state[v] = 1;
            for &w in ir.successors(v) {
                if w == skip {
                    continue;
                }
                if state[w] == 1 || (state[w] == 0 && !dfs(ir, w, skip, state)) {
                    return false;
                }
            }
            state[v] = 2;
            true
        }
        let mut state = vec![0u8; n];
        (0..n).filter(|&v| v != node).all(|v| state[v] != 0 || dfs(ir, v, node, &mut state))
    }

    #[test]
    fn straight_line() {
        let ir = lower_src("def m(a){ x = a; }").unwrap();
        assert_eq!(kinds(&ir), vec![StatementKind::Identity, StatementKind::Assignment]);
        assert_eq!(ir.statements[0].defs, set(&["a"]));
        assert_eq!(ir.statements[1].defs, set(&["x"]));
        assert_eq!(ir.statements[1].uses, set(&["a"]));
        assert_eq!(ir.succ, vec![vec![1], vec![2]]);
        assert_eq!(ir.exit(), 2);
    }

    #[test]
    fn while_loop_desugars_to_if_and_goto() {
        let ir = lower_src("def m(){ while (i < n) { i = i + 1; } }").unwrap();
        assert_eq!(
            kinds(&ir),
            vec![StatementKind::If, StatementKind::Assignment, StatementKind::Goto]
        );
        assert_eq!(ir.succ[0], vec![1, 3]);
        assert_eq!(ir.succ[2], vec![0]);
        assert!(all_cycles_pass_through(&ir, 0));
    }

    #[test]
    fn for_matches_equivalent_while() {
        let a = lower_src("def m(n){ s = 0; for (i = 0; i < n; i = i + 1) { s = s + i; } return s; }").unwrap();
        let b = lower_src("def m(n){ s = 0; i = 0; while (i < n) { s = s + i; i = i + 1; } return s; }").unwrap();
        assert_eq!(a.succ, b.succ);
        assert_eq!(kinds(&a), kinds(&b));
        let du = |ir: &IrMethod| -> Vec<_> {
            ir.statements.iter().map(|s| (s.defs.clone(), s.uses.clone())).collect()
        };
        assert_eq!(du(&a), du(&b));
    }

    #[test]
    fn switch_kind_follows_label_density() {
        for (labels, dense) in [
            (vec![1, 2, 3], true),
            (vec![3, 1, 2], true),
            (vec![1, 3], false),
            (vec![7], true),
            (vec![-1, 0, 1], true),
            (vec![0, 10, 20], false),
        ] {
            let cases: String = labels.iter().map(|l| format!("case {l}: {{ skip; }} ")).collect();
            let ir = lower_src(&format!("def m(x){{ switch (x) {{ {cases} }} }}")).unwrap();
            // oracle: labels form one contiguous run
            let mut sorted = labels.clone();
            sorted.sort();
            let contiguous = sorted.windows(2).all(|w| w[1] == w[0] + 1);
            assert_eq!(contiguous, dense);
            let expected = if dense {
                StatementKind::TableSwitch
            } else {
                StatementKind::LookupSwitch
            };
            assert_eq!(ir.statements[1].kind, expected, "labels {labels:?}");
            assert_eq!(ir.succ[1].len(), labels.len() + 1);
        }
    }

    #[test]
    fn array_write_defs_array_and_uses_index() {
        let ir = lower_src("def m(a, i, v){ a[i] = v + 1; }").unwrap();
        let s = &ir.statements[3];
        assert_eq!(s.defs, set(&["a"]));
        assert_eq!(s.uses, set(&["i", "v"]));
    }

    #[test]
    fn statement_kinds() {
        let ir = lower_src(
            "def m(x){ call f(x); skip; if (x) { return x; } if (x > 1) { throw x; } return; }",
        )
        .unwrap();
        assert_eq!(
            kinds(&ir),
            vec![
                StatementKind::Identity,
                StatementKind::Invoke,
                StatementKind::Nop,
                StatementKind::If,
                StatementKind::Return,
                StatementKind::If,
                StatementKind::Throw,
                StatementKind::ReturnVoid,
            ]
        );
        let exit = ir.exit();
        assert_eq!(ir.succ[4], vec![exit]);
        assert_eq!(ir.succ[6], vec![exit]);
        assert_eq!(ir.succ[3], vec![4, 5]);
    }

    #[test]
    fn empty_then_branch_gives_duplicate_successors() {
        let ir = lower_src("def m(x){ if (x) { } y = 1; }").unwrap();
        assert_eq!(ir.succ[1], vec![2, 2]);
    }

    #[test]
    fn constant_true_loop_without_exit_is_rejected() {
        assert_eq!(
            lower_src("def m(){\n while (1) { x = 1; } }"),
            Err(FrontendError::InfiniteLoop { line: 2 })
        );
        assert!(lower_src("def m(){ while (1 == 1) { skip; } }").is_err());
        assert!(lower_src("def m(){ while (1) { if (input()) { return 1; } } }").is_ok());
    }

    #[test]
    fn dead_code_after_return_is_rejected() {
        assert_eq!(
            lower_src("def m(){ return 1;\n x = 2; }"),
            Err(FrontendError::Unreachable { line: 2 })
        );
    }

    #[test]
    fn duplicate_case_label_is_rejected() {
        assert!(matches!(
            lower_src("def m(x){ switch (x) { case 1: { skip; } case 1: { skip; } } }"),
            Err(FrontendError::DuplicateCase { label: 1, .. })
        ));
    }

    #[test]
    fn lowering_is_deterministic() {
        let src = "def m(a, b){ for (i = 0; i < a; i = i + 1) { if (i % 2 == 0) { b = b + i; } else { call g(b); } } return b; }";
        let method = parse_source(src).unwrap();
        assert_eq!(
            lower_to_ir(&method).unwrap().to_text(),
            lower_to_ir(&method).unwrap().to_text()
        );
    }

    #[test]
    fn ir_variables_match_ast_identifiers() {
        let src = "def m(a, n){ s = 0; i = 0; while (i < n) { s = s + a[i]; i = i + 1; } switch (s) { case 0: { call p(q); } } return s; }";
        let method = parse_source(src).unwrap();
        let ir = lower_to_ir(&method).unwrap();
        let mut seen = BTreeSet::new();
        for s in &ir.statements {
            seen.extend(s.defs.iter().cloned());
            seen.extend(s.uses.iter().cloned());
        }
        assert_eq!(seen, method.variables());
        assert_eq!(method.undefined_variables(), set(&["q"]));
    }
}
