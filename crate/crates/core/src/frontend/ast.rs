use std::collections::BTreeSet;
use std::fmt::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Operators whose operands can be swapped without changing the result.
    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Mul | BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or
        )
    }

    /// The operator `op'` with `a op b == b op' a`, if one exists.
    pub fn mirrored(self) -> Option<BinOp> {
        match self {
            BinOp::Lt => Some(BinOp::Gt),
            BinOp::Gt => Some(BinOp::Lt),
            BinOp::Le => Some(BinOp::Ge),
            BinOp::Ge => Some(BinOp::Le),
            op if op.is_commutative() => Some(op),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Var(String),
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Input,
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) | Expr::Input => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Index(v, idx) => {
                out.insert(v.clone());
                idx.collect_vars(out);
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn has_input(&self) -> bool {
        match self {
            Expr::Input => true,
            Expr::Int(_) | Expr::Var(_) => false,
            Expr::Index(_, e) | Expr::Unary(_, e) => e.has_input(),
            Expr::Binary(_, l, r) => l.has_input() || r.has_input(),
        }
    }

    /// Folds literal-only expressions. `None` when the value depends on variables,
    /// on `input()`, or would divide by zero.
    pub fn const_value(&self) -> Option<i64> {
        match self {
            Expr::Int(v) => Some(*v),
            Expr::Var(_) | Expr::Index(..) | Expr::Input => None,
            Expr::Unary(UnOp::Neg, e) => e.const_value().map(i64::wrapping_neg),
            Expr::Unary(UnOp::Not, e) => e.const_value().map(|v| (v == 0) as i64),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.const_value()?, r.const_value()?);
                Some(match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::Div => a.checked_div(b)?,
                    BinOp::Rem => a.checked_rem(b)?,
                    BinOp::Lt => (a < b) as i64,
                    BinOp::Le => (a <= b) as i64,
                    BinOp::Gt => (a > b) as i64,
                    BinOp::Ge => (a >= b) as i64,
                    BinOp::Eq => (a == b) as i64,
                    BinOp::Ne => (a != b) as i64,
                    BinOp::And => (a != 0 && b != 0) as i64,
                    BinOp::Or => (a != 0 || b != 0) as i64,
                })
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 7,
            _ => 8,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Index(v, idx) => write!(f, "{v}[{idx}]"),
            Expr::Input => f.write_str("input()"),
            Expr::Unary(op, e) => {
                let sym = match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                };
                if e.precedence() < 7 {
                    write!(f, "{sym}({e})")
                } else {
                    write!(f, "{sym}{e}")
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if l.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // left-associative: equal precedence on the right needs parentheses
                if r.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

/// Target of an assignment: `x` or `a[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LValue {
    pub name: String,
    pub index: Option<Expr>,
}

impl fmt::Display for LValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.index {
            Some(idx) => write!(f, "{}[{}]", self.name, idx),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assign {
    pub target: LValue,
    pub value: Expr,
}

impl fmt::Display for Assign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.target, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwitchCase {
    pub label: i64,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Assign(Assign),
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    For {
        init: Assign,
        cond: Expr,
        update: Assign,
        body: Vec<Stmt>,
    },
    Switch {
        scrutinee: Expr,
        cases: Vec<SwitchCase>,
        default: Option<Vec<Stmt>>,
    },
    Call {
        callee: String,
        args: Vec<Expr>,
    },
    Return(Option<Expr>),
    Throw(Expr),
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: usize,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, line: 0 }
    }

    /// Child statement lists, in source order.
    pub fn blocks(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => std::iter::once(then_body).chain(else_body.iter()).collect(),
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body],
            StmtKind::Switch { cases, default, .. } => cases
                .iter()
                .map(|c| &c.body)
                .chain(default.iter())
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match &mut self.kind {
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => std::iter::once(then_body).chain(else_body.iter_mut()).collect(),
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body],
            StmtKind::Switch { cases, default, .. } => cases
                .iter_mut()
                .map(|c| &mut c.body)
                .chain(default.iter_mut())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Whether control never falls through to the next statement.
    pub fn is_terminator(&self) -> bool {
        matches!(self.kind, StmtKind::Return(_) | StmtKind::Throw(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Method {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

impl Method {
    /// Every variable named anywhere in the method, parameters included.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.params.iter().cloned().collect();
        fn walk(stmts: &[Stmt], out: &mut BTreeSet<String>) {
            for s in stmts {
                match &s.kind {
                    StmtKind::Assign(a) => assign_vars(a, out),
                    StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => cond.collect_vars(out),
                    StmtKind::For {
                        init, cond, update, ..
                    } => {
                        assign_vars(init, out);
                        cond.collect_vars(out);
                        assign_vars(update, out);
                    }
                    StmtKind::Switch { scrutinee, .. } => scrutinee.collect_vars(out),
                    StmtKind::Call { args, .. } => args.iter().for_each(|a| a.collect_vars(out)),
                    StmtKind::Return(Some(e)) | StmtKind::Throw(e) => e.collect_vars(out),
                    StmtKind::Return(None) | StmtKind::Skip => {}
                }
                for b in s.blocks() {
                    walk(b, out);
                }
            }
        }
        fn assign_vars(a: &Assign, out: &mut BTreeSet<String>) {
            out.insert(a.target.name.clone());
            if let Some(idx) = &a.target.index {
                idx.collect_vars(out);
            }
            a.value.collect_vars(out);
        }
        walk(&self.body, &mut out);
        out
    }

    /// Variables that are read somewhere but are neither parameters nor assigned anywhere.
    pub fn undefined_variables(&self) -> BTreeSet<String> {
        let mut assigned: BTreeSet<String> = self.params.iter().cloned().collect();
        fn walk(stmts: &[Stmt], out: &mut BTreeSet<String>) {
            for s in stmts {
                match &s.kind {
                    StmtKind::Assign(a) => {
                        out.insert(a.target.name.clone());
                    }
                    StmtKind::For { init, update, .. } => {
                        out.insert(init.target.name.clone());
                        out.insert(update.target.name.clone());
                    }
                    _ => {}
                }
                for b in s.blocks() {
                    walk(b, out);
                }
            }
        }
        walk(&self.body, &mut assigned);
        self.variables()
            .into_iter()
            .filter(|v| !assigned.contains(v))
            .collect()
    }

    /// Canonical source text, one statement per line, four-space indentation.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "def {}({}) {{", self.name, self.params.join(", "));
        write_block(&mut out, &self.body, 1);
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_source())
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    indent(out, depth);
    match &stmt.kind {
        StmtKind::Assign(a) => {
            let _ = writeln!(out, "{a};");
        }
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            let _ = writeln!(out, "if ({cond}) {{");
            write_block(out, then_body, depth + 1);
            indent(out, depth);
            match else_body {
                Some(e) => {
                    out.push_str("} else {\n");
                    write_block(out, e, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({cond}) {{");
            write_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            let _ = writeln!(out, "for ({init}; {cond}; {update}) {{");
            write_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Switch {
            scrutinee,
            cases,
            default,
        } => {
            let _ = writeln!(out, "switch ({scrutinee}) {{");
            for c in cases {
                indent(out, depth + 1);
                let _ = writeln!(out, "case {}: {{", c.label);
                write_block(out, &c.body, depth + 2);
                indent(out, depth + 1);
                out.push_str("}\n");
            }
            if let Some(d) = default {
                indent(out, depth + 1);
                out.push_str("default: {\n");
                write_block(out, d, depth + 2);
                indent(out, depth + 1);
                out.push_str("}\n");
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Call { callee, args } => {
            let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            let _ = writeln!(out, "call {}({});", callee, args.join(", "));
        }
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {e};");
        }
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Throw(e) => {
            let _ = writeln!(out, "throw {e};");
        }
        StmtKind::Skip => out.push_str("skip;\n"),
    }
}
