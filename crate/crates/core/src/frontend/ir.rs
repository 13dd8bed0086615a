use std::collections::BTreeSet;
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FrontendError;

/// Statement kinds, in one-hot index order. The last two slots are reserved and
/// never produced by lowering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StatementKind {
    Identity = 0,
    Assignment = 1,
    Abstract = 2,
    AbstractDefinition = 3,
    Breakpoint = 4,
    EnterMonitor = 5,
    ExitMonitor = 6,
    Goto = 7,
    If = 8,
    Invoke = 9,
    LookupSwitch = 10,
    Nop = 11,
    Return = 12,
    ReturnVoid = 13,
    Throw = 14,
    TableSwitch = 15,
    Reserved16 = 16,
    Reserved17 = 17,
}

impl StatementKind {
    pub const COUNT: usize = 18;

    pub const ALL: [StatementKind; Self::COUNT] = [
        StatementKind::Identity,
        StatementKind::Assignment,
        StatementKind::Abstract,
        StatementKind::AbstractDefinition,
        StatementKind::Breakpoint,
        StatementKind::EnterMonitor,
        StatementKind::ExitMonitor,
        StatementKind::Goto,
        StatementKind::If,
        StatementKind::Invoke,
        StatementKind::LookupSwitch,
        StatementKind::Nop,
        StatementKind::Return,
        StatementKind::ReturnVoid,
        StatementKind::Throw,
        StatementKind::TableSwitch,
        StatementKind::Reserved16,
        StatementKind::Reserved17,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            StatementKind::Identity => "Identity",
            StatementKind::Assignment => "Assignment",
            StatementKind::Abstract => "Abstract",
            StatementKind::AbstractDefinition => "AbstractDefinition",
            StatementKind::Breakpoint => "Breakpoint",
            StatementKind::EnterMonitor => "EnterMonitor",
            StatementKind::ExitMonitor => "ExitMonitor",
            StatementKind::Goto => "Goto",
            StatementKind::If => "If",
            StatementKind::Invoke => "Invoke",
            StatementKind::LookupSwitch => "LookupSwitch",
            StatementKind::Nop => "Nop",
            StatementKind::Return => "Return",
            StatementKind::ReturnVoid => "ReturnVoid",
            StatementKind::Throw => "Throw",
            StatementKind::TableSwitch => "TableSwitch",
            StatementKind::Reserved16 => "Reserved16",
            StatementKind::Reserved17 => "Reserved17",
        }
    }

    pub fn is_branch(self) -> bool {
        matches!(
            self,
            StatementKind::If | StatementKind::LookupSwitch | StatementKind::TableSwitch
        )
    }

    pub fn jumps_to_exit(self) -> bool {
        matches!(
            self,
            StatementKind::Return | StatementKind::ReturnVoid | StatementKind::Throw
        )
    }
}

impl fmt::Display for StatementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatementKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown statement kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IrStatement {
    pub id: usize,
    pub kind: StatementKind,
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
    pub line: usize,
}

/// A lowered method body. Statement ids are dense `0..n`; id `n` is the virtual exit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IrMethod {
    pub name: String,
    pub statements: Vec<IrStatement>,
    /// `succ[i]` for every statement `i < n`. Branches may list the same target twice.
    pub succ: Vec<Vec<usize>>,
    pub entry: usize,
}

impl IrMethod {
    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn exit(&self) -> usize {
        self.statements.len()
    }

    /// Number of CFG nodes, virtual exit included.
    pub fn node_count(&self) -> usize {
        self.statements.len() + 1
    }

    pub fn successors(&self, id: usize) -> &[usize] {
        if id < self.succ.len() {
            &self.succ[id]
        } else {
            &[]
        }
    }

    /// Predecessor lists for all nodes including the exit, deduplicated and sorted.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![BTreeSet::new(); self.node_count()];
        for (src, succs) in self.succ.iter().enumerate() {
            for &dst in succs {
                preds[dst].insert(src);
            }
        }
        preds.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Checks id density, successor arities, and that every statement lies on an
    /// entry-to-exit path.
    pub fn validate(&self) -> Result<(), FrontendError> {
        let n = self.len();
        let bad = |msg: String| Err(FrontendError::InvalidIr(msg));
        if self.succ.len() != n {
            return bad(format!("{} successor lists for {} statements", self.succ.len(), n));
        }
        if self.entry > n || (n > 0 && self.entry == n) {
            return bad(format!("entry {} out of range", self.entry));
        }
        for (i, s) in self.statements.iter().enumerate() {
            if s.id != i {
                return bad(format!("statement at position {i} has id {}", s.id));
            }
            let succ = &self.succ[i];
            if succ.is_empty() {
                return bad(format!("statement {i} has no successor"));
            }
            if let Some(&d) = succ.iter().find(|&&d| d > n) {
                return bad(format!("statement {i} has successor {d} out of range"));
            }
            match s.kind {
                StatementKind::If if succ.len() != 2 => {
                    return bad(format!("If statement {i} has {} successors", succ.len()));
                }
                StatementKind::Goto if succ.len() != 1 => {
                    return bad(format!("Goto statement {i} has {} successors", succ.len()));
                }
                _ => {}
            }
        }
        let forward = reachable(n + 1, self.entry, |v| self.successors(v).to_vec());
        if let Some(v) = (0..n).find(|&v| !forward[v]) {
            return Err(FrontendError::Unreachable {
                line: self.statements[v].line,
            });
        }
        let preds = self.predecessors();
        let backward = reachable(n + 1, n, |v| preds[v].clone());
        if let Some(v) = (0..n).find(|&v| !backward[v]) {
            return Err(FrontendError::NoExit {
                line: self.statements[v].line,
            });
        }
        Ok(())
    }

    /// Debug text form: one `<id> <KIND> defs=[..] uses=[..] succ=[..]` line per statement.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, succ) in self.statements.iter().zip(&self.succ) {
            let join = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join(",");
            let succ: Vec<String> = succ.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(
                out,
                "{} {} defs=[{}] uses=[{}] succ=[{}]",
                s.id,
                s.kind,
                join(&s.defs),
                join(&s.uses),
                succ.join(",")
            );
        }
        out
    }

    /// Parses the debug text form. Blank lines and `#` comments are skipped; the entry
    /// is statement 0 and line numbers are the 1-based text lines.
    pub fn from_text(name: &str, text: &str) -> Result<IrMethod, FrontendError> {
        let mut statements = Vec::new();
        let mut succ = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| FrontendError::IrText {
                line: lineno + 1,
                message: msg.to_string(),
            };
            let mut parts = line.split_whitespace();
            let id: usize = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| err("expected statement id"))?;
            let kind: StatementKind = parts
                .next()
                .ok_or_else(|| err("expected statement kind"))?
                .parse()
                .map_err(|e: String| err(&e))?;
            let mut field = |key: &str| -> Result<Vec<String>, FrontendError> {
                let p = parts.next().ok_or_else(|| err(&format!("expected {key}=[..]")))?;
                let inner = p
                    .strip_prefix(key)
                    .and_then(|r| r.strip_prefix("=["))
                    .and_then(|r| r.strip_suffix(']'))
                    .ok_or_else(|| err(&format!("expected {key}=[..]")))?;
                Ok(inner
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect())
            };
            let defs = field("defs")?.into_iter().collect();
            let uses = field("uses")?.into_iter().collect();
            let targets = field("succ")?
                .iter()
                .map(|s| s.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| err("successor ids must be integers"))?;
            statements.push(IrStatement {
                id,
                kind,
                defs,
                uses,
                line: lineno + 1,
            });
            succ.push(targets);
        }
        let ir = IrMethod {
            name: name.to_string(),
            entry: 0,
            statements,
            succ,
        };
        ir.validate()?;
        Ok(ir)
    }
}

pub(crate) fn reachable(n: usize, start: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for w in next(v) {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}
