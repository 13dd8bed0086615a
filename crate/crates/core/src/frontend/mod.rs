//! Mini-language frontend: lexing, parsing, and lowering to statement-typed IR.

mod ast;
mod ir;
mod lexer;
mod lower;
mod parser;

use thiserror::Error;

pub use ast::{Assign, BinOp, Expr, LValue, Method, Stmt, StmtKind, SwitchCase, UnOp};
pub use ir::{IrMethod, IrStatement, StatementKind};
pub use lexer::{tokenize, Token, TokenKind};
pub use lower::lower_to_ir;
pub use parser::parse;

pub(crate) use ir::reachable;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("line {line}: unexpected character '{found}'")]
    Lex { line: usize, found: char },
    #[error("line {line}: expected {expected}, found {found}")]
    Parse {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: loop condition is constant true and the body never exits")]
    InfiniteLoop { line: usize },
    #[error("line {line}: statement is unreachable")]
    Unreachable { line: usize },
    #[error("line {line}: method exit is unreachable from this statement")]
    NoExit { line: usize },
    #[error("line {line}: duplicate case label {label}")]
    DuplicateCase { line: usize, label: i64 },
    #[error("IR text line {line}: {message}")]
    IrText { line: usize, message: String },
    #[error("invalid IR: {0}")]
    InvalidIr(String),
}

pub fn parse_source(source: &str) -> Result<Method, FrontendError> {
    parse(&tokenize(source)?)
}

/// Source text straight to IR.
pub fn compile(source: &str) -> Result<IrMethod, FrontendError> {
    lower_to_ir(&parse_source(source)?)
}
