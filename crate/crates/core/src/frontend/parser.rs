use super::ast::{Assign, BinOp, Expr, LValue, Method, Stmt, StmtKind, SwitchCase, UnOp};
use super::lexer::{Token, TokenKind};
use super::FrontendError;

/// Recursive-descent parser over a token slice. A source file holds exactly one method.
pub fn parse(tokens: &[Token]) -> Result<Method, FrontendError> {
    let mut p = Parser { tokens, pos: 0 };
    let method = p.method()?;
    if let Some(tok) = p.peek() {
        return Err(FrontendError::Parse {
            line: tok.line,
            expected: "end of input".into(),
            found: tok.text.clone(),
        });
    }
    Ok(method)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn line(&self) -> usize {
        self.peek()
            .or_else(|| self.tokens.last())
            .map_or(1, |t| t.line)
    }

    fn error<T>(&self, expected: impl Into<String>) -> Result<T, FrontendError> {
        Err(FrontendError::Parse {
            line: self.line(),
            expected: expected.into(),
            found: self
                .peek()
                .map_or_else(|| "end of input".to_string(), |t| format!("'{}'", t.text)),
        })
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<&'t Token, FrontendError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(t)
            }
            _ => self.error(kind.to_string()),
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        Ok(self.expect(TokenKind::Ident)?.text.clone())
    }

    fn method(&mut self) -> Result<Method, FrontendError> {
        self.expect(TokenKind::Def)?;
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.eat(TokenKind::RParen) {
            loop {
                params.push(self.ident()?);
                if self.eat(TokenKind::RParen) {
                    break;
                }
                self.expect(TokenKind::Comma)?;
            }
        }
        let body = self.block()?;
        Ok(Method { name, params, body })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        self.expect(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(TokenKind::RBrace) {
            if self.peek().is_none() {
                return self.error("'}'");
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        let line = self.line();
        let kind = match self.peek_kind() {
            Some(TokenKind::Ident) => {
                let a = self.simple()?;
                self.expect(TokenKind::Semi)?;
                StmtKind::Assign(a)
            }
            Some(TokenKind::If) => {
                self.pos += 1;
                let cond = self.paren_expr()?;
                let then_body = self.block()?;
                let else_body = if self.eat(TokenKind::Else) {
                    Some(self.block()?)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                }
            }
            Some(TokenKind::While) => {
                self.pos += 1;
                let cond = self.paren_expr()?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            Some(TokenKind::For) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let init = self.simple()?;
                self.expect(TokenKind::Semi)?;
                let cond = self.expr()?;
                self.expect(TokenKind::Semi)?;
                let update = self.simple()?;
                self.expect(TokenKind::RParen)?;
                let body = self.block()?;
                StmtKind::For {
                    init,
                    cond,
                    update,
                    body,
                }
            }
            Some(TokenKind::Switch) => {
                self.pos += 1;
                let scrutinee = self.paren_expr()?;
                self.expect(TokenKind::LBrace)?;
                let mut cases = Vec::new();
                while self.eat(TokenKind::Case) {
                    let label = self.int_literal()?;
                    self.expect(TokenKind::Colon)?;
                    let body = self.block()?;
                    cases.push(SwitchCase { label, body });
                }
                let default = if self.eat(TokenKind::Default) {
                    self.expect(TokenKind::Colon)?;
                    Some(self.block()?)
                } else {
                    None
                };
                self.expect(TokenKind::RBrace)?;
                StmtKind::Switch {
                    scrutinee,
                    cases,
                    default,
                }
            }
            Some(TokenKind::Call) => {
                self.pos += 1;
                let callee = self.ident()?;
                self.expect(TokenKind::LParen)?;
                let mut args = Vec::new();
                if !self.eat(TokenKind::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(TokenKind::RParen) {
                            break;
                        }
                        self.expect(TokenKind::Comma)?;
                    }
                }
                self.expect(TokenKind::Semi)?;
                StmtKind::Call { callee, args }
            }
            Some(TokenKind::Return) => {
                self.pos += 1;
                if self.eat(TokenKind::Semi) {
                    StmtKind::Return(None)
                } else {
                    let e = self.expr()?;
                    self.expect(TokenKind::Semi)?;
                    StmtKind::Return(Some(e))
                }
            }
            Some(TokenKind::Throw) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::Semi)?;
                StmtKind::Throw(e)
            }
            Some(TokenKind::Skip) => {
                self.pos += 1;
                self.expect(TokenKind::Semi)?;
                StmtKind::Skip
            }
            _ => return self.error("statement"),
        };
        Ok(Stmt { kind, line })
    }

    fn int_literal(&mut self) -> Result<i64, FrontendError> {
        let negative = self.eat(TokenKind::Minus);
        let tok = self.expect(TokenKind::Int)?;
        let v: i64 = tok.text.parse().map_err(|_| FrontendError::Parse {
            line: tok.line,
            expected: "integer in 64-bit range".into(),
            found: tok.text.clone(),
        })?;
        Ok(if negative { -v } else { v })
    }

    /// `IDENT ["[" expr "]"] "=" expr`
    fn simple(&mut self) -> Result<Assign, FrontendError> {
        let name = self.ident()?;
        let index = if self.eat(TokenKind::LBracket) {
            let e = self.expr()?;
            self.expect(TokenKind::RBracket)?;
            Some(e)
        } else {
            None
        };
        self.expect(TokenKind::Eq)?;
        let value = self.expr()?;
        Ok(Assign {
            target: LValue { name, index },
            value,
        })
    }

    fn paren_expr(&mut self) -> Result<Expr, FrontendError> {
        self.expect(TokenKind::LParen)?;
        let e = self.expr()?;
        self.expect(TokenKind::RParen)?;
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.binary(1)
    }

    fn binary_op(kind: TokenKind) -> Option<BinOp> {
        Some(match kind {
            TokenKind::OrOr => BinOp::Or,
            TokenKind::AndAnd => BinOp::And,
            TokenKind::EqEq => BinOp::Eq,
            TokenKind::Ne => BinOp::Ne,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            TokenKind::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_kind().and_then(Self::binary_op) {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        if self.eat(TokenKind::Bang) {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat(TokenKind::Minus) {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Int => {
                self.pos += 1;
                t.text.parse().map(Expr::Int).map_err(|_| FrontendError::Parse {
                    line: t.line,
                    expected: "integer in 64-bit range".into(),
                    found: t.text.clone(),
                })
            }
            Some(t) if t.kind == TokenKind::Ident => {
                self.pos += 1;
                if self.eat(TokenKind::LBracket) {
                    let idx = self.expr()?;
                    self.expect(TokenKind::RBracket)?;
                    Ok(Expr::Index(t.text.clone(), Box::new(idx)))
                } else {
                    Ok(Expr::Var(t.text.clone()))
                }
            }
            Some(t) if t.kind == TokenKind::Input => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                self.expect(TokenKind::RParen)?;
                Ok(Expr::Input)
            }
            Some(t) if t.kind == TokenKind::LParen => self.paren_expr(),
            _ => self.error("expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::tokenize;

    fn parse_src(src: &str) -> Result<Method, FrontendError> {
        parse(&tokenize(src).unwrap())
    }

    #[test]
    fn single_assignment() {
        let m = parse_src("def m(a){ x = a; }").unwrap();
        assert_eq!(m.name, "m");
        assert_eq!(m.params, vec!["a"]);
        assert_eq!(m.body.len(), 1);
        match &m.body[0].kind {
            StmtKind::Assign(a) => {
                assert_eq!(a.target.name, "x");
                assert_eq!(a.value, Expr::Var("a".into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn if_without_else() {
        let m = parse_src("def m(){ if (x > 0) { skip; } }").unwrap();
        match &m.body[0].kind {
            StmtKind::If {
                cond, else_body, ..
            } => {
                assert_eq!(
                    *cond,
                    Expr::binary(BinOp::Gt, Expr::Var("x".into()), Expr::Int(0))
                );
                assert!(else_body.is_none());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_operand() {
        match parse_src("def m(){ x = ; }") {
            Err(FrontendError::Parse { line, expected, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(expected, "expression");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_source_is_a_parse_error() {
        assert!(matches!(parse(&[]), Err(FrontendError::Parse { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let m = parse_src("def m(a,b,c){ x = a - b - c * 2 < 3 && !(a == b) || c; }").unwrap();
        let StmtKind::Assign(a) = &m.body[0].kind else {
            panic!()
        };
        assert_eq!(a.value.to_string(), "a - b - c * 2 < 3 && !(a == b) || c");
        let StmtKind::Assign(a2) = &parse_src("def m(a,b,c){ x = a - (b - c); }").unwrap().body[0].kind
        else {
            panic!()
        };
        assert_eq!(a2.value.to_string(), "a - (b - c)");
    }

    #[test]
    fn full_grammar_round_trips_through_printer() {
        let src = "def f(n, arr) {
            s = 0;
            for (i = 0; i < n; i = i + 1) { s = s + arr[i]; }
            while (s > 10) { s = s - input(); }
            switch (s % 3) { case 0: { call log(s, 1); } case 1: { skip; } default: { throw -1; } }
            arr[0] = s;
            if (s == 0) { return; } else { return s; }
        }";
        let m = parse_src(src).unwrap();
        let printed = m.to_source();
        let again = parse_src(&printed).unwrap();
        assert_eq!(printed, again.to_source());
    }

    #[test]
    fn trailing_tokens_rejected() {
        assert!(matches!(
            parse_src("def m(){ } def n(){ }"),
            Err(FrontendError::Parse { .. })
        ));
    }
}
