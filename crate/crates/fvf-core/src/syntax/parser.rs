//! Recursive-descent parser.
//!
//! Grammar notes beyond the obvious:
//! - `;` is right-associative and binds looser than `if`/`while`, so in
//!   `while b inv a do c1; c2` the loop body is just `c1` and `c2` runs
//!   after the loop. Parenthesize, as in `do (c1; c2)`, to sequence inside
//!   a branch or body.
//! - In chunk assertions all fixed arguments must precede all `?x` patterns.
//! - `?_` wildcards are only legal in `open` and only as a trailing run.

use super::ast::*;
use super::lexer::{lex, Keyword, LexError, Pos, Spanned, Token};
use super::wf::{check_program, StaticError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("lex error: {0}")]
    Lex(#[from] LexError),
    #[error("{pos}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        pos: Pos,
        expected: Vec<String>,
        found: String,
    },
    #[error("{}", render_static(.0))]
    Static(Vec<StaticError>),
}

fn render_static(errors: &[StaticError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

pub type ParseResult<T> = Result<T, ParseError>;

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|s| &s.token)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1).map(|s| &s.token)
    }

    fn here(&self) -> Pos {
        self.tokens.get(self.pos).map(|s| s.pos).unwrap_or(self.end)
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".to_string(),
        }
    }

    fn error<T>(&self, expected: &[&str]) -> ParseResult<T> {
        Err(ParseError::Syntax {
            pos: self.here(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.found(),
        })
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Token) -> ParseResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.error(&[&t.to_string()])
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> ParseResult<()> {
        self.expect(Token::Kw(kw))
    }

    fn expect_ident(&mut self) -> ParseResult<String> {
        match self.peek() {
            Some(Token::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn expect_nat(&mut self) -> ParseResult<i64> {
        match self.peek() {
            Some(Token::Nat(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.error(&["number"]),
        }
    }

    // ---- expressions -------------------------------------------------

    fn parse_expr(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            if self.eat(&Token::Plus) {
                let rhs = self.parse_term()?;
                lhs = Expr::add(lhs, rhs);
            } else if self.eat(&Token::Minus) {
                let rhs = self.parse_term()?;
                lhs = Expr::sub(lhs, rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_term(&mut self) -> ParseResult<Expr> {
        match self.peek() {
            Some(Token::Nat(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(Expr::IntLit(n))
            }
            Some(Token::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(Expr::Var(name))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let e = self.parse_expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            _ => self.error(&["number", "identifier", "'('"]),
        }
    }

    fn parse_bexpr(&mut self) -> ParseResult<BoolExpr> {
        if self.eat(&Token::Bang) {
            return Ok(BoolExpr::not(self.parse_bexpr()?));
        }
        if self.peek() == Some(&Token::LParen) {
            // Either a parenthesized comparison operand or a parenthesized
            // boolean expression; try the comparison reading first.
            let save = self.pos;
            if let Ok(lhs) = self.parse_expr() {
                if matches!(self.peek(), Some(Token::Eq) | Some(Token::Lt)) {
                    return self.parse_comparison_tail(lhs);
                }
            }
            self.pos = save;
            self.expect(Token::LParen)?;
            let b = self.parse_bexpr()?;
            self.expect(Token::RParen)?;
            return Ok(b);
        }
        let lhs = self.parse_expr()?;
        self.parse_comparison_tail(lhs)
    }

    fn parse_comparison_tail(&mut self, lhs: Expr) -> ParseResult<BoolExpr> {
        if self.eat(&Token::Eq) {
            Ok(BoolExpr::Eq(lhs, self.parse_expr()?))
        } else if self.eat(&Token::Lt) {
            Ok(BoolExpr::Lt(lhs, self.parse_expr()?))
        } else {
            self.error(&["'='", "'<'"])
        }
    }

    // ---- assertions ---------------------------------------------------

    fn parse_assertion(&mut self) -> ParseResult<Assertion> {
        let lhs = self.parse_aterm()?;
        if self.eat(&Token::Star) {
            let rhs = self.parse_assertion()?;
            Ok(Assertion::sep(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_aterm(&mut self) -> ParseResult<Assertion> {
        match self.peek() {
            Some(Token::Kw(Keyword::If)) => {
                self.pos += 1;
                let cond = self.parse_bexpr()?;
                self.expect_kw(Keyword::Then)?;
                let then_a = self.parse_assertion()?;
                self.expect_kw(Keyword::Else)?;
                let else_a = self.parse_assertion()?;
                Ok(Assertion::IfThenElse {
                    cond,
                    then_a: Box::new(then_a),
                    else_a: Box::new(else_a),
                })
            }
            Some(Token::Bang) => Ok(Assertion::Bool(self.parse_bexpr()?)),
            Some(Token::LParen) => {
                self.pos += 1;
                let a = self.parse_assertion()?;
                self.expect(Token::RParen)?;
                Ok(a)
            }
            Some(Token::Ident(_)) if self.peek2() == Some(&Token::LParen) => {
                let name = self.expect_ident()?;
                self.expect(Token::LParen)?;
                let (args, patterns) = self.parse_aargs()?;
                Ok(Assertion::Pred {
                    name: PredName::from_ident(&name),
                    args,
                    patterns,
                })
            }
            _ => {
                let lhs = self.parse_expr()?;
                if self.eat(&Token::MapsTo) {
                    if self.eat(&Token::Quest) {
                        let pat = self.parse_pattern_name()?;
                        Ok(Assertion::Pred {
                            name: PredName::PointsTo,
                            args: vec![lhs],
                            patterns: vec![pat],
                        })
                    } else {
                        let value = self.parse_expr()?;
                        Ok(Assertion::points_to(lhs, value))
                    }
                } else {
                    Ok(Assertion::Bool(self.parse_comparison_tail(lhs)?))
                }
            }
        }
    }

    fn parse_pattern_name(&mut self) -> ParseResult<String> {
        let name = self.expect_ident()?;
        if name == "_" {
            return self.error(&["pattern name ('?_' is only allowed in open)"]);
        }
        Ok(name)
    }

    fn parse_aargs(&mut self) -> ParseResult<(Vec<Expr>, Vec<String>)> {
        let mut args = Vec::new();
        let mut patterns = Vec::new();
        if self.eat(&Token::RParen) {
            return Ok((args, patterns));
        }
        loop {
            if self.eat(&Token::Quest) {
                patterns.push(self.parse_pattern_name()?);
            } else {
                if !patterns.is_empty() {
                    return self.error(&["'?' pattern (fixed arguments must precede patterns)"]);
                }
                args.push(self.parse_expr()?);
            }
            if self.eat(&Token::RParen) {
                return Ok((args, patterns));
            }
            self.expect(Token::Comma)?;
        }
    }

    // ---- commands -----------------------------------------------------

    fn parse_command(&mut self) -> ParseResult<Command> {
        let first = self.parse_simple()?;
        if self.eat(&Token::Semi) {
            let rest = self.parse_command()?;
            Ok(Command::seq(first, rest))
        } else {
            Ok(first)
        }
    }

    fn parse_simple(&mut self) -> ParseResult<Command> {
        match self.peek() {
            Some(Token::Kw(Keyword::If)) => {
                self.pos += 1;
                let cond = self.parse_bexpr()?;
                self.expect_kw(Keyword::Then)?;
                let then_c = self.parse_simple()?;
                self.expect_kw(Keyword::Else)?;
                let else_c = self.parse_simple()?;
                Ok(Command::If(cond, Box::new(then_c), Box::new(else_c)))
            }
            Some(Token::Kw(Keyword::While)) => {
                self.pos += 1;
                let cond = self.parse_bexpr()?;
                self.expect_kw(Keyword::Inv)?;
                let invariant = self.parse_assertion()?;
                self.expect_kw(Keyword::Do)?;
                let body = self.parse_simple()?;
                Ok(Command::While {
                    cond,
                    invariant,
                    body: Box::new(body),
                })
            }
            Some(Token::Kw(Keyword::Skip)) => {
                self.pos += 1;
                Ok(Command::Skip)
            }
            Some(Token::Kw(Keyword::Message)) => {
                self.pos += 1;
                match self.peek() {
                    Some(Token::Str(text)) => {
                        let text = text.clone();
                        self.pos += 1;
                        Ok(Command::Message(text))
                    }
                    _ => self.error(&["string literal"]),
                }
            }
            Some(Token::Kw(Keyword::Free)) => {
                self.pos += 1;
                self.expect(Token::LParen)?;
                let e = self.parse_expr()?;
                self.expect(Token::RParen)?;
                Ok(Command::Free(e))
            }
            Some(Token::Kw(Keyword::Open)) => {
                self.pos += 1;
                let pred = self.expect_ident()?;
                self.expect(Token::LParen)?;
                let (args, wildcards) = self.parse_openargs()?;
                Ok(Command::Open {
                    pred,
                    args,
                    wildcards,
                })
            }
            Some(Token::Kw(Keyword::Close)) => {
                self.pos += 1;
                let pred = self.expect_ident()?;
                self.expect(Token::LParen)?;
                let args = self.parse_call_args()?;
                Ok(Command::Close { pred, args })
            }
            Some(Token::LBrack) => {
                self.pos += 1;
                let addr = self.parse_expr()?;
                self.expect(Token::RBrack)?;
                self.expect(Token::Assign)?;
                let value = self.parse_expr()?;
                Ok(Command::Write { addr, value })
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let c = self.parse_command()?;
                self.expect(Token::RParen)?;
                Ok(c)
            }
            Some(Token::Ident(_)) if self.peek2() == Some(&Token::LParen) => {
                let routine = self.expect_ident()?;
                self.expect(Token::LParen)?;
                let args = self.parse_call_args()?;
                Ok(Command::Call {
                    ret: None,
                    routine,
                    args,
                })
            }
            Some(Token::Ident(_)) => {
                let target = self.expect_ident()?;
                self.expect(Token::Assign)?;
                match self.peek() {
                    Some(Token::Kw(Keyword::Malloc)) => {
                        self.pos += 1;
                        self.expect(Token::LParen)?;
                        let pos = self.here();
                        let n = self.expect_nat()?;
                        let size = u32::try_from(n).map_err(|_| ParseError::Syntax {
                            pos,
                            expected: vec!["malloc cell count".to_string()],
                            found: format!("number {n}"),
                        })?;
                        self.expect(Token::RParen)?;
                        Ok(Command::Malloc { target, size })
                    }
                    Some(Token::LBrack) => {
                        self.pos += 1;
                        let addr = self.parse_expr()?;
                        self.expect(Token::RBrack)?;
                        Ok(Command::Read { target, addr })
                    }
                    Some(Token::Ident(_)) if self.peek2() == Some(&Token::LParen) => {
                        let routine = self.expect_ident()?;
                        self.expect(Token::LParen)?;
                        let args = self.parse_call_args()?;
                        Ok(Command::Call {
                            ret: Some(target),
                            routine,
                            args,
                        })
                    }
                    _ => Ok(Command::Assign(target, self.parse_expr()?)),
                }
            }
            _ => self.error(&["command"]),
        }
    }

    fn parse_call_args(&mut self) -> ParseResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat(&Token::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.parse_expr()?);
            if self.eat(&Token::RParen) {
                return Ok(args);
            }
            self.expect(Token::Comma)?;
        }
    }

    fn parse_openargs(&mut self) -> ParseResult<(Vec<Expr>, u32)> {
        let mut args = Vec::new();
        let mut wildcards = 0u32;
        if self.eat(&Token::RParen) {
            return Ok((args, wildcards));
        }
        loop {
            if self.eat(&Token::Quest) {
                let name = self.expect_ident()?;
                if name != "_" {
                    return self.error(&["'?_' (open takes wildcards, not named patterns)"]);
                }
                wildcards += 1;
            } else {
                if wildcards > 0 {
                    return self.error(&["'?_' (wildcards must come last)"]);
                }
                args.push(self.parse_expr()?);
            }
            if self.eat(&Token::RParen) {
                return Ok((args, wildcards));
            }
            self.expect(Token::Comma)?;
        }
    }

    // ---- definitions --------------------------------------------------

    fn parse_params(&mut self) -> ParseResult<Vec<String>> {
        self.expect(Token::LParen)?;
        let mut params = Vec::new();
        if self.eat(&Token::RParen) {
            return Ok(params);
        }
        loop {
            params.push(self.expect_ident()?);
            if self.eat(&Token::RParen) {
                return Ok(params);
            }
            self.expect(Token::Comma)?;
        }
    }

    fn parse_program(&mut self) -> ParseResult<(Program, Vec<(String, Pos)>)> {
        let mut predicates = Vec::new();
        let mut routines = Vec::new();
        let mut def_spans = Vec::new();
        loop {
            match self.peek() {
                Some(Token::Kw(Keyword::Predicate)) => {
                    let pos = self.here();
                    self.pos += 1;
                    let name = self.expect_ident()?;
                    let params = self.parse_params()?;
                    self.expect(Token::Eq)?;
                    let body = self.parse_assertion()?;
                    def_spans.push((format!("predicate {name}"), pos));
                    predicates.push(PredicateDef { name, params, body });
                }
                Some(Token::Kw(Keyword::Routine)) => {
                    let pos = self.here();
                    self.pos += 1;
                    let name = self.expect_ident()?;
                    let params = self.parse_params()?;
                    self.expect_kw(Keyword::Req)?;
                    let pre = self.parse_assertion()?;
                    self.expect_kw(Keyword::Ens)?;
                    let post = self.parse_assertion()?;
                    self.expect(Token::Eq)?;
                    let body = self.parse_command()?;
                    def_spans.push((format!("routine {name}"), pos));
                    routines.push(RoutineDef {
                        name,
                        params,
                        pre,
                        post,
                        body,
                    });
                }
                _ => break,
            }
        }
        let main = self.parse_command()?;
        if self.pos != self.tokens.len() {
            return self.error(&["end of input"]);
        }
        Ok((
            Program {
                predicates,
                routines,
                main,
            },
            def_spans,
        ))
    }
}

/// Parses and statically checks a whole program. Any well-formedness
/// violation (duplicate names, unknown or misapplied predicates and
/// routines, reserved-name misuse) is reported as `ParseError::Static`.
pub fn parse_program(src: &str) -> ParseResult<Program> {
    let tokens = lex(src)?;
    let end = tokens
        .last()
        .map(|s| Pos {
            line: s.pos.line,
            col: s.pos.col + 1,
        })
        .unwrap_or(Pos { line: 1, col: 1 });
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
    };
    let (program, def_spans) = parser.parse_program()?;
    let errors = check_program(&program, &def_spans);
    if errors.is_empty() {
        Ok(program)
    } else {
        Err(ParseError::Static(errors))
    }
}

/// Parses a single command; used by tests that build fragments.
pub fn parse_command(src: &str) -> ParseResult<Command> {
    let tokens = lex(src)?;
    let end = Pos { line: 1, col: 1 };
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
    };
    let c = parser.parse_command()?;
    if parser.pos != parser.tokens.len() {
        return parser.error(&["end of input"]);
    }
    Ok(c)
}

/// Parses a single assertion; used by tests that build fragments.
pub fn parse_assertion(src: &str) -> ParseResult<Assertion> {
    let tokens = lex(src)?;
    let end = Pos { line: 1, col: 1 };
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
    };
    let a = parser.parse_assertion()?;
    if parser.pos != parser.tokens.len() {
        return parser.error(&["end of input"]);
    }
    Ok(a)
}
