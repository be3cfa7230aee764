//! Recursive descent over
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | variable | parameter | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! so `^` is right-associative and binds tighter than unary minus.

use super::lexer::{tokenize, Spanned, Tok};
use super::{BinOp, Func, Node, NodeKind, ParseError, Var};

const MAX_DEPTH: usize = 200;

const OPERAND: &[&str] = &["number", "variable", "parameter", "function", "'('", "'-'"];

pub(crate) struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    depth: usize,
    dim: usize,
    params: &'a [String],
}

impl<'a> Parser<'a> {
    pub(crate) fn new(text: &str, dim: usize, params: &'a [String]) -> Result<Self, ParseError> {
        Ok(Self {
            toks: tokenize(text)?,
            pos: 0,
            depth: 0,
            dim,
            params,
        })
    }

    pub(crate) fn parse(mut self) -> Result<Node, ParseError> {
        if self.peek() == &Tok::End {
            return Err(ParseError::new(0, "empty expression", OPERAND));
        }
        let node = self.expr()?;
        match self.peek() {
            Tok::End => Ok(node),
            Tok::RParen => Err(self.error("unbalanced ')'", &["operator", "end of input"])),
            _ => Err(self.error(
                format!("unexpected {}", self.peek().describe()),
                &["'+'", "'-'", "'*'", "'/'", "'^'", "end of input"],
            )),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        ParseError::new(self.offset(), message, expected)
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply", &[]));
        }
        Ok(())
    }

    // each chain element deepens the left-leaning tree, so it counts
    // against the depth budget as well
    fn expr(&mut self) -> Result<Node, ParseError> {
        let saved = self.depth;
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.enter()?;
            let (_, at) = self.bump();
            let rhs = self.term()?;
            lhs = Node::binary(op, lhs, rhs, at);
        }
        self.depth = saved;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let saved = self.depth;
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.enter()?;
            let (_, at) = self.bump();
            let rhs = self.unary()?;
            lhs = Node::binary(op, lhs, rhs, at);
        }
        self.depth = saved;
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek() == &Tok::Minus {
            self.enter()?;
            let (_, at) = self.bump();
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Node {
                kind: NodeKind::Neg(Box::new(inner)),
                pos: at,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.peek() != &Tok::Caret {
            return Ok(base);
        }
        self.enter()?;
        let (_, at) = self.bump();
        let exponent = self.unary()?;
        self.depth -= 1;
        Ok(Node::binary(BinOp::Pow, base, exponent, at))
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Node {
                    kind: NodeKind::Num(x),
                    pos: at,
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_close(at)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek() == &Tok::LParen {
                    return self.call(&name, at);
                }
                self.reference(&name, at)
            }
            Tok::End => Err(self.error("unexpected end of input", OPERAND)),
            Tok::RParen => Err(self.error("unbalanced ')'", OPERAND)),
            other => Err(self.error(format!("unexpected {}", other.describe()), OPERAND)),
        }
    }

    fn expect_close(&mut self, open: usize) -> Result<(), ParseError> {
        match self.peek() {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            Tok::End => Err(ParseError::new(
                self.offset(),
                format!("unbalanced '(' opened at {open}"),
                &["')'"],
            )),
            other => Err(self.error(format!("unexpected {}", other.describe()), &["')'", "operator"])),
        }
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Node, ParseError> {
        let Some(func) = Func::from_name(name) else {
            return Err(ParseError::new(at, format!("unknown function '{name}'"), &["function name"]));
        };
        let open = self.offset();
        self.bump();
        if self.peek() == &Tok::RParen {
            return Err(self.error(format!("{name} takes exactly 1 argument, got 0"), OPERAND));
        }
        let arg = self.expr()?;
        if self.peek() == &Tok::Comma {
            return Err(self.error(format!("{name} takes exactly 1 argument"), &["')'"]));
        }
        self.expect_close(open)?;
        Ok(Node {
            kind: NodeKind::Call(func, Box::new(arg)),
            pos: at,
        })
    }

    fn reference(&self, name: &str, at: usize) -> Result<Node, ParseError> {
        if let Some(var) = Var::resolve(name, self.dim) {
            return Ok(Node {
                kind: NodeKind::Var(var),
                pos: at,
            });
        }
        if let Some(i) = self.params.iter().position(|p| p == name) {
            return Ok(Node {
                kind: NodeKind::Param(i),
                pos: at,
            });
        }
        if Func::from_name(name).is_some() {
            return Err(ParseError::new(at, format!("function '{name}' needs an argument list"), &["'('"]));
        }
        Err(ParseError::new(
            at,
            format!("unknown identifier '{name}'"),
            &["variable", "parameter", "function"],
        ))
    }
}
