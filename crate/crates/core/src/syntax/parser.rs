use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::value::{PrimitiveClass, Value};

use super::lexer::{tokenize, Tok, Token};
use super::{
    Aggr, AttrExp, ClassExpr, ContainKind, ContainMode, ContainOp, PathStep, Predicate, WhereCond,
    RESERVED,
};

pub fn parse_class_expr(text: &str) -> Result<ClassExpr> {
    let mut p = Parser::new(text)?;
    let e = p.class_expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_where_cond(text: &str) -> Result<WhereCond> {
    let mut p = Parser::new(text)?;
    let w = p.where_cond()?;
    p.expect_eof()?;
    Ok(w)
}

/// Recursive-descent parser over a token stream.
pub struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    pub fn new(text: &str) -> Result<Self> {
        Ok(Parser {
            toks: tokenize(text)?,
            at: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.at + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn pos(&self) -> usize {
        self.toks[self.at].pos
    }

    pub(crate) fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    pub(crate) fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    pub(crate) fn eat_word(&mut self, w: &str) -> bool {
        if self.at_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn unexpected(&self, expected: &str) -> Error {
        let found = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            t => format!("{t:?}"),
        };
        Error::syntax(self.pos(), format!("expected {expected}, found {found}"))
    }

    pub fn expect_eof(&mut self) -> Result<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn name(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    // ---- class level ----

    pub fn class_expr(&mut self) -> Result<ClassExpr> {
        let mut e = self.additive()?;
        while self.eat_word("where") {
            let w = self.where_cond()?;
            e = ClassExpr::where_(e, w);
        }
        Ok(e)
    }

    fn additive(&mut self) -> Result<ClassExpr> {
        let mut e = self.multiplicative()?;
        loop {
            if self.eat(&Tok::Plus) {
                e = ClassExpr::union(e, self.multiplicative()?);
            } else if self.eat(&Tok::Minus) {
                e = ClassExpr::difference(e, self.multiplicative()?);
            } else {
                return Ok(e);
            }
        }
    }

    fn multiplicative(&mut self) -> Result<ClassExpr> {
        let mut e = self.postfix()?;
        while self.eat(&Tok::Star) {
            e = ClassExpr::intersection(e, self.postfix()?);
        }
        Ok(e)
    }

    fn postfix(&mut self) -> Result<ClassExpr> {
        let mut e = if self.eat(&Tok::LParen) {
            let inner = self.class_expr()?;
            self.expect(Tok::RParen, "`)`")?;
            inner
        } else {
            ClassExpr::Name(self.name("class name")?)
        };
        while self.eat(&Tok::Dot) {
            e = ClassExpr::dot(e, self.path_step()?);
        }
        Ok(e)
    }

    fn path_step(&mut self) -> Result<PathStep> {
        if self.at_word("inv") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.bump();
            let r = self.name("relation name")?;
            self.expect(Tok::RParen, "`)`")?;
            Ok(PathStep::backward(r))
        } else {
            Ok(PathStep::forward(self.name("relation name")?))
        }
    }

    // ---- condition level ----

    pub fn where_cond(&mut self) -> Result<WhereCond> {
        let mut w = self.conjunction()?;
        while self.eat_word("V") {
            w = WhereCond::or(w, self.conjunction()?);
        }
        Ok(w)
    }

    fn conjunction(&mut self) -> Result<WhereCond> {
        let mut w = self.unary()?;
        while self.eat(&Tok::Amp) {
            w = WhereCond::and(w, self.unary()?);
        }
        Ok(w)
    }

    fn unary(&mut self) -> Result<WhereCond> {
        if self.eat(&Tok::Tilde) {
            return Ok(WhereCond::not(self.unary()?));
        }
        if self.eat(&Tok::LParen) {
            let w = self.where_cond()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(w);
        }
        if self.eat_word("true") {
            return Ok(WhereCond::Const(true));
        }
        if self.eat_word("false") {
            return Ok(WhereCond::Const(false));
        }
        Ok(WhereCond::Pred(self.predicate()?))
    }

    fn predicate(&mut self) -> Result<Predicate> {
        if self.eat_word("This") {
            return self.membership(Vec::new());
        }
        if self.at_word("inv") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.bump();
            let mut path = vec![self.path_step()?];
            while self.eat(&Tok::Dot) {
                path.push(self.path_step()?);
            }
            self.expect(Tok::RParen, "`)`")?;
            return self.membership(path);
        }
        if let Tok::Ident(word) = self.peek().clone() {
            if let Some(func) = Aggr::from_keyword(&word) {
                if *self.peek_at(1) == Tok::LParen {
                    self.bump();
                    self.bump();
                    let attr = self.attr_exp()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let pos = self.pos();
                    let op = match self.bump() {
                        Tok::Rel(op) => op,
                        _ => return Err(Error::syntax(pos, "expected comparison operator")),
                    };
                    let vpos = self.pos();
                    let value = self.constant()?;
                    if !matches!(value, Value::Number(_)) {
                        return Err(Error::syntax(
                            vpos,
                            format!("`{func}` must be compared with a number"),
                        ));
                    }
                    return Ok(Predicate::Aggregate {
                        func,
                        attr,
                        op,
                        value,
                    });
                }
            }
        }
        let attr = self.attr_exp()?;
        let pos = self.pos();
        match self.bump() {
            Tok::Rel(op) => {
                let value = self.constant()?;
                Ok(Predicate::Compare { attr, op, value })
            }
            Tok::Contain(op) => {
                let values = self.value_set()?;
                Ok(Predicate::Contain { attr, op, values })
            }
            Tok::Ident(w) if w == "has" => {
                let values = self.value_set()?;
                Ok(Predicate::Contain {
                    attr,
                    op: ContainOp {
                        kind: ContainKind::Has,
                        mode: ContainMode::Plain,
                    },
                    values,
                })
            }
            Tok::Ident(w) if w == "in" => {
                if *self.peek() == Tok::LBrace {
                    let values = self.value_set()?;
                    return Ok(Predicate::Contain {
                        attr,
                        op: ContainOp {
                            kind: ContainKind::In,
                            mode: ContainMode::Plain,
                        },
                        values,
                    });
                }
                let class = if self.eat_word("number") {
                    PrimitiveClass::Number
                } else if self.eat_word("string") {
                    PrimitiveClass::String
                } else {
                    return Err(self.unexpected("`number`, `string` or a value set"));
                };
                Ok(Predicate::TypeTest { attr, class })
            }
            _ => Err(Error::syntax(
                pos,
                "expected comparison or containment operator",
            )),
        }
    }

    fn membership(&mut self, path: Vec<PathStep>) -> Result<Predicate> {
        if !self.eat_word("in") {
            return Err(self.unexpected("`in`"));
        }
        let target = self.postfix()?;
        Ok(Predicate::Membership {
            path,
            target: Box::new(target),
        })
    }

    fn attr_exp(&mut self) -> Result<AttrExp> {
        let mut names = vec![self.name("attribute name")?];
        while self.eat(&Tok::Dot) {
            names.push(self.name("attribute or relation name")?);
        }
        let attribute = names.pop().expect("at least one name");
        Ok(AttrExp {
            relations: names,
            attribute,
        })
    }

    pub(crate) fn constant(&mut self) -> Result<Value> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Value::Number(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Value::Str(s))
            }
            _ => Err(self.unexpected("number or string constant")),
        }
    }

    fn value_set(&mut self) -> Result<BTreeSet<Value>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = BTreeSet::new();
        if self.eat(&Tok::RBrace) {
            return Ok(out);
        }
        loop {
            out.insert(self.constant()?);
            if self.eat(&Tok::RBrace) {
                return Ok(out);
            }
            self.expect(Tok::Comma, "`,` or `}`")?;
        }
    }
}
