//! Class-algebra expressions: abstract syntax, parser and canonical printer.
//!
//! Class level: `a + b`, `a - b`, `a * b`, `x.rel`, `x.inv(rel)`, `x where cond`.
//! Precedence from loosest to tightest: `where`, `+`/`-`, `*`, postfix dot.
//!
//! Condition level: `V` (or), `&` (and), `~` (not), parentheses and basic
//! predicates. A `~` written directly against a comparison or containment
//! operator (`age~>5`, `tags ~has {1}`) is part of that operator, not a
//! connective.

mod lexer;
mod parser;
mod print;

use std::collections::BTreeSet;

use crate::value::{PrimitiveClass, Value};

pub(crate) use lexer::Tok;
pub use parser::{parse_class_expr, parse_where_cond, Parser};

/// Words that cannot be used as class, relation or attribute names.
pub const RESERVED: &[&str] = &["where", "inv", "This", "V", "in", "has", "true", "false"];

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !RESERVED.contains(&s)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassExpr {
    /// A defined class, or one of the builtins `any` / `empty`.
    Name(String),
    Union(Box<ClassExpr>, Box<ClassExpr>),
    Difference(Box<ClassExpr>, Box<ClassExpr>),
    Intersection(Box<ClassExpr>, Box<ClassExpr>),
    /// `x.r` or `x.inv(r)`.
    Dot(Box<ClassExpr>, PathStep),
    Where(Box<ClassExpr>, WhereCond),
}

impl ClassExpr {
    pub fn name(s: impl Into<String>) -> Self {
        ClassExpr::Name(s.into())
    }

    pub fn any() -> Self {
        ClassExpr::Name("any".into())
    }

    pub fn union(a: ClassExpr, b: ClassExpr) -> Self {
        ClassExpr::Union(Box::new(a), Box::new(b))
    }

    pub fn intersection(a: ClassExpr, b: ClassExpr) -> Self {
        ClassExpr::Intersection(Box::new(a), Box::new(b))
    }

    pub fn difference(a: ClassExpr, b: ClassExpr) -> Self {
        ClassExpr::Difference(Box::new(a), Box::new(b))
    }

    pub fn dot(a: ClassExpr, step: PathStep) -> Self {
        ClassExpr::Dot(Box::new(a), step)
    }

    pub fn where_(a: ClassExpr, w: WhereCond) -> Self {
        ClassExpr::Where(Box::new(a), w)
    }

    /// Names of classes this expression refers to, builtins excluded.
    pub fn class_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            ClassExpr::Name(n) => {
                if n != "any" && n != "empty" {
                    out.insert(n.clone());
                }
            }
            ClassExpr::Union(a, b)
            | ClassExpr::Difference(a, b)
            | ClassExpr::Intersection(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            ClassExpr::Dot(a, _) => a.collect_names(out),
            ClassExpr::Where(a, w) => {
                a.collect_names(out);
                w.collect_names(out);
            }
        }
    }
}

/// One step of a relation path; `inverse` walks the edges backwards.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathStep {
    pub relation: String,
    pub inverse: bool,
}

impl PathStep {
    pub fn forward(r: impl Into<String>) -> Self {
        PathStep {
            relation: r.into(),
            inverse: false,
        }
    }

    pub fn backward(r: impl Into<String>) -> Self {
        PathStep {
            relation: r.into(),
            inverse: true,
        }
    }

    pub fn reversed(&self) -> Self {
        PathStep {
            relation: self.relation.clone(),
            inverse: !self.inverse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WhereCond {
    Const(bool),
    And(Box<WhereCond>, Box<WhereCond>),
    Or(Box<WhereCond>, Box<WhereCond>),
    Not(Box<WhereCond>),
    Pred(Predicate),
}

impl WhereCond {
    pub fn and(a: WhereCond, b: WhereCond) -> Self {
        WhereCond::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: WhereCond, b: WhereCond) -> Self {
        WhereCond::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: WhereCond) -> Self {
        WhereCond::Not(Box::new(a))
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            WhereCond::Const(_) => {}
            WhereCond::And(a, b) | WhereCond::Or(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            WhereCond::Not(a) => a.collect_names(out),
            WhereCond::Pred(Predicate::Membership { target, .. }) => target.collect_names(out),
            WhereCond::Pred(_) => {}
        }
    }
}

/// `relation.relation.attribute`; the attribute is always last.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrExp {
    pub relations: Vec<String>,
    pub attribute: String,
}

impl AttrExp {
    pub fn plain(attr: impl Into<String>) -> Self {
        AttrExp {
            relations: Vec::new(),
            attribute: attr.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
}

/// A comparison operator; `complement` is the fused `~` form (`~<`, `~=`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelOp {
    pub cmp: Cmp,
    pub complement: bool,
}

impl RelOp {
    pub const fn plain(cmp: Cmp) -> Self {
        RelOp {
            cmp,
            complement: false,
        }
    }

    pub const fn tilde(cmp: Cmp) -> Self {
        RelOp {
            cmp,
            complement: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContainKind {
    Has,
    In,
}

/// Fused negation on a containment operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContainMode {
    /// `has`
    Plain,
    /// `~has`: true complement.
    Complement,
    /// `-has`: quasi-complement, unknown when the attribute is undefined.
    Quasi,
    /// `~-has`
    ComplementQuasi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContainOp {
    pub kind: ContainKind,
    pub mode: ContainMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Aggr {
    Cnt,
    Sum,
    Avg,
    Std,
    Min,
    Max,
}

impl Aggr {
    pub const ALL: [Aggr; 6] = [
        Aggr::Cnt,
        Aggr::Sum,
        Aggr::Avg,
        Aggr::Std,
        Aggr::Min,
        Aggr::Max,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Aggr::Cnt => "cnt",
            Aggr::Sum => "sum",
            Aggr::Avg => "avg",
            Aggr::Std => "std",
            Aggr::Min => "min",
            Aggr::Max => "max",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Aggr::ALL.into_iter().find(|a| a.keyword() == s)
    }
}

impl std::fmt::Display for Aggr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    /// `attr in number`
    TypeTest {
        attr: AttrExp,
        class: PrimitiveClass,
    },
    /// `attr has {..}`, `attr -in {..}`, ...
    Contain {
        attr: AttrExp,
        op: ContainOp,
        values: BTreeSet<Value>,
    },
    /// `attr < 30`
    Compare {
        attr: AttrExp,
        op: RelOp,
        value: Value,
    },
    /// `cnt(attr) >= 2`
    Aggregate {
        func: Aggr,
        attr: AttrExp,
        op: RelOp,
        value: Value,
    },
    /// `This in C` (empty path) or `inv(r.s) in C`: the object is reachable
    /// from some member of `target` along the path.
    Membership {
        path: Vec<PathStep>,
        target: Box<ClassExpr>,
    },
}

impl Predicate {
    pub fn compare(attr: &str, cmp: Cmp, value: Value) -> Self {
        Predicate::Compare {
            attr: AttrExp::plain(attr),
            op: RelOp::plain(cmp),
            value,
        }
    }
}
