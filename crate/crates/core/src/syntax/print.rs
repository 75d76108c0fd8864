//! Canonical rendering. Output re-parses to the same tree.

use std::fmt::{self, Display, Formatter, Write};

use super::{
    AttrExp, ClassExpr, Cmp, ContainKind, ContainMode, ContainOp, PathStep, Predicate, RelOp,
    WhereCond,
};

fn class_prec(e: &ClassExpr) -> u8 {
    match e {
        ClassExpr::Where(..) => 0,
        ClassExpr::Union(..) | ClassExpr::Difference(..) => 1,
        ClassExpr::Intersection(..) => 2,
        ClassExpr::Name(_) | ClassExpr::Dot(..) => 3,
    }
}

fn write_class(f: &mut Formatter<'_>, e: &ClassExpr, min: u8) -> fmt::Result {
    if class_prec(e) < min {
        f.write_char('(')?;
        write_class(f, e, 0)?;
        return f.write_char(')');
    }
    match e {
        ClassExpr::Name(n) => f.write_str(n),
        ClassExpr::Union(a, b) => {
            write_class(f, a, 1)?;
            f.write_char('+')?;
            write_class(f, b, 2)
        }
        ClassExpr::Difference(a, b) => {
            write_class(f, a, 1)?;
            f.write_char('-')?;
            write_class(f, b, 2)
        }
        ClassExpr::Intersection(a, b) => {
            write_class(f, a, 2)?;
            f.write_char('*')?;
            write_class(f, b, 3)
        }
        ClassExpr::Dot(a, step) => {
            write_class(f, a, 3)?;
            write!(f, ".{step}")
        }
        ClassExpr::Where(a, w) => {
            write_class(f, a, 0)?;
            f.write_str(" where ")?;
            write_cond(f, w, 0)
        }
    }
}

fn cond_prec(w: &WhereCond) -> u8 {
    match w {
        WhereCond::Or(..) => 0,
        WhereCond::And(..) => 1,
        WhereCond::Not(_) => 2,
        WhereCond::Const(_) | WhereCond::Pred(_) => 3,
    }
}

fn write_cond(f: &mut Formatter<'_>, w: &WhereCond, min: u8) -> fmt::Result {
    if cond_prec(w) < min {
        f.write_char('(')?;
        write_cond(f, w, 0)?;
        return f.write_char(')');
    }
    match w {
        WhereCond::Const(b) => f.write_str(if *b { "true" } else { "false" }),
        WhereCond::Or(a, b) => {
            write_cond(f, a, 0)?;
            f.write_str(" V ")?;
            write_cond(f, b, 1)
        }
        WhereCond::And(a, b) => {
            write_cond(f, a, 1)?;
            f.write_char('&')?;
            write_cond(f, b, 2)
        }
        WhereCond::Not(a) => {
            f.write_char('~')?;
            write_cond(f, a, 2)
        }
        WhereCond::Pred(p) => write!(f, "{p}"),
    }
}

impl Display for ClassExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_class(f, self, 0)
    }
}

impl Display for WhereCond {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_cond(f, self, 0)
    }
}

impl Display for PathStep {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "inv({})", self.relation)
        } else {
            f.write_str(&self.relation)
        }
    }
}

impl Display for AttrExp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for r in &self.relations {
            write!(f, "{r}.")?;
        }
        f.write_str(&self.attribute)
    }
}

impl Display for Cmp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cmp::Lt => "<",
            Cmp::Gt => ">",
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        })
    }
}

impl Display for RelOp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.complement {
            f.write_char('~')?;
        }
        write!(f, "{}", self.cmp)
    }
}

impl Display for ContainOp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(match self.mode {
            ContainMode::Plain => "",
            ContainMode::Complement => "~",
            ContainMode::Quasi => "-",
            ContainMode::ComplementQuasi => "~-",
        })?;
        f.write_str(match self.kind {
            ContainKind::Has => "has",
            ContainKind::In => "in",
        })
    }
}

impl Display for Predicate {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::TypeTest { attr, class } => write!(f, "{attr} in {class}"),
            Predicate::Contain { attr, op, values } => {
                write!(f, "{attr} {op} {{")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_char('}')
            }
            Predicate::Compare { attr, op, value } => write!(f, "{attr}{op}{value}"),
            Predicate::Aggregate {
                func,
                attr,
                op,
                value,
            } => write!(f, "{func}({attr}){op}{value}"),
            Predicate::Membership { path, target } => {
                if path.is_empty() {
                    f.write_str("This")?;
                } else {
                    f.write_str("inv(")?;
                    for (i, s) in path.iter().enumerate() {
                        if i > 0 {
                            f.write_char('.')?;
                        }
                        write!(f, "{s}")?;
                    }
                    f.write_char(')')?;
                }
                f.write_str(" in ")?;
                write_class(f, target, 3)
            }
        }
    }
}
