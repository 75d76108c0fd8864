//! Sorted disjunctive normal form.
//!
//! Pipeline: inline named classes and turn dotted class expressions into
//! membership atoms, flatten to disjunctive form, close under consensus, widen
//! overlapping intervals, close again, then sort. Two expressions equivalent
//! under the comparison-chain theory render to the same text.

mod atoms;
mod intervals;
mod primes;

use std::fmt;

use crate::error::{Error, Result};
use crate::syntax::{ClassExpr, PathStep, Predicate, WhereCond};

pub use atoms::{atom_implies, AtomTable, Term, MAX_ATOMS};
pub use primes::Budget;

/// Looks up the stored intent of a named class.
pub trait ClassResolver {
    fn class_intent(&self, name: &str) -> Option<&Sdnf>;
}

/// Resolver with no user classes; only `any` and `empty` are known.
pub struct NoClasses;

impl ClassResolver for NoClasses {
    fn class_intent(&self, _: &str) -> Option<&Sdnf> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Predicate,
    pub negated: bool,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("~")?;
        }
        write!(f, "{}", self.atom)
    }
}

impl serde::Serialize for Literal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Literal {
    pub fn to_where(&self) -> WhereCond {
        let p = WhereCond::Pred(self.atom.clone());
        if self.negated {
            WhereCond::not(p)
        } else {
            p
        }
    }
}

/// Conjunction of literals sorted by their rendered text.
pub type Conjunct = Vec<Literal>;

/// A class intent: all prime implicants, sorted. The empty disjunction is
/// `false`; the single empty conjunct is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sdnf {
    conjuncts: Vec<Conjunct>,
}

impl Sdnf {
    pub fn always() -> Self {
        Sdnf {
            conjuncts: vec![Vec::new()],
        }
    }

    pub fn never() -> Self {
        Sdnf {
            conjuncts: Vec::new(),
        }
    }

    pub fn is_true(&self) -> bool {
        self.conjuncts.len() == 1 && self.conjuncts[0].is_empty()
    }

    pub fn is_false(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn conjuncts(&self) -> &[Conjunct] {
        &self.conjuncts
    }

    /// Distinct atoms in order of first appearance.
    pub fn atoms(&self) -> Vec<&Predicate> {
        let mut out: Vec<&Predicate> = Vec::new();
        for l in self.conjuncts.iter().flatten() {
            if !out.contains(&&l.atom) {
                out.push(&l.atom);
            }
        }
        out
    }

    pub fn to_where(&self) -> WhereCond {
        let mut disj: Option<WhereCond> = None;
        for c in &self.conjuncts {
            let mut conj: Option<WhereCond> = None;
            for l in c {
                let w = l.to_where();
                conj = Some(match conj {
                    None => w,
                    Some(a) => WhereCond::and(a, w),
                });
            }
            let conj = conj.unwrap_or(WhereCond::Const(true));
            disj = Some(match disj {
                None => conj,
                Some(a) => WhereCond::or(a, conj),
            });
        }
        disj.unwrap_or(WhereCond::Const(false))
    }

    /// `any where <intent>`, or a builtin name for the constants.
    pub fn to_class_expr(&self) -> ClassExpr {
        if self.is_true() {
            ClassExpr::any()
        } else if self.is_false() {
            ClassExpr::name("empty")
        } else {
            ClassExpr::where_(ClassExpr::any(), self.to_where())
        }
    }

    fn from_terms(terms: &[Term], table: &AtomTable) -> Sdnf {
        let mut keyed: Vec<(Vec<String>, Conjunct)> = terms
            .iter()
            .map(|t| {
                let mut lits: Vec<(String, Literal)> = atoms::bits(t.pos)
                    .map(|i| (i, false))
                    .chain(atoms::bits(t.neg).map(|i| (i, true)))
                    .map(|(i, negated)| {
                        let l = Literal {
                            atom: table.atom(i).clone(),
                            negated,
                        };
                        (l.to_string(), l)
                    })
                    .collect();
                lits.sort_by(|a, b| a.0.cmp(&b.0));
                let (words, lits): (Vec<String>, Vec<Literal>) = lits.into_iter().unzip();
                (words, lits)
            })
            .collect();
        // Conjuncts compare as words: literal by literal.
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        Sdnf {
            conjuncts: keyed.into_iter().map(|(_, c)| c).collect(),
        }
    }
}

impl fmt::Display for Sdnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_false() {
            return f.write_str("false");
        }
        if self.is_true() {
            return f.write_str("true");
        }
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" V ")?;
            }
            for (j, l) in c.iter().enumerate() {
                if j > 0 {
                    f.write_str("&")?;
                }
                write!(f, "{l}")?;
            }
        }
        Ok(())
    }
}

// ---- Step 1 ----

/// Rewrites a class expression as a single condition over primitive and
/// membership atoms, inlining named classes.
pub fn to_where_form(e: &ClassExpr, classes: &dyn ClassResolver) -> Result<WhereCond> {
    to_where_with(e, classes, &Budget::default())
}

fn to_where_with(e: &ClassExpr, classes: &dyn ClassResolver, budget: &Budget) -> Result<WhereCond> {
    Ok(match e {
        ClassExpr::Name(n) if n == "any" => WhereCond::Const(true),
        ClassExpr::Name(n) if n == "empty" => WhereCond::Const(false),
        ClassExpr::Name(n) => classes
            .class_intent(n)
            .ok_or_else(|| Error::UnknownClass(n.clone()))?
            .to_where(),
        ClassExpr::Union(a, b) => WhereCond::or(
            to_where_with(a, classes, budget)?,
            to_where_with(b, classes, budget)?,
        ),
        ClassExpr::Intersection(a, b) => WhereCond::and(
            to_where_with(a, classes, budget)?,
            to_where_with(b, classes, budget)?,
        ),
        ClassExpr::Difference(a, b) => WhereCond::and(
            to_where_with(a, classes, budget)?,
            WhereCond::not(to_where_with(b, classes, budget)?),
        ),
        ClassExpr::Where(a, w) => WhereCond::and(
            to_where_with(a, classes, budget)?,
            cond_where_form(w, classes, budget)?,
        ),
        ClassExpr::Dot(a, step) => {
            let target = sdnf_with(a, classes, budget)?;
            membership_atom(step, &target)
        }
    })
}

/// Objects reached from the target's members by one step.
fn membership_atom(step: &PathStep, target: &Sdnf) -> WhereCond {
    if target.is_false() {
        return WhereCond::Const(false);
    }
    WhereCond::Pred(Predicate::Membership {
        path: vec![step.clone()],
        target: Box::new(target.to_class_expr()),
    })
}

fn cond_where_form(
    w: &WhereCond,
    classes: &dyn ClassResolver,
    budget: &Budget,
) -> Result<WhereCond> {
    Ok(match w {
        WhereCond::Const(_) => w.clone(),
        WhereCond::And(a, b) => WhereCond::and(
            cond_where_form(a, classes, budget)?,
            cond_where_form(b, classes, budget)?,
        ),
        WhereCond::Or(a, b) => WhereCond::or(
            cond_where_form(a, classes, budget)?,
            cond_where_form(b, classes, budget)?,
        ),
        WhereCond::Not(a) => WhereCond::not(cond_where_form(a, classes, budget)?),
        WhereCond::Pred(Predicate::Membership { path, target }) => {
            // `inv(r.s) in C` holds for the members of `C.r.s`.
            let dotted = path.iter().fold((**target).clone(), |acc, step| {
                ClassExpr::dot(acc, step.clone())
            });
            to_where_with(&dotted, classes, budget)?
        }
        WhereCond::Pred(_) => w.clone(),
    })
}

// ---- full pipeline ----

pub fn sdnf(e: &ClassExpr, classes: &dyn ClassResolver) -> Result<Sdnf> {
    sdnf_with(e, classes, &Budget::default())
}

pub fn sdnf_with(e: &ClassExpr, classes: &dyn ClassResolver, budget: &Budget) -> Result<Sdnf> {
    let w = to_where_with(e, classes, budget)?;
    normalize_where(&w, budget)
}

/// Sdnf of a condition whose membership targets are already canonical.
pub fn normalize_where(w: &WhereCond, budget: &Budget) -> Result<Sdnf> {
    let mut table = AtomTable::new(budget.max_atoms);
    let d = primes::disjunctive_form(w, &mut table, budget)?;
    let mut p = primes::prime_implicants(d, &table, budget)?;
    while let Some(widened) = intervals::expand_once(&p, &table) {
        p = primes::prime_implicants(widened, &table, budget)?;
    }
    Ok(Sdnf::from_terms(&p, &table))
}

/// Sdnf of a bare condition (`any where w`).
pub fn sdnf_of_where(w: &WhereCond, classes: &dyn ClassResolver) -> Result<Sdnf> {
    sdnf(&ClassExpr::where_(ClassExpr::any(), w.clone()), classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
}

/// Sdnf of a Boolean combination of two intents.
pub fn set_op(x: &Sdnf, y: &Sdnf, op: SetOp) -> Result<Sdnf> {
    let (a, b) = (x.to_where(), y.to_where());
    let w = match op {
        SetOp::Union => WhereCond::or(a, b),
        SetOp::Intersection => WhereCond::and(a, b),
        SetOp::Difference => WhereCond::and(a, WhereCond::not(b)),
    };
    normalize_where(&w, &Budget::default())
}

pub fn logically_equivalent(a: &Sdnf, b: &Sdnf) -> bool {
    a == b
}

/// `d` entails `e`: each conjunct of `d` entails some conjunct of `e`. Complete
/// because `e` contains all of its prime implicants.
pub fn logically_implies(d: &Sdnf, e: &Sdnf) -> Result<bool> {
    if d.is_false() || e.is_true() {
        return Ok(true);
    }
    let mut table = AtomTable::new(MAX_ATOMS);
    let encode = |c: &Conjunct, table: &mut AtomTable| -> Result<Term> {
        let mut t = Term::TRUE;
        for l in c {
            t = t.and(Term::literal(table.intern(&l.atom)?, l.negated));
        }
        Ok(t)
    };
    let ds = d
        .conjuncts
        .iter()
        .map(|c| encode(c, &mut table))
        .collect::<Result<Vec<_>>>()?;
    let es = e
        .conjuncts
        .iter()
        .map(|c| encode(c, &mut table))
        .collect::<Result<Vec<_>>>()?;
    Ok(ds.iter().all(|t| es.iter().any(|r| table.entails(*t, *r))))
}

/// Whether a single conjunct entails another under the comparison theory.
pub fn conjunct_entails(t: &[Literal], r: &[Literal]) -> bool {
    let mut table = AtomTable::new(MAX_ATOMS);
    let mut encode = |c: &[Literal]| -> Option<Term> {
        let mut acc = Term::TRUE;
        for l in c {
            acc = acc.and(Term::literal(table.intern(&l.atom).ok()?, l.negated));
        }
        Some(acc)
    };
    match (encode(t), encode(r)) {
        (Some(a), Some(b)) => table.entails(a, b),
        _ => false,
    }
}

/// Drops literals entailed by the other literals; `None` if contradictory.
pub fn reduce_conjunct(c: &[Literal]) -> Option<Conjunct> {
    let mut table = AtomTable::new(MAX_ATOMS);
    let mut t = Term::TRUE;
    for l in c {
        t = t.and(Term::literal(table.intern(&l.atom).ok()?, l.negated));
    }
    let t = table.reduce(t)?;
    Sdnf::from_terms(&[t], &table).conjuncts.pop()
}
