//! Atom interning, the comparison-chain theory, and conjuncts as bitsets.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::syntax::{Aggr, AttrExp, Cmp, Predicate, RelOp};
use crate::value::Value;

/// Hard ceiling from the bitset width.
pub const MAX_ATOMS: usize = 64;

/// Interned atoms together with the entailment relation between them.
///
/// `up[a]` holds every atom entailed by `a` (including `a`), `down[a]` every
/// atom entailing `a`.
#[derive(Debug, Clone, Default)]
pub struct AtomTable {
    atoms: Vec<Predicate>,
    texts: Vec<String>,
    index: HashMap<Predicate, usize>,
    up: Vec<u64>,
    down: Vec<u64>,
    limit: usize,
}

impl AtomTable {
    pub fn new(limit: usize) -> Self {
        AtomTable {
            limit: limit.min(MAX_ATOMS),
            ..AtomTable::default()
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, i: usize) -> &Predicate {
        &self.atoms[i]
    }

    pub fn text(&self, i: usize) -> &str {
        &self.texts[i]
    }

    pub fn intern(&mut self, p: &Predicate) -> Result<usize> {
        if let Some(&i) = self.index.get(p) {
            return Ok(i);
        }
        let i = self.atoms.len();
        if i >= self.limit {
            return Err(Error::SizeBudgetExceeded {
                what: "distinct atoms",
                limit: self.limit,
            });
        }
        let bit = 1u64 << i;
        let mut up = bit;
        let mut down = bit;
        for (j, q) in self.atoms.iter().enumerate() {
            if atom_implies(p, q) {
                up |= 1 << j;
                self.down[j] |= bit;
            }
            if atom_implies(q, p) {
                down |= 1 << j;
                self.up[j] |= bit;
            }
        }
        self.atoms.push(p.clone());
        self.texts.push(p.to_string());
        self.index.insert(p.clone(), i);
        self.up.push(up);
        self.down.push(down);
        Ok(i)
    }

    pub fn up_of(&self, bits: u64) -> u64 {
        fold_bits(bits, |i| self.up[i])
    }

    pub fn down_of(&self, bits: u64) -> u64 {
        fold_bits(bits, |i| self.down[i])
    }

    pub fn implies(&self, a: usize, b: usize) -> bool {
        self.up[a] & (1 << b) != 0
    }

    /// Drops literals entailed by other literals of the same conjunct;
    /// `None` when the conjunct is contradictory.
    pub fn reduce(&self, t: Term) -> Option<Term> {
        if self.up_of(t.pos) & t.neg != 0 {
            return None;
        }
        let mut pos = t.pos;
        for i in bits(t.pos) {
            if self.down[i] & t.pos & !(1 << i) != 0 {
                pos &= !(1 << i);
            }
        }
        let mut neg = t.neg;
        for i in bits(t.neg) {
            if self.up[i] & t.neg & !(1 << i) != 0 {
                neg &= !(1 << i);
            }
        }
        Some(Term { pos, neg })
    }

    /// `t` entails `r`: every literal of `r` follows from a literal of `t`.
    pub fn entails(&self, t: Term, r: Term) -> bool {
        r.pos & !self.up_of(t.pos) == 0 && r.neg & !self.down_of(t.neg) == 0
    }

    /// All consensus terms of `t` and `r`: a positive `a` in one against a
    /// negative `b` in the other with `b` entailing `a`.
    pub fn consensus(&self, t: Term, r: Term, out: &mut Vec<Term>) {
        for (x, y) in [(t, r), (r, t)] {
            for a in bits(x.pos) {
                for b in bits(self.down[a] & y.neg) {
                    let c = Term {
                        pos: (x.pos & !(1 << a)) | y.pos,
                        neg: x.neg | (y.neg & !(1 << b)),
                    };
                    if let Some(c) = self.reduce(c) {
                        out.push(c);
                    }
                }
            }
        }
    }
}

fn fold_bits(bits: u64, f: impl Fn(usize) -> u64) -> u64 {
    let mut acc = 0;
    let mut b = bits;
    while b != 0 {
        let i = b.trailing_zeros() as usize;
        acc |= f(i);
        b &= b - 1;
    }
    acc
}

pub fn bits(mut b: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if b == 0 {
            None
        } else {
            let i = b.trailing_zeros() as usize;
            b &= b - 1;
            Some(i)
        }
    })
}

/// A conjunction of literals over an [`AtomTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Term {
    pub pos: u64,
    pub neg: u64,
}

impl Term {
    pub const TRUE: Term = Term { pos: 0, neg: 0 };

    pub fn literal(atom: usize, negated: bool) -> Term {
        if negated {
            Term {
                pos: 0,
                neg: 1 << atom,
            }
        } else {
            Term {
                pos: 1 << atom,
                neg: 0,
            }
        }
    }

    pub fn and(self, o: Term) -> Term {
        Term {
            pos: self.pos | o.pos,
            neg: self.neg | o.neg,
        }
    }

    /// Number of literals.
    pub fn width(self) -> u32 {
        self.pos.count_ones() + self.neg.count_ones()
    }

    pub fn is_true(self) -> bool {
        self.pos == 0 && self.neg == 0
    }
}

// ---- the comparison theory ----

#[derive(Debug, Clone, Copy, PartialEq)]
enum Bound<'a> {
    Unbounded,
    Closed(&'a Value),
    Open(&'a Value),
}

fn interval(cmp: Cmp, v: &Value) -> (Bound<'_>, Bound<'_>) {
    use Bound::*;
    match cmp {
        Cmp::Lt => (Unbounded, Open(v)),
        Cmp::Le => (Unbounded, Closed(v)),
        Cmp::Gt => (Open(v), Unbounded),
        Cmp::Ge => (Closed(v), Unbounded),
        Cmp::Eq => (Closed(v), Closed(v)),
    }
}

/// Lower bound `b` admits everything lower bound `a` admits.
fn lower_within(a: Bound, b: Bound) -> bool {
    match (a, b) {
        (_, Bound::Unbounded) => true,
        (Bound::Unbounded, _) => false,
        (a, b) => {
            let (va, a_open) = bound_parts(a);
            let (vb, b_open) = bound_parts(b);
            match vb.compare(va) {
                Some(Ordering::Less) => true,
                Some(Ordering::Equal) => !b_open || a_open,
                _ => false,
            }
        }
    }
}

fn upper_within(a: Bound, b: Bound) -> bool {
    match (a, b) {
        (_, Bound::Unbounded) => true,
        (Bound::Unbounded, _) => false,
        (a, b) => {
            let (va, a_open) = bound_parts(a);
            let (vb, b_open) = bound_parts(b);
            match vb.compare(va) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => !b_open || a_open,
                _ => false,
            }
        }
    }
}

fn bound_parts<'a>(b: Bound<'a>) -> (&'a Value, bool) {
    match b {
        Bound::Closed(v) => (v, false),
        Bound::Open(v) => (v, true),
        Bound::Unbounded => unreachable!("handled by callers"),
    }
}

/// The value set of `(cmp1, v1)` is contained in that of `(cmp2, v2)`.
fn subset(cmp1: Cmp, v1: &Value, cmp2: Cmp, v2: &Value) -> bool {
    let (l1, u1) = interval(cmp1, v1);
    let (l2, u2) = interval(cmp2, v2);
    lower_within(l1, l2) && upper_within(u1, u2)
}

/// Comparisons sharing attribute path, aggregate, `~` flag and constant class
/// form one chain; nothing else is related.
fn chain_key(p: &Predicate) -> Option<(Option<Aggr>, &AttrExp, RelOp, &Value)> {
    match p {
        Predicate::Compare { attr, op, value } => Some((None, attr, *op, value)),
        Predicate::Aggregate {
            func,
            attr,
            op,
            value,
        } => Some((Some(*func), attr, *op, value)),
        _ => None,
    }
}

/// Whether `a` entails `b` under the comparison-chain rules.
///
/// A plain comparison is true when some value lies in its value set, so a
/// smaller set entails a larger one. A `~` comparison is the complement of its
/// plain form, which reverses the direction.
pub fn atom_implies(a: &Predicate, b: &Predicate) -> bool {
    if a == b {
        return true;
    }
    let (Some((fa, xa, oa, va)), Some((fb, xb, ob, vb))) = (chain_key(a), chain_key(b)) else {
        return false;
    };
    if fa != fb || xa != xb || oa.complement != ob.complement || va.class() != vb.class() {
        return false;
    }
    if oa.complement {
        subset(ob.cmp, vb, oa.cmp, va)
    } else {
        subset(oa.cmp, va, ob.cmp, vb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_where_cond;
    use crate::syntax::WhereCond;

    fn atom(s: &str) -> Predicate {
        match parse_where_cond(s).unwrap() {
            WhereCond::Pred(p) => p,
            other => panic!("not an atom: {other:?}"),
        }
    }

    fn imp(a: &str, b: &str) -> bool {
        atom_implies(&atom(a), &atom(b))
    }

    #[test]
    fn comparison_chains() {
        assert!(imp("age<30", "age<40"));
        assert!(!imp("age<40", "age<30"));
        assert!(imp("age<30", "age<=30"));
        assert!(!imp("age<=30", "age<30"));
        assert!(imp("age=5", "age<10"));
        assert!(imp("age=5", "age>=5"));
        assert!(!imp("age=5", "age>5"));
        assert!(imp("age>=6", "age>5"));
        assert!(!imp("age<30", "height<40"));
        assert!(!imp("age<30", "r.age<40"));
        assert!(!imp("age<30", "age<\"b\""));
        assert!(imp("name<\"a\"", "name<\"b\""));
        assert!(imp("cnt(kids)>3", "cnt(kids)>2"));
        assert!(!imp("cnt(kids)>3", "sum(kids)>2"));
    }

    #[test]
    fn tilde_chains_reverse() {
        assert!(imp("age~<40", "age~<30"));
        assert!(!imp("age~<30", "age~<40"));
        assert!(!imp("age~<30", "age<40"));
        assert!(!imp("age<30", "age~>40"));
    }

    #[test]
    fn reduce_and_entail() {
        let mut t = AtomTable::new(24);
        let a30 = t.intern(&atom("age<30")).unwrap();
        let a40 = t.intern(&atom("age<40")).unwrap();
        let both = Term::literal(a30, false).and(Term::literal(a40, false));
        assert_eq!(t.reduce(both), Some(Term::literal(a30, false)));
        let neg_both = Term::literal(a30, true).and(Term::literal(a40, true));
        assert_eq!(t.reduce(neg_both), Some(Term::literal(a40, true)));
        let clash = Term::literal(a30, false).and(Term::literal(a40, true));
        assert_eq!(t.reduce(clash), None);
        assert!(t.entails(Term::literal(a30, false), Term::literal(a40, false)));
        assert!(t.entails(Term::literal(a40, true), Term::literal(a30, true)));
        assert!(!t.entails(Term::literal(a40, false), Term::literal(a30, false)));
    }

    #[test]
    fn atom_budget() {
        let mut t = AtomTable::new(2);
        t.intern(&atom("a=1")).unwrap();
        t.intern(&atom("b=1")).unwrap();
        t.intern(&atom("a=1")).unwrap();
        assert!(matches!(
            t.intern(&atom("c=1")),
            Err(Error::SizeBudgetExceeded { .. })
        ));
    }
}
