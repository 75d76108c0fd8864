//! Interval widening between disjuncts:
//! `P & Y1<a<Z1 V P' & Y2<a<Z2` with `P'` entailing `P` and overlapping
//! intervals becomes `P & Y1<a<Z1 V P' & min(Y1,Y2)<a<max(Z1,Z2)`.
//!
//! Only strict numeric bounds on plain attribute comparisons take part. For
//! those the rewrite preserves meaning even though attribute lists are
//! existential: a value escaping the first interval has to land in the second.

use std::cmp::Ordering;

use crate::syntax::{Cmp, Predicate, RelOp};
use crate::value::Value;

use super::atoms::{bits, AtomTable, Term};

#[derive(Debug, Clone, Copy)]
struct Window {
    lower: usize,
    upper: usize,
}

fn strict_bound(p: &Predicate) -> Option<(&crate::syntax::AttrExp, Cmp, &Value)> {
    match p {
        Predicate::Compare {
            attr,
            op:
                RelOp {
                    cmp: cmp @ (Cmp::Lt | Cmp::Gt),
                    complement: false,
                },
            value: value @ Value::Number(_),
        } => Some((attr, *cmp, value)),
        _ => None,
    }
}

/// Every `(lower, upper)` pair of positive strict bounds on one attribute.
fn windows(t: Term, table: &AtomTable) -> Vec<Window> {
    let mut out = Vec::new();
    for lo in bits(t.pos) {
        let Some((attr_l, Cmp::Gt, _)) = strict_bound(table.atom(lo)) else {
            continue;
        };
        for hi in bits(t.pos) {
            if let Some((attr_h, Cmp::Lt, _)) = strict_bound(table.atom(hi)) {
                if attr_l == attr_h {
                    out.push(Window {
                        lower: lo,
                        upper: hi,
                    });
                }
            }
        }
    }
    out
}

fn bound_value(table: &AtomTable, i: usize) -> &Value {
    strict_bound(table.atom(i)).expect("window atom").2
}

/// One widening pass; returns the changed disjunction, or `None` at fixpoint.
pub fn expand_once(terms: &[Term], table: &AtomTable) -> Option<Vec<Term>> {
    for (j, &t2) in terms.iter().enumerate() {
        for w2 in windows(t2, table) {
            let rest2 = Term {
                pos: t2.pos & !(1 << w2.lower) & !(1 << w2.upper),
                neg: t2.neg,
            };
            for (i, &t1) in terms.iter().enumerate() {
                if i == j {
                    continue;
                }
                for w1 in windows(t1, table) {
                    if strict_bound(table.atom(w1.lower)).map(|b| b.0)
                        != strict_bound(table.atom(w2.lower)).map(|b| b.0)
                    {
                        continue;
                    }
                    let rest1 = Term {
                        pos: t1.pos & !(1 << w1.lower) & !(1 << w1.upper),
                        neg: t1.neg,
                    };
                    if !table.entails(rest2, rest1) {
                        continue;
                    }
                    let (y1, z1) = (bound_value(table, w1.lower), bound_value(table, w1.upper));
                    let (y2, z2) = (bound_value(table, w2.lower), bound_value(table, w2.upper));
                    let overlap = y2.compare(z1) == Some(Ordering::Less)
                        && y1.compare(z2) == Some(Ordering::Less);
                    if !overlap {
                        continue;
                    }
                    let lower = if y1 < y2 { w1.lower } else { w2.lower };
                    let upper = if z1 > z2 { w1.upper } else { w2.upper };
                    if lower == w2.lower && upper == w2.upper {
                        continue;
                    }
                    let widened = Term {
                        pos: rest2.pos | (1 << lower) | (1 << upper),
                        neg: rest2.neg,
                    };
                    let Some(widened) = table.reduce(widened) else {
                        continue;
                    };
                    let mut out = terms.to_vec();
                    out[j] = widened;
                    return Some(out);
                }
            }
        }
    }
    None
}
