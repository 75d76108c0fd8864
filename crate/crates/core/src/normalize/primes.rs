//! Disjunctive form and the consensus closure (all prime implicants).

use crate::error::{Error, Result};
use crate::syntax::WhereCond;

use super::atoms::{AtomTable, Term};

/// Limits guarding the exponential parts of normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_atoms: usize,
    pub max_conjuncts: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_atoms: 24,
            max_conjuncts: 100_000,
        }
    }
}

impl Budget {
    fn check(&self, n: usize) -> Result<()> {
        if n > self.max_conjuncts {
            Err(Error::SizeBudgetExceeded {
                what: "intermediate conjuncts",
                limit: self.max_conjuncts,
            })
        } else {
            Ok(())
        }
    }
}

/// Flattens a condition into an absorbed disjunction of consistent conjuncts.
/// Membership targets must already be canonical.
pub fn disjunctive_form(
    w: &WhereCond,
    table: &mut AtomTable,
    budget: &Budget,
) -> Result<Vec<Term>> {
    dnf(w, false, table, budget)
}

fn dnf(w: &WhereCond, negate: bool, table: &mut AtomTable, budget: &Budget) -> Result<Vec<Term>> {
    match w {
        WhereCond::Const(b) => Ok(if *b != negate {
            vec![Term::TRUE]
        } else {
            Vec::new()
        }),
        WhereCond::Pred(p) => {
            let i = table.intern(p)?;
            Ok(vec![Term::literal(i, negate)])
        }
        WhereCond::Not(a) => dnf(a, !negate, table, budget),
        WhereCond::And(a, b) | WhereCond::Or(a, b) => {
            let conj = matches!(w, WhereCond::And(..)) != negate;
            let x = dnf(a, negate, table, budget)?;
            let y = dnf(b, negate, table, budget)?;
            if conj {
                budget.check(x.len().saturating_mul(y.len()))?;
                let mut out = Vec::with_capacity(x.len() * y.len());
                for s in &x {
                    for t in &y {
                        if let Some(c) = table.reduce(s.and(*t)) {
                            out.push(c);
                        }
                    }
                }
                Ok(absorb(out, table))
            } else {
                let mut out = x;
                out.extend(y);
                budget.check(out.len())?;
                Ok(absorb(out, table))
            }
        }
    }
}

/// Removes duplicates and every conjunct entailing another one.
pub fn absorb(mut terms: Vec<Term>, table: &AtomTable) -> Vec<Term> {
    // Shorter conjuncts first: they are the likely absorbers.
    terms.sort_by_key(|t| (t.width(), *t));
    terms.dedup();
    let mut kept: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        if !kept.iter().any(|k| table.entails(t, *k)) {
            // Same-length conjuncts can still absorb through comparison chains.
            kept.retain(|k| !table.entails(*k, t));
            kept.push(t);
        }
    }
    kept
}

/// Closes `terms` under consensus with generalized subsumption, returning
/// every prime implicant exactly once.
pub fn prime_implicants(terms: Vec<Term>, table: &AtomTable, budget: &Budget) -> Result<Vec<Term>> {
    let mut set = absorb(terms, table);
    if set.iter().any(|t| t.is_true()) {
        return Ok(vec![Term::TRUE]);
    }
    // `set[..done]` is closed under pairwise consensus.
    let mut done = 0;
    let mut generated = set.len();
    let mut scratch = Vec::new();
    while done < set.len() {
        let t = set[done];
        scratch.clear();
        for s in &set[..done] {
            table.consensus(t, *s, &mut scratch);
        }
        done += 1;
        for c in scratch.drain(..) {
            generated += 1;
            budget.check(generated)?;
            if set.iter().any(|k| table.entails(c, *k)) {
                continue;
            }
            if c.is_true() {
                return Ok(vec![Term::TRUE]);
            }
            // Drop everything the new conjunct absorbs, keeping the closed
            // prefix contiguous.
            let mut i = 0;
            while i < set.len() {
                if table.entails(set[i], c) {
                    set.remove(i);
                    if i < done {
                        done -= 1;
                    }
                } else {
                    i += 1;
                }
            }
            set.push(c);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_where_cond;

    fn primes(text: &str) -> (Vec<Term>, AtomTable) {
        let mut table = AtomTable::new(24);
        let b = Budget::default();
        let d = disjunctive_form(&parse_where_cond(text).unwrap(), &mut table, &b).unwrap();
        (prime_implicants(d, &table, &b).unwrap(), table)
    }

    fn render(terms: &[Term], table: &AtomTable) -> Vec<String> {
        let mut out: Vec<String> = terms
            .iter()
            .map(|t| {
                let mut lits: Vec<String> = super::super::atoms::bits(t.pos)
                    .map(|i| table.text(i).to_string())
                    .chain(super::super::atoms::bits(t.neg).map(|i| format!("~{}", table.text(i))))
                    .collect();
                lits.sort();
                lits.join("&")
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn classic_consensus() {
        let (p, t) = primes("x=1&y=1 V ~x=1&z=1");
        assert_eq!(render(&p, &t), vec!["x=1&y=1", "y=1&z=1", "z=1&~x=1"]);
    }

    #[test]
    fn complementary_pair_is_true() {
        let (p, _) = primes("p=1 V ~p=1");
        assert_eq!(p, vec![Term::TRUE]);
        let (p, t) = primes("p=1&q=1 V ~p=1&q=1");
        assert_eq!(render(&p, &t), vec!["q=1"]);
    }

    #[test]
    fn comparison_subsumption() {
        let (p, t) = primes("age<30 V age<40");
        assert_eq!(render(&p, &t), vec!["age<40"]);
        // x V ~y with y |- x: the theory makes this a tautology.
        let (p, _) = primes("age<40 V ~age<30");
        assert_eq!(p, vec![Term::TRUE]);
        let (p, t) = primes("age<30&q=1 V ~age<40&q=1");
        assert_eq!(render(&p, &t), vec!["age<30&q=1", "q=1&~age<40"]);
        let (p, t) = primes("age<40&q=1 V ~age<30&r=1");
        assert_eq!(render(&p, &t), vec!["age<40&q=1", "q=1&r=1", "r=1&~age<30"]);
    }

    #[test]
    fn contradiction_is_false() {
        let (p, _) = primes("x=1&~x=1");
        assert!(p.is_empty());
        let (p, _) = primes("age<30&~age<40");
        assert!(p.is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let mut table = AtomTable::new(24);
        let tiny = Budget {
            max_atoms: 24,
            max_conjuncts: 3,
        };
        let w = parse_where_cond("(a=1 V b=1) & (c=1 V d=1)").unwrap();
        assert!(matches!(
            disjunctive_form(&w, &mut table, &tiny),
            Err(Error::SizeBudgetExceeded { .. })
        ));
    }
}
