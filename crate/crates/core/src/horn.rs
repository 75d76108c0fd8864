//! Horn renaming of normalized axioms, the least model by forward chaining,
//! and lower-bound propagation over the renamed clauses.
//!
//! A negative literal `~p` is replaced by the fresh positive symbol `false_p`,
//! so both polarities can be derived independently and a contradiction shows
//! up as an atom with both in the model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::normalize::{set_op, Sdnf, SetOp};
use crate::value::{format_number, Number};

const FALSE_PREFIX: &str = "false_";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RenamedLiteral {
    pub base: String,
    pub positive: bool,
}

impl RenamedLiteral {
    pub fn pos(base: impl Into<String>) -> Self {
        RenamedLiteral {
            base: base.into(),
            positive: true,
        }
    }

    pub fn neg(base: impl Into<String>) -> Self {
        RenamedLiteral {
            base: base.into(),
            positive: false,
        }
    }

    pub fn complement(&self) -> Self {
        RenamedLiteral {
            base: self.base.clone(),
            positive: !self.positive,
        }
    }

    /// Reads `p`, `false_p` or `~p`.
    pub fn parse(text: &str) -> Self {
        let t = text.trim();
        if let Some(b) = t.strip_prefix(FALSE_PREFIX).or_else(|| t.strip_prefix('~')) {
            RenamedLiteral::neg(b)
        } else {
            RenamedLiteral::pos(t)
        }
    }
}

impl fmt::Display for RenamedLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str(FALSE_PREFIX)?;
        }
        f.write_str(&self.base)
    }
}

impl Serialize for RenamedLiteral {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HornClause {
    pub head: RenamedLiteral,
    pub body: BTreeSet<RenamedLiteral>,
}

impl HornClause {
    pub fn fact(head: RenamedLiteral) -> Self {
        HornClause {
            head,
            body: BTreeSet::new(),
        }
    }
}

impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " <- " } else { " & " })?;
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl Serialize for HornClause {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Clauses from one conjunct that must not hold (a conjunct of the negated
/// axioms): each literal's complement becomes a head, the rest the body.
pub fn rename_nogood(conjunct: &[RenamedLiteral]) -> Vec<HornClause> {
    let lits: BTreeSet<&RenamedLiteral> = conjunct.iter().collect();
    let mut out = Vec::new();
    for l in &lits {
        let head = l.complement();
        let body: BTreeSet<RenamedLiteral> = lits
            .iter()
            .filter(|x| **x != *l)
            .map(|x| (*x).clone())
            .collect();
        if !body.contains(&head) {
            out.push(HornClause { head, body });
        }
    }
    out
}

/// Clauses from a disjunction of literals: each literal is derivable once the
/// others are known false.
pub fn rename_disjunction(clause: &[RenamedLiteral]) -> Vec<HornClause> {
    let nogood: Vec<RenamedLiteral> = clause.iter().map(RenamedLiteral::complement).collect();
    rename_nogood(&nogood)
}

/// Horn clauses of a set of axioms given as intents. Each axiom is negated and
/// normalized; every conjunct of the result is a nogood. Atoms are named by
/// their rendering.
pub fn rename_axioms(axioms: &[Sdnf]) -> Result<Vec<HornClause>> {
    let mut out = BTreeSet::new();
    for a in axioms {
        let negated = set_op(&Sdnf::always(), a, SetOp::Difference)?;
        for c in negated.conjuncts() {
            let lits: Vec<RenamedLiteral> = c
                .iter()
                .map(|l| RenamedLiteral {
                    base: l.atom.to_string(),
                    positive: !l.negated,
                })
                .collect();
            if lits.is_empty() {
                // The axiom is unsatisfiable; nothing sensible to chain.
                continue;
            }
            out.extend(rename_nogood(&lits));
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MinimalModel {
    pub derived: BTreeSet<RenamedLiteral>,
    /// Atoms derived with both polarities.
    pub contradictions: BTreeSet<String>,
}

/// Least fixpoint of forward chaining, counting unsatisfied body literals per
/// clause so each clause fires at most once.
pub fn minimal_model(clauses: &[HornClause], facts: &BTreeSet<RenamedLiteral>) -> MinimalModel {
    let mut waiting: Vec<usize> = clauses.iter().map(|c| c.body.len()).collect();
    let mut watchers: BTreeMap<&RenamedLiteral, Vec<usize>> = BTreeMap::new();
    for (i, c) in clauses.iter().enumerate() {
        for b in &c.body {
            watchers.entry(b).or_default().push(i);
        }
    }
    let mut derived: BTreeSet<RenamedLiteral> = BTreeSet::new();
    let mut queue: Vec<RenamedLiteral> = facts.iter().cloned().collect();
    queue.extend(
        clauses
            .iter()
            .filter(|c| c.body.is_empty())
            .map(|c| c.head.clone()),
    );
    while let Some(l) = queue.pop() {
        if !derived.insert(l.clone()) {
            continue;
        }
        for &i in watchers.get(&l).into_iter().flatten() {
            waiting[i] -= 1;
            if waiting[i] == 0 {
                queue.push(clauses[i].head.clone());
            }
        }
    }
    let contradictions = derived
        .iter()
        .filter(|l| l.positive && derived.contains(&l.complement()))
        .map(|l| l.base.clone())
        .collect();
    MinimalModel {
        derived,
        contradictions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Rough {
    DefinitelyTrue,
    DefinitelyFalse,
    Unknown,
    Contradictory,
}

/// Base atoms mentioned by the clauses, in order.
pub fn symbols(clauses: &[HornClause]) -> BTreeSet<String> {
    clauses
        .iter()
        .flat_map(|c| std::iter::once(&c.head).chain(&c.body))
        .map(|l| l.base.clone())
        .collect()
}

pub fn rough_bounds(model: &MinimalModel, atoms: &BTreeSet<String>) -> BTreeMap<String, Rough> {
    let mut all = atoms.clone();
    all.extend(model.derived.iter().map(|l| l.base.clone()));
    all.into_iter()
        .map(|a| {
            let t = model.derived.contains(&RenamedLiteral::pos(a.clone()));
            let f = model.derived.contains(&RenamedLiteral::neg(a.clone()));
            let r = match (t, f) {
                (true, true) => Rough::Contradictory,
                (true, false) => Rough::DefinitelyTrue,
                (false, true) => Rough::DefinitelyFalse,
                (false, false) => Rough::Unknown,
            };
            (a, r)
        })
        .collect()
}

/// Lower probability bounds on renamed literals. `false_p` having lower bound
/// `f` caps `p` at `1 - f`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundAssignment {
    lower: BTreeMap<RenamedLiteral, Number>,
}

impl BoundAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Raises the lower bound of `l` to at least `v`.
    pub fn raise(&mut self, l: RenamedLiteral, v: Number) -> &mut Self {
        let e = self.lower.entry(l).or_insert_with(Number::zero);
        if v > *e {
            *e = v;
        }
        self
    }

    pub fn lower(&self, l: &RenamedLiteral) -> Number {
        self.lower.get(l).cloned().unwrap_or_else(Number::zero)
    }

    /// `[lower(p), 1 - lower(false_p)]`.
    pub fn interval(&self, base: &str) -> (Number, Number) {
        (
            self.lower(&RenamedLiteral::pos(base)),
            Number::one() - self.lower(&RenamedLiteral::neg(base)),
        )
    }

    pub fn bases(&self) -> BTreeSet<String> {
        self.lower.keys().map(|l| l.base.clone()).collect()
    }

    /// Every literal of the model at probability one.
    pub fn from_model(model: &MinimalModel) -> Self {
        let mut b = Self::new();
        for l in &model.derived {
            b.raise(l.clone(), Number::one());
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub atom: String,
    #[serde(serialize_with = "number")]
    pub lower: Number,
    #[serde(serialize_with = "number")]
    pub upper: Number,
}

fn number<S: Serializer>(v: &Number, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_number(v))
}

impl BoundAssignment {
    pub fn intervals(&self, atoms: &BTreeSet<String>) -> Vec<Interval> {
        let mut all = atoms.clone();
        all.extend(self.bases());
        all.into_iter()
            .map(|a| {
                let (lower, upper) = self.interval(&a);
                Interval {
                    atom: a,
                    lower,
                    upper,
                }
            })
            .collect()
    }
}

/// Fréchet lower bound of a conjunction: `max(0, sum - (k - 1))`.
pub fn conjunction_lower(bounds: &[Number]) -> Number {
    if bounds.is_empty() {
        return Number::one();
    }
    let k = Number::from_integer((bounds.len() - 1).into());
    let s: Number = bounds.iter().sum::<Number>() - k;
    if s > Number::zero() {
        s
    } else {
        Number::zero()
    }
}

/// Pushes lower bounds through the clauses to a fixpoint. A derived value
/// never exceeds its smallest body bound, so the best bound of every literal
/// comes from an acyclic derivation and `|literals| + 1` rounds suffice.
pub fn propagate_lower_bounds(
    clauses: &[HornClause],
    seed: &BoundAssignment,
) -> Result<BoundAssignment> {
    let mut b = seed.clone();
    let rounds = 2 * symbols(clauses).len() + 2;
    for _ in 0..rounds {
        let mut changed = false;
        for c in clauses {
            let body: Vec<Number> = c.body.iter().map(|l| b.lower(l)).collect();
            let v = conjunction_lower(&body);
            if v > b.lower(&c.head) {
                b.raise(c.head.clone(), v);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for base in b.bases() {
        let (lo, hi) = b.interval(&base);
        if lo > hi {
            return Err(Error::InconsistentBounds(base));
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::{sdnf_of_where, NoClasses};
    use crate::syntax::parse_where_cond;

    fn lits(text: &str) -> Vec<RenamedLiteral> {
        text.split('&').map(RenamedLiteral::parse).collect()
    }

    fn render(cs: &[HornClause]) -> BTreeSet<String> {
        cs.iter().map(|c| c.to_string()).collect()
    }

    fn q(s: &str) -> Number {
        crate::value::parse_number(s).unwrap()
    }

    #[test]
    fn nogood_renaming() {
        let cs = rename_nogood(&lits("p & ~q & r"));
        let want: BTreeSet<String> = [
            "false_p <- false_q & r",
            "q <- p & r",
            "false_r <- p & false_q",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        assert_eq!(render(&cs), want);
        assert_eq!(
            render(&rename_nogood(&lits("p"))),
            ["false_p".to_string()].into()
        );
    }

    #[test]
    fn disjunction_renaming() {
        let cs = rename_disjunction(&lits("p & q"));
        assert_eq!(
            render(&cs),
            ["p <- false_q".to_string(), "q <- false_p".to_string()].into()
        );
        assert_eq!(
            render(&rename_disjunction(&lits("p"))),
            ["p".to_string()].into()
        );
    }

    #[test]
    fn axioms_from_intents() {
        let ax = sdnf_of_where(&parse_where_cond("p=1 V q=1").unwrap(), &NoClasses).unwrap();
        let cs = rename_axioms(&[ax]).unwrap();
        assert_eq!(
            render(&cs),
            [
                "p=1 <- false_q=1".to_string(),
                "q=1 <- false_p=1".to_string()
            ]
            .into()
        );
    }

    #[test]
    fn least_models() {
        let cs = rename_disjunction(&lits("p & q"));
        let m = minimal_model(&cs, &BTreeSet::new());
        assert!(m.derived.is_empty());
        let rough = rough_bounds(&m, &symbols(&cs));
        assert_eq!(rough["p"], Rough::Unknown);
        assert_eq!(rough["q"], Rough::Unknown);

        let facts = [RenamedLiteral::neg("p"), RenamedLiteral::neg("q")].into();
        let m = minimal_model(&cs, &facts);
        assert_eq!(m.contradictions, ["p".to_string(), "q".to_string()].into());
        assert_eq!(rough_bounds(&m, &symbols(&cs))["p"], Rough::Contradictory);

        let m = minimal_model(&[], &[RenamedLiteral::pos("p")].into());
        assert_eq!(m.derived, [RenamedLiteral::pos("p")].into());
        assert_eq!(
            rough_bounds(&m, &BTreeSet::new())["p"],
            Rough::DefinitelyTrue
        );
    }

    #[test]
    fn chaining_needs_whole_body() {
        let cs = rename_nogood(&lits("p & ~q & r"));
        let m = minimal_model(&cs, &[RenamedLiteral::pos("p")].into());
        assert_eq!(m.derived.len(), 1);
        let m = minimal_model(
            &cs,
            &[RenamedLiteral::pos("p"), RenamedLiteral::pos("r")].into(),
        );
        assert!(m.derived.contains(&RenamedLiteral::pos("q")));
    }

    #[test]
    fn belief_bounds_from_false_p() {
        let cs = vec![HornClause {
            head: RenamedLiteral::pos("q"),
            body: [RenamedLiteral::neg("p")].into(),
        }];
        let mut seed = BoundAssignment::new();
        seed.raise(RenamedLiteral::neg("p"), q("0.3"));
        let b = propagate_lower_bounds(&cs, &seed).unwrap();
        assert_eq!(b.interval("q"), (q("0.3"), q("1")));
        assert_eq!(b.interval("p"), (q("0"), q("0.7")));
        let empty = propagate_lower_bounds(&cs, &BoundAssignment::new()).unwrap();
        assert_eq!(empty.interval("q"), (q("0"), q("1")));
    }

    #[test]
    fn frechet_bodies() {
        let cs = vec![HornClause {
            head: RenamedLiteral::pos("h"),
            body: [RenamedLiteral::pos("a"), RenamedLiteral::pos("b")].into(),
        }];
        let mut seed = BoundAssignment::new();
        seed.raise(RenamedLiteral::pos("a"), q("0.9"))
            .raise(RenamedLiteral::pos("b"), q("0.8"));
        let b = propagate_lower_bounds(&cs, &seed).unwrap();
        assert_eq!(b.lower(&RenamedLiteral::pos("h")), q("0.7"));
        // The bound is attained: put the 0.1 missing from `a` and the 0.2
        // missing from `b` on disjoint worlds.
        let (pa, pb) = (q("0.9"), q("0.8"));
        let disjoint_miss = Number::one() - (Number::one() - pa) - (Number::one() - pb);
        assert_eq!(disjoint_miss, q("0.7"));
    }

    #[test]
    fn inconsistent_bounds() {
        let mut seed = BoundAssignment::new();
        seed.raise(RenamedLiteral::pos("p"), q("0.6"))
            .raise(RenamedLiteral::neg("p"), q("0.5"));
        assert_eq!(
            propagate_lower_bounds(&[], &seed),
            Err(Error::InconsistentBounds("p".into()))
        );
    }

    #[test]
    fn model_bounds_agree_with_rough_set() {
        let cs = rename_disjunction(&lits("~p & q"));
        let m = minimal_model(&cs, &[RenamedLiteral::pos("p")].into());
        let b = propagate_lower_bounds(&cs, &BoundAssignment::from_model(&m)).unwrap();
        assert_eq!(rough_bounds(&m, &symbols(&cs))["q"], Rough::DefinitelyTrue);
        assert_eq!(b.interval("q"), (q("1"), q("1")));
    }
}
