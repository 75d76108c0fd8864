//! Ternary evaluation of conditions and extents over a snapshot.
//!
//! Attribute predicates are existential over list values. The operator
//! families behave as follows on an object:
//!
//! | form          | undefined | defined                                  |
//! |---------------|-----------|------------------------------------------|
//! | `a>5`         | false     | Kleene-or over the values                |
//! | `a~>5`        | true      | true unless `a>5` is true                |
//! | `a -has S`    | unknown   | Kleene-not of `a has S`                  |
//! | `a ~-has S`   | unknown   | `a has S`                                |
//! | `a in number` | unknown   | true iff every value is a number         |
//!
//! Comparing a string with a number is unknown. Virtual objects carry no
//! attributes or edges; they are evaluated against a truth assignment derived
//! from their home intent (see [`Valuation`]).

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use num_traits::Signed;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Oid, Relation, StoreData};
use crate::normalize::{atom_implies, Conjunct, Literal, Sdnf};
use crate::syntax::{
    Aggr, AttrExp, ClassExpr, Cmp, ContainKind, ContainMode, ContainOp, PathStep, Predicate, RelOp,
    WhereCond,
};
use crate::value::{format_number, number_to_f64, Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ternary {
    False,
    Unknown,
    True,
}

impl Ternary {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Ternary::True
        } else {
            Ternary::False
        }
    }

    pub fn and(self, o: Ternary) -> Ternary {
        self.min(o)
    }

    pub fn or(self, o: Ternary) -> Ternary {
        self.max(o)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Ternary {
        match self {
            Ternary::True => Ternary::False,
            Ternary::False => Ternary::True,
            Ternary::Unknown => Ternary::Unknown,
        }
    }

    pub fn is_true(self) -> bool {
        self == Ternary::True
    }
}

impl fmt::Display for Ternary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ternary::True => "true",
            Ternary::False => "false",
            Ternary::Unknown => "unknown",
        })
    }
}

/// Partition of the oid universe by truth value, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ExtentResult {
    #[serde(rename = "trueSet")]
    pub true_set: Vec<Oid>,
    #[serde(rename = "falseSet")]
    pub false_set: Vec<Oid>,
    #[serde(rename = "unknownSet")]
    pub unknown_set: Vec<Oid>,
}

impl ExtentResult {
    pub fn from_signature(universe: &[Oid], sig: &[Ternary]) -> Self {
        let mut r = ExtentResult::default();
        for (o, t) in universe.iter().zip(sig) {
            match t {
                Ternary::True => r.true_set.push(*o),
                Ternary::False => r.false_set.push(*o),
                Ternary::Unknown => r.unknown_set.push(*o),
            }
        }
        r
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.true_set.len(),
            self.false_set.len(),
            self.unknown_set.len(),
        )
    }

    pub fn total(&self) -> usize {
        self.true_set.len() + self.false_set.len() + self.unknown_set.len()
    }
}

// ---- aggregates ----

/// Exact aggregate result. A standard deviation is kept as the square root of
/// its exact variance so comparisons stay exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggValue {
    Exact(Number),
    Sqrt(Number),
}

impl AggValue {
    pub fn compare(&self, c: &Number) -> Ordering {
        match self {
            AggValue::Exact(v) => v.cmp(c),
            AggValue::Sqrt(var) => {
                if c.is_negative() {
                    Ordering::Greater
                } else {
                    var.cmp(&(c * c))
                }
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            AggValue::Exact(v) => number_to_f64(v),
            AggValue::Sqrt(var) => number_to_f64(var).sqrt(),
        }
    }

    /// The exact value when it is rational.
    pub fn exact(&self) -> Option<Number> {
        match self {
            AggValue::Exact(v) => Some(v.clone()),
            AggValue::Sqrt(var) => rational_sqrt(var),
        }
    }
}

fn rational_sqrt(v: &Number) -> Option<Number> {
    let n = v.numer().sqrt();
    let d = v.denom().sqrt();
    (&n * &n == *v.numer() && &d * &d == *v.denom()).then(|| Number::new(n, d))
}

impl fmt::Display for AggValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact() {
            Some(v) => f.write_str(&format_number(&v)),
            None => match self {
                AggValue::Sqrt(var) => write!(f, "sqrt({})", format_number(var)),
                AggValue::Exact(_) => unreachable!(),
            },
        }
    }
}

/// Applies an aggregate to a value list. `Ok(None)` is the unknown result of
/// a non-count aggregate over an empty list.
pub fn aggregate(func: Aggr, values: &[Value]) -> Result<Option<AggValue>> {
    if func == Aggr::Cnt {
        return Ok(Some(AggValue::Exact(Number::from_integer(
            values.len().into(),
        ))));
    }
    let nums: Vec<&Number> = values
        .iter()
        .map(|v| v.as_number().ok_or(Error::NonNumericAggregate(func)))
        .collect::<Result<_>>()?;
    if nums.is_empty() {
        return Ok(None);
    }
    let n = Number::from_integer(nums.len().into());
    let sum: Number = nums.iter().copied().sum();
    Ok(Some(match func {
        Aggr::Cnt => unreachable!(),
        Aggr::Sum => AggValue::Exact(sum),
        Aggr::Avg => AggValue::Exact(sum / n),
        Aggr::Min => AggValue::Exact(nums.iter().copied().min().cloned().expect("nonempty")),
        Aggr::Max => AggValue::Exact(nums.iter().copied().max().cloned().expect("nonempty")),
        Aggr::Std => {
            let mean = &sum / &n;
            let var: Number = nums
                .iter()
                .map(|x| (*x - &mean) * (*x - &mean))
                .sum::<Number>()
                / n;
            AggValue::Sqrt(var)
        }
    }))
}

fn cmp_holds(cmp: Cmp, ord: Ordering) -> bool {
    match cmp {
        Cmp::Lt => ord == Ordering::Less,
        Cmp::Le => ord != Ordering::Greater,
        Cmp::Gt => ord == Ordering::Greater,
        Cmp::Ge => ord != Ordering::Less,
        Cmp::Eq => ord == Ordering::Equal,
    }
}

/// Value of the `~`-fused form given the plain form.
fn complement(plain: Ternary) -> Ternary {
    Ternary::from_bool(!plain.is_true())
}

fn compare_values(values: &[Value], op: RelOp, c: &Value) -> Ternary {
    let plain = values.iter().fold(Ternary::False, |acc, v| {
        acc.or(match v.compare(c) {
            None => Ternary::Unknown,
            Some(ord) => Ternary::from_bool(cmp_holds(op.cmp, ord)),
        })
    });
    if op.complement {
        complement(plain)
    } else {
        plain
    }
}

fn contain_values(values: &[Value], op: ContainOp, set: &BTreeSet<Value>) -> Ternary {
    let defined = !values.is_empty();
    let plain = defined
        && match op.kind {
            ContainKind::Has => set.iter().all(|s| values.contains(s)),
            ContainKind::In => values.iter().any(|v| set.contains(v)),
        };
    let plain = Ternary::from_bool(plain);
    match op.mode {
        ContainMode::Plain => plain,
        ContainMode::Complement => complement(plain),
        ContainMode::Quasi if defined => plain.not(),
        ContainMode::ComplementQuasi if defined => plain,
        ContainMode::Quasi | ContainMode::ComplementQuasi => Ternary::Unknown,
    }
}

fn aggregate_values(func: Aggr, values: &[Value], op: RelOp, c: &Value) -> Ternary {
    let plain = match (aggregate(func, values), c) {
        (Ok(Some(a)), Value::Number(n)) => Ternary::from_bool(cmp_holds(op.cmp, a.compare(n))),
        _ => Ternary::Unknown,
    };
    if op.complement {
        complement(plain)
    } else {
        plain
    }
}

// ---- virtual objects ----

/// Two-valued truth assignment for a virtual object.
///
/// Built from the first conjunct of the home intent it can satisfy: the
/// conjunct's positive atoms (read in plain form, so `a~>5` contributes
/// `a>5` as false) are true together with everything they entail under the
/// comparison chains; every other plain atom is false and every `~` form is
/// the complement of its plain form.
#[derive(Debug, Clone, Default)]
pub struct Valuation {
    true_atoms: Vec<Predicate>,
}

/// Plain counterpart of a complement-fused atom.
fn plain_form(p: &Predicate) -> Option<Predicate> {
    match p {
        Predicate::Compare { attr, op, value } if op.complement => Some(Predicate::Compare {
            attr: attr.clone(),
            op: RelOp::plain(op.cmp),
            value: value.clone(),
        }),
        Predicate::Aggregate {
            func,
            attr,
            op,
            value,
        } if op.complement => Some(Predicate::Aggregate {
            func: *func,
            attr: attr.clone(),
            op: RelOp::plain(op.cmp),
            value: value.clone(),
        }),
        Predicate::Contain { attr, op, values } if op.mode == ContainMode::Complement => {
            Some(Predicate::Contain {
                attr: attr.clone(),
                op: ContainOp {
                    kind: op.kind,
                    mode: ContainMode::Plain,
                },
                values: values.clone(),
            })
        }
        _ => None,
    }
}

impl Valuation {
    fn from_conjunct(c: &Conjunct) -> Valuation {
        let true_atoms = c
            .iter()
            .filter_map(|l| match plain_form(&l.atom) {
                Some(plain) => l.negated.then_some(plain),
                None => (!l.negated).then(|| l.atom.clone()),
            })
            .collect();
        Valuation { true_atoms }
    }

    /// Valuation for a home intent; `None` when no conjunct is satisfiable.
    pub fn for_home(home: &Sdnf) -> Option<Valuation> {
        home.conjuncts().iter().find_map(|c| {
            let v = Valuation::from_conjunct(c);
            c.iter().all(|l| v.literal(l)).then_some(v)
        })
    }

    pub fn atom(&self, p: &Predicate) -> bool {
        match plain_form(p) {
            Some(plain) => !self.atom(&plain),
            None => self.true_atoms.iter().any(|t| atom_implies(t, p)),
        }
    }

    fn literal(&self, l: &Literal) -> bool {
        self.atom(&l.atom) != l.negated
    }

    pub fn sdnf(&self, s: &Sdnf) -> bool {
        s.conjuncts()
            .iter()
            .any(|c| c.iter().all(|l| self.literal(l)))
    }

    pub fn where_cond(&self, w: &WhereCond) -> bool {
        match w {
            WhereCond::Const(b) => *b,
            WhereCond::And(a, b) => self.where_cond(a) && self.where_cond(b),
            WhereCond::Or(a, b) => self.where_cond(a) || self.where_cond(b),
            WhereCond::Not(a) => !self.where_cond(a),
            WhereCond::Pred(p) => self.atom(p),
        }
    }
}

// ---- the evaluator ----

const MAX_DEPTH: usize = 64;

/// Evaluates against one snapshot, memoizing atom and class signatures.
///
/// A signature is the vector of truth values over [`Evaluator::universe`].
pub struct Evaluator<'a> {
    data: &'a StoreData,
    universe: Vec<Oid>,
    index: HashMap<Oid, usize>,
    valuations: HashMap<Oid, Valuation>,
    atoms: RefCell<HashMap<Predicate, Rc<Vec<Ternary>>>>,
    classes: RefCell<HashMap<Sdnf, Rc<Vec<Ternary>>>>,
    depth: std::cell::Cell<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(data: &'a StoreData) -> Self {
        let universe = data.universe();
        let index = universe.iter().enumerate().map(|(i, o)| (*o, i)).collect();
        let valuations = data
            .ledger()
            .allocations()
            .iter()
            .map(|v| (v.oid, Valuation::for_home(&v.home).unwrap_or_default()))
            .collect();
        Evaluator {
            data,
            universe,
            index,
            valuations,
            atoms: RefCell::default(),
            classes: RefCell::default(),
            depth: std::cell::Cell::new(0),
        }
    }

    pub fn data(&self) -> &StoreData {
        self.data
    }

    pub fn universe(&self) -> &[Oid] {
        &self.universe
    }

    fn position(&self, oid: Oid) -> Result<usize> {
        self.index.get(&oid).copied().ok_or(Error::UnknownOid(oid))
    }

    // ---- whole-universe signatures ----

    pub fn atom_signature(&self, p: &Predicate) -> Result<Rc<Vec<Ternary>>> {
        if let Some(s) = self.atoms.borrow().get(p) {
            return Ok(Rc::clone(s));
        }
        let sig = self.guarded(|| {
            let target = match p {
                Predicate::Membership { target, .. } => Some(self.class_signature(target)?),
                _ => None,
            };
            self.universe
                .iter()
                .map(|&o| match &target {
                    Some(t) => self.membership_at(p, o, t),
                    None => self.predicate_uncached(p, o),
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let sig = Rc::new(sig);
        self.atoms.borrow_mut().insert(p.clone(), Rc::clone(&sig));
        Ok(sig)
    }

    pub fn sdnf_signature(&self, s: &Sdnf) -> Result<Rc<Vec<Ternary>>> {
        if let Some(sig) = self.classes.borrow().get(s) {
            return Ok(Rc::clone(sig));
        }
        let mut acc = vec![Ternary::False; self.universe.len()];
        for c in s.conjuncts() {
            let mut term = vec![Ternary::True; self.universe.len()];
            for l in c {
                let a = self.atom_signature(&l.atom)?;
                for (t, v) in term.iter_mut().zip(a.iter()) {
                    *t = t.and(if l.negated { v.not() } else { *v });
                }
            }
            for (x, t) in acc.iter_mut().zip(term) {
                *x = x.or(t);
            }
        }
        let sig = Rc::new(acc);
        self.classes.borrow_mut().insert(s.clone(), Rc::clone(&sig));
        Ok(sig)
    }

    /// Signature of a class expression: the signature of its intent.
    pub fn class_signature(&self, e: &ClassExpr) -> Result<Rc<Vec<Ternary>>> {
        let s = self.data.sdnf(e)?;
        self.sdnf_signature(&s)
    }

    pub fn extent(&self, s: &Sdnf) -> Result<ExtentResult> {
        Ok(ExtentResult::from_signature(
            &self.universe,
            &self.sdnf_signature(s)?,
        ))
    }

    pub fn extent_of(&self, e: &ClassExpr) -> Result<ExtentResult> {
        Ok(ExtentResult::from_signature(
            &self.universe,
            &self.class_signature(e)?,
        ))
    }

    /// Kleene evaluation of the expression as written, without normalizing.
    pub fn raw_extent(&self, e: &ClassExpr) -> Result<ExtentResult> {
        let w = crate::normalize::to_where_form(e, self.data)?;
        let sig = self
            .universe
            .iter()
            .map(|&o| self.eval_where(&w, o))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExtentResult::from_signature(&self.universe, &sig))
    }

    fn guarded<T>(&self, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let d = self.depth.get();
        if d >= MAX_DEPTH {
            return Err(Error::RecursionLimit);
        }
        self.depth.set(d + 1);
        let r = f();
        self.depth.set(d);
        r
    }

    // ---- per-object evaluation ----

    pub fn eval_where(&self, w: &WhereCond, oid: Oid) -> Result<Ternary> {
        if let Some(v) = self.valuations.get(&oid) {
            self.position(oid)?;
            return Ok(Ternary::from_bool(v.where_cond(w)));
        }
        Ok(match w {
            WhereCond::Const(b) => Ternary::from_bool(*b),
            WhereCond::And(a, b) => self.eval_where(a, oid)?.and(self.eval_where(b, oid)?),
            WhereCond::Or(a, b) => self.eval_where(a, oid)?.or(self.eval_where(b, oid)?),
            WhereCond::Not(a) => self.eval_where(a, oid)?.not(),
            WhereCond::Pred(p) => self.eval_predicate(p, oid)?,
        })
    }

    pub fn eval_sdnf(&self, s: &Sdnf, oid: Oid) -> Result<Ternary> {
        let i = self.position(oid)?;
        Ok(self.sdnf_signature(s)?[i])
    }

    pub fn eval_predicate(&self, p: &Predicate, oid: Oid) -> Result<Ternary> {
        let i = self.position(oid)?;
        if let Some(v) = self.valuations.get(&oid) {
            return Ok(Ternary::from_bool(v.atom(p)));
        }
        if let Some(sig) = self.atoms.borrow().get(p) {
            return Ok(sig[i]);
        }
        match p {
            Predicate::Membership { target, .. } => {
                let t = self.guarded(|| self.class_signature(target))?;
                self.membership_at(p, oid, &t)
            }
            _ => self.predicate_uncached(p, oid),
        }
    }

    fn predicate_uncached(&self, p: &Predicate, oid: Oid) -> Result<Ternary> {
        if let Some(v) = self.valuations.get(&oid) {
            return Ok(Ternary::from_bool(v.atom(p)));
        }
        let single = BTreeSet::from([oid]);
        Ok(match p {
            Predicate::Compare { attr, op, value } => {
                compare_values(&self.dot_attribute_values(&single, attr)?, *op, value)
            }
            Predicate::Contain { attr, op, values } => {
                contain_values(&self.dot_attribute_values(&single, attr)?, *op, values)
            }
            Predicate::TypeTest { attr, class } => {
                let vals = self.dot_attribute_values(&single, attr)?;
                if vals.is_empty() {
                    Ternary::Unknown
                } else {
                    Ternary::from_bool(vals.iter().all(|v| v.class() == *class))
                }
            }
            Predicate::Aggregate {
                func,
                attr,
                op,
                value,
            } => aggregate_values(
                *func,
                &self.dot_attribute_values(&single, attr)?,
                *op,
                value,
            ),
            Predicate::Membership { .. } => unreachable!("handled by callers"),
        })
    }

    /// `inv(path) in C`: walk the path backwards from `oid` and look the
    /// reached objects up in the target signature.
    fn membership_at(&self, p: &Predicate, oid: Oid, target: &[Ternary]) -> Result<Ternary> {
        let Predicate::Membership { path, .. } = p else {
            unreachable!()
        };
        if let Some(v) = self.valuations.get(&oid) {
            return Ok(Ternary::from_bool(v.atom(p)));
        }
        let mut set = BTreeSet::from([oid]);
        for step in path.iter().rev() {
            set = self.step_image(&set, &step.reversed())?;
        }
        let mut acc = Ternary::False;
        for o in set {
            acc = acc.or(target[self.position(o)?]);
            if acc.is_true() {
                break;
            }
        }
        Ok(acc)
    }

    // ---- navigation ----

    pub fn step_image(&self, sources: &BTreeSet<Oid>, step: &PathStep) -> Result<BTreeSet<Oid>> {
        if step.inverse {
            self.inverse_image(sources, &step.relation)
        } else {
            self.dot_relation(sources, &step.relation)
        }
    }

    fn relation(&self, name: &str) -> Result<&'a Relation> {
        self.data
            .relation(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    /// Real members of a class relation's domain or range.
    fn real_members(&self, s: &Sdnf) -> Result<BTreeSet<Oid>> {
        let sig = self.sdnf_signature(s)?;
        Ok(self
            .universe
            .iter()
            .zip(sig.iter())
            .filter(|(o, t)| t.is_true() && !self.valuations.contains_key(o))
            .map(|(o, _)| *o)
            .collect())
    }

    /// Union of the images of `sources` under `rel`.
    pub fn dot_relation(&self, sources: &BTreeSet<Oid>, rel: &str) -> Result<BTreeSet<Oid>> {
        if sources.is_empty() {
            self.relation(rel)?;
            return Ok(BTreeSet::new());
        }
        match self.relation(rel)? {
            Relation::Explicit(edges) => {
                Ok(sources.iter().flat_map(|s| edges.targets(*s)).collect())
            }
            Relation::Class {
                domain_sdnf,
                range_sdnf,
                ..
            } => {
                let dom = self.real_members(domain_sdnf)?;
                if sources.iter().any(|s| dom.contains(s)) {
                    self.real_members(range_sdnf)
                } else {
                    Ok(BTreeSet::new())
                }
            }
            Relation::Composite(path) => {
                let mut set = sources.clone();
                for r in path {
                    set = self.dot_relation(&set, r)?;
                }
                Ok(set)
            }
        }
    }

    /// Image of `targets` under the reversed relation.
    pub fn inverse_image(&self, targets: &BTreeSet<Oid>, rel: &str) -> Result<BTreeSet<Oid>> {
        if targets.is_empty() {
            self.relation(rel)?;
            return Ok(BTreeSet::new());
        }
        match self.relation(rel)? {
            Relation::Explicit(edges) => {
                Ok(targets.iter().flat_map(|t| edges.sources(*t)).collect())
            }
            Relation::Class {
                domain_sdnf,
                range_sdnf,
                ..
            } => {
                let range = self.real_members(range_sdnf)?;
                if targets.iter().any(|t| range.contains(t)) {
                    self.real_members(domain_sdnf)
                } else {
                    Ok(BTreeSet::new())
                }
            }
            Relation::Composite(path) => {
                let mut set = targets.clone();
                for r in path.iter().rev() {
                    set = self.inverse_image(&set, r)?;
                }
                Ok(set)
            }
        }
    }

    /// Attribute lists of every object reached along the relation prefix,
    /// appended in ascending oid order.
    pub fn dot_attribute_values(
        &self,
        sources: &BTreeSet<Oid>,
        attr: &AttrExp,
    ) -> Result<Vec<Value>> {
        let mut set = sources.clone();
        for r in &attr.relations {
            set = self.dot_relation(&set, r)?;
        }
        let mut out = Vec::new();
        for o in set {
            if let Some(rec) = self.data.object(o) {
                out.extend_from_slice(rec.values(&attr.attribute));
            }
        }
        Ok(out)
    }
}

/// Reflexive-transitive closure of an explicit relation over the objects
/// that occur in it.
pub fn reflexive_transitive_closure(data: &StoreData, rel: &str) -> Result<BTreeSet<(Oid, Oid)>> {
    let edges = match data.relation(rel) {
        None => return Err(Error::UnknownRelation(rel.to_string())),
        Some(Relation::Explicit(e)) => e,
        Some(_) => return Err(Error::NotExplicit(rel.to_string())),
    };
    let field: BTreeSet<Oid> = edges.edges().flat_map(|(s, t)| [s, t]).collect();
    let mut out = BTreeSet::new();
    for &start in &field {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(o) = queue.pop_front() {
            for t in edges.targets(o) {
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        out.extend(seen.into_iter().map(|t| (start, t)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attributes, Store};
    use crate::syntax::{parse_class_expr, parse_where_cond};

    fn obj(s: &mut Store, pairs: &[(&str, Vec<Value>)]) -> Oid {
        let a: Attributes = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        s.create_object(a).unwrap()
    }

    fn eval(s: &Store, text: &str, oid: Oid) -> Ternary {
        let ev = Evaluator::new(s.data());
        ev.eval_where(&parse_where_cond(text).unwrap(), oid)
            .unwrap()
    }

    #[test]
    fn kleene_tables() {
        use Ternary::*;
        assert_eq!(True.and(Unknown), Unknown);
        assert_eq!(True.or(Unknown), True);
        assert_eq!(Unknown.not(), Unknown);
        assert_eq!(False.and(Unknown), False);
    }

    #[test]
    fn existential_lists() {
        let mut s = Store::new();
        let a = obj(&mut s, &[("age", vec![Value::int(3), Value::int(9)])]);
        assert_eq!(eval(&s, "age>5", a), Ternary::True);
        assert_eq!(eval(&s, "age<5", a), Ternary::True);
        assert_eq!(eval(&s, "age~>5", a), Ternary::False);
        assert_eq!(eval(&s, "age~>10", a), Ternary::True);
    }

    #[test]
    fn null_semantics() {
        let mut s = Store::new();
        let a = obj(&mut s, &[]);
        assert_eq!(eval(&s, "age>5", a), Ternary::False);
        assert_eq!(eval(&s, "age~>5", a), Ternary::True);
        assert_eq!(eval(&s, "age -in {1,2}", a), Ternary::Unknown);
        assert_eq!(eval(&s, "age ~-in {1,2}", a), Ternary::Unknown);
        assert_eq!(eval(&s, "age in number", a), Ternary::Unknown);
        assert_eq!(eval(&s, "cnt(age)=0", a), Ternary::True);
        assert_eq!(eval(&s, "avg(age)>0", a), Ternary::Unknown);
        assert_eq!(eval(&s, "avg(age)~>0", a), Ternary::True);
    }

    #[test]
    fn containment_and_types() {
        let mut s = Store::new();
        let a = obj(&mut s, &[("tags", vec![Value::int(1), Value::str("x")])]);
        assert_eq!(eval(&s, "tags has {1,\"x\"}", a), Ternary::True);
        assert_eq!(eval(&s, "tags has {1,2}", a), Ternary::False);
        assert_eq!(eval(&s, "tags in {2,1}", a), Ternary::True);
        assert_eq!(eval(&s, "tags -in {2,1}", a), Ternary::False);
        assert_eq!(eval(&s, "tags -in {5}", a), Ternary::True);
        assert_eq!(eval(&s, "tags ~-in {5}", a), Ternary::False);
        assert_eq!(eval(&s, "tags in number", a), Ternary::False);
        assert_eq!(eval(&s, "tags>0", a), Ternary::True);
        assert_eq!(eval(&s, "tags>5", a), Ternary::Unknown);
        assert_eq!(eval(&s, "sum(tags)>0", a), Ternary::Unknown);
        assert_eq!(eval(&s, "cnt(tags)=2", a), Ternary::True);
    }

    #[test]
    fn aggregates_are_exact() {
        let v = |xs: &[i64]| xs.iter().map(|x| Value::int(*x)).collect::<Vec<_>>();
        assert_eq!(
            aggregate(Aggr::Avg, &v(&[1, 2, 2])).unwrap(),
            Some(AggValue::Exact(Number::new(5.into(), 3.into())))
        );
        assert_eq!(
            aggregate(Aggr::Std, &v(&[2, 2])).unwrap().unwrap().exact(),
            Some(Number::from_integer(0.into()))
        );
        assert_eq!(
            aggregate(Aggr::Std, &v(&[1, 3]))
                .unwrap()
                .unwrap()
                .to_string(),
            "1"
        );
        assert_eq!(
            aggregate(Aggr::Std, &v(&[0, 1]))
                .unwrap()
                .unwrap()
                .to_string(),
            "0.5"
        );
        assert_eq!(
            aggregate(Aggr::Std, &v(&[0, 1, 1]))
                .unwrap()
                .unwrap()
                .to_string(),
            "sqrt(2/9)"
        );
        assert_eq!(
            aggregate(Aggr::Cnt, &[Value::str("a"), Value::str("b")])
                .unwrap()
                .unwrap()
                .to_string(),
            "2"
        );
        assert_eq!(
            aggregate(Aggr::Sum, &[Value::str("a")]),
            Err(Error::NonNumericAggregate(Aggr::Sum))
        );
        assert_eq!(aggregate(Aggr::Max, &[]).unwrap(), None);
        let sqrt2 = AggValue::Sqrt(Number::from_integer(2.into()));
        assert_eq!(
            sqrt2.compare(&Number::new(141.into(), 100.into())),
            Ordering::Greater
        );
        assert_eq!(
            sqrt2.compare(&Number::new(142.into(), 100.into())),
            Ordering::Less
        );
    }

    #[test]
    fn append_versus_flatten() {
        let mut s = Store::new();
        let root = obj(&mut s, &[]);
        let a = obj(&mut s, &[("age", vec![Value::int(3)])]);
        let b = obj(&mut s, &[("age", vec![Value::int(3), Value::int(9)])]);
        s.add_relation_edge("kids", root, a).unwrap();
        s.add_relation_edge("kids", root, b).unwrap();
        let ev = Evaluator::new(s.data());
        let vals = ev
            .dot_attribute_values(
                &BTreeSet::from([root]),
                &AttrExp {
                    relations: vec!["kids".into()],
                    attribute: "age".into(),
                },
            )
            .unwrap();
        assert_eq!(vals, vec![Value::int(3), Value::int(3), Value::int(9)]);
        assert_eq!(eval(&s, "cnt(kids.age)=3", root), Ternary::True);
    }

    #[test]
    fn dots_and_inverses() {
        let mut s = Store::new();
        let o: Vec<Oid> = (0..4).map(|_| obj(&mut s, &[])).collect();
        s.add_relation_edge("owns", o[0], o[1]).unwrap();
        s.add_relation_edge("owns", o[0], o[2]).unwrap();
        s.add_relation_edge("owns", o[3], o[2]).unwrap();
        let ev = Evaluator::new(s.data());
        let set = |xs: &[Oid]| xs.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(
            ev.dot_relation(&set(&[o[0], o[3]]), "owns").unwrap(),
            set(&[o[1], o[2]])
        );
        assert_eq!(ev.dot_relation(&set(&[]), "owns").unwrap(), set(&[]));
        assert_eq!(
            ev.inverse_image(&set(&[o[2]]), "owns").unwrap(),
            set(&[o[0], o[3]])
        );
        assert_eq!(
            ev.dot_relation(&set(&[o[0]]), "nope"),
            Err(Error::UnknownRelation("nope".into()))
        );
    }

    #[test]
    fn composite_and_class_relations() {
        let mut s = Store::new();
        let a = obj(&mut s, &[("kind", vec![Value::str("e")])]);
        let b = obj(&mut s, &[]);
        let c = obj(&mut s, &[("kind", vec![Value::str("c")])]);
        s.add_relation_edge("parent", a, b).unwrap();
        s.add_relation_edge("parent", b, c).unwrap();
        s.define_relation(
            "grandparent",
            crate::model::RelationDef::Composite(vec!["parent".into(), "parent".into()]),
        )
        .unwrap();
        s.define_relation(
            "worksAt",
            crate::model::RelationDef::Class {
                domain: parse_class_expr("any where kind=\"e\"").unwrap(),
                range: parse_class_expr("any where kind=\"c\"").unwrap(),
            },
        )
        .unwrap();
        let ev = Evaluator::new(s.data());
        assert_eq!(
            ev.dot_relation(&BTreeSet::from([a]), "grandparent")
                .unwrap(),
            BTreeSet::from([c])
        );
        assert_eq!(
            ev.inverse_image(&BTreeSet::from([c]), "grandparent")
                .unwrap(),
            BTreeSet::from([a])
        );
        assert_eq!(
            ev.dot_relation(&BTreeSet::from([a]), "worksAt").unwrap(),
            BTreeSet::from([c])
        );
        assert_eq!(
            ev.dot_relation(&BTreeSet::from([b]), "worksAt").unwrap(),
            BTreeSet::new()
        );
        assert_eq!(
            ev.inverse_image(&BTreeSet::from([c]), "worksAt").unwrap(),
            BTreeSet::from([a])
        );
    }

    #[test]
    fn membership_extents() {
        let mut s = Store::new();
        let p = obj(&mut s, &[("age", vec![Value::int(40)])]);
        let car = obj(&mut s, &[]);
        let other = obj(&mut s, &[]);
        s.add_relation_edge("owns", p, car).unwrap();
        let ev = Evaluator::new(s.data());
        let e = ev
            .extent_of(&parse_class_expr("(any where age>30).owns").unwrap())
            .unwrap();
        assert_eq!(e.true_set, vec![car]);
        assert_eq!(e.false_set, vec![p, other]);
        let e = ev
            .extent_of(
                &parse_class_expr("any where inv(inv(owns)) in (any where This in any)").unwrap(),
            )
            .unwrap();
        assert_eq!(e.true_set, vec![p]);
    }

    #[test]
    fn complement_partitions_universe() {
        let mut s = Store::new();
        obj(&mut s, &[("age", vec![Value::int(3)])]);
        obj(&mut s, &[("age", vec![Value::str("x")])]);
        obj(&mut s, &[]);
        let ev = Evaluator::new(s.data());
        let p = ev
            .extent_of(&parse_class_expr("any where age>2").unwrap())
            .unwrap();
        let q = ev
            .extent_of(&parse_class_expr("any where age~>2").unwrap())
            .unwrap();
        let mut all: Vec<Oid> = p.true_set.iter().chain(&q.true_set).copied().collect();
        all.sort();
        assert_eq!(all, ev.universe().to_vec());
        let quasi = ev
            .extent_of(&parse_class_expr("any where age -in {3}").unwrap())
            .unwrap();
        assert_eq!(quasi.unknown_set.len(), 1);
    }

    #[test]
    fn closure() {
        let mut s = Store::new();
        let o: Vec<Oid> = (0..3).map(|_| obj(&mut s, &[])).collect();
        s.add_relation_edge("r", o[0], o[1]).unwrap();
        s.add_relation_edge("r", o[1], o[2]).unwrap();
        let c = reflexive_transitive_closure(s.data(), "r").unwrap();
        for pair in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
            assert!(c.contains(&(o[pair.0], o[pair.1])));
        }
        assert_eq!(c.len(), 6);
        s.add_relation_edge("q", o[0], o[1]).unwrap();
        s.add_relation_edge("q", o[1], o[0]).unwrap();
        assert_eq!(
            reflexive_transitive_closure(s.data(), "q").unwrap().len(),
            4
        );
        s.define_relation("e", crate::model::RelationDef::Explicit)
            .unwrap();
        assert!(reflexive_transitive_closure(s.data(), "e")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn valuation_reads_tilde_forms() {
        let home = crate::normalize::sdnf_of_where(
            &parse_where_cond("age<30 & x~>5 & ~q=1").unwrap(),
            &crate::normalize::NoClasses,
        )
        .unwrap();
        let v = Valuation::for_home(&home).unwrap();
        let atom = |t: &str| match parse_where_cond(t).unwrap() {
            WhereCond::Pred(p) => p,
            _ => unreachable!(),
        };
        assert!(v.atom(&atom("age<40")));
        assert!(!v.atom(&atom("age<20")));
        assert!(v.atom(&atom("age~<20")));
        assert!(!v.atom(&atom("x>5")));
        assert!(!v.atom(&atom("x>7")));
        assert!(!v.atom(&atom("q=1")));
        // A conjunct the chains make unsatisfiable has no valuation.
        let bad = crate::normalize::sdnf_of_where(
            &parse_where_cond("age<30 & age~<40").unwrap(),
            &crate::normalize::NoClasses,
        )
        .unwrap();
        assert!(Valuation::for_home(&bad).is_none());
    }
}
