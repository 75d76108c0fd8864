//! Relative-frequency probabilities over extents, frequency constraints, and
//! the virtual-object algorithm that makes a constraint set hold.
//!
//! `Pr(E)` is `|true(E)| / N` over real and virtual objects. A constraint
//! `Pr(A|B) >= c` is repaired by adding virtual objects at the node `A*B`;
//! `Pr(A|B) <= c` by adding them at `B-A`. Marginals are conditionals on `any`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluate::{Evaluator, Valuation};
use crate::model::{Oid, Store, StoreData};
use crate::normalize::{logically_implies, Sdnf};
use crate::syntax::{ClassExpr, Cmp, Parser};
use crate::value::{format_number, Number};

use crate::syntax::Tok as tok;

pub fn probability(ev: &Evaluator, e: &ClassExpr) -> Result<Number> {
    let n = ev.universe().len();
    if n == 0 {
        return Err(Error::EmptyUniverse);
    }
    let t = ev.extent_of(e)?.true_set.len();
    Ok(ratio(t, n))
}

/// `[t/N, 1 - f/N]`.
pub fn belief_interval(ev: &Evaluator, e: &ClassExpr) -> Result<(Number, Number)> {
    let n = ev.universe().len();
    if n == 0 {
        return Err(Error::EmptyUniverse);
    }
    let ext = ev.extent_of(e)?;
    Ok((
        ratio(ext.true_set.len(), n),
        Number::one() - ratio(ext.false_set.len(), n),
    ))
}

fn ratio(a: usize, b: usize) -> Number {
    Number::new(a.into(), b.into())
}

fn int(n: usize) -> Number {
    Number::from_integer(n.into())
}

// ---- structural constraints ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Structural {
    Indep,
    Nonoverlap,
    Subset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralCheck {
    pub kind: Structural,
    /// Left and right side of the count equation.
    pub lhs: usize,
    pub rhs: usize,
    pub satisfied: bool,
}

/// Checks `|A*B|*N = |A|*|B|`, `|A*B| = 0` or `|A*B| = |A|`.
pub fn check_structural(
    ev: &Evaluator,
    kind: Structural,
    a: &ClassExpr,
    b: &ClassExpr,
) -> Result<StructuralCheck> {
    let n = ev.universe().len();
    let na = ev.extent_of(a)?.true_set.len();
    let nb = ev.extent_of(b)?.true_set.len();
    let nab = ev
        .extent_of(&ClassExpr::intersection(a.clone(), b.clone()))?
        .true_set
        .len();
    let (lhs, rhs) = match kind {
        Structural::Indep => (nab * n, na * nb),
        Structural::Nonoverlap => (nab, 0),
        Structural::Subset => (nab, na),
    };
    Ok(StructuralCheck {
        kind,
        lhs,
        rhs,
        satisfied: lhs == rhs,
    })
}

// ---- constraints ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl BoundOp {
    /// `>` and `>=` bound the probability from below.
    pub fn is_lower(self) -> bool {
        matches!(self, BoundOp::Gt | BoundOp::Ge)
    }

    pub fn is_strict(self) -> bool {
        matches!(self, BoundOp::Gt | BoundOp::Lt)
    }

    /// Whether `num/den` satisfies the bound; an empty condition is vacuous.
    pub fn holds(self, num: usize, den: usize, c: &Number) -> bool {
        if den == 0 {
            return true;
        }
        let lhs = int(num);
        let rhs = c * int(den);
        match self {
            BoundOp::Gt => lhs > rhs,
            BoundOp::Ge => lhs >= rhs,
            BoundOp::Lt => lhs < rhs,
            BoundOp::Le => lhs <= rhs,
        }
    }
}

impl fmt::Display for BoundOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundOp::Gt => ">",
            BoundOp::Ge => ">=",
            BoundOp::Lt => "<",
            BoundOp::Le => "<=",
        })
    }
}

/// `Pr(A|B) op c`, or `Pr(A) op c` when `condition` is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProbConstraint {
    pub target: ClassExpr,
    pub condition: Option<ClassExpr>,
    pub op: BoundOp,
    pub bound: Number,
}

impl ProbConstraint {
    pub fn new(
        target: ClassExpr,
        condition: Option<ClassExpr>,
        op: BoundOp,
        bound: Number,
    ) -> Result<Self> {
        if !(bound.is_positive() && bound < Number::one()) {
            return Err(Error::InvalidConstraint(format!(
                "bound {} must lie strictly between 0 and 1",
                format_number(&bound)
            )));
        }
        Ok(ProbConstraint {
            target,
            condition,
            op,
            bound,
        })
    }

    /// Parses `Pr(A|B) >= 0.3` or `Pr(A) < 0.6`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser::new(text)?;
        if !p.eat_word("Pr") {
            return Err(p.unexpected("`Pr`"));
        }
        p.expect(tok::LParen, "`(`")?;
        let target = p.class_expr()?;
        let condition = if p.eat(&tok::Bar) {
            Some(p.class_expr()?)
        } else {
            None
        };
        p.expect(tok::RParen, "`)`")?;
        let pos = p.pos();
        let op = match p.bump() {
            tok::Rel(r) if !r.complement => match r.cmp {
                Cmp::Gt => BoundOp::Gt,
                Cmp::Ge => BoundOp::Ge,
                Cmp::Lt => BoundOp::Lt,
                Cmp::Le => BoundOp::Le,
                Cmp::Eq => {
                    return Err(Error::InvalidConstraint(
                        "equality constraints are not permitted".into(),
                    ))
                }
            },
            _ => return Err(Error::syntax(pos, "expected one of >, >=, <, <=")),
        };
        let bound = match p.constant()? {
            crate::value::Value::Number(n) => n,
            _ => return Err(Error::syntax(pos, "expected a numeric bound")),
        };
        p.expect_eof()?;
        ProbConstraint::new(target, condition, op, bound)
    }

    pub fn condition_expr(&self) -> ClassExpr {
        self.condition.clone().unwrap_or_else(ClassExpr::any)
    }
}

impl fmt::Display for ProbConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pr({}", self.target)?;
        if let Some(b) = &self.condition {
            write!(f, "|{b}")?;
        }
        write!(f, ") {} {}", self.op, format_number(&self.bound))
    }
}

// ---- smallest counts ----

/// Smallest integer `m >= 0` with `m > x` (strict) or `m >= x`.
fn smallest_above(x: &Number, strict: bool) -> usize {
    let m = if strict {
        x.floor() + Number::one()
    } else {
        x.ceil()
    };
    if m.is_negative() {
        0
    } else {
        m.to_integer().to_usize().expect("count fits in usize")
    }
}

/// Virtual objects to add inside `A*B` so that `(nAB+m)/(nB+m)` meets a lower bound.
pub fn needed_lower(c: &Number, strict: bool, n_b: usize, n_ab: usize) -> usize {
    if n_b == 0 {
        return 0;
    }
    let x = (c * int(n_b) - int(n_ab)) / (Number::one() - c);
    smallest_above(&x, strict)
}

/// Virtual objects to add inside `B-A` so that `nAB/(nB+m)` meets an upper bound.
pub fn needed_upper(c: &Number, strict: bool, n_b: usize, n_ab: usize) -> usize {
    if n_ab == 0 {
        return 0;
    }
    let x = int(n_ab) / c - int(n_b);
    smallest_above(&x, strict)
}

/// Of `m` objects just added to a condition node with `nAB` members, how many
/// must move into `X` to keep `(nX+t)/(nAB+m)` at or above `d`.
pub fn cascade_count(d: &Number, strict: bool, n_ab: usize, n_x: usize, m: usize) -> usize {
    let x = d * int(n_ab + m) - int(n_x);
    smallest_above(&x, strict)
}

// ---- ledger ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualObject {
    pub oid: Oid,
    pub home: Sdnf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Movement {
    pub oid: Oid,
    pub from: String,
    pub to: String,
}

/// Every virtual object with its home node, plus the audit trail of moves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VirtualLedger {
    homes: BTreeMap<Oid, Sdnf>,
    allocations: Vec<VirtualObject>,
    movements: Vec<Movement>,
}

impl VirtualLedger {
    pub fn home(&self, oid: Oid) -> Option<&Sdnf> {
        self.homes.get(&oid)
    }

    pub fn oids(&self) -> impl Iterator<Item = Oid> + '_ {
        self.homes.keys().copied()
    }

    pub fn total(&self) -> usize {
        self.homes.len()
    }

    /// Current objects with their homes, ascending by oid.
    pub fn allocations(&self) -> Vec<VirtualObject> {
        self.homes
            .iter()
            .map(|(o, h)| VirtualObject {
                oid: *o,
                home: h.clone(),
            })
            .collect()
    }

    /// Objects as first allocated, before any move.
    pub fn original_allocations(&self) -> &[VirtualObject] {
        &self.allocations
    }

    pub fn movements(&self) -> &[Movement] {
        &self.movements
    }

    pub fn per_node(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for h in self.homes.values() {
            *out.entry(h.to_string()).or_insert(0) += 1;
        }
        out
    }

    pub(crate) fn allocate(&mut self, oid: Oid, home: Sdnf) {
        self.homes.insert(oid, home.clone());
        self.allocations.push(VirtualObject { oid, home });
    }

    pub(crate) fn relocate(&mut self, oid: Oid, to: Sdnf) {
        let from = self.homes.insert(oid, to.clone()).expect("virtual oid");
        self.movements.push(Movement {
            oid,
            from: from.to_string(),
            to: to.to_string(),
        });
    }

    /// Undoes the most recent move of `oid`.
    fn revert(&mut self, oid: Oid, to: Sdnf) {
        self.homes.insert(oid, to);
        self.movements.pop();
    }

    /// Replays a move recorded in a document.
    pub(crate) fn replay_move(&mut self, m: Movement, to: Sdnf) -> Result<()> {
        if !self.homes.contains_key(&m.oid) {
            return Err(Error::Integrity(format!(
                "movement of unknown virtual oid {}",
                m.oid
            )));
        }
        self.homes.insert(m.oid, to);
        self.movements.push(m);
        Ok(())
    }
}

// ---- validation ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Forbidden pattern number, 1 to 4.
    #[serde(rename = "type")]
    pub kind: u8,
    pub constraints: Vec<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Type {}: {}", self.kind, self.constraints.join(", "))
    }
}

/// Normal forms of the nodes a constraint touches.
#[derive(Debug, Clone)]
struct Nodes {
    a: Sdnf,
    b: Sdnf,
    ab: Sdnf,
    b_not_a: Sdnf,
}

fn nodes(c: &ProbConstraint, data: &StoreData) -> Result<Nodes> {
    let b = c.condition_expr();
    Ok(Nodes {
        a: data.sdnf(&c.target)?,
        b: data.sdnf(&b)?,
        ab: data.sdnf(&ClassExpr::intersection(c.target.clone(), b.clone()))?,
        b_not_a: data.sdnf(&ClassExpr::difference(b, c.target.clone()))?,
    })
}

/// Every forbidden pattern in the set.
pub fn find_violations(cs: &[ProbConstraint], data: &StoreData) -> Result<Vec<Violation>> {
    let ns = cs
        .iter()
        .map(|c| nodes(c, data))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    let pair = |kind: u8, i: usize, j: usize| Violation {
        kind,
        constraints: vec![cs[i].to_string(), cs[j].to_string()],
    };
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            let (ci, cj) = (&cs[i], &cs[j]);
            let both_lower = ci.op.is_lower() && cj.op.is_lower();
            if both_lower && ns[i].a == ns[j].b && ns[i].b == ns[j].a && ns[i].a != ns[i].b {
                out.push(pair(1, i, j));
            }
            if both_lower && ns[i].b == ns[j].b && ns[i].a != ns[j].a {
                out.push(pair(2, i, j));
            }
            if ci.op.is_lower() != cj.op.is_lower() && ns[i].a == ns[j].a && ns[i].b == ns[j].b {
                out.push(pair(3, i, j));
            }
        }
    }
    out.extend(type4(cs, &ns)?);
    Ok(out)
}

/// Labeled edges run `A*B -> B` for lower bounds and `B -> A*B` for upper
/// bounds; unlabeled edges run from each node to every node it implies. Two
/// labeled edges with no common endpoint that lie on one closed walk are
/// forbidden.
fn type4(cs: &[ProbConstraint], ns: &[Nodes]) -> Result<Vec<Violation>> {
    let mut ids: Vec<Sdnf> = Vec::new();
    let mut id = |s: &Sdnf| match ids.iter().position(|x| x == s) {
        Some(i) => i,
        None => {
            ids.push(s.clone());
            ids.len() - 1
        }
    };
    let labeled: Vec<(usize, usize)> = cs
        .iter()
        .zip(ns)
        .map(|(c, n)| {
            let (ab, b) = (id(&n.ab), id(&n.b));
            if c.op.is_lower() {
                (ab, b)
            } else {
                (b, ab)
            }
        })
        .collect();
    let n = ids.len();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in &labeled {
        adj[u].push(v);
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && logically_implies(&ids[u], &ids[v])? {
                adj[u].push(v);
            }
        }
    }
    // Reachability is enough at this size: an edge lies on a closed walk
    // through another when their endpoints are mutually reachable.
    let reach: Vec<Vec<bool>> = (0..n).map(|s| reachable(&adj, s)).collect();
    let on_cycle = |(u, v): (usize, usize)| reach[v][u];
    let mut out = Vec::new();
    for i in 0..labeled.len() {
        for j in i + 1..labeled.len() {
            let (e, f) = (labeled[i], labeled[j]);
            let disjoint = e.0 != f.0 && e.0 != f.1 && e.1 != f.0 && e.1 != f.1;
            if disjoint && on_cycle(e) && on_cycle(f) && reach[e.0][f.0] && reach[f.0][e.0] {
                out.push(Violation {
                    kind: 4,
                    constraints: vec![cs[i].to_string(), cs[j].to_string()],
                });
            }
        }
    }
    Ok(out)
}

fn reachable(adj: &[Vec<usize>], s: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![s];
    seen[s] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

pub fn validate_constraints(cs: &[ProbConstraint], data: &StoreData) -> Result<()> {
    let v = find_violations(cs, data)?;
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::ForbiddenConstraints(v))
    }
}

// ---- the addition algorithm ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Allocation {
    pub constraint: String,
    pub home: String,
    #[serde(rename = "nB")]
    pub n_b: usize,
    #[serde(rename = "nAB")]
    pub n_ab: usize,
    pub count: usize,
    pub oids: Vec<Oid>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cascade {
    pub constraint: String,
    #[serde(rename = "nAB")]
    pub n_ab: usize,
    #[serde(rename = "nX")]
    pub n_x: usize,
    pub m: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintStatus {
    pub constraint: String,
    #[serde(rename = "nB")]
    pub n_b: usize,
    #[serde(rename = "nAB")]
    pub n_ab: usize,
    pub satisfied: bool,
}

/// What one run of [`apply_constraints`] did.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ApplyReport {
    pub allocations: Vec<Allocation>,
    pub movements: Vec<Movement>,
    pub cascades: Vec<Cascade>,
    pub status: Vec<ConstraintStatus>,
    pub added: usize,
}

// Repairs per constraint before giving up. Sets whose homes overlap in ways
// the forbidden patterns do not catch can chase each other forever.
const STEPS_PER_CONSTRAINT: usize = 8;
const MAX_VIRTUAL: usize = 1_000_000;

struct Run<'s> {
    store: &'s mut Store,
    cs: Vec<ProbConstraint>,
    nodes: Vec<Nodes>,
    texts: Vec<String>,
    report: ApplyReport,
}

impl Run<'_> {
    /// `(nB, nAB)` for every constraint.
    fn counts(&self) -> Result<Vec<(usize, usize)>> {
        let ev = Evaluator::new(self.store.data());
        self.nodes
            .iter()
            .map(|n| {
                let b = ev
                    .sdnf_signature(&n.b)?
                    .iter()
                    .filter(|t| t.is_true())
                    .count();
                let ab = ev
                    .sdnf_signature(&n.ab)?
                    .iter()
                    .filter(|t| t.is_true())
                    .count();
                Ok((b, ab))
            })
            .collect()
    }

    fn count(&self, s: &Sdnf) -> Result<usize> {
        let ev = Evaluator::new(self.store.data());
        Ok(ev.sdnf_signature(s)?.iter().filter(|t| t.is_true()).count())
    }

    fn satisfied(&self, counts: &[(usize, usize)]) -> Vec<bool> {
        self.cs
            .iter()
            .zip(counts)
            .map(|(c, &(b, ab))| c.op.holds(ab, b, &c.bound))
            .collect()
    }

    /// How many more objects constraint `k` needs at its home node.
    fn deficit(&self, k: usize, (b, ab): (usize, usize)) -> usize {
        let c = &self.cs[k];
        if c.op.is_lower() {
            needed_lower(&c.bound, c.op.is_strict(), b, ab)
        } else {
            needed_upper(&c.bound, c.op.is_strict(), b, ab)
        }
    }

    fn home(&self, k: usize) -> &Sdnf {
        if self.cs[k].op.is_lower() {
            &self.nodes[k].ab
        } else {
            &self.nodes[k].b_not_a
        }
    }

    /// Moves spare virtual objects from ancestors of `home`, nearest first,
    /// while each move strictly lowers the deficit of `k` and keeps every
    /// other satisfied constraint satisfied.
    fn donate(&mut self, k: usize) -> Result<()> {
        let home = self.home(k).clone();
        let mut donors: Vec<(Oid, Sdnf)> = Vec::new();
        for v in self.store.data().ledger().allocations() {
            if v.home != home
                && logically_implies(&home, &v.home)?
                && !logically_implies(&v.home, &home)?
            {
                donors.push((v.oid, v.home));
            }
        }
        // Nearest ancestor first: a home implied by fewer of the other donor
        // homes sits lower in the hierarchy.
        let mut depth: HashMap<Oid, usize> = HashMap::new();
        for (o, h) in &donors {
            let mut above = 0;
            for (_, g) in &donors {
                if g != h && logically_implies(h, g)? {
                    above += 1;
                }
            }
            depth.insert(*o, above);
        }
        donors.sort_by_key(|(o, _)| (std::cmp::Reverse(depth[o]), *o));

        let mut counts = self.counts()?;
        for (oid, from) in donors {
            let before = self.deficit(k, counts[k]);
            if before == 0 {
                break;
            }
            let was = self.satisfied(&counts);
            self.store.ledger_mut().relocate(oid, home.clone());
            let after_counts = self.counts()?;
            let now = self.satisfied(&after_counts);
            let helps = self.deficit(k, after_counts[k]) < before;
            let breaks = was.iter().zip(&now).any(|(w, n)| *w && !*n);
            if helps && !breaks {
                let m = self
                    .store
                    .data()
                    .ledger()
                    .movements()
                    .last()
                    .cloned()
                    .expect("just moved");
                self.report.movements.push(m);
                counts = after_counts;
            } else {
                self.store.ledger_mut().revert(oid, from);
            }
        }
        Ok(())
    }

    fn allocate(&mut self, home: &Sdnf, n: usize) -> Vec<Oid> {
        let data = self.store.data_mut();
        let mut oids = Vec::with_capacity(n);
        for _ in 0..n {
            let oid = Store::allocate_oid(data);
            data.ledger.allocate(oid, home.clone());
            oids.push(oid);
        }
        self.report.added += n;
        oids
    }

    /// Repairs constraint `k`: donations first, then fresh objects, then the
    /// cascade into lower-bound constraints conditioned on the home node.
    fn repair(&mut self, k: usize) -> Result<()> {
        let home = self.home(k).clone();
        if Valuation::for_home(&home).is_none() {
            return Err(Error::Unsatisfiable(format!(
                "{}: no object can belong to {}",
                self.texts[k], home
            )));
        }
        self.donate(k)?;
        let counts = self.counts()?;
        let (n_b, n_ab) = counts[k];
        let m = self.deficit(k, (n_b, n_ab));
        if m == 0 {
            return Ok(());
        }
        let before = self.satisfied(&counts);
        let home_count = self.count(&home)?;
        let oids = self.allocate(&home, m);
        self.report.allocations.push(Allocation {
            constraint: self.texts[k].clone(),
            home: home.to_string(),
            n_b,
            n_ab,
            count: m,
            oids: oids.clone(),
        });
        self.cascade(&home, home_count, oids, &before, &counts)
    }

    /// Objects `oids` were just added at `node`, which had `n_node` members.
    /// Lower-bound constraints conditioned on `node` that held before get
    /// `t` of them moved into their target.
    fn cascade(
        &mut self,
        node: &Sdnf,
        n_node: usize,
        oids: Vec<Oid>,
        before: &[bool],
        counts_before: &[(usize, usize)],
    ) -> Result<()> {
        let m = oids.len();
        for j in 0..self.cs.len() {
            let c = &self.cs[j];
            if !c.op.is_lower() || self.nodes[j].b != *node || !before[j] {
                continue;
            }
            let target = self.nodes[j].ab.clone();
            if target == *node {
                continue;
            }
            let n_x = counts_before[j].1;
            let t = cascade_count(&c.bound, c.op.is_strict(), n_node, n_x, m);
            self.report.cascades.push(Cascade {
                constraint: self.texts[j].clone(),
                n_ab: n_node,
                n_x,
                m,
                t,
            });
            if t > m {
                return Err(Error::ValidationGap(format!(
                    "cascade into {} needs {t} of {m} objects",
                    self.texts[j]
                )));
            }
            if t == 0 {
                continue;
            }
            let n_target = self.count(&target)?;
            let counts = self.counts()?;
            let was = self.satisfied(&counts);
            let moved: Vec<Oid> = oids[..t].to_vec();
            for &o in &moved {
                self.store.ledger_mut().relocate(o, target.clone());
                let mv = self
                    .store
                    .data()
                    .ledger()
                    .movements()
                    .last()
                    .cloned()
                    .expect("moved");
                self.report.movements.push(mv);
            }
            self.cascade(&target, n_target, moved, &was, &counts)?;
        }
        Ok(())
    }

    /// Bottom-up order: constraints whose home node implies more of the other
    /// nodes come first.
    fn order(&self) -> Result<Vec<usize>> {
        let homes: Vec<Sdnf> = (0..self.cs.len()).map(|k| self.home(k).clone()).collect();
        let mut rank = Vec::with_capacity(homes.len());
        for (k, h) in homes.iter().enumerate() {
            let mut below = 0;
            for g in &homes {
                if g != h && logically_implies(g, h)? {
                    below += 1;
                }
            }
            rank.push((below, k));
        }
        rank.sort();
        Ok(rank.into_iter().map(|(_, k)| k).collect())
    }

    fn run(&mut self) -> Result<()> {
        let order = self.order()?;
        let max_steps = STEPS_PER_CONSTRAINT * self.cs.len();
        let mut steps = 0;
        // Deficit and repair count per constraint. Two constraints undoing
        // each other converge only if the deficits shrink.
        let mut seen: Vec<(usize, usize)> = vec![(usize::MAX, 0); self.cs.len()];
        loop {
            let counts = self.counts()?;
            let sat = self.satisfied(&counts);
            // The stack holds unsatisfied constraints; the bottom-most is on top.
            let stack: Vec<usize> = order.iter().rev().copied().filter(|&k| !sat[k]).collect();
            let Some(&k) = stack.last() else { break };
            steps += 1;
            if steps > max_steps || self.report.added > MAX_VIRTUAL {
                return Err(Error::ValidationGap(format!(
                    "{} still unsatisfied after {} repairs and {} virtual objects",
                    self.texts[k],
                    steps - 1,
                    self.report.added
                )));
            }
            let need = self.deficit(k, counts[k]);
            let (last, times) = seen[k];
            if times >= 2 && need >= last {
                return Err(Error::ValidationGap(format!(
                    "{} needs {need} objects again after {times} repairs",
                    self.texts[k]
                )));
            }
            seen[k] = (need, times + 1);
            self.repair(k)?;
            let after = self.counts()?;
            if !self.satisfied(&after)[k] {
                return Err(Error::Unsatisfiable(self.texts[k].clone()));
            }
        }
        let counts = self.counts()?;
        self.report.status = self
            .cs
            .iter()
            .zip(&counts)
            .zip(&self.texts)
            .map(|((c, &(b, ab)), t)| ConstraintStatus {
                constraint: t.clone(),
                n_b: b,
                n_ab: ab,
                satisfied: c.op.holds(ab, b, &c.bound),
            })
            .collect();
        Ok(())
    }
}

/// Validates the store's constraints together with `new`, then adds and moves
/// virtual objects until all of them hold. On error the store is unchanged.
pub fn apply_constraints(store: &mut Store, new: &[ProbConstraint]) -> Result<ApplyReport> {
    let mut all: Vec<ProbConstraint> = store.data().constraints().to_vec();
    for c in new {
        if !all.contains(c) {
            all.push(c.clone());
        }
    }
    validate_constraints(&all, store.data())?;
    let nodes = all
        .iter()
        .map(|c| nodes(c, store.data()))
        .collect::<Result<Vec<_>>>()?;
    let mut work = store.clone();
    let texts = all.iter().map(|c| c.to_string()).collect();
    let mut run = Run {
        store: &mut work,
        cs: all.clone(),
        nodes,
        texts,
        report: ApplyReport::default(),
    };
    run.run()?;
    let report = run.report;
    work.set_constraints(all);
    *store = work;
    Ok(report)
}

/// Constraint satisfaction on the current store, without changing it.
pub fn constraint_status(data: &StoreData, cs: &[ProbConstraint]) -> Result<Vec<ConstraintStatus>> {
    let ev = Evaluator::new(data);
    cs.iter()
        .map(|c| {
            let n = nodes(c, data)?;
            let b = ev
                .sdnf_signature(&n.b)?
                .iter()
                .filter(|t| t.is_true())
                .count();
            let ab = ev
                .sdnf_signature(&n.ab)?
                .iter()
                .filter(|t| t.is_true())
                .count();
            Ok(ConstraintStatus {
                constraint: c.to_string(),
                n_b: b,
                n_ab: ab,
                satisfied: c.op.holds(ab, b, &c.bound),
            })
        })
        .collect()
}

/// Oids of the set, used by tests that compare partitions.
pub fn oid_set(v: &[Oid]) -> BTreeSet<Oid> {
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Attributes;
    use crate::syntax::parse_class_expr;
    use crate::value::Value;

    fn q(s: &str) -> Number {
        crate::value::parse_number(s).unwrap()
    }

    /// Smallest `m` found by counting up.
    fn brute_lower(c: &Number, strict: bool, nb: usize, nab: usize) -> usize {
        (0..)
            .find(|m| {
                let op = if strict { BoundOp::Gt } else { BoundOp::Ge };
                op.holds(nab + m, nb + m, c)
            })
            .unwrap()
    }

    fn brute_upper(c: &Number, strict: bool, nb: usize, nab: usize) -> usize {
        (0..)
            .find(|m| {
                let op = if strict { BoundOp::Lt } else { BoundOp::Le };
                op.holds(nab, nb + m, c)
            })
            .unwrap()
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(needed_lower(&q("0.5"), false, 10, 2), 6);
        assert_eq!(needed_lower(&q("0.3"), false, 10, 5), 0);
        assert_eq!(needed_lower(&q("0.9"), false, 1, 0), 9);
        assert_eq!(needed_upper(&q("0.6"), false, 5, 4), 2);
        assert_eq!(needed_upper(&q("0.5"), false, 2, 2), 2);
        assert_eq!(cascade_count(&q("0.5"), false, 4, 2, 4), 2);
        assert_eq!(cascade_count(&q("0.5"), false, 4, 2, 0), 0);
        // Marginal read as a conditional on `any`.
        assert_eq!(needed_lower(&q("0.2"), false, 9, 1), 1);
    }

    #[test]
    fn closed_forms_match_brute_force() {
        for c in ["0.1", "0.25", "1/3", "0.5", "0.6", "0.9", "99/100"] {
            let c = q(c);
            for nb in 0..25 {
                for nab in 0..=nb {
                    for strict in [false, true] {
                        assert_eq!(
                            needed_lower(&c, strict, nb, nab),
                            brute_lower(&c, strict, nb, nab)
                        );
                        assert_eq!(
                            needed_upper(&c, strict, nb, nab),
                            brute_upper(&c, strict, nb, nab)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn constraint_text() {
        let c = ProbConstraint::parse("Pr(a*b | c) >= 0.3").unwrap();
        assert_eq!(c.to_string(), "Pr(a*b|c) >= 0.3");
        assert_eq!(ProbConstraint::parse(&c.to_string()).unwrap(), c);
        let m = ProbConstraint::parse("Pr(a) < 0.6").unwrap();
        assert!(m.condition.is_none());
        assert!(matches!(
            ProbConstraint::parse("Pr(a) = 0.5"),
            Err(Error::InvalidConstraint(_))
        ));
        assert!(matches!(
            ProbConstraint::parse("Pr(a) >= 1"),
            Err(Error::InvalidConstraint(_))
        ));
        assert!(ProbConstraint::parse("Pr(a) ~>= 0.5").is_err());
    }

    fn store_with(classes: &[(&str, &str)]) -> Store {
        let mut s = Store::new();
        for (n, e) in classes {
            s.define_class(n, parse_class_expr(e).unwrap()).unwrap();
        }
        s
    }

    fn kinds(s: &Store, texts: &[&str]) -> Vec<u8> {
        let cs: Vec<ProbConstraint> = texts
            .iter()
            .map(|t| ProbConstraint::parse(t).unwrap())
            .collect();
        find_violations(&cs, s.data())
            .unwrap()
            .into_iter()
            .map(|v| v.kind)
            .collect()
    }

    #[test]
    fn forbidden_types() {
        let s = store_with(&[
            ("A", "any where a=1"),
            ("B", "any where b=1"),
            ("X", "any where x=1"),
            ("Y", "any where y=1"),
            ("P", "any where p=1"),
            ("Q", "any where q=1"),
            ("R", "any where r=1"),
            ("S", "any where s=1"),
        ]);
        assert_eq!(kinds(&s, &["Pr(A|B) >= 0.4", "Pr(B|A) >= 0.4"]), vec![1]);
        assert_eq!(kinds(&s, &["Pr(X|A) >= 0.4", "Pr(Y|A) >= 0.4"]), vec![2]);
        assert_eq!(kinds(&s, &["Pr(X) >= 0.4", "Pr(Y) >= 0.4"]), vec![2]);
        assert_eq!(kinds(&s, &["Pr(A|B) >= 0.4", "Pr(A|B) <= 0.6"]), vec![3]);
        assert_eq!(
            kinds(&s, &["Pr(Q*R|P) <= 0.5", "Pr(P*S|Q) <= 0.5"]),
            vec![4]
        );
        assert!(kinds(&s, &["Pr(A|B) >= 0.4", "Pr(X|Y) >= 0.4"]).is_empty());
        assert!(kinds(&s, &["Pr(A|B) >= 0.4", "Pr(B|X) >= 0.4"]).is_empty());
        assert!(kinds(&s, &["Pr(A|B) <= 0.4", "Pr(X|Y) <= 0.4"]).is_empty());
    }

    fn obj(s: &mut Store, pairs: &[(&str, i64)]) -> Oid {
        let a: Attributes = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), vec![Value::int(*v)]))
            .collect();
        s.create_object(a).unwrap()
    }

    #[test]
    fn single_lower_bound() {
        let mut s = store_with(&[("A", "any where a=1"), ("B", "any where b=1")]);
        for i in 0..10 {
            if i < 2 {
                obj(&mut s, &[("a", 1), ("b", 1)]);
            } else {
                obj(&mut s, &[("b", 1)]);
            }
        }
        let c = ProbConstraint::parse("Pr(A|B) >= 0.5").unwrap();
        let r = apply_constraints(&mut s, std::slice::from_ref(&c)).unwrap();
        assert_eq!(r.added, 6);
        assert_eq!(r.allocations.len(), 1);
        assert_eq!(r.allocations[0].home, "a=1&b=1");
        let st = constraint_status(s.data(), std::slice::from_ref(&c)).unwrap();
        assert_eq!((st[0].n_ab, st[0].n_b), (8, 16));
        // Running again adds nothing.
        let again = apply_constraints(&mut s, &[c]).unwrap();
        assert_eq!(again.added, 0);
    }

    #[test]
    fn marginal_lower_bound() {
        let mut s = store_with(&[("A", "any where a=1")]);
        obj(&mut s, &[("a", 1)]);
        for _ in 0..8 {
            obj(&mut s, &[]);
        }
        let r =
            apply_constraints(&mut s, &[ProbConstraint::parse("Pr(A) >= 0.2").unwrap()]).unwrap();
        assert_eq!(r.added, 1);
        let ev = Evaluator::new(s.data());
        assert_eq!(probability(&ev, &ClassExpr::name("A")).unwrap(), q("0.2"));
    }

    #[test]
    fn upper_bound_adds_outside_target() {
        let mut s = store_with(&[("A", "any where a=1"), ("B", "any where b=1")]);
        for i in 0..5 {
            if i < 4 {
                obj(&mut s, &[("a", 1), ("b", 1)]);
            } else {
                obj(&mut s, &[("b", 1)]);
            }
        }
        let r =
            apply_constraints(&mut s, &[ProbConstraint::parse("Pr(A|B) <= 0.6").unwrap()]).unwrap();
        assert_eq!(r.added, 2);
        assert_eq!(r.allocations[0].home, "b=1&~a=1");
    }

    #[test]
    fn cascade_keeps_child_constraint() {
        // Pr(A|B) >= 0.5 adds objects at A*B, which dilutes Pr(X|A*B).
        let mut s = store_with(&[
            ("A", "any where a=1"),
            ("B", "any where b=1"),
            ("X", "any where x=1"),
        ]);
        obj(&mut s, &[("a", 1), ("b", 1), ("x", 1)]);
        obj(&mut s, &[("a", 1), ("b", 1), ("x", 1)]);
        obj(&mut s, &[("a", 1), ("b", 1)]);
        obj(&mut s, &[("a", 1), ("b", 1)]);
        for _ in 0..8 {
            obj(&mut s, &[("b", 1)]);
        }
        let cs = [
            ProbConstraint::parse("Pr(A|B) >= 0.5").unwrap(),
            ProbConstraint::parse("Pr(X|A*B) >= 0.5").unwrap(),
        ];
        let r = apply_constraints(&mut s, &cs).unwrap();
        assert!(r.status.iter().all(|st| st.satisfied));
        assert_eq!(r.cascades.len(), 1);
        let c = &r.cascades[0];
        assert_eq!((c.n_ab, c.n_x, c.m, c.t), (4, 2, 4, 2));
    }

    #[test]
    fn forbidden_sets_leave_store_alone() {
        let mut s = store_with(&[("A", "any where a=1"), ("B", "any where b=1")]);
        obj(&mut s, &[("a", 1)]);
        let err = apply_constraints(
            &mut s,
            &[
                ProbConstraint::parse("Pr(A|B) >= 0.4").unwrap(),
                ProbConstraint::parse("Pr(B|A) >= 0.4").unwrap(),
            ],
        );
        assert!(matches!(err, Err(Error::ForbiddenConstraints(ref v)) if v[0].kind == 1));
        assert_eq!(s.data().ledger().total(), 0);
        assert!(s.data().constraints().is_empty());
    }

    #[test]
    fn diverging_sets_stop_early() {
        // Virtual objects homed at G have no h, so h~<0 puts them in O, and
        // those added outside O are outside G: each repair undoes the other.
        let mut s = store_with(&[("O", "any where age>10 V h~<0"), ("G", "any where g<2")]);
        for i in 0..10 {
            obj(&mut s, &[("g", i % 4), ("age", i), ("h", 1)]);
        }
        let cs = [
            ProbConstraint::parse("Pr(O) < 1/3").unwrap(),
            ProbConstraint::parse("Pr(G) >= 0.7").unwrap(),
        ];
        let t = std::time::Instant::now();
        assert!(matches!(
            apply_constraints(&mut s, &cs),
            Err(Error::ValidationGap(_))
        ));
        assert!(t.elapsed().as_secs() < 5);
        assert_eq!(s.data().ledger().total(), 0);
    }

    #[test]
    fn belief_intervals() {
        let mut s = Store::new();
        for v in [1, 1, 1, 0] {
            obj(&mut s, &[("t", v)]);
        }
        obj(&mut s, &[]);
        let ev = Evaluator::new(s.data());
        let (lo, hi) =
            belief_interval(&ev, &parse_class_expr("any where t -in {0}").unwrap()).unwrap();
        assert_eq!((lo, hi), (q("0.6"), q("0.8")));
        let e = Store::new();
        let ev = Evaluator::new(e.data());
        assert_eq!(
            probability(&ev, &ClassExpr::any()),
            Err(Error::EmptyUniverse)
        );
    }

    #[test]
    fn structural_checks() {
        let mut s = store_with(&[("A", "any where a=1"), ("B", "any where b=1")]);
        obj(&mut s, &[("a", 1), ("b", 1)]);
        obj(&mut s, &[("a", 1)]);
        obj(&mut s, &[("b", 1)]);
        obj(&mut s, &[]);
        let ev = Evaluator::new(s.data());
        let (a, b) = (ClassExpr::name("A"), ClassExpr::name("B"));
        assert!(
            check_structural(&ev, Structural::Indep, &a, &b)
                .unwrap()
                .satisfied
        );
        assert!(
            !check_structural(&ev, Structural::Nonoverlap, &a, &b)
                .unwrap()
                .satisfied
        );
        assert!(
            !check_structural(&ev, Structural::Subset, &a, &b)
                .unwrap()
                .satisfied
        );
        let ab = ClassExpr::intersection(a.clone(), b.clone());
        assert!(
            check_structural(&ev, Structural::Subset, &ab, &b)
                .unwrap()
                .satisfied
        );
    }
}
