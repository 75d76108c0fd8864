//! ISA hierarchy of a database state, implication reports, descriptions of
//! object sets, rule suggestions and attribute summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::evaluate::{aggregate, AggValue, Evaluator, Ternary};
use crate::model::{Oid, StoreData};
use crate::normalize::{
    atom_implies, logically_equivalent, logically_implies, normalize_where, reduce_conjunct,
    Budget, Conjunct, Literal, Sdnf,
};
use crate::syntax::{Aggr, Predicate, WhereCond};
use crate::value::{format_number, Number, Value};

fn display<T: std::fmt::Display, S: Serializer>(
    v: &T,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn display_opt<T: std::fmt::Display, S: Serializer>(
    v: &Option<T>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

fn number<S: Serializer>(v: &Number, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_number(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    #[serde(rename = "true")]
    pub true_count: usize,
    #[serde(rename = "false")]
    pub false_count: usize,
    pub unknown: usize,
}

impl Counts {
    fn of(sig: &[Ternary]) -> Self {
        let n = |t| sig.iter().filter(|x| **x == t).count();
        Counts {
            true_count: n(Ternary::True),
            false_count: n(Ternary::False),
            unknown: n(Ternary::Unknown),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HierarchyNode {
    pub id: usize,
    /// Class names sharing this node's signature; `any` and `empty` included
    /// for the two synthetic nodes.
    pub members: Vec<String>,
    #[serde(serialize_with = "display")]
    pub intent: Sdnf,
    #[serde(rename = "extentCounts")]
    pub counts: Counts,
    #[serde(skip)]
    pub signature: Rc<Vec<Ternary>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum EdgeBasis {
    Logical,
    DatabaseOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HierarchyEdge {
    pub child: usize,
    pub parent: usize,
    pub basis: EdgeBasis,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hierarchy {
    pub revision: u64,
    pub nodes: Vec<HierarchyNode>,
    pub edges: Vec<HierarchyEdge>,
}

impl Hierarchy {
    pub const ANY: usize = 0;
    pub const EMPTY: usize = 1;

    pub fn node_of(&self, class: &str) -> Option<&HierarchyNode> {
        self.nodes
            .iter()
            .find(|n| n.members.iter().any(|m| m == class))
    }

    pub fn parents(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.child == id)
            .map(|e| e.parent)
    }
}

/// Pointwise order on signatures with false < unknown < true.
fn below(a: &[Ternary], b: &[Ternary]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Nodes are the distinct signatures of the defined classes plus `any` and
/// `empty`. Edges follow the pointwise signature order, Hasse-reduced, so a
/// child's true set is always inside its parent's.
pub fn build_hierarchy(data: &StoreData) -> Result<Hierarchy> {
    let ev = Evaluator::new(data);
    let n = ev.universe().len();
    let mut nodes = vec![
        HierarchyNode {
            id: Hierarchy::ANY,
            members: vec!["any".into()],
            intent: Sdnf::always(),
            counts: Counts::of(&vec![Ternary::True; n]),
            signature: Rc::new(vec![Ternary::True; n]),
        },
        HierarchyNode {
            id: Hierarchy::EMPTY,
            members: vec!["empty".into()],
            intent: Sdnf::never(),
            counts: Counts::of(&vec![Ternary::False; n]),
            signature: Rc::new(vec![Ternary::False; n]),
        },
    ];
    for (name, def) in data.classes() {
        let sig = ev.sdnf_signature(&def.sdnf)?;
        match nodes.iter_mut().find(|x| x.signature == sig) {
            Some(node) => node.members.push(name.to_string()),
            None => nodes.push(HierarchyNode {
                id: nodes.len(),
                members: vec![name.to_string()],
                intent: def.sdnf.clone(),
                counts: Counts::of(&sig),
                signature: sig,
            }),
        }
    }
    let k = nodes.len();
    let le: Vec<Vec<bool>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let (a, b) = (&nodes[i].signature, &nodes[j].signature);
                    // Over an empty universe `any` and `empty` coincide.
                    i != j
                        && below(a, b)
                        && (!below(b, a) || (i, j) == (Hierarchy::EMPTY, Hierarchy::ANY))
                })
                .collect()
        })
        .collect();
    let mut edges = Vec::new();
    for c in 0..k {
        for p in 0..k {
            if !le[c][p] || (0..k).any(|q| le[c][q] && le[q][p]) {
                continue;
            }
            let basis = if node_implies(&nodes[c], &nodes[p], data)? {
                EdgeBasis::Logical
            } else {
                EdgeBasis::DatabaseOnly
            };
            edges.push(HierarchyEdge {
                child: c,
                parent: p,
                basis,
            });
        }
    }
    Ok(Hierarchy {
        revision: data.revision(),
        nodes,
        edges,
    })
}

/// Some intent of the child entails some intent of the parent.
fn node_implies(c: &HierarchyNode, p: &HierarchyNode, data: &StoreData) -> Result<bool> {
    let intents = |n: &HierarchyNode| -> Vec<Sdnf> {
        n.members
            .iter()
            .map(|m| match m.as_str() {
                "any" => Sdnf::always(),
                "empty" => Sdnf::never(),
                _ => data
                    .class(m)
                    .map(|d| d.sdnf.clone())
                    .unwrap_or_else(Sdnf::always),
            })
            .collect()
    };
    for a in intents(c) {
        for b in intents(p) {
            if logically_implies(&a, &b)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

// ---- implication report ----

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ClassPair {
    pub antecedent: String,
    pub consequent: String,
}

impl ClassPair {
    fn new(a: &str, b: &str) -> Self {
        ClassPair {
            antecedent: a.to_string(),
            consequent: b.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ImplicationReport {
    pub revision: u64,
    /// Unordered pairs, listed once in definition order.
    pub logical_equivalences: Vec<ClassPair>,
    pub database_equivalences: Vec<ClassPair>,
    pub logical_implications: Vec<ClassPair>,
    /// True-set containment, equal true sets included.
    pub database_implications: Vec<ClassPair>,
    /// Database implications with no logical derivation yet: candidates for a
    /// proof attempt.
    pub proof_suggestions: Vec<ClassPair>,
}

pub fn implication_report(data: &StoreData) -> Result<ImplicationReport> {
    let ev = Evaluator::new(data);
    let classes: Vec<(&str, &Sdnf, BTreeSet<usize>)> = data
        .classes()
        .map(|(n, d)| {
            let sig = ev.sdnf_signature(&d.sdnf)?;
            let t = sig
                .iter()
                .enumerate()
                .filter(|(_, x)| x.is_true())
                .map(|(i, _)| i)
                .collect();
            Ok((n, &d.sdnf, t))
        })
        .collect::<Result<_>>()?;
    let mut r = ImplicationReport {
        revision: data.revision(),
        ..Default::default()
    };
    for (i, (a, da, ta)) in classes.iter().enumerate() {
        for (j, (b, db, tb)) in classes.iter().enumerate() {
            if i == j {
                continue;
            }
            if i < j {
                if logically_equivalent(da, db) {
                    r.logical_equivalences.push(ClassPair::new(a, b));
                }
                if ta == tb {
                    r.database_equivalences.push(ClassPair::new(a, b));
                }
            }
            let logical = logically_implies(da, db)?;
            if logical {
                r.logical_implications.push(ClassPair::new(a, b));
            }
            if ta.is_subset(tb) {
                r.database_implications.push(ClassPair::new(a, b));
                if !logical {
                    r.proof_suggestions.push(ClassPair::new(a, b));
                }
            }
        }
    }
    Ok(r)
}

// ---- descriptions ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMembership {
    pub class: String,
    #[serde(serialize_with = "number")]
    pub fraction: Number,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Description {
    /// Literals true on every object of the set, after dropping those implied
    /// by the others.
    pub conjunct: Conjunct,
    #[serde(serialize_with = "display")]
    pub intent: Sdnf,
    /// Literals before simplification.
    pub unsimplified: Conjunct,
    pub per_class_membership: Vec<ClassMembership>,
}

/// Distinct atoms of all class intents, ordered by their rendering.
pub fn vocabulary(data: &StoreData) -> Vec<Predicate> {
    let mut seen: BTreeMap<String, Predicate> = BTreeMap::new();
    for (_, d) in data.classes() {
        for a in d.sdnf.atoms() {
            seen.entry(a.to_string()).or_insert_with(|| a.clone());
        }
    }
    seen.into_values().collect()
}

pub fn describe(data: &StoreData, oids: &BTreeSet<Oid>) -> Result<Description> {
    if oids.is_empty() {
        return Err(Error::EmptyOidSet);
    }
    let ev = Evaluator::new(data);
    let idx: Vec<usize> = oids
        .iter()
        .map(|o| {
            ev.universe()
                .binary_search(o)
                .map_err(|_| Error::UnknownOid(*o))
        })
        .collect::<Result<_>>()?;
    let mut lits = Vec::new();
    for atom in vocabulary(data) {
        let sig = ev.atom_signature(&atom)?;
        let all = |t| idx.iter().all(|i| sig[*i] == t);
        if all(Ternary::True) {
            lits.push(Literal {
                atom,
                negated: false,
            });
        } else if all(Ternary::False) {
            lits.push(Literal {
                atom,
                negated: true,
            });
        }
    }
    let mut unsimplified = lits.clone();
    unsimplified.sort_by_key(|x| x.to_string());
    let conjunct = reduce_conjunct(&lits).unwrap_or_else(|| lits.clone());
    let intent = normalize_where(&conjunct_where(&conjunct), &Budget::default())?;
    let mut per_class_membership = Vec::new();
    for (name, d) in data.classes() {
        let sig = ev.sdnf_signature(&d.sdnf)?;
        let members = idx.iter().filter(|i| sig[**i].is_true()).count();
        per_class_membership.push(ClassMembership {
            class: name.to_string(),
            fraction: Number::new(members.into(), idx.len().into()),
            members,
        });
    }
    Ok(Description {
        unsimplified,
        conjunct,
        intent,
        per_class_membership,
    })
}

fn conjunct_where(c: &[Literal]) -> WhereCond {
    c.iter()
        .map(Literal::to_where)
        .reduce(WhereCond::and)
        .unwrap_or(WhereCond::Const(true))
}

// ---- rule suggestions ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuggestedRule {
    #[serde(serialize_with = "display")]
    pub context: Sdnf,
    #[serde(rename = "contextClasses")]
    pub context_classes: Vec<String>,
    #[serde(serialize_with = "display")]
    pub antecedent: Predicate,
    #[serde(serialize_with = "display")]
    pub consequent: Predicate,
    /// Objects of the context where both hold.
    pub support: usize,
}

/// For every hierarchy node `P` and vocabulary atoms `r`, `s`: suggest
/// `r -> s` within `P` when `P&r&~s` has no objects but `P&r&s` does. Pairs
/// settled by the intents alone are skipped.
pub fn suggest_rules(data: &StoreData) -> Result<Vec<SuggestedRule>> {
    let h = build_hierarchy(data)?;
    let ev = Evaluator::new(data);
    let vocab = vocabulary(data);
    let sigs: Vec<Rc<Vec<Ternary>>> = vocab
        .iter()
        .map(|a| ev.atom_signature(a))
        .collect::<Result<_>>()?;
    let atom_sdnf = |p: &Predicate, negated: bool| {
        let w = WhereCond::Pred(p.clone());
        normalize_where(
            &if negated { WhereCond::not(w) } else { w },
            &Budget::default(),
        )
    };
    let mut out = Vec::new();
    for node in &h.nodes {
        if node.id == Hierarchy::EMPTY || node.counts.true_count == 0 {
            continue;
        }
        let p = &node.signature;
        for (i, r) in vocab.iter().enumerate() {
            if logically_implies(&node.intent, &atom_sdnf(r, true)?)? {
                continue;
            }
            for (j, s) in vocab.iter().enumerate() {
                if i == j
                    || atom_implies(r, s)
                    || logically_implies(&node.intent, &atom_sdnf(s, false)?)?
                {
                    continue;
                }
                let mut support = 0;
                let mut witness = false;
                for k in 0..p.len() {
                    let pr = p[k].and(sigs[i][k]);
                    if pr.and(sigs[j][k].not()).is_true() {
                        witness = true;
                        break;
                    }
                    if pr.and(sigs[j][k]).is_true() {
                        support += 1;
                    }
                }
                if !witness && support > 0 {
                    out.push(SuggestedRule {
                        context: node.intent.clone(),
                        context_classes: node.members.clone(),
                        antecedent: r.clone(),
                        consequent: s.clone(),
                        support,
                    });
                }
            }
        }
    }
    Ok(out)
}

// ---- summaries ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeStats {
    pub attribute: String,
    pub cnt: usize,
    #[serde(serialize_with = "display_opt")]
    pub sum: Option<AggValue>,
    #[serde(serialize_with = "display_opt")]
    pub avg: Option<AggValue>,
    #[serde(serialize_with = "display_opt")]
    pub std: Option<AggValue>,
    #[serde(serialize_with = "display_opt")]
    pub min: Option<AggValue>,
    #[serde(serialize_with = "display_opt")]
    pub max: Option<AggValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryGroup {
    #[serde(serialize_with = "display")]
    pub value: Value,
    pub count: usize,
    pub attributes: Vec<AttributeStats>,
}

/// Groups real objects by each distinct value of `attr`; an object with
/// several values joins several groups. Every other attribute whose values in
/// the group are all numeric gets the six aggregates.
pub fn summarize(data: &StoreData, attr: &str) -> Result<Vec<SummaryGroup>> {
    let mut groups: BTreeMap<&Value, BTreeSet<Oid>> = BTreeMap::new();
    for (oid, rec) in data.objects() {
        for v in rec.values(attr) {
            groups.entry(v).or_default().insert(oid);
        }
    }
    if groups.is_empty() {
        return Err(Error::UnknownAttribute(attr.to_string()));
    }
    let names: Vec<&str> = data
        .attribute_names()
        .into_iter()
        .filter(|a| *a != attr)
        .collect();
    let mut out = Vec::new();
    for (value, oids) in groups {
        let mut attributes = Vec::new();
        for name in &names {
            let values: Vec<Value> = oids
                .iter()
                .flat_map(|o| {
                    data.object(*o)
                        .map(|r| r.values(name).to_vec())
                        .unwrap_or_default()
                })
                .collect();
            if values.is_empty() || values.iter().any(|v| v.as_number().is_none()) {
                continue;
            }
            let agg = |f| aggregate(f, &values);
            attributes.push(AttributeStats {
                attribute: name.to_string(),
                cnt: values.len(),
                sum: agg(Aggr::Sum)?,
                avg: agg(Aggr::Avg)?,
                std: agg(Aggr::Std)?,
                min: agg(Aggr::Min)?,
                max: agg(Aggr::Max)?,
            });
        }
        out.push(SummaryGroup {
            value: value.clone(),
            count: oids.len(),
            attributes,
        });
    }
    Ok(out)
}
