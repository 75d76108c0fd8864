//! Engine calls shared by the HTTP API and the command line. Each function is
//! a thin composition of library calls returning serializable results.

use std::collections::BTreeSet;

use classalg::document::{value_from_json, value_to_json};
use classalg::evaluate::Evaluator;
use classalg::hierarchy::{self, Counts};
use classalg::model::{Attributes, OidKind, RelationDef, StoreData};
use classalg::probability::{
    apply_constraints, belief_interval, constraint_status, find_violations, probability,
    ApplyReport, ConstraintStatus, ProbConstraint, Violation,
};
use classalg::value::{format_number, number_to_f64, Number};
use classalg::{parse_class_expr, Error, Oid, Result, Store};
use serde::Serialize;
use serde_json::{json, Map, Value as Json};

/// Largest oid list returned in one response.
pub const PAGE_SIZE: usize = 10_000;

/// An exact rational with a float rendering for display.
#[derive(Debug, Clone, PartialEq)]
pub struct Ratio(pub Number);

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        json!({ "exact": format_number(&self.0), "value": number_to_f64(&self.0) }).serialize(s)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Page {
    pub cursor: usize,
    pub limit: Option<usize>,
}

impl Page {
    fn cut(&self, v: &[Oid]) -> (Vec<Oid>, bool) {
        let limit = self.limit.unwrap_or(PAGE_SIZE).min(PAGE_SIZE);
        let start = self.cursor.min(v.len());
        let end = (start + limit).min(v.len());
        (v[start..end].to_vec(), end < v.len())
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Extent {
    pub revision: u64,
    pub counts: Counts,
    pub true_set: Vec<Oid>,
    pub false_set: Vec<Oid>,
    pub unknown_set: Vec<Oid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next_cursor: Option<usize>,
}

fn extent(data: &StoreData, ext: classalg::ExtentResult, page: Page) -> Extent {
    let (t, f, u) = ext.counts();
    let (true_set, a) = page.cut(&ext.true_set);
    let (false_set, b) = page.cut(&ext.false_set);
    let (unknown_set, c) = page.cut(&ext.unknown_set);
    let limit = page.limit.unwrap_or(PAGE_SIZE).min(PAGE_SIZE);
    Extent {
        revision: data.revision(),
        counts: Counts {
            true_count: t,
            false_count: f,
            unknown: u,
        },
        true_set,
        false_set,
        unknown_set,
        next_cursor: (a || b || c).then_some(page.cursor + limit),
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BeliefInterval {
    pub lower: Ratio,
    pub upper: Ratio,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryResult {
    pub expression: String,
    pub sdnf: String,
    #[serde(flatten)]
    pub extent: Extent,
    pub probability: Ratio,
    pub belief_interval: BeliefInterval,
}

pub fn normalize(data: &StoreData, text: &str) -> Result<String> {
    Ok(data.sdnf(&parse_class_expr(text)?)?.to_string())
}

/// Extent, probability and belief interval of an expression.
pub fn query(data: &StoreData, text: &str, page: Page) -> Result<QueryResult> {
    let e = parse_class_expr(text)?;
    let sdnf = data.sdnf(&e)?;
    let ev = Evaluator::new(data);
    let p = probability(&ev, &e)?;
    let (lo, hi) = belief_interval(&ev, &e)?;
    Ok(QueryResult {
        expression: e.to_string(),
        sdnf: sdnf.to_string(),
        extent: extent(data, ev.extent(&sdnf)?, page),
        probability: Ratio(p),
        belief_interval: BeliefInterval {
            lower: Ratio(lo),
            upper: Ratio(hi),
        },
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassInfo {
    pub name: String,
    pub expression: String,
    pub sdnf: String,
    pub extent_counts: Counts,
}

pub fn class_info(data: &StoreData, name: &str) -> Result<ClassInfo> {
    let d = data
        .class(name)
        .ok_or_else(|| Error::UnknownClass(name.to_string()))?;
    let (t, f, u) = Evaluator::new(data).extent(&d.sdnf)?.counts();
    Ok(ClassInfo {
        name: name.to_string(),
        expression: d.expr.to_string(),
        sdnf: d.sdnf.to_string(),
        extent_counts: Counts {
            true_count: t,
            false_count: f,
            unknown: u,
        },
    })
}

pub fn classes(data: &StoreData) -> Result<Vec<ClassInfo>> {
    data.classes().map(|(n, _)| class_info(data, n)).collect()
}

pub fn class_extent(data: &StoreData, name: &str, page: Page) -> Result<Extent> {
    let d = data
        .class(name)
        .ok_or_else(|| Error::UnknownClass(name.to_string()))?;
    Ok(extent(data, Evaluator::new(data).extent(&d.sdnf)?, page))
}

pub fn define_class(store: &mut Store, name: &str, text: &str) -> Result<ClassInfo> {
    store.define_class(name, parse_class_expr(text)?)?;
    class_info(store.data(), name)
}

// ---- objects ----

pub fn attributes_to_json(a: &Attributes) -> Json {
    Json::Object(
        a.iter()
            .map(|(k, vs)| {
                (
                    k.clone(),
                    Json::Array(vs.iter().map(value_to_json).collect()),
                )
            })
            .collect(),
    )
}

pub fn attributes_from_json(j: &Map<String, Json>) -> Result<Attributes> {
    j.iter()
        .map(|(k, v)| {
            let vs = match v {
                Json::Array(xs) => xs.iter().map(value_from_json).collect::<Result<Vec<_>>>()?,
                single => vec![value_from_json(single)?],
            };
            Ok((k.clone(), vs))
        })
        .collect()
}

pub fn object_json(data: &StoreData, oid: Oid) -> Result<Json> {
    match data.kind_of(oid) {
        Some(OidKind::Real) => Ok(json!({
            "oid": oid,
            "kind": "real",
            "attributes": attributes_to_json(&data.object(oid).expect("real").attributes),
        })),
        Some(OidKind::Virtual) => Ok(json!({
            "oid": oid,
            "kind": "virtual",
            "home": data.ledger().home(oid).map(|h| h.to_string()),
        })),
        None => Err(Error::UnknownOid(oid)),
    }
}

pub fn objects_json(data: &StoreData) -> Json {
    let all: Vec<Json> = data
        .universe()
        .into_iter()
        .filter_map(|o| object_json(data, o).ok())
        .collect();
    json!({ "revision": data.revision(), "objects": all })
}

/// Applies attribute changes; `null` removes an attribute.
pub fn patch_object(store: &mut Store, oid: Oid, changes: &Map<String, Json>) -> Result<()> {
    if store.data().kind_of(oid).is_none() {
        return Err(Error::UnknownOid(oid));
    }
    for (k, v) in changes {
        if v.is_null() {
            store.remove_attribute(oid, k)?;
        } else {
            let mut one = Map::new();
            one.insert(k.clone(), v.clone());
            let mut a = attributes_from_json(&one)?;
            store.set_attribute(oid, k, a.remove(k).unwrap_or_default())?;
        }
    }
    Ok(())
}

/// Oids from text such as `1,2 5`.
pub fn parse_oids(text: &str) -> Result<BTreeSet<Oid>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>()
                .map(Oid)
                .map_err(|_| Error::syntax(0, format!("`{s}` is not an oid")))
        })
        .collect()
}

// ---- relations ----

/// Wire form of a relation definition, shared with the document format.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum RelationSpec {
    Explicit {
        name: String,
    },
    Class {
        name: String,
        domain: String,
        range: String,
    },
    Composite {
        name: String,
        path: Vec<String>,
    },
}

pub fn define_relation(store: &mut Store, spec: RelationSpec) -> Result<String> {
    let (name, def) = match spec {
        RelationSpec::Explicit { name } => (name, RelationDef::Explicit),
        RelationSpec::Class {
            name,
            domain,
            range,
        } => (
            name,
            RelationDef::Class {
                domain: parse_class_expr(&domain)?,
                range: parse_class_expr(&range)?,
            },
        ),
        RelationSpec::Composite { name, path } => (name, RelationDef::Composite(path)),
    };
    store.define_relation(&name, def)?;
    Ok(name)
}

// ---- constraints ----

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Validation {
    pub valid: bool,
    pub violations: Vec<Violation>,
    /// Satisfaction on the current store of every constraint, stored ones first.
    pub status: Vec<ConstraintStatus>,
}

fn with_stored(
    data: &StoreData,
    texts: &[String],
) -> Result<(Vec<ProbConstraint>, Vec<ProbConstraint>)> {
    let new = texts
        .iter()
        .map(|t| ProbConstraint::parse(t))
        .collect::<Result<Vec<_>>>()?;
    let mut all = data.constraints().to_vec();
    for c in &new {
        if !all.contains(c) {
            all.push(c.clone());
        }
    }
    Ok((new, all))
}

pub fn validate(data: &StoreData, texts: &[String]) -> Result<Validation> {
    let (_, all) = with_stored(data, texts)?;
    let violations = find_violations(&all, data)?;
    Ok(Validation {
        valid: violations.is_empty(),
        violations,
        status: constraint_status(data, &all)?,
    })
}

pub fn constrain(store: &mut Store, texts: &[String]) -> Result<ApplyReport> {
    let (new, _) = with_stored(store.data(), texts)?;
    apply_constraints(store, &new)
}

// ---- reports ----

pub fn describe(data: &StoreData, oids: &BTreeSet<Oid>) -> Result<hierarchy::Description> {
    hierarchy::describe(data, oids)
}

/// Counts of real and virtual objects per revision, for `load`.
pub fn store_summary(data: &StoreData) -> Json {
    json!({
        "revision": data.revision(),
        "objects": data.real_oids().count(),
        "virtualObjects": data.ledger().total(),
        "relations": data.relations().count(),
        "classes": data.classes().count(),
        "constraints": data.constraints().len(),
    })
}
