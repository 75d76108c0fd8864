//! JSON ontology documents.
//!
//! Output is canonical: fixed field order, objects by ascending oid, classes
//! and relations in definition order, two-space indentation and a trailing
//! newline. Loading and saving an untouched document reproduces it byte for
//! byte. Integers are JSON numbers; other rationals are written as
//! `{"number": "<text>"}` so they survive exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::model::{Oid, Relation, RelationDef, Store, StoreData};
use crate::normalize::Sdnf;
use crate::probability::{Movement, ProbConstraint};
use crate::syntax::parse_class_expr;
use crate::value::{format_number, parse_number, Value};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Document {
    format_version: u64,
    next_oid: u64,
    objects: Vec<ObjectDoc>,
    relations: Vec<RelationDoc>,
    classes: Vec<ClassDoc>,
    constraints: Vec<String>,
    virtual_ledger: LedgerDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    oid: u64,
    attributes: BTreeMap<String, Vec<Json>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
enum RelationDoc {
    Explicit {
        name: String,
        edges: Vec<[u64; 2]>,
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

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassDoc {
    name: String,
    expression: String,
    intent: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VirtualDoc {
    oid: u64,
    home: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MovementDoc {
    oid: u64,
    from: String,
    to: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerDoc {
    /// Current homes.
    objects: Vec<VirtualDoc>,
    /// Homes at allocation time; replaying `movements` on them gives `objects`.
    allocations: Vec<VirtualDoc>,
    movements: Vec<MovementDoc>,
}

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Str(s) => Json::String(s.clone()),
        Value::Number(n) => {
            if n.is_integer() {
                if let Ok(i) = i64::try_from(n.numer()) {
                    return Json::from(i);
                }
            }
            serde_json::json!({ "number": format_number(n) })
        }
    }
}

pub fn value_from_json(j: &Json) -> Result<Value> {
    let bad = || Error::Document(format!("not a primitive value: {j}"));
    match j {
        Json::String(s) => Ok(Value::Str(s.clone())),
        // JSON number text is a decimal; read it exactly.
        Json::Number(n) => parse_number(&n.to_string())
            .map(Value::Number)
            .ok_or_else(bad),
        Json::Object(m) if m.len() == 1 => match m.get("number") {
            Some(Json::String(s)) => parse_number(s).map(Value::Number).ok_or_else(bad),
            _ => Err(bad()),
        },
        _ => Err(bad()),
    }
}

fn sdnf_text(data: &StoreData, text: &str) -> Result<Sdnf> {
    let expr = match text {
        "true" => "any".to_string(),
        "false" => "empty".to_string(),
        _ => format!("any where {text}"),
    };
    data.sdnf(&parse_class_expr(&expr)?)
}

/// Canonical document text.
pub fn to_string(data: &StoreData) -> String {
    let objects = data
        .objects()
        .map(|(oid, rec)| ObjectDoc {
            oid: oid.0,
            attributes: rec
                .attributes
                .iter()
                .map(|(k, vs)| (k.clone(), vs.iter().map(value_to_json).collect()))
                .collect(),
        })
        .collect();
    let relations = data
        .relations()
        .map(|(name, r)| {
            let name = name.to_string();
            match r {
                Relation::Explicit(e) => RelationDoc::Explicit {
                    name,
                    edges: e.edges().map(|(s, t)| [s.0, t.0]).collect(),
                },
                Relation::Class { domain, range, .. } => RelationDoc::Class {
                    name,
                    domain: domain.to_string(),
                    range: range.to_string(),
                },
                Relation::Composite(path) => RelationDoc::Composite {
                    name,
                    path: path.clone(),
                },
            }
        })
        .collect();
    let classes = data
        .classes()
        .map(|(name, d)| ClassDoc {
            name: name.to_string(),
            expression: d.expr.to_string(),
            intent: d.sdnf.to_string(),
        })
        .collect();
    let ledger = data.ledger();
    let virtual_doc = |oid: Oid, home: &Sdnf| VirtualDoc {
        oid: oid.0,
        home: home.to_string(),
    };
    let doc = Document {
        format_version: FORMAT_VERSION,
        next_oid: data.next_oid(),
        objects,
        relations,
        classes,
        constraints: data.constraints().iter().map(|c| c.to_string()).collect(),
        virtual_ledger: LedgerDoc {
            objects: ledger
                .allocations()
                .iter()
                .map(|v| virtual_doc(v.oid, &v.home))
                .collect(),
            allocations: ledger
                .original_allocations()
                .iter()
                .map(|v| virtual_doc(v.oid, &v.home))
                .collect(),
            movements: ledger
                .movements()
                .iter()
                .map(|m| MovementDoc {
                    oid: m.oid.0,
                    from: m.from.clone(),
                    to: m.to.clone(),
                })
                .collect(),
        },
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

pub fn from_str(text: &str) -> Result<Store> {
    let raw: Json = serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
    match raw.get("formatVersion").and_then(Json::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(found) => {
            return Err(Error::VersionMismatch {
                found,
                expected: FORMAT_VERSION,
            })
        }
        None => return Err(Error::Document("missing formatVersion".into())),
    }
    let doc: Document = serde_json::from_value(raw).map_err(|e| Error::Document(e.to_string()))?;
    build(doc)
}

fn integrity(e: Error) -> Error {
    match e {
        Error::UnknownOid(o) => Error::Integrity(format!("dangling oid {o}")),
        other => other,
    }
}

fn build(doc: Document) -> Result<Store> {
    let mut store = Store::new();
    for o in doc.objects {
        let attrs = o
            .attributes
            .iter()
            .map(|(k, vs)| {
                Ok((
                    k.clone(),
                    vs.iter().map(value_from_json).collect::<Result<Vec<_>>>()?,
                ))
            })
            .collect::<Result<_>>()?;
        store.insert_object(Oid(o.oid), attrs)?;
    }
    // Classes never need relations to be defined; class relations need classes.
    for c in &doc.classes {
        let sdnf = store.define_class(&c.name, parse_class_expr(&c.expression)?)?;
        if sdnf.to_string() != c.intent {
            return Err(Error::Integrity(format!(
                "class `{}` normalizes to `{sdnf}`, document says `{}`",
                c.name, c.intent
            )));
        }
    }
    for r in doc.relations {
        match r {
            RelationDoc::Explicit { name, edges } => {
                store.define_relation(&name, RelationDef::Explicit)?;
                for [s, t] in edges {
                    store
                        .add_relation_edge(&name, Oid(s), Oid(t))
                        .map_err(integrity)?;
                }
            }
            RelationDoc::Class {
                name,
                domain,
                range,
            } => store.define_relation(
                &name,
                RelationDef::Class {
                    domain: parse_class_expr(&domain)?,
                    range: parse_class_expr(&range)?,
                },
            )?,
            RelationDoc::Composite { name, path } => {
                store.define_relation(&name, RelationDef::Composite(path))?
            }
        }
    }
    let constraints = doc
        .constraints
        .iter()
        .map(|t| ProbConstraint::parse(t))
        .collect::<Result<Vec<_>>>()?;
    store.set_constraints(constraints);

    let mut max_oid = store.data().next_oid().saturating_sub(1);
    for v in &doc.virtual_ledger.allocations {
        if store.data().object(Oid(v.oid)).is_some()
            || store.data().ledger().home(Oid(v.oid)).is_some()
        {
            return Err(Error::Integrity(format!("duplicate oid {}", v.oid)));
        }
        let home = sdnf_text(store.data(), &v.home)?;
        store.ledger_mut().allocate(Oid(v.oid), home);
        max_oid = max_oid.max(v.oid);
    }
    for m in doc.virtual_ledger.movements {
        let to = sdnf_text(store.data(), &m.to)?;
        let mv = Movement {
            oid: Oid(m.oid),
            from: m.from,
            to: m.to,
        };
        store.ledger_mut().replay_move(mv, to)?;
    }
    let current: Vec<(u64, String)> = store
        .data()
        .ledger()
        .allocations()
        .iter()
        .map(|v| (v.oid.0, v.home.to_string()))
        .collect();
    let listed: Vec<(u64, String)> = doc
        .virtual_ledger
        .objects
        .into_iter()
        .map(|v| (v.oid, v.home))
        .collect();
    if current != listed {
        return Err(Error::Integrity(
            "virtual objects disagree with allocations and movements".into(),
        ));
    }
    if doc.next_oid <= max_oid {
        return Err(Error::Integrity(format!(
            "nextOid {} is not above oid {max_oid}",
            doc.next_oid
        )));
    }
    store.data_mut().next_oid = doc.next_oid;
    Ok(store)
}

pub fn save(data: &StoreData, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(data))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Store> {
    from_str(&std::fs::read_to_string(path)?)
}
