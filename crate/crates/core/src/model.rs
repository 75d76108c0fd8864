//! In-memory object database.
//!
//! [`Store`] is the single writer. Every mutation goes through it and bumps the
//! revision. [`Snapshot`]s are cheap `Arc` clones of the data at a revision and
//! never change afterwards; a mutation after a snapshot was taken copies the
//! data first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::{self, ClassResolver, Sdnf};
use crate::probability::{ProbConstraint, VirtualLedger};
use crate::syntax::{is_identifier, ClassExpr};
use crate::value::Value;

/// Object identifier, shared by real and virtual objects and never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Oid(pub u64);

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OidKind {
    Real,
    Virtual,
}

pub type Attributes = BTreeMap<String, Vec<Value>>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectRecord {
    /// Absent key means undefined; lists are never empty.
    pub attributes: Attributes,
}

impl ObjectRecord {
    pub fn values(&self, attr: &str) -> &[Value] {
        self.attributes.get(attr).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// A binary relation definition.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Relation {
    Explicit(EdgeSet),
    /// Every member of `domain` relates to every member of `range`.
    Class {
        domain: ClassExpr,
        range: ClassExpr,
        domain_sdnf: Sdnf,
        range_sdnf: Sdnf,
    },
    Composite(Vec<String>),
}

/// Definition request passed to [`Store::define_relation`].
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum RelationDef {
    Explicit,
    Class { domain: ClassExpr, range: ClassExpr },
    Composite(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeSet {
    forward: BTreeMap<Oid, BTreeSet<Oid>>,
    backward: BTreeMap<Oid, BTreeSet<Oid>>,
}

impl EdgeSet {
    pub fn insert(&mut self, s: Oid, t: Oid) -> bool {
        self.backward.entry(t).or_default().insert(s);
        self.forward.entry(s).or_default().insert(t)
    }

    pub fn contains(&self, s: Oid, t: Oid) -> bool {
        self.forward.get(&s).is_some_and(|ts| ts.contains(&t))
    }

    pub fn targets(&self, s: Oid) -> impl Iterator<Item = Oid> + '_ {
        self.forward.get(&s).into_iter().flatten().copied()
    }

    pub fn sources(&self, t: Oid) -> impl Iterator<Item = Oid> + '_ {
        self.backward.get(&t).into_iter().flatten().copied()
    }

    /// All edges in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (Oid, Oid)> + '_ {
        self.forward
            .iter()
            .flat_map(|(s, ts)| ts.iter().map(move |t| (*s, *t)))
    }

    pub fn len(&self) -> usize {
        self.forward.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    fn remove_node(&mut self, oid: Oid) {
        if let Some(ts) = self.forward.remove(&oid) {
            for t in ts {
                prune(&mut self.backward, t, oid);
            }
        }
        if let Some(ss) = self.backward.remove(&oid) {
            for s in ss {
                prune(&mut self.forward, s, oid);
            }
        }
    }
}

fn prune(map: &mut BTreeMap<Oid, BTreeSet<Oid>>, key: Oid, item: Oid) {
    if let Some(set) = map.get_mut(&key) {
        set.remove(&item);
        if set.is_empty() {
            map.remove(&key);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub expr: ClassExpr,
    pub sdnf: Sdnf,
}

#[derive(Debug, Clone, Default)]
pub struct StoreData {
    pub(crate) objects: BTreeMap<Oid, ObjectRecord>,
    pub(crate) relations: IndexMap<String, Relation>,
    pub(crate) classes: IndexMap<String, ClassDef>,
    pub(crate) intents: BTreeMap<String, String>,
    pub(crate) constraints: Vec<ProbConstraint>,
    pub(crate) ledger: VirtualLedger,
    pub(crate) next_oid: u64,
    pub(crate) revision: u64,
}

/// Immutable view of the store at one revision.
pub type Snapshot = Arc<StoreData>;

impl StoreData {
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn object(&self, oid: Oid) -> Option<&ObjectRecord> {
        self.objects.get(&oid)
    }

    pub fn objects(&self) -> impl Iterator<Item = (Oid, &ObjectRecord)> {
        self.objects.iter().map(|(o, r)| (*o, r))
    }

    pub fn real_oids(&self) -> impl Iterator<Item = Oid> + '_ {
        self.objects.keys().copied()
    }

    pub fn kind_of(&self, oid: Oid) -> Option<OidKind> {
        if self.objects.contains_key(&oid) {
            Some(OidKind::Real)
        } else if self.ledger.home(oid).is_some() {
            Some(OidKind::Virtual)
        } else {
            None
        }
    }

    /// Real and virtual oids, ascending.
    pub fn universe(&self) -> Vec<Oid> {
        let mut all: Vec<Oid> = self.objects.keys().copied().collect();
        all.extend(self.ledger.oids());
        all.sort_unstable();
        all
    }

    pub fn universe_size(&self) -> usize {
        self.objects.len() + self.ledger.total()
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.get(name)
    }

    /// Classes in definition order.
    pub fn classes(&self) -> impl Iterator<Item = (&str, &ClassDef)> {
        self.classes.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Name of the class whose intent renders as `sdnf`, if any.
    pub fn class_named_by_intent(&self, sdnf: &Sdnf) -> Option<&str> {
        self.intents.get(&sdnf.to_string()).map(String::as_str)
    }

    pub fn constraints(&self) -> &[ProbConstraint] {
        &self.constraints
    }

    pub fn ledger(&self) -> &VirtualLedger {
        &self.ledger
    }

    pub fn next_oid(&self) -> u64 {
        self.next_oid
    }

    /// Every attribute name carried by some real object.
    pub fn attribute_names(&self) -> BTreeSet<&str> {
        self.objects
            .values()
            .flat_map(|r| r.attributes.keys().map(String::as_str))
            .collect()
    }

    pub fn sdnf(&self, expr: &ClassExpr) -> Result<Sdnf> {
        normalize::sdnf(expr, self)
    }
}

impl ClassResolver for StoreData {
    fn class_intent(&self, name: &str) -> Option<&Sdnf> {
        self.classes.get(name).map(|c| &c.sdnf)
    }
}

/// The single writer over [`StoreData`].
#[derive(Debug, Clone, Default)]
pub struct Store {
    data: Arc<StoreData>,
}

impl Store {
    pub fn new() -> Self {
        Store {
            data: Arc::new(StoreData {
                next_oid: 1,
                ..StoreData::default()
            }),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Arc::clone(&self.data)
    }

    pub fn data(&self) -> &StoreData {
        &self.data
    }

    pub fn revision(&self) -> u64 {
        self.data.revision
    }

    /// Copy-on-write access for a mutation; bumps the revision.
    pub(crate) fn write(&mut self) -> &mut StoreData {
        let d = Arc::make_mut(&mut self.data);
        d.revision += 1;
        d
    }

    pub(crate) fn allocate_oid(data: &mut StoreData) -> Oid {
        let oid = Oid(data.next_oid);
        data.next_oid += 1;
        oid
    }

    pub fn create_object(&mut self, attributes: Attributes) -> Result<Oid> {
        check_attributes(&attributes)?;
        let d = self.write();
        let oid = Self::allocate_oid(d);
        d.objects.insert(oid, ObjectRecord { attributes });
        Ok(oid)
    }

    /// Inserts an object under a fixed oid (document loading).
    pub(crate) fn insert_object(&mut self, oid: Oid, attributes: Attributes) -> Result<()> {
        check_attributes(&attributes)?;
        if self.data.kind_of(oid).is_some() {
            return Err(Error::Integrity(format!("duplicate oid {oid}")));
        }
        let d = self.write();
        d.objects.insert(oid, ObjectRecord { attributes });
        d.next_oid = d.next_oid.max(oid.0 + 1);
        Ok(())
    }

    /// Removes the object and every edge touching it.
    pub fn delete_object(&mut self, oid: Oid) -> Result<()> {
        self.require_real(oid)?;
        let d = self.write();
        d.objects.remove(&oid);
        for rel in d.relations.values_mut() {
            if let Relation::Explicit(edges) = rel {
                edges.remove_node(oid);
            }
        }
        Ok(())
    }

    /// Replaces the attribute's value list.
    pub fn set_attribute(&mut self, oid: Oid, attr: &str, values: Vec<Value>) -> Result<()> {
        if !is_identifier(attr) {
            return Err(Error::InvalidIdentifier(attr.to_string()));
        }
        if values.is_empty() {
            return Err(Error::EmptyValueList(attr.to_string()));
        }
        self.require_real(oid)?;
        let d = self.write();
        d.objects
            .get_mut(&oid)
            .expect("checked")
            .attributes
            .insert(attr.to_string(), values);
        Ok(())
    }

    /// Makes the attribute undefined on the object.
    pub fn remove_attribute(&mut self, oid: Oid, attr: &str) -> Result<()> {
        self.require_real(oid)?;
        let d = self.write();
        d.objects
            .get_mut(&oid)
            .expect("checked")
            .attributes
            .remove(attr);
        Ok(())
    }

    fn require_real(&self, oid: Oid) -> Result<()> {
        match self.data.kind_of(oid) {
            Some(OidKind::Real) => Ok(()),
            Some(OidKind::Virtual) => Err(Error::VirtualObject(oid)),
            None => Err(Error::UnknownOid(oid)),
        }
    }

    /// Adds an edge, creating the relation as explicit when it is new.
    pub fn add_relation_edge(&mut self, name: &str, source: Oid, target: Oid) -> Result<()> {
        if !is_identifier(name) {
            return Err(Error::InvalidIdentifier(name.to_string()));
        }
        match self.data.relations.get(name) {
            None | Some(Relation::Explicit(_)) => {}
            Some(_) => return Err(Error::NotExplicit(name.to_string())),
        }
        self.require_real(source)?;
        self.require_real(target)?;
        let d = self.write();
        let rel = d
            .relations
            .entry(name.to_string())
            .or_insert_with(|| Relation::Explicit(EdgeSet::default()));
        if let Relation::Explicit(edges) = rel {
            edges.insert(source, target);
        }
        Ok(())
    }

    pub fn define_relation(&mut self, name: &str, def: RelationDef) -> Result<()> {
        if !is_identifier(name) {
            return Err(Error::InvalidIdentifier(name.to_string()));
        }
        if self.data.relations.contains_key(name) {
            return Err(Error::NameClash(name.to_string()));
        }
        let rel = match def {
            RelationDef::Explicit => Relation::Explicit(EdgeSet::default()),
            RelationDef::Class { domain, range } => {
                let domain_sdnf = self.data.sdnf(&domain)?;
                let range_sdnf = self.data.sdnf(&range)?;
                Relation::Class {
                    domain,
                    range,
                    domain_sdnf,
                    range_sdnf,
                }
            }
            RelationDef::Composite(path) => {
                if path.is_empty() {
                    return Err(Error::InvalidIdentifier(String::new()));
                }
                for step in &path {
                    if step == name {
                        return Err(Error::CyclicComposite(name.to_string()));
                    }
                    // Only already-defined relations may be referenced, so a
                    // cycle can never be closed later.
                    if !self.data.relations.contains_key(step) {
                        return Err(Error::UnknownRelation(step.clone()));
                    }
                }
                Relation::Composite(path)
            }
        };
        self.write().relations.insert(name.to_string(), rel);
        Ok(())
    }

    /// Defines (or redefines) a named class and returns its intent.
    pub fn define_class(&mut self, name: &str, expr: ClassExpr) -> Result<Sdnf> {
        if !is_identifier(name) || name == "any" || name == "empty" {
            return Err(Error::InvalidIdentifier(name.to_string()));
        }
        if expr.class_names().contains(name) {
            return Err(Error::InliningCycle(name.to_string()));
        }
        if self.data.classes.contains_key(name) {
            if let Some(user) = self.class_user(name) {
                return Err(Error::ClassInUse {
                    name: name.to_string(),
                    user,
                });
            }
        }
        let sdnf = self.data.sdnf(&expr)?;
        let key = sdnf.to_string();
        if let Some(existing) = self.data.intents.get(&key) {
            if existing != name {
                return Err(Error::DuplicateIntent {
                    name: name.to_string(),
                    existing: existing.clone(),
                });
            }
        }
        let d = self.write();
        if let Some(old) = d.classes.shift_remove(name) {
            d.intents.remove(&old.sdnf.to_string());
        }
        d.intents.insert(key, name.to_string());
        d.classes.insert(
            name.to_string(),
            ClassDef {
                expr,
                sdnf: sdnf.clone(),
            },
        );
        Ok(sdnf)
    }

    pub fn delete_class(&mut self, name: &str) -> Result<()> {
        if !self.data.classes.contains_key(name) {
            return Err(Error::UnknownClass(name.to_string()));
        }
        if let Some(user) = self.class_user(name) {
            return Err(Error::ClassInUse {
                name: name.to_string(),
                user,
            });
        }
        let d = self.write();
        if let Some(old) = d.classes.shift_remove(name) {
            d.intents.remove(&old.sdnf.to_string());
        }
        Ok(())
    }

    /// First class or class relation whose definition mentions `name`.
    fn class_user(&self, name: &str) -> Option<String> {
        for (n, c) in &self.data.classes {
            if n != name && c.expr.class_names().contains(name) {
                return Some(n.clone());
            }
        }
        for (n, r) in &self.data.relations {
            if let Relation::Class { domain, range, .. } = r {
                if domain.class_names().contains(name) || range.class_names().contains(name) {
                    return Some(n.clone());
                }
            }
        }
        None
    }

    /// Records constraints after they passed validation.
    pub(crate) fn set_constraints(&mut self, cs: Vec<ProbConstraint>) {
        self.write().constraints = cs;
    }

    pub(crate) fn ledger_mut(&mut self) -> &mut VirtualLedger {
        &mut self.write().ledger
    }

    pub(crate) fn data_mut(&mut self) -> &mut StoreData {
        self.write()
    }
}

fn check_attributes(attributes: &Attributes) -> Result<()> {
    for (k, v) in attributes {
        if !is_identifier(k) {
            return Err(Error::InvalidIdentifier(k.clone()));
        }
        if v.is_empty() {
            return Err(Error::EmptyValueList(k.clone()));
        }
    }
    Ok(())
}
