use thiserror::Error;

use crate::model::Oid;
use crate::probability::Violation;
use crate::syntax::Aggr;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. Each variant maps to exactly one
/// machine-readable code (see [`Error::code`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown operator `{op}` at byte {position}")]
    UnknownOperator { op: String, position: usize },
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("empty value list for attribute `{0}`")]
    EmptyValueList(String),
    #[error("unknown oid {0}")]
    UnknownOid(Oid),
    #[error("oid {0} is a virtual object and cannot carry attributes or relation edges")]
    VirtualObject(Oid),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{0}` is not an explicit relation")]
    NotExplicit(String),
    #[error("name `{0}` is already defined")]
    NameClash(String),
    #[error("composite relation `{0}` references itself")]
    CyclicComposite(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{0}` is defined in terms of itself")]
    InliningCycle(String),
    #[error("class `{name}` has the same intent as existing class `{existing}`")]
    DuplicateIntent { name: String, existing: String },
    #[error("class `{name}` is referenced by `{user}`")]
    ClassInUse { name: String, user: String },
    #[error("normal form budget exceeded: {what} (limit {limit})")]
    SizeBudgetExceeded { what: &'static str, limit: usize },
    #[error("aggregate `{0}` requires numeric values")]
    NonNumericAggregate(Aggr),
    #[error("evaluation recursion limit reached")]
    RecursionLimit,
    #[error("the oid set is empty")]
    EmptyOidSet,
    #[error("no object carries attribute `{0}`")]
    UnknownAttribute(String),
    #[error("inconsistent probability bounds for `{0}`")]
    InconsistentBounds(String),
    #[error("the store contains no objects")]
    EmptyUniverse,
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("forbidden constraint set: {}", fmt_violations(.0))]
    ForbiddenConstraints(Vec<Violation>),
    #[error("constraint cannot be satisfied: {0}")]
    Unsatisfiable(String),
    #[error("constraint processing did not converge: {0}")]
    ValidationGap(String),
    #[error("malformed document: {0}")]
    Document(String),
    #[error("unsupported document format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("i/o error: {0}")]
    Io(String),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn syntax(position: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            position,
            message: message.into(),
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::UnknownOperator { .. } => "UnknownOperator",
            Error::InvalidIdentifier(_) => "InvalidIdentifier",
            Error::EmptyValueList(_) => "EmptyValueList",
            Error::UnknownOid(_) => "UnknownOid",
            Error::VirtualObject(_) => "VirtualObject",
            Error::UnknownRelation(_) => "UnknownRelationName",
            Error::NotExplicit(_) => "NotExplicit",
            Error::NameClash(_) => "NameClash",
            Error::CyclicComposite(_) => "CyclicComposite",
            Error::UnknownClass(_) => "UnknownClassName",
            Error::InliningCycle(_) => "InliningCycle",
            Error::DuplicateIntent { .. } => "DuplicateIntent",
            Error::ClassInUse { .. } => "ClassInUse",
            Error::SizeBudgetExceeded { .. } => "SizeBudgetExceeded",
            Error::NonNumericAggregate(_) => "NonNumericAggregate",
            Error::RecursionLimit => "RecursionLimit",
            Error::EmptyOidSet => "EmptyOidSet",
            Error::UnknownAttribute(_) => "UnknownAttribute",
            Error::InconsistentBounds(_) => "InconsistentBounds",
            Error::EmptyUniverse => "EmptyUniverse",
            Error::InvalidConstraint(_) => "InvalidConstraint",
            Error::ForbiddenConstraints(_) => "ForbiddenConstraint",
            Error::Unsatisfiable(_) => "Unsatisfiable",
            Error::ValidationGap(_) => "ValidationGap",
            Error::Document(_) => "ParseError",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::Integrity(_) => "IntegrityError",
            Error::Io(_) => "IoError",
        }
    }

    /// Source position for parse errors.
    pub fn position(&self) -> Option<usize> {
        match self {
            Error::Syntax { position, .. } | Error::UnknownOperator { position, .. } => {
                Some(*position)
            }
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
