//! Class-algebra reasoning over an in-memory object store.
//!
//! Class expressions are parsed ([`syntax`]), reduced to a canonical sorted
//! disjunctive normal form ([`normalize`]) and evaluated with three-valued
//! logic ([`evaluate`]). On top of that sit the ISA hierarchy and reports
//! ([`hierarchy`]), Horn renaming and rough bounds ([`horn`]), and relative
//! frequency constraints satisfied by adding virtual objects
//! ([`probability`]).

pub mod document;
pub mod error;
pub mod evaluate;
pub mod hierarchy;
pub mod horn;
pub mod model;
pub mod normalize;
pub mod probability;
pub mod syntax;
pub mod value;

pub use error::{Error, Result};
pub use evaluate::{Evaluator, ExtentResult, Ternary};
pub use model::{Oid, Store};
pub use normalize::{sdnf, Sdnf};
pub use syntax::{parse_class_expr, parse_where_cond, ClassExpr, WhereCond};
pub use value::Value;
