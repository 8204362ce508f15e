//! Exact inference in parametric causal factor graphs.
//!
//! A model ([`Model`]) is a set of directed parfactors over parameterised
//! random variables. Queries ([`Query`]) ask for a distribution over some
//! random variables given evidence and `do`-interventions. Engines:
//!
//! - [`lci_query`]: lifted causal inference (split, mutilate, lifted
//!   variable elimination),
//! - [`ve_query`]: variable elimination on the grounding,
//! - [`oracle_query`]: brute-force enumeration, for verification.

pub mod bench;
pub mod dsep;
pub mod error;
pub mod factor;
pub mod fixtures;
pub mod ground;
pub mod intervention;
pub mod io;
pub mod lifted;
pub mod model;
pub mod oracle;
pub mod query;
pub mod random;
pub mod ve;

pub use error::{Error, Result};
pub use ground::{ground, GroundFg};
pub use intervention::{lci_query, mutilate, split_on_dos};
pub use lifted::{lve, lve_query};
pub use model::{GroundRv, Model, ModelBuilder};
pub use oracle::oracle_query;
pub use query::{Distribution, DoAssignment, GroundQuery, Query, RvPattern};
pub use ve::{to_bayes_net, ve_query};
