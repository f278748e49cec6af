//! Reference resolution into mental representations.
//!
//! The engine reads annotated documents (referring expressions with
//! pre-extracted features), resolves each RE to a discourse object by
//! combining a selection heuristic with agreement and semantic rules, ranks
//! candidates by activation, and bounds the candidate set with a fixed-quota
//! working memory. Responses are scored against gold keys with link-based
//! recall/precision, and the activation parameters can be tuned by greedy
//! coordinate search.

pub mod corpus;
pub mod error;
pub mod lexicon;
pub mod resolver;
pub mod scorer;
pub mod tuner;

pub use error::{Error, Result};
