pub mod arith;
pub mod aux_curves;
pub mod bounds;
pub mod candidate;
pub mod combinatorics;
pub mod config;
pub mod error;
pub mod es_model;
pub mod factor_terms;
pub mod lemmas;
pub mod mordell;
pub mod pipeline;
pub mod realnum;
mod ser;

pub use error::{Error, Result};
