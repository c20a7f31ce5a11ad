//! Facial-expression analysis built on deterministic cellular automata.
//!
//! Action Units are encoded as per-region automaton lattices whose diagonals
//! are concatenated into a `$`-separated rule pattern. Patterns are matched
//! against an expression knowledge base to label frames and shots, and the
//! labelled shots form a queryable index.

pub mod ca;
pub mod config;
pub mod error;
pub mod facs;
pub mod features;
pub mod image;
pub mod linalg;
pub mod model_io;
pub mod pipeline;
pub mod retrieval;
pub mod synth;
pub mod vision;

pub use error::{Error, Result};
