//! Explainability-guided topological dropping for GCN training.
//!
//! Each epoch, nodes (or edges) that the model predicts confidently but
//! explains poorly are dropped from the propagation graph with raised
//! probability, while the expected drop rate stays at `p`. The crate also
//! provides the random DropNode/DropEdge baselines, saliency explanations and
//! the explanation-quality metrics used to compare them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod drop;
pub mod error;
pub mod explain;
pub mod gcn;
pub mod graph;
pub mod harness;
pub mod linkpred;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
