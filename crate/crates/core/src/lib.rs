//! Mask-based explanations for graph-convolutional graph classifiers.
//!
//! The crate trains small GCN classifiers, learns edge and node-attribute
//! masks that preserve a prediction, turns the learned masks into node
//! importance scores, and evaluates the extracted subgraphs.

pub mod adam;
pub mod datasets;
pub mod dot;
pub mod error;
pub mod explainer;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod oracle;

pub use error::{Error, Result};
