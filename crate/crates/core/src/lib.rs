//! Semi-supervised node classification with a two-layer graph convolutional
//! network, auxiliary self-supervised pretext tasks and two-stage
//! teacher/student self-distillation.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: sparse undirected graphs and the symmetric normalized adjacency.
//! - [`dense`]: dense matrices, k-means, PCA and initialization.
//! - [`dataset`]: on-disk datasets, split sampling and planted-partition generation.
//! - [`pretext`]: the four self-supervision tasks (degree, clustering, partitioning, completion).
//! - [`model`]: the GCN backbone with classification and pretext heads, plus manual backprop.
//! - [`training`]: losses, Adam, and the teacher/student training loops.
//! - [`bench`]: run configuration, ablation sweeps and report records used by the CLI.

pub mod bench;
pub mod checkpoint;
pub mod dataset;
pub mod dense;
pub mod error;
pub mod graph;
pub mod model;
pub mod pretext;
pub mod rng;
pub mod training;

pub use error::{Result, SdssError};
