//! Differentially private graph neural networks on population graphs.
//!
//! The crate is split along the pipeline:
//!
//! * [`graph`]: population graph representation, CSV ingestion, k-NN
//!   construction, homophily metrics, the homophily-controlled synthetic
//!   generator and train/val/test splits.
//! * [`tensor`] and [`autodiff`]: the small dense/sparse numeric core and a
//!   tape-based reverse-mode differentiator.
//! * [`gnn`]: GCN and MLP models, the training regimes (full graph, clipping,
//!   sub-graphing, DP-SGD) and evaluation.
//! * [`dp`]: occurrence-bounded subgraph sampling, clipping, the Gaussian
//!   mechanism, the hypergeometric Rényi accountant and the supremum-power
//!   bound.
//! * [`mia`]: shadow-model likelihood-ratio membership inference and ROC
//!   analysis.

pub mod autodiff;
pub mod dp;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod mia;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
