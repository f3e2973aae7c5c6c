//! Maximum-gradient embeddings of finite metric spaces into random
//! ultrametrics, and clustering algorithms that run on ultrametric trees.
//!
//! The pieces, bottom-up:
//!
//! * [`metric`]: finite metrics, generators (cycles, paths, diamond graphs,
//!   random instances) and quotient metrics.
//! * [`ultrametric`]: Δ-labelled binary trees with LCA distances.
//! * [`partition`]: CKR random partitions and their quotient-lifted variant.
//! * [`embed`]: the random ultrametric `ρ` built from 16-adic partitions,
//!   plus maximum-gradient statistics.
//! * [`cluster`]: objective evaluators and exact / FPTAS dynamic programs on
//!   ultrametric trees.
//! * [`reduction`]: solve a monotone clustering problem on sampled
//!   ultrametrics and re-evaluate on the original metric.
//! * [`oracle`]: brute-force solvers used as ground truth.
//! * [`experiments`]: cycle and diamond experiments and growth curves.

pub mod error;
pub mod rng;
pub mod metric;
pub mod ultrametric;
pub mod partition;
pub mod embed;
pub mod cluster;
pub mod oracle;
pub mod reduction;
pub mod experiments;

pub use error::{Error, Result};
pub use metric::FiniteMetric;
pub use ultrametric::UltrametricTree;
