//! Style/content decomposition of frame embeddings.
//!
//! Frames of several games from one genre are encoded into latent vectors.
//! The genre's latent matrix is factorized by SVD (no centering); the right
//! singular vectors with the largest singular values span a *style*
//! subspace that separates games, and the remaining directions span a
//! *content* subspace shared across games. The crate provides:
//!
//! - [`dataset`]: the `GEMB` matrix format, metadata CSV and validation;
//! - [`linalg`]: one-sided Jacobi SVD, bases, projections;
//! - [`decomposition`]: selection strategies, embeddings and the k sweep;
//! - [`metrics`]: silhouette domain gap and per-genre reports;
//! - [`tsne`]: exact t-SNE for 2-D views and t-SNE-space silhouettes;
//! - [`probes`]: regression and style-classification linear probes;
//! - [`synth`]: planted-structure datasets with recorded ground truth.

// `!(a < b)` is used on purpose so NaN lands on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod decomposition;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod probes;
pub mod rng;
pub mod synth;
pub mod tsne;

pub use dataset::{EmbeddingDataset, SampleMetadata, StyleLabel, TargetPaths, TargetTable};
pub use decomposition::{SelectionStrategy, SubspaceSplit};
pub use error::{Error, Result};
pub use matrix::FeatureMatrix;
