#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Robust sparse subspace clustering.
//!
//! The crate covers the whole pipeline for clustering noisy points that lie
//! near a union of linear subspaces:
//!
//! * [`model`]: the semi-random noisy union-of-subspaces generator, subspace
//!   geometry (principal angles, affinity) and model diagnostics.
//! * [`regress`]: sparse self-regression engines (LASSO, residual-constrained
//!   and equality-constrained l1 minimization, the two-step data-driven
//!   procedure and the bias-corrected Dantzig selector).
//! * [`graph`]: similarity graphs, normalized Laplacian spectra, eigengap
//!   cluster-count estimation, spectral clustering and PCA denoising.
//! * [`metrics`]: true/false discoveries, ROC sweeps and clustering error.
//! * [`asymptotics`]: soft thresholding and the fixed-point equations that
//!   predict the size of the LASSO solution in the proportional regime.
//! * [`io`] and [`experiment`]: matrix files, experiment configs and result
//!   tables used by the `rssc` command-line tool.

pub mod asymptotics;
mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod regress;
pub mod svg;

pub use error::{Result, SscError};
