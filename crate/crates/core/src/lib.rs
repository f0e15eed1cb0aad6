//! Face verification with multilayer perceptrons over eigenface features.
//!
//! Two network topologies are supported:
//!
//! * **OCON** (one class in one network): an ensemble of small binary networks,
//!   one per class, each trained to separate its own class from every other.
//!   The per-class training jobs are independent and run on a worker pool.
//! * **ACON** (all classes in one network): a single network with one output
//!   per class.
//!
//! The pipeline is:
//!
//! 1. [`imageio`] loads PGM images (or synthesizes a dataset) and flattens
//!    them to unit-range vectors.
//! 2. [`eigenspace`] computes a PCA basis from the training vectors and
//!    projects every image onto it.
//! 3. [`mlp`] trains sigmoid networks by batch gradient descent with momentum.
//! 4. [`classifiers`] builds the OCON/ACON training tasks and decision rules.
//! 5. [`parallel`] distributes OCON jobs across workers and persists weights
//!    to replicated stores.
//! 6. [`evaluator`] runs the per-class 10 positive / 10 negative verification
//!    protocol and renders recognition-rate and convergence tables.
//!
//! See the crate's `examples/` directory for one runnable program per stage.

pub mod classifiers;
pub mod cli;
pub mod eigen;
pub mod eigenspace;
mod error;
pub mod evaluator;
pub mod imageio;
pub mod mlp;
pub mod parallel;
mod textfmt;

pub use error::{Error, Result};

/// Identifier of a registered class (subject). Classes are numbered from 1.
pub type ClassId = u32;

pub use classifiers::{AconModel, ClassModel, OconEnsemble};
pub use eigenspace::{Eigenspace, FeatureVector};
pub use evaluator::{ClassResult, EvaluationReport};
pub use imageio::{GrayImage, Role, Sample};
pub use mlp::{Topology, TrainingConfig, TrainingTrace, Weights};
pub use parallel::{PoolConfig, WeightStore};
