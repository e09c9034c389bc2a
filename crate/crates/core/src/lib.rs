//! Barycentric alignment of neural representation matrices.
//!
//! Many models embed the same stimuli in coordinate systems that are only
//! defined up to an orthogonal transform. This crate quotients that symmetry
//! out by computing the Procrustes barycenter of a pool of representation
//! matrices, which yields a shared ("universal") embedding space together
//! with one orthogonal map per model.
//!
//! The pipeline is:
//!
//! 1. [`build_pool`] validates and zero-pads the training matrices.
//! 2. [`train_barycenter`] alternates orthogonal Procrustes alignment and
//!    template averaging until the template stops moving.
//! 3. [`project`] maps held-out representations into the shared space.
//! 4. [`consistency_scores`] gives a per-stimulus agreement score, and
//!    [`evaluate`] reports correlation, RMS and cross-model retrieval.
//!
//! [`storage`] defines the on-disk formats used by the `baryalign` CLI and
//! [`synth`] generates pools with a known ground truth for verification.

pub mod barycenter;
pub mod error;
pub mod metrics;
pub mod procrustes;
pub mod scoring;
pub mod storage;
pub mod synth;
pub mod types;

pub use barycenter::{
    total_objective, train_barycenter, train_barycenter_from, TrainConfig, TrainTrace,
};
pub use error::{Error, Result};
pub use metrics::{
    chance_level, correlation_score, evaluate, retrieval_accuracy, rms_score, score_correlation,
    CorrelationScores, EvalReport,
};
pub use procrustes::{procrustes_objective, solve_orthogonal_procrustes, ProcrustesSolution};
pub use scoring::{
    consistency_scores, cosine, project, ConsistencyReport, ProjectOptions, ProjectedPool,
    Similarity,
};
pub use synth::{
    brute_force_best_orthogonal, make_synthetic_pool, random_orthogonal, GroundTruth, SynthPools,
    SynthSpec,
};
pub use types::{build_pool, pad_pool, AlignmentModel, ModelPool, ReprMatrix, TrainingMeta};

/// Dense real matrix used throughout; rows are stimuli, columns features.
pub type Matrix = nalgebra::DMatrix<f64>;
