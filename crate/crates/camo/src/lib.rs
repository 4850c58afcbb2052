//! Camouflage scoring for honeyfile names.
//!
//! A honeyfile only works if its name blends in with the real files around
//! it. This crate measures that blending as cosine distance in a semantic
//! vector space over filename character n-grams, two ways:
//!
//! - simple score: distance from the candidate name to the mean direction of
//!   the directory's filename vectors;
//! - cluster score: distance to the nearest component of a von Mises-Fisher
//!   mixture fitted to those vectors, with the mixture order chosen by mean
//!   cosine silhouette.
//!
//! The [`stats`] module evaluates both metrics at corpus scale by comparing
//! local filenames against names sampled from other repositories, with KS
//! statistics and a power-law fit of directory sizes. The `camo` binary
//! exposes everything on the command line.

pub mod camouflage;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod model_selection;
pub mod rng;
pub mod stats;
pub mod vmf;

pub use camouflage::{
    cluster_score, normalize_per_directory, rank_candidates, simple_score, CamouflageReport,
    DirectoryContext,
};
pub use embedding::{EmbeddingProvider, HashedProvider, NgramConfig};
pub use error::{CamoError, Result};
pub use geometry::{cosine_distance, l2_normalize, mean_direction, Embedding};
pub use model_selection::{select_k, silhouette_scores};
pub use stats::{ks_two_sample, power_law_fit, run_experiment, ExperimentReport};
pub use vmf::{fit_mixture, FitConfig, VmfComponent, VmfMixture};
