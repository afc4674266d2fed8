//! DRAMA: anomaly detection by dimensionality reduction and prototype distances.
//!
//! The pipeline has four stages:
//!
//! 1. encode the data into a low-dimensional latent space with one of five
//!    reduction techniques ([`drt`]),
//! 2. cluster the latent points with Ward agglomerative clustering and take
//!    the cluster means as prototypes ([`prototypes`]),
//! 3. optionally decode the prototypes back into feature space,
//! 4. score each sample by its distance to the nearest prototype under one of
//!    ten metrics ([`metrics`]) and rank by descending score ([`detector`]).
//!
//! Around that core sit the synthetic benchmark generators ([`simgen`]), the
//! LOF and isolation-forest baselines ([`baselines`]), AUC/RWS evaluation
//! ([`scoring`]), CSV I/O ([`io`]) and the figure-level experiment drivers
//! ([`experiments`]).

pub mod baselines;
pub mod cli;
pub mod data;
pub mod detector;
pub mod drt;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod prototypes;
pub mod scoring;
pub mod simgen;

pub use data::{DataMatrix, Dataset, Label, LabelVector, LatentMatrix, Standardizer};
pub use detector::{run_pipeline, AnomalyRanking, RunConfig};
pub use drt::{DrtKind, DrtModel};
pub use error::{Error, Result};
pub use metrics::MetricKind;
