//! Transfer learning by linear adjustment on the logit scale.
//!
//! A probability model fitted on a data-rich source domain is adapted to a
//! data-scarce target domain by estimating a low-dimensional shift vector
//! via an offset logistic fit, then classifying with the adjusted
//! probabilities. A simulation harness reproduces the drift benchmark and
//! checks the estimator's convergence rate empirically.

pub mod data;
pub mod error;
pub mod features;
pub mod glm;
pub mod harness;
pub mod logistic;
pub mod metrics;
pub mod source;
pub mod synth;
pub mod transfer;

pub use data::Dataset;
pub use error::{Error, Result};
pub use features::FeatureMap;
pub use glm::LinkKind;
pub use logistic::{FitReport, Penalty, PenaltyKind};
pub use source::SourceModel;
pub use synth::SimConfig;
pub use transfer::TransferModel;
