//! Annotation-efficient spectral recognition via self-calibrated dual
//! contrastive training.
//!
//! The crate trains a small 1-D convolutional network on spectra under
//! unsupervised or semi-supervised objectives built from instance-level and
//! category-level contrastive losses with pseudo-label self-calibration,
//! and evaluates the result with clustering and classification metrics.
//!
//! Module map:
//! - [`spectra`]: data model, CSV ingestion, preprocessing, annotation splits
//! - [`synth`]: deterministic synthetic spectrum generator for desk-scale runs
//! - [`augment`]: weak/strong spectral augmentation families
//! - [`autodiff`]: minimal reverse-mode tensor engine with the layer set the
//!   model needs, plus Adam
//! - [`model`]: encoder + embedding head + category head assembly
//! - [`losses`]: the contrastive, pseudo-supervision, and hybrid objectives
//! - [`train`]: the epoch loop, checkpointing, and evaluation entry point
//! - [`metrics`]: clustering (NMI/CAC/FMI) and classification (RAC/F1/AUROC)
//!   metrics
//! - [`config`]: the JSON experiment configuration shared with the CLI

pub mod augment;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod spectra;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
