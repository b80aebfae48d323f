//! Hybrid quantum-classical crack classification and segmentation.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithm of
//! the toolkit: a dense statevector simulator, distance-estimation circuits,
//! q-means/k-means clustering, variational quantum classifiers with a
//! derivative-free optimizer, a logistic-regression baseline, PCA feature
//! reduction, image preprocessing and region analysis, and the end-to-end
//! pipeline. File formats, the CLI and
//! parallel corpus evaluation live in the `qseg` companion crate.

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod baseline;
pub mod clustering;
pub mod descriptors;
pub mod features;
pub mod imaging;
pub mod optim;
pub mod pipeline;
pub mod protocols;
pub mod qsim;
pub mod rng;
pub mod vqc;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
