//! Generative density models of optical-flow warp error and a flow
//! estimator that uses them as a patch-based data cost.
//!
//! The crate is `no_std` + `alloc`. Enable the `std` feature to get the
//! BLAS-style matrix kernels from `nalgebra` (noticeably faster GMM scoring).
//! File formats, dataset ingestion and the command line live in the
//! companion `warpcost` crate.
//!
//! Module map:
//!
//! * [`image`], [`warp`], [`pyramid`]: images, flow fields, bilinear backward
//!   warping, derivatives and Gaussian pyramids.
//! * [`patches`]: warp-error patch extraction, subsampling and splits.
//! * [`models`]: the baseline constancy densities, their fitting, sampling
//!   and patch denoisers, plus Census/CSAD costs and eigen diagnostics.
//! * [`gmm`]: zero-mean full-covariance mixtures trained with EM.
//! * [`ais`]: annealed importance sampling with HMC transitions.
//! * [`flow`]: EPLL cost and half-quadratic splitting flow estimation.
//! * [`evaluation`]: held-out likelihood reports, sample grids, benchmarks.
//! * [`synthetic`]: layered synthetic scenes with exact ground-truth flow.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ais;
pub mod error;
pub mod evaluation;
pub mod flow;
pub mod gmm;
pub mod image;
pub mod linalg;
pub mod math;
pub mod models;
pub mod patches;
pub mod pyramid;
pub mod rng;
pub mod synthetic;
pub mod warp;

pub use error::{Error, Result};
pub use image::{FlowField, Image};
pub use models::{DensityModel, Family};
pub use patches::PatchSet;
