//! Coupled two-way adversarial domain generation with shallow perceptrons.
//!
//! Two generators translate features between a source and a target domain
//! and two discriminators judge realism in each domain. Training minimizes
//! adversarial, domain-center and cycle-content losses in alternation with
//! the discriminator objective. The generated co-target data, together with
//! a handful of labeled target samples, trains an ordinary classifier for
//! the target domain.
//!
//! Modules:
//! - [`matrix`], [`mlp`]: dense math, perceptrons, manual gradients, momentum SGD and Adam
//! - [`model`]: networks quartet and the full loss system with gradients
//! - [`trainer`]: alternating optimization, plain/class-wise/conditional variants
//! - [`data`]: datasets, CSV, standardization, synthetic tasks, PCA projection
//! - [`classifier`]: ridge least-squares and nearest-centroid classifiers
//! - [`persist`]: model files
//! - [`par`]: execution policy (rayon with the `parallel` feature)
//! - [`gradcheck`]: finite-difference verification of the gradients

pub mod classifier;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod matrix;
pub mod mlp;
pub mod model;
pub mod par;
pub mod persist;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
