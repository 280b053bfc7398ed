//! Subpopulation-aware augmentation for imbalanced tabular data.
//!
//! Per-subpopulation synthetic-data generators, augmentation-fraction sweeps,
//! subpopulation-specific predictors, resampling baselines (SMOTE, random
//! under-sampling) and the evaluation pipeline comparing them.

pub mod artifact;
pub mod cohort_sim;
pub mod config;
pub mod data;
pub mod evaluation;
pub mod nn;
pub mod predict;
mod error;
pub mod pipeline;
pub mod resample;
pub mod seed;
pub mod tabgan;

pub use error::{Error, LossRecord, Result};

use std::fmt::{Debug, Display};

/// Floating-point scalar used by the numerical kernels (metrics, boosted
/// trees, logistic regression, the tabular GAN).
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::iter::Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Double-precision instantiations used by the pipeline and the CLI.
pub type Model = predict::TrainedModel<f64>;
pub type Generator = tabgan::GeneratorModel<f64>;
pub type Gbdt = predict::GradientBoostedTrees<f64>;
