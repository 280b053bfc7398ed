//! Conditional tabular GAN trained per subpopulation.
//!
//! Continuous columns use mode-specific normalisation under a fitted Gaussian
//! mixture, categorical columns are one-hot with a conditional vector drawn by
//! training-by-sampling, and the discriminator takes several updates per
//! generator update.

mod gmm;
mod model;
mod sampler;
mod transform;

pub use gmm::Mixture;
pub use model::{fit_generator, GanConfig, GanLoss, GeneratorModel};
pub use sampler::{CondColumn, CondSampler};
pub use transform::{ColumnTransform, DataTransformer, Span, SpanKind};
