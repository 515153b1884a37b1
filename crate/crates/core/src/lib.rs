//! Joint statistical models of shape, per-vertex surface features and
//! mixed-type indicators.
//!
//! Every component of an instance vector gets its own marginal distribution;
//! the dependencies between components are captured by a low-rank Gaussian on
//! the normal-scores (latent) scale. Conditioning that Gaussian on any subset
//! of components predicts the rest, with uncertainty, samples and principal
//! modes.
//!
//! ```no_run
//! use jointshape::{condition, BlockSigmas, FitConfig, JointModel, LatentModel, PartialObservation};
//! # fn run(cohort: &jointshape::shape::Cohort) -> jointshape::Result<()> {
//! let model = JointModel::fit(cohort, &FitConfig::default())?;
//! let obs = PartialObservation::from_assignments(&model, &[("age", "71"), ("sex", "female")], &BlockSigmas::uniform(0.1))?;
//! let posterior = condition(&model, &obs)?;
//! let predicted = posterior.predict();
//! # Ok(()) }
//! ```

pub mod condition;
pub mod crossval;
pub mod error;
pub mod io;
pub mod latent;
pub mod marginal;
pub mod model;
pub mod normal;
pub mod shape;
pub mod spec;
pub mod stats;
pub mod summary;

pub use condition::{condition, predict, BlockSigmas, ConditionalModel, ConditioningPlan, ObservedValue, PartialObservation};
pub use crossval::{cross_validate_sigma, SigmaGrid, SigmaSelection};
pub use error::{Error, Result};
pub use io::{load_model, model_digest, save_model, ModelFormat};
pub use latent::{build_latent_matrix, LatentGaussian};
pub use marginal::{fit_marginal, MarginalModel};
pub use model::{fit_joint_model, FitConfig, FitMetadata, JointModel, LatentModel, Mode};
pub use summary::{summarize, Histogram, PosteriorSummary};
pub use spec::{Block, MarginalChoice, ValueSource, VariableKind, VariableSpec};
