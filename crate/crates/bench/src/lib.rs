//! Synthetic cohorts with known structure and the held-out reconstruction
//! benchmark.

pub mod distribution;
pub mod experiment;
pub mod synth;

pub use distribution::{sample_distribution_report, DistributionReport};
pub use experiment::{run_reconstruction_experiment, Column, ExperimentOptions, OrdinalScoring, ExperimentReport, ReportRow, Split, Target};
pub use synth::{generate_cohort, GroundTruth, SyntheticCohort, SyntheticConfig};
