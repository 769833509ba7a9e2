//! Scenario-driven pipeline around the surrogate and orbit crates.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod scenario;
pub mod study;

pub use config::{CoordinateSystem, OracleKind, ScenarioConfig};
pub use error::{HarnessError, Result};
pub use manifest::{load_manifest, Artifact, ArtifactWriter, Manifest, MANIFEST_FILE};
pub use pipeline::{run_pipeline, RunOptions, RunOutcome};
pub use scenario::Scenario;
pub use study::{convergence_study, StudyOutcome};
