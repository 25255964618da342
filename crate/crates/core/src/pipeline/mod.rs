//! End-to-end orchestration: configuration, model fitting, artifacts and
//! the CLI verbs.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod models;

pub use commands::{cmd_evaluate, cmd_forecast, cmd_importance, cmd_synth, cmd_train, exit_code, load_model};
pub use config::{PipelineConfig, Ranges, MODEL_NAMES};
pub use models::{HyenaModel, NamedModel, SequenceModel};
