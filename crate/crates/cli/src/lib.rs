//! Pipeline orchestration for the `adafore` command: configuration,
//! stage runners, artifact manifest and plot-data export.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod plotdata;
pub mod reduced;

pub use config::{Overrides, Plan, RunConfig};
pub use error::{CliError, CliResult, Stage};
pub use manifest::{write_manifest, Manifest, ManifestEntry};
pub use pipeline::{execute, run_pipeline, run_stage};
pub use plotdata::{emit_plotdata, PlotKind};
