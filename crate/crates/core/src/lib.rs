//! Partitioned agent-based simulation of GitHub-style event streams.
//!
//! Logs of `(time, eventType, userID, repoID)` tuples are loaded with
//! [`ingest`], fitted by one of the [`models`], replayed forward by the
//! [`engine`] and scored with [`metrics`]. [`synth`] builds ecosystems with
//! known parameters. See `examples/` for one program per capability.

pub mod config;
pub mod engine;
pub mod error;
pub mod hub;
pub mod ingest;
pub mod manifest;
pub mod metrics;
pub mod models;
pub mod sampling;
pub mod snapshot;
pub mod synth;
pub mod types;

pub use config::{fit_model, Config, FitConfig};
pub use engine::{run, RunOutput, SimulationConfig};
pub use error::{Error, Result};
pub use ingest::{build_slice, load_events, save_events, LogFormat, Metadata, TrainingSlice};
pub use metrics::{evaluate, EvalConfig, MetricReport};
pub use models::{Fitted, FittedModel, ModelKind};
pub use synth::{generate, SynthConfig, Variant};
pub use types::{Event, EventLog, EventType, TimeWindow, Timestamp};
