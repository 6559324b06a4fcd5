//! Scene logs, run configuration and batch output.

pub mod batch;
pub mod config;
pub mod log;
pub mod sample;

pub use batch::{audit, read_manifest, run_batch, AuditReport, BatchSummary, ImageEntry, ManifestEntry, ManifestHeader};
pub use config::{RunConfig, WORKERS_ENV};
pub use log::{
    load_log, parse_log, save_log, to_canonical_json, AgentTrack, JsonLog, LightStateSample, LightTrack, LogConverter,
    SceneLog, TrackSample,
};
pub use sample::sample_log;
