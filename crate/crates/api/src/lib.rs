//! Wire types for the HTTP/JSON interface. Every route lives under `/v1`
//! and takes and returns JSON, except `render`, which answers with the
//! encoded image.
//!
//! Logs travel as raw text so the server can report line and column on
//! parse errors.

use rasterkit_core::align::{AlignReport, DemoConfig, RunSummary};
use rasterkit_core::augment::{CandidateClip, ClipConfig, DEFAULT_ADE_THRESHOLD};
use rasterkit_core::io::{BatchSummary, RunConfig};
use rasterkit_core::raster::{ImageFormat, RenderConfig};
use serde::{Deserialize, Serialize};

pub const HEALTH: &str = "/v1/health";
pub const VALIDATE: &str = "/v1/validate";
pub const RENDER: &str = "/v1/render";
pub const AUGMENT: &str = "/v1/augment";
pub const CURATE: &str = "/v1/curate";
pub const ALIGN_DEMO: &str = "/v1/align-demo";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

/// A scene log as JSON text, with a name for diagnostics (usually the path).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSource {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub logs: Vec<LogSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSummary {
    pub name: String,
    pub log_id: String,
    pub frames: usize,
    pub tracks: usize,
    pub cameras: usize,
    /// Clip windows under the default clip settings.
    pub clips: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub logs: Vec<LogSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    pub log: LogSource,
    pub t: f64,
    /// Carrier track; the ego when absent.
    #[serde(default)]
    pub agent: Option<String>,
    /// Camera name; the first mount when absent.
    #[serde(default)]
    pub camera: Option<String>,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub format: ImageFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentRequest {
    pub logs: Vec<LogSource>,
    /// `out` is a path on the server's filesystem.
    pub config: RunConfig,
}

pub type AugmentResponse = BatchSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurateRequest {
    pub logs: Vec<LogSource>,
    #[serde(default)]
    pub clips: ClipConfig,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Restrict to these agents; every track when empty.
    #[serde(default)]
    pub agents: Vec<String>,
}

fn default_threshold() -> f64 {
    DEFAULT_ADE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedClip {
    #[serde(flatten)]
    pub clip: CandidateClip,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurateResponse {
    pub threshold: f64,
    pub total: usize,
    pub valid: usize,
    pub kept: usize,
    pub clips: Vec<CuratedClip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignDemoRequest {
    #[serde(default)]
    pub config: DemoConfig,
    /// Also train the no-alignment baseline on the same data.
    #[serde(default)]
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignDemoResponse {
    pub aligned: AlignReport,
    pub baseline: Option<AlignReport>,
}

impl AlignDemoResponse {
    pub fn summary(&self) -> serde_json::Value {
        let s = |r: &AlignReport| serde_json::to_value(RunSummary::from(r)).expect("summary serializes");
        serde_json::json!({
            "seed": self.aligned.seed,
            "aligned": s(&self.aligned),
            "baseline": self.baseline.as_ref().map(s),
        })
    }
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Stable class tag, e.g. `schema_violation`.
    pub kind: String,
    pub message: String,
    /// Which input the error is about, when there are several.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    /// Field path for invariant violations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ErrorBody {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> ErrorBody {
        ErrorBody {
            kind: kind.into(),
            message: message.into(),
            source: None,
            line: None,
            column: None,
            path: None,
        }
    }

    pub fn from_core(e: &rasterkit_core::Error) -> ErrorBody {
        use rasterkit_core::Error as E;
        let mut body = ErrorBody::new(e.kind(), e.to_string());
        match e {
            E::Malformed { line, column, .. } | E::Schema { line, column, .. } => {
                body.line = Some(*line);
                body.column = Some(*column);
            }
            E::Invariant { path, .. } => body.path = Some(path.clone()),
            _ => {}
        }
        body
    }

    pub fn with_source(mut self, source: impl Into<String>) -> ErrorBody {
        self.source = Some(source.into());
        self
    }
}

impl std::fmt::Display for ErrorBody {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.source {
            Some(s) => write!(f, "{s}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}
