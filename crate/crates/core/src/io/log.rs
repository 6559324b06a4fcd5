//! The JSON scene-log format: map, agent tracks, traffic-light states and
//! camera mounts for one recorded drive. See `docs/scene-format.md`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraMount, SE3Pose};
use crate::scene::{
    Cuboid, LightState, Polyline, SceneFrame, SemanticClass, TrafficLight, Trajectory, TrajectorySample, TIME_EPS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t: f64,
    pub pose: SE3Pose,
    /// Length, width, height in meters.
    pub size: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TrackRepr", into = "TrackRepr")]
pub struct AgentTrack {
    pub class: SemanticClass,
    pub trajectory: Trajectory,
    pub sizes: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct TrackRepr {
    agent_id: String,
    class: SemanticClass,
    samples: Vec<TrackSample>,
}

impl From<TrackRepr> for AgentTrack {
    fn from(r: TrackRepr) -> Self {
        let (samples, sizes) = r
            .samples
            .into_iter()
            .map(|s| (TrajectorySample { t: s.t, pose: s.pose }, s.size))
            .unzip();
        AgentTrack {
            class: r.class,
            trajectory: Trajectory {
                agent_id: r.agent_id,
                samples,
            },
            sizes,
        }
    }
}

impl From<AgentTrack> for TrackRepr {
    fn from(a: AgentTrack) -> Self {
        TrackRepr {
            agent_id: a.trajectory.agent_id,
            class: a.class,
            samples: a
                .trajectory
                .samples
                .into_iter()
                .zip(a.sizes)
                .map(|(s, size)| TrackSample { t: s.t, pose: s.pose, size })
                .collect(),
        }
    }
}

impl AgentTrack {
    pub fn id(&self) -> &str {
        &self.trajectory.agent_id
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.trajectory.start() && t <= self.trajectory.end()
    }

    /// Box size at `t`: the most recent annotated size at or before `t`.
    pub fn size_at(&self, t: f64) -> [f64; 3] {
        let i = self.trajectory.samples.partition_point(|s| s.t <= t + TIME_EPS);
        self.sizes[i.saturating_sub(1)]
    }

    pub fn cuboid_with_pose(&self, t: f64, pose: SE3Pose) -> Cuboid {
        let [length, width, height] = self.size_at(t);
        Cuboid {
            length,
            width,
            height,
            pose,
            class: self.class,
        }
    }

    pub fn cuboid_at(&self, t: f64) -> Option<Cuboid> {
        let pose = self.trajectory.interpolate(t).ok()?;
        Some(self.cuboid_with_pose(t, pose))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightStateSample {
    pub t: f64,
    pub state: LightState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightTrack {
    pub light_id: String,
    pub pose: SE3Pose,
    pub states: Vec<LightStateSample>,
}

impl LightTrack {
    /// State in effect at `t` (held from the latest change; the first state before it).
    pub fn state_at(&self, t: f64) -> LightState {
        let i = self.states.partition_point(|s| s.t <= t + TIME_EPS);
        self.states[i.saturating_sub(1)].state
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLog {
    pub log_id: String,
    pub ego_id: String,
    /// Annotated frame times, seconds.
    pub timestamps: Vec<f64>,
    pub map: Vec<Polyline>,
    pub tracks: Vec<AgentTrack>,
    #[serde(default)]
    pub lights: Vec<LightTrack>,
    pub cameras: Vec<CameraMount>,
}

fn invariant(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Invariant {
        path: path.into(),
        message: message.to_string(),
    }
}

fn strictly_increasing(ts: impl Iterator<Item = f64>) -> std::result::Result<(), (usize, f64)> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in ts.enumerate() {
        if !t.is_finite() || t <= prev {
            return Err((i, t));
        }
        prev = t;
    }
    Ok(())
}

impl SceneLog {
    pub fn track(&self, agent_id: &str) -> Option<&AgentTrack> {
        self.tracks.iter().find(|t| t.id() == agent_id)
    }

    pub fn ego(&self) -> Result<&AgentTrack> {
        self.track(&self.ego_id).ok_or_else(|| Error::NotFound {
            kind: "agent",
            id: self.ego_id.clone(),
        })
    }

    /// Checks every geometric and referential invariant, naming the offending element.
    pub fn validate(&self) -> Result<()> {
        if self.log_id.is_empty() {
            return Err(invariant("log_id", "must not be empty"));
        }
        strictly_increasing(self.timestamps.iter().copied())
            .map_err(|(i, t)| invariant(format!("timestamps[{i}]"), format!("{t} is not after the previous frame")))?;
        for (i, p) in self.map.iter().enumerate() {
            p.validate().map_err(|e| invariant(format!("map[{i}]"), e))?;
        }
        let mut ids = BTreeSet::new();
        for (i, track) in self.tracks.iter().enumerate() {
            let path = format!("tracks[{i}] ('{}')", track.id());
            if !ids.insert(track.id()) {
                return Err(invariant(path, "duplicate agent_id"));
            }
            if !track.class.is_actor() {
                return Err(invariant(path, format!("{:?} is not an actor class", track.class)));
            }
            if track.trajectory.samples.is_empty() {
                return Err(invariant(path, "track has no samples"));
            }
            strictly_increasing(track.trajectory.samples.iter().map(|s| s.t)).map_err(|(j, t)| {
                invariant(&path, format!("timestamps not strictly increasing at sample {j} (t = {t})"))
            })?;
            for (j, (s, size)) in track.trajectory.samples.iter().zip(&track.sizes).enumerate() {
                s.pose
                    .validate()
                    .map_err(|e| invariant(format!("{path}.samples[{j}].pose"), e))?;
                if size.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(invariant(
                        format!("{path}.samples[{j}].size"),
                        "dimensions must be positive",
                    ));
                }
            }
        }
        if !ids.contains(self.ego_id.as_str()) {
            return Err(invariant("ego_id", format!("no track named '{}'", self.ego_id)));
        }
        for (i, light) in self.lights.iter().enumerate() {
            let path = format!("lights[{i}] ('{}')", light.light_id);
            light.pose.validate().map_err(|e| invariant(&path, e))?;
            if light.states.is_empty() {
                return Err(invariant(path, "no states"));
            }
            strictly_increasing(light.states.iter().map(|s| s.t))
                .map_err(|(j, _)| invariant(&path, format!("state times not increasing at {j}")))?;
        }
        if self.cameras.is_empty() {
            return Err(invariant("cameras", "at least one camera is required"));
        }
        let mut names = BTreeSet::new();
        for (i, cam) in self.cameras.iter().enumerate() {
            let path = format!("cameras[{i}] ('{}')", cam.name);
            if !names.insert(cam.name.as_str()) {
                return Err(invariant(path, "duplicate camera name"));
            }
            cam.validate().map_err(|e| invariant(path, e))?;
        }
        Ok(())
    }

    /// Scene at time `t` seen from a carrier at `carrier_pose`. Agents in
    /// `hidden` are left out.
    pub fn frame_at(&self, t: f64, carrier_pose: &SE3Pose, hidden: &[String]) -> SceneFrame {
        let actors = self
            .tracks
            .iter()
            .filter(|tr| !hidden.iter().any(|h| h == tr.id()))
            .filter_map(|tr| tr.cuboid_at(t))
            .collect();
        let lights = self
            .lights
            .iter()
            .map(|l| TrafficLight {
                pose: l.pose,
                state: l.state_at(t),
            })
            .collect();
        SceneFrame {
            timestamp: t,
            map: self.map.clone(),
            actors,
            lights,
            rigs: self.cameras.iter().map(|c| c.rig_for(carrier_pose)).collect(),
        }
    }
}

/// Parses and validates a log from JSON text.
pub fn parse_log(text: &str) -> Result<SceneLog> {
    let log: SceneLog = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        let (line, column, message) = (e.line(), e.column(), e.to_string());
        match e.classify() {
            Category::Data => Error::Schema { line, column, message },
            _ => Error::Malformed { line, column, message },
        }
    })?;
    log.validate()?;
    Ok(log)
}

pub fn load_log(path: &Path) -> Result<SceneLog> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_log(&text)
}

/// Canonical serialization; `to_canonical_json(parse_log(x)) == x` for canonical `x`.
pub fn to_canonical_json(log: &SceneLog) -> String {
    let mut s = serde_json::to_string_pretty(log).expect("scene log serializes");
    s.push('\n');
    s
}

pub fn save_log(log: &SceneLog, path: &Path) -> Result<()> {
    std::fs::write(path, to_canonical_json(log)).map_err(|e| Error::io(path, e))
}

/// Hook for importing logs from other dataset formats.
pub trait LogConverter {
    fn convert(&self, source: &Path) -> Result<SceneLog>;
}

/// The native JSON format.
pub struct JsonLog;

impl LogConverter for JsonLog {
    fn convert(&self, source: &Path) -> Result<SceneLog> {
        load_log(source)
    }
}
