use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SE3Pose;
use crate::scene::{Trajectory, TIME_EPS};

/// Default ADE threshold for keeping a clip, meters.
pub const DEFAULT_ADE_THRESHOLD: f64 = 0.5;
/// Default trajectory sampling interval, seconds (2 Hz).
pub const DEFAULT_DT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClipConfig {
    /// Input window length, seconds.
    pub history: f64,
    /// Target window length, seconds.
    pub future: f64,
    pub dt: f64,
    /// Rendered input frames, ending at the split instant.
    pub history_frames: usize,
    /// Spacing between clip starts; defaults to `history + future`.
    pub stride: Option<f64>,
}

impl Default for ClipConfig {
    fn default() -> Self {
        ClipConfig {
            history: 2.0,
            future: 5.0,
            dt: DEFAULT_DT,
            history_frames: 4,
            stride: None,
        }
    }
}

impl ClipConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.history) && pos(self.future) && pos(self.dt)) {
            return Err(Error::Config("clip history, future and dt must be positive".into()));
        }
        if self.history_frames == 0 || (self.history_frames - 1) as f64 * self.dt > self.history + TIME_EPS {
            return Err(Error::Config(format!(
                "{} history frames at dt = {} do not fit in {} s",
                self.history_frames, self.dt, self.history
            )));
        }
        // Stride below the rendered span would make two clips write the same frame.
        if self.stride() < self.history_frames as f64 * self.dt - TIME_EPS {
            return Err(Error::Config(format!(
                "stride {} is shorter than the rendered history span",
                self.stride()
            )));
        }
        Ok(())
    }

    pub fn stride(&self) -> f64 {
        self.stride.unwrap_or(self.history + self.future)
    }

    pub fn future_steps(&self) -> usize {
        (self.future / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipWindow {
    pub index: usize,
    pub start: f64,
    pub split: f64,
    pub end: f64,
}

impl ClipWindow {
    /// Rendered frame times, oldest first, ending at the split.
    pub fn frame_times(&self, cfg: &ClipConfig) -> Vec<f64> {
        (0..cfg.history_frames)
            .rev()
            .map(|k| self.split - k as f64 * cfg.dt)
            .collect()
    }

    pub fn future_times(&self, cfg: &ClipConfig) -> Vec<f64> {
        (1..=cfg.future_steps()).map(|k| self.split + k as f64 * cfg.dt).collect()
    }

    /// Every instant a track must have a stored sample at for the clip to be valid.
    pub fn required_times(&self, cfg: &ClipConfig) -> Vec<f64> {
        let mut ts = self.frame_times(cfg);
        if cfg.history_frames < 2 {
            ts.insert(0, self.split - cfg.dt);
        }
        ts.extend(self.future_times(cfg));
        ts
    }
}

/// Non-overlapping clip windows over `[first, last]`.
pub fn clip_windows(timestamps: &[f64], cfg: &ClipConfig) -> Vec<ClipWindow> {
    let (Some(&first), Some(&last)) = (timestamps.first(), timestamps.last()) else {
        return Vec::new();
    };
    let span = cfg.history + cfg.future;
    (0..)
        .map(|k| (k, first + k as f64 * cfg.stride()))
        .take_while(|&(_, start)| start + span <= last + TIME_EPS)
        .map(|(index, start)| ClipWindow {
            index,
            start,
            split: start + cfg.history,
            end: start + span,
        })
        .collect()
}

/// Stored-sample coverage and finiteness over the window.
pub fn clip_is_valid(traj: &Trajectory, window: &ClipWindow, cfg: &ClipConfig) -> bool {
    window.required_times(cfg).into_iter().all(|t| {
        traj.sample_index(t).is_some_and(|i| {
            let p = &traj.samples[i].pose;
            p.translation.is_finite() && p.rotation.0.iter().flatten().all(|v| v.is_finite())
        })
    })
}

/// Average displacement error of constant-velocity extrapolation from
/// `split_t` over `horizon` seconds at 2 Hz.
pub fn constant_velocity_ade(traj: &Trajectory, split_t: f64, horizon: f64) -> Result<f64> {
    constant_velocity_ade_with(traj, split_t, horizon, DEFAULT_DT)
}

/// As [`constant_velocity_ade`] with an explicit step. Velocity comes from the
/// last history step, `(p(split) − p(split − dt)) / dt`; the error is the mean
/// 3D distance over `split + k·dt`, `k = 1..=round(horizon / dt)`.
pub fn constant_velocity_ade_with(traj: &Trajectory, split_t: f64, horizon: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let steps = if horizon.is_finite() { (horizon / dt).round() } else { 0.0 };
    if steps < 1.0 {
        return Err(Error::Insufficient(format!("future window of {horizon} s holds no sample at dt = {dt}")));
    }
    let at = |t: f64, what: &str| {
        traj.interpolate(t)
            .map(|p| p.translation)
            .map_err(|_| Error::Insufficient(format!("'{}' has no {what} pose at t = {t}", traj.agent_id)))
    };
    let prev = at(split_t - dt, "history")?;
    let now = at(split_t, "history")?;
    let vel = (now - prev).scale(1.0 / dt);
    let steps = steps as usize;
    let mut sum = 0.0;
    for k in 1..=steps {
        let tau = k as f64 * dt;
        let truth = at(split_t + tau, "future")?;
        sum += (now + vel.scale(tau) - truth).norm();
    }
    Ok(sum / steps as f64)
}

/// A clip of one agent's track, scored for curation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateClip {
    pub log_id: String,
    pub agent_id: String,
    pub window: ClipWindow,
    pub valid: bool,
    pub ade: Option<f64>,
}

impl CandidateClip {
    pub fn assess(log_id: &str, traj: &Trajectory, window: ClipWindow, cfg: &ClipConfig) -> CandidateClip {
        let valid = clip_is_valid(traj, &window, cfg);
        let ade = valid
            .then(|| constant_velocity_ade_with(traj, window.split, cfg.future, cfg.dt).ok())
            .flatten();
        CandidateClip {
            log_id: log_id.to_string(),
            agent_id: traj.agent_id.clone(),
            window,
            valid: valid && ade.is_some_and(f64::is_finite),
            ade,
        }
    }
}

/// Keeps exactly the valid clips with ADE strictly above `threshold`.
pub fn curate(clips: &[CandidateClip], threshold: f64) -> Vec<CandidateClip> {
    clips
        .iter()
        .filter(|c| c.valid && c.ade.is_some_and(|a| a > threshold))
        .cloned()
        .collect()
}

/// Planar pose in the carrier frame at the split instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl PlanarPose {
    fn relative(reference_inv: &SE3Pose, t: f64, pose: &SE3Pose) -> PlanarPose {
        let rel = reference_inv.compose(pose);
        PlanarPose {
            t,
            x: rel.translation.x,
            y: rel.translation.y,
            yaw: rel.rotation.yaw(),
        }
    }
}

/// Training sample for one clip: input-window poses of the carrier and the
/// target future, both in the carrier frame at the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSample {
    pub log_id: String,
    pub agent_id: String,
    pub clip_index: usize,
    pub split: f64,
    pub history: Vec<PlanarPose>,
    pub future: Vec<PlanarPose>,
}

impl ClipSample {
    /// `carrier` supplies the frame and history; `target` the future poses.
    pub fn build(
        log_id: &str,
        carrier: &Trajectory,
        target: &Trajectory,
        window: &ClipWindow,
        cfg: &ClipConfig,
    ) -> Result<ClipSample> {
        let reference_inv = carrier.interpolate(window.split)?.inverse();
        let history = window
            .frame_times(cfg)
            .into_iter()
            .map(|t| Ok(PlanarPose::relative(&reference_inv, t, &carrier.interpolate(t)?)))
            .collect::<Result<_>>()?;
        let future = window
            .future_times(cfg)
            .into_iter()
            .map(|t| Ok(PlanarPose::relative(&reference_inv, t, &target.interpolate(t)?)))
            .collect::<Result<_>>()?;
        Ok(ClipSample {
            log_id: log_id.to_string(),
            agent_id: carrier.agent_id.clone(),
            clip_index: window.index,
            split: window.split,
            history,
            future,
        })
    }
}
