use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clips::{clip_windows, CandidateClip, ClipConfig, ClipSample, ClipWindow, DEFAULT_ADE_THRESHOLD};
use super::perturb::{perturb_trajectory_with_draw, PerturbationSpec};
use super::seed::{job_seed, selection_seed};
use crate::error::{Error, Result};
use crate::geometry::CameraMount;
use crate::io::log::{AgentTrack, SceneLog};
use crate::raster::{render_frame, Framebuffer, RenderConfig};
use crate::scene::{Cuboid, SemanticClass, Trajectory, TIME_EPS};

/// Which filter decides whether an ego clip is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgoFilter {
    /// Coverage and finiteness only.
    #[default]
    ValidityOnly,
    /// Same ADE threshold as the other agents.
    ConstantVelocityAde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub seed: u64,
    pub fraction_perturbed: f64,
    pub ade_threshold: f64,
    pub ego_filter: EgoFilter,
    /// Emit views from other vehicles' tracks.
    pub cross_agent: bool,
    pub clips: ClipConfig,
    /// Template for perturbed jobs; its `seed` is replaced per job.
    pub perturbation: PerturbationSpec,
    pub render: RenderConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 0,
            fraction_perturbed: 0.1,
            ade_threshold: DEFAULT_ADE_THRESHOLD,
            ego_filter: EgoFilter::default(),
            cross_agent: true,
            clips: ClipConfig::default(),
            perturbation: PerturbationSpec::default(),
            render: RenderConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction_perturbed) {
            return Err(Error::Config(format!(
                "fraction_perturbed must be in [0, 1], got {}",
                self.fraction_perturbed
            )));
        }
        if self.ade_threshold.is_nan() {
            return Err(Error::Config("ade_threshold is NaN".into()));
        }
        self.clips.validate()?;
        self.perturbation.validate()?;
        self.render.validate()
    }

    fn ade_filter_name(&self) -> String {
        format!("cv_ade>{}", self.ade_threshold)
    }

    fn ego_filter_name(&self) -> String {
        match self.ego_filter {
            EgoFilter::ValidityOnly => "validity_only".into(),
            EgoFilter::ConstantVelocityAde => self.ade_filter_name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Ego,
    Perturbed,
    CrossAgent { agent_id: String },
}

impl Provenance {
    /// Directory name under the log's output folder.
    pub fn dir_name(&self) -> String {
        match self {
            Provenance::Ego => "ego".into(),
            Provenance::Perturbed => "perturbed".into(),
            Provenance::CrossAgent { agent_id } => format!("cross_agent_{agent_id}"),
        }
    }
}

/// Drawn values behind a perturbed job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub spec: PerturbationSpec,
    pub delta_lat: f64,
    pub delta_long: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderJob {
    pub job_id: String,
    pub log_id: String,
    pub clip_index: usize,
    pub provenance: Provenance,
    pub seed: u64,
    /// Camera-carrying path over the clip window.
    pub trajectory: Trajectory,
    /// Camera mounts relative to the carrier, always the log's ego mounts.
    pub mounts: Vec<CameraMount>,
    /// Rendered frame times.
    pub timestamps: Vec<f64>,
    /// Agents left out of the rendered actor set.
    pub hidden_agents: Vec<String>,
    pub carrier_class: SemanticClass,
    pub carrier_size: [f64; 3],
    pub cfg: RenderConfig,
    pub filter: String,
    pub ade: Option<f64>,
    pub perturbation: Option<PerturbationRecord>,
    /// Carrier footprint intersects another agent at some rendered frame.
    pub overlap: bool,
}

fn window_slice(traj: &Trajectory, w: &ClipWindow) -> Trajectory {
    Trajectory {
        agent_id: traj.agent_id.clone(),
        samples: traj
            .samples
            .iter()
            .filter(|s| s.t >= w.start - TIME_EPS && s.t <= w.end + TIME_EPS)
            .copied()
            .collect(),
    }
}

/// Frame times snapped to the carrier's stored samples.
fn snapped_frame_times(traj: &Trajectory, w: &ClipWindow, cfg: &ClipConfig) -> Result<Vec<f64>> {
    w.frame_times(cfg)
        .into_iter()
        .map(|t| {
            traj.sample_index(t)
                .map(|i| traj.samples[i].t)
                .ok_or_else(|| Error::Insufficient(format!("'{}' has no sample at t = {t}", traj.agent_id)))
        })
        .collect()
}

fn view_job(
    log: &SceneLog,
    track: &AgentTrack,
    window: &ClipWindow,
    clips: &ClipConfig,
    provenance: Provenance,
) -> Result<RenderJob> {
    if !super::clips::clip_is_valid(&track.trajectory, window, clips) {
        return Err(Error::Insufficient(format!(
            "track '{}' does not cover clip {} ({}..{} s)",
            track.id(),
            window.index,
            window.start,
            window.end
        )));
    }
    let tag = match &provenance {
        Provenance::Ego => "ego".to_string(),
        Provenance::Perturbed => "perturbed".to_string(),
        Provenance::CrossAgent { agent_id } => format!("cross_agent/{agent_id}"),
    };
    Ok(RenderJob {
        job_id: format!("{}/c{:04}/{tag}", log.log_id, window.index),
        log_id: log.log_id.clone(),
        clip_index: window.index,
        provenance,
        seed: 0,
        trajectory: window_slice(&track.trajectory, window),
        mounts: log.cameras.clone(),
        timestamps: snapped_frame_times(&track.trajectory, window, clips)?,
        hidden_agents: vec![track.id().to_string()],
        carrier_class: track.class,
        carrier_size: track.size_at(window.split),
        cfg: RenderConfig::default(),
        filter: String::new(),
        ade: None,
        perturbation: None,
        overlap: false,
    })
}

/// The log's ego view of one clip.
pub fn ego_job(log: &SceneLog, window: &ClipWindow, clips: &ClipConfig) -> Result<RenderJob> {
    view_job(log, log.ego()?, window, clips, Provenance::Ego)
}

/// The clip seen from `agent_id`'s track with the ego camera mounts. The
/// agent's own box is hidden; the ego becomes an ordinary visible actor.
/// Passing the ego id gives the plain ego job.
pub fn cross_agent_job(log: &SceneLog, agent_id: &str, window: &ClipWindow, clips: &ClipConfig) -> Result<RenderJob> {
    if agent_id == log.ego_id {
        return ego_job(log, window, clips);
    }
    let track = log.track(agent_id).ok_or_else(|| Error::NotFound {
        kind: "agent",
        id: agent_id.to_string(),
    })?;
    view_job(
        log,
        track,
        window,
        clips,
        Provenance::CrossAgent {
            agent_id: agent_id.to_string(),
        },
    )
}

/// Separating-axis test on the ground-plane footprints of two boxes.
pub fn footprints_overlap(a: &Cuboid, b: &Cuboid) -> bool {
    let fa: Vec<(f64, f64)> = a.corners()[..4].iter().map(|p| (p.x, p.y)).collect();
    let fb: Vec<(f64, f64)> = b.corners()[..4].iter().map(|p| (p.x, p.y)).collect();
    let axes = [&fa, &fb].into_iter().flat_map(|f| {
        (0..2).map(move |i| {
            let (p, q) = (f[i], f[i + 1]);
            (q.1 - p.1, p.0 - q.0)
        })
    });
    for (nx, ny) in axes {
        let range = |f: &[(f64, f64)]| {
            f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let d = p.0 * nx + p.1 * ny;
                (lo.min(d), hi.max(d))
            })
        };
        let (a_lo, a_hi) = range(&fa);
        let (b_lo, b_hi) = range(&fb);
        if a_hi <= b_lo || b_hi <= a_lo {
            return false;
        }
    }
    true
}

fn carrier_overlaps(log: &SceneLog, job: &RenderJob) -> Result<bool> {
    let carrier_id = &job.trajectory.agent_id;
    for &t in &job.timestamps {
        let pose = job.trajectory.interpolate(t)?;
        let [length, width, height] = job.carrier_size;
        let me = Cuboid {
            length,
            width,
            height,
            pose,
            class: job.carrier_class,
        };
        let hit = log
            .tracks
            .iter()
            .filter(|tr| tr.id() != carrier_id)
            .filter_map(|tr| tr.cuboid_at(t))
            .any(|other| footprints_overlap(&me, &other));
        if hit {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Builds every job for `logs`: ego views of curated clips, views from other
/// vehicles whose clips pass the ADE filter, and perturbed twins for a seeded
/// fraction of the ego clips. Output is sorted by job id.
pub fn build_dataset(logs: &[SceneLog], cfg: &DatasetConfig) -> Result<Vec<(ClipSample, RenderJob)>> {
    cfg.validate()?;
    let mut order: Vec<&SceneLog> = logs.iter().collect();
    order.sort_by(|a, b| a.log_id.cmp(&b.log_id));
    if let Some(w) = order.windows(2).find(|w| w[0].log_id == w[1].log_id) {
        return Err(Error::invalid(format!("duplicate log_id '{}'", w[0].log_id)));
    }

    let mut per_log: Vec<Vec<RenderJob>> = Vec::with_capacity(order.len());
    let mut ego_clips: Vec<(usize, ClipWindow, Option<f64>)> = Vec::new();
    for (li, log) in order.iter().enumerate() {
        let ego = log.ego()?;
        let mut jobs = Vec::new();
        for window in clip_windows(&log.timestamps, &cfg.clips) {
            let cand = CandidateClip::assess(&log.log_id, &ego.trajectory, window, &cfg.clips);
            let keep = cand.valid
                && match cfg.ego_filter {
                    EgoFilter::ValidityOnly => true,
                    EgoFilter::ConstantVelocityAde => cand.ade.is_some_and(|a| a > cfg.ade_threshold),
                };
            if keep {
                let mut job = ego_job(log, &window, &cfg.clips)?;
                job.filter = cfg.ego_filter_name();
                job.ade = cand.ade;
                jobs.push(job);
                ego_clips.push((li, window, cand.ade));
            }
            if !cfg.cross_agent {
                continue;
            }
            for track in log.tracks.iter().filter(|t| t.id() != log.ego_id) {
                if track.class != SemanticClass::Vehicle {
                    continue;
                }
                let cand = CandidateClip::assess(&log.log_id, &track.trajectory, window, &cfg.clips);
                if super::clips::curate(std::slice::from_ref(&cand), cfg.ade_threshold).is_empty() {
                    continue;
                }
                let mut job = cross_agent_job(log, track.id(), &window, &cfg.clips)?;
                job.filter = cfg.ade_filter_name();
                job.ade = cand.ade;
                jobs.push(job);
            }
        }
        per_log.push(jobs);
    }

    let n = ego_clips.len();
    let k = (cfg.fraction_perturbed * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(selection_seed(cfg.seed));
    let chosen: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n, k.min(n)).into_iter().collect();
    for i in chosen {
        let (li, window, ade) = ego_clips[i];
        let mut job = view_job(order[li], order[li].ego()?, &window, &cfg.clips, Provenance::Perturbed)?;
        job.filter = cfg.ego_filter_name();
        job.ade = ade;
        per_log[li].push(job);
    }

    let mut out = Vec::new();
    for (li, mut jobs) in per_log.into_iter().enumerate() {
        let log = order[li];
        jobs.sort_by(|a, b| a.job_id.cmp(&b.job_id));
        for (index, mut job) in jobs.into_iter().enumerate() {
            job.seed = job_seed(cfg.seed, &log.log_id, index as u64);
            job.cfg = cfg.render.clone();
            let window = clip_windows(&log.timestamps, &cfg.clips)[job.clip_index];
            let source = match &job.provenance {
                Provenance::CrossAgent { agent_id } => &log.track(agent_id).expect("job agent exists").trajectory,
                _ => &log.ego()?.trajectory,
            };
            if job.provenance == Provenance::Perturbed {
                let spec = PerturbationSpec {
                    seed: job.seed,
                    ..cfg.perturbation
                };
                let (perturbed, draw) = perturb_trajectory_with_draw(&job.trajectory, &spec)?;
                job.trajectory = perturbed;
                job.perturbation = Some(PerturbationRecord {
                    spec,
                    delta_lat: draw.delta_lat,
                    delta_long: draw.delta_long,
                });
                job.overlap = carrier_overlaps(log, &job)?;
            }
            // The target stays the logged future, expressed from wherever the carrier is.
            let sample = ClipSample::build(&log.log_id, &job.trajectory, source, &window, &cfg.clips)?;
            out.push((sample, job));
        }
    }
    out.sort_by(|a, b| a.1.job_id.cmp(&b.1.job_id));
    Ok(out)
}

/// One rendered camera view of a job.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub t: f64,
    pub camera: String,
    pub image: Framebuffer,
}

/// Renders every frame and camera of `job` from `log`.
pub fn render_job(log: &SceneLog, job: &RenderJob) -> Result<Vec<RenderedView>> {
    let mut views = Vec::with_capacity(job.timestamps.len() * job.mounts.len());
    for &t in &job.timestamps {
        let pose = job.trajectory.interpolate(t)?;
        let mut frame = log.frame_at(t, &pose, &job.hidden_agents);
        frame.rigs = job.mounts.iter().map(|m| m.rig_for(&pose)).collect();
        if job.cfg.draw_carrier {
            let [length, width, height] = job.carrier_size;
            frame.actors.push(Cuboid {
                length,
                width,
                height,
                pose,
                class: job.carrier_class,
            });
        }
        for (i, mount) in job.mounts.iter().enumerate() {
            views.push(RenderedView {
                t,
                camera: mount.name.clone(),
                image: render_frame(&frame, i, &job.cfg)?,
            });
        }
    }
    Ok(views)
}

/// One camera view at time `t` from `agent`'s track (the ego by default).
/// The carrier's own box is left out unless the config draws it.
pub fn render_view(log: &SceneLog, t: f64, agent: Option<&str>, camera: Option<&str>, cfg: &RenderConfig) -> Result<Framebuffer> {
    cfg.validate()?;
    let track = match agent {
        Some(id) => log.track(id).ok_or_else(|| Error::NotFound {
            kind: "agent",
            id: id.to_string(),
        })?,
        None => log.ego()?,
    };
    let index = match camera {
        Some(name) => log.cameras.iter().position(|c| c.name == name).ok_or_else(|| Error::NotFound {
            kind: "camera",
            id: name.to_string(),
        })?,
        None if log.cameras.is_empty() => return Err(Error::Insufficient("log has no cameras".into())),
        None => 0,
    };
    let pose = track.trajectory.interpolate(t)?;
    let mut frame = log.frame_at(t, &pose, &[track.id().to_string()]);
    if cfg.draw_carrier {
        frame.actors.push(track.cuboid_with_pose(t, pose));
    }
    render_frame(&frame, index, cfg)
}
