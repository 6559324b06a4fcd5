use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::scene::{Trajectory, TrajectorySample};

/// How the drawn offsets vary along the clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetProfile {
    /// The full offset at every sample.
    #[default]
    ConstantOffset,
    /// Linear from zero at the first sample to the full offset after `ramp_duration`.
    Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationSpec {
    /// Lateral offset range in meters, positive to the left of the heading.
    pub lat_range: [f64; 2],
    /// Longitudinal offset range in meters, positive ahead.
    pub long_range: [f64; 2],
    /// Std of the per-sample planar noise, meters.
    pub noise_sigma: f64,
    pub seed: u64,
    pub profile: OffsetProfile,
    /// Seconds for the ramp profile to reach the full offset.
    pub ramp_duration: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            lat_range: [-1.0, 1.0],
            long_range: [-2.0, 2.0],
            noise_sigma: 0.1,
            seed: 0,
            profile: OffsetProfile::ConstantOffset,
            ramp_duration: 2.0,
        }
    }
}

impl PerturbationSpec {
    /// All ranges `[0, 0]`, no noise.
    pub fn zero() -> Self {
        PerturbationSpec {
            lat_range: [0.0, 0.0],
            long_range: [0.0, 0.0],
            noise_sigma: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("lat_range", self.lat_range), ("long_range", self.long_range)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::Config(format!("{name} [{}, {}] is not an ordered finite range", r[0], r[1])));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if self.profile == OffsetProfile::Ramp && !(self.ramp_duration > 0.0 && self.ramp_duration.is_finite()) {
            return Err(Error::Config("ramp_duration must be positive".into()));
        }
        Ok(())
    }
}

/// The random quantities behind one perturbed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDraw {
    pub delta_lat: f64,
    pub delta_long: f64,
    /// Per-sample planar noise `(east, north)`.
    pub noise: Vec<[f64; 2]>,
}

fn planar_heading(traj: &Trajectory, i: usize) -> f64 {
    traj.samples[i].pose.rotation.yaw()
}

/// Planar direction of travel at sample `i` by finite differences
/// (central inside, one-sided at the ends). `None` if locally stationary.
fn motion_direction(pos: &[Vec3], i: usize) -> Option<f64> {
    let n = pos.len();
    let (a, b) = match i {
        0 => (0, 1),
        _ if i == n - 1 => (n - 2, n - 1),
        _ => (i - 1, i + 1),
    };
    let (dx, dy) = (pos[b].x - pos[a].x, pos[b].y - pos[a].y);
    (dx != 0.0 || dy != 0.0).then(|| dy.atan2(dx))
}

/// Recovery perturbation: one lateral and one longitudinal offset drawn
/// uniformly per call, applied in each sample's heading frame, plus i.i.d.
/// planar Gaussian noise per sample. Headings are rotated by the change in
/// finite-difference travel direction.
pub fn perturb_trajectory(traj: &Trajectory, spec: &PerturbationSpec) -> Result<Trajectory> {
    perturb_trajectory_with_draw(traj, spec).map(|(t, _)| t)
}

pub fn perturb_trajectory_with_draw(traj: &Trajectory, spec: &PerturbationSpec) -> Result<(Trajectory, PerturbationDraw)> {
    spec.validate()?;
    traj.validate()?;
    let n = traj.samples.len();
    if n < 2 {
        return Err(Error::DegenerateTrajectory(format!(
            "'{}' needs at least 2 samples to define a heading",
            traj.agent_id
        )));
    }
    let p0 = traj.samples[0].pose.translation;
    if traj.samples.iter().all(|s| s.pose.translation == p0) {
        return Err(Error::DegenerateTrajectory(format!("all samples of '{}' coincide", traj.agent_id)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let delta_lat = rng.random_range(spec.lat_range[0]..=spec.lat_range[1]);
    let delta_long = rng.random_range(spec.long_range[0]..=spec.long_range[1]);
    let normal = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    let noise: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();

    let t0 = traj.start();
    let original: Vec<Vec3> = traj.samples.iter().map(|s| s.pose.translation).collect();
    let perturbed: Vec<Vec3> = (0..n)
        .map(|i| {
            let s = &traj.samples[i];
            let w = match spec.profile {
                OffsetProfile::ConstantOffset => 1.0,
                OffsetProfile::Ramp => ((s.t - t0) / spec.ramp_duration).min(1.0),
            };
            let psi = planar_heading(traj, i);
            let (sin, cos) = psi.sin_cos();
            let lon = w * delta_long;
            let lat = w * delta_lat;
            let dx = lon * cos - lat * sin + noise[i][0];
            let dy = lon * sin + lat * cos + noise[i][1];
            Vec3::new(original[i].x + dx, original[i].y + dy, original[i].z)
        })
        .collect();

    let samples = (0..n)
        .map(|i| {
            let s = &traj.samples[i];
            let turn = match (motion_direction(&original, i), motion_direction(&perturbed, i)) {
                (Some(a), Some(b)) => b - a,
                _ => 0.0,
            };
            let rotation = if turn == 0.0 {
                s.pose.rotation
            } else {
                Mat3::rot_z(turn) * s.pose.rotation
            };
            TrajectorySample {
                t: s.t,
                pose: crate::geometry::SE3Pose {
                    rotation,
                    translation: perturbed[i],
                },
            }
        })
        .collect();
    Ok((
        Trajectory {
            agent_id: traj.agent_id.clone(),
            samples,
        },
        PerturbationDraw {
            delta_lat,
            delta_long,
            noise,
        },
    ))
}
