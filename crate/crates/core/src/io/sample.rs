//! The bundled sample log: 21 s of a three-lane road at 2 Hz with a
//! crosswalk, a stop line, a traffic light and a handful of agents. `data/sample_log.json`
//! is this function's canonical output.

use crate::geometry::{CameraIntrinsics, CameraMount, SE3Pose, Vec3};
use crate::scene::{LightState, Polyline, SemanticClass, Trajectory, TrajectorySample};

use super::log::{AgentTrack, LightStateSample, LightTrack, SceneLog};

pub const SAMPLE_LOG_ID: &str = "sample-001";
pub const SAMPLE_WIDTH: u32 = 1024;
pub const SAMPLE_HEIGHT: u32 = 576;

const DT: f64 = 0.5;
const FRAMES: usize = 43;

fn times() -> Vec<f64> {
    (0..FRAMES).map(|i| i as f64 * DT).collect()
}

/// Track from a planar position function; heading follows the direction of travel.
fn track(id: &str, class: SemanticClass, size: [f64; 3], pos: impl Fn(f64) -> (f64, f64)) -> AgentTrack {
    let ts = times();
    let samples = ts
        .iter()
        .map(|&t| {
            let (x, y) = pos(t);
            let (xa, ya) = pos(t - 0.05);
            let (xb, yb) = pos(t + 0.05);
            let yaw = if (xb - xa).abs() + (yb - ya).abs() < 1e-9 {
                0.0
            } else {
                (yb - ya).atan2(xb - xa)
            };
            TrajectorySample {
                t,
                pose: SE3Pose::from_yaw(yaw, Vec3::new(x, y, 0.0)),
            }
        })
        .collect();
    AgentTrack {
        class,
        trajectory: Trajectory {
            agent_id: id.into(),
            samples,
        },
        sizes: vec![size; ts.len()],
    }
}

fn line(class: SemanticClass, y: f64, x0: f64, x1: f64, step: f64) -> Polyline {
    let n = ((x1 - x0) / step).round() as usize;
    let vertices = (0..=n).map(|i| Vec3::new(x0 + i as f64 * step, y, 0.0)).collect();
    Polyline::new(vertices, class, false).expect("sample polyline")
}

fn area(class: SemanticClass, corners: &[(f64, f64)]) -> Polyline {
    Polyline::new(corners.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect(), class, true).expect("sample area")
}

pub fn sample_log() -> SceneLog {
    use SemanticClass::*;
    let map = vec![
        area(RoadSurface, &[(-20.0, -5.25), (260.0, -5.25), (260.0, 5.25), (-20.0, 5.25)]),
        area(Crosswalk, &[(119.0, -5.25), (123.0, -5.25), (123.0, 5.25), (119.0, 5.25)]),
        line(LaneLine, 5.25, -20.0, 260.0, 10.0),
        line(LaneLine, -5.25, -20.0, 260.0, 10.0),
        line(LaneLine, 1.75, -20.0, 260.0, 10.0),
        line(LaneLine, -1.75, -20.0, 260.0, 10.0),
        Polyline::new(
            vec![Vec3::new(117.5, -5.25, 0.0), Vec3::new(117.5, 0.0, 0.0)],
            LaneLine,
            false,
        )
        .expect("stop line"),
    ];
    let tracks = vec![
        track("ego", Vehicle, [4.6, 1.9, 1.6], |t| (8.0 * t + 0.6 * (0.5 * t).sin(), 0.0)),
        track("veh-lead", Vehicle, [4.8, 2.0, 1.7], |t| (25.0 + 6.0 * t + 0.15 * t * t, 0.0)),
        track("veh-left", Vehicle, [4.4, 1.8, 1.5], |t| {
            (-5.0 + 10.0 * t, 3.5 + 1.2 * (0.4 * t).sin())
        }),
        track("veh-parked", Vehicle, [4.5, 1.9, 1.6], |_| (60.0, -6.8)),
        track("truck-oncoming", Vehicle, [9.0, 2.5, 3.2], |t| (230.0 - 9.0 * t, -3.5)),
        track("ped-1", Pedestrian, [0.6, 0.6, 1.75], |t| (121.0, -7.5 + 0.9 * t)),
        track("cyclist-1", Bicycle, [1.8, 0.6, 1.6], |t| (15.0 + 4.5 * t, -4.6)),
        track("cone-1", TrafficCone, [0.4, 0.4, 0.7], |_| (80.0, -4.8)),
        track("barrier-1", Barrier, [2.0, 0.5, 1.0], |_| (150.0, 5.8)),
    ];
    let lights = vec![LightTrack {
        light_id: "light-1".into(),
        pose: SE3Pose::from_translation(Vec3::new(118.0, 6.5, 3.5)),
        states: vec![
            LightStateSample {
                t: 0.0,
                state: LightState::Green,
            },
            LightStateSample {
                t: 12.0,
                state: LightState::Yellow,
            },
            LightStateSample {
                t: 15.0,
                state: LightState::Red,
            },
        ],
    }];
    let intr = CameraIntrinsics {
        fx: 560.0,
        fy: 560.0,
        cx: SAMPLE_WIDTH as f64 / 2.0,
        cy: SAMPLE_HEIGHT as f64 / 2.0,
    };
    SceneLog {
        log_id: SAMPLE_LOG_ID.into(),
        ego_id: "ego".into(),
        timestamps: times(),
        map,
        tracks,
        lights,
        cameras: vec![CameraMount::forward(
            "front",
            intr,
            Vec3::new(1.5, 0.0, 1.6),
            0.03,
            SAMPLE_WIDTH,
            SAMPLE_HEIGHT,
        )],
    }
}
