use proptest::prelude::*;
use rasterkit_core::augment::{
    build_dataset, clip_windows, constant_velocity_ade, cross_agent_job, curate, perturb_trajectory,
    perturb_trajectory_with_draw, render_job, CandidateClip, ClipConfig, DatasetConfig, PerturbationSpec, Provenance,
};
use rasterkit_core::geometry::{CameraIntrinsics, CameraMount, SE3Pose, Vec3};
use rasterkit_core::io::{AgentTrack, SceneLog};
use rasterkit_core::raster::render_frame;
use rasterkit_core::scene::{Cuboid, Polyline, SemanticClass, Trajectory, TrajectorySample};

fn path(id: &str, n: usize, pos: impl Fn(f64) -> (f64, f64)) -> Trajectory {
    Trajectory {
        agent_id: id.into(),
        samples: (0..n)
            .map(|i| {
                let t = i as f64 * 0.5;
                let (x, y) = pos(t);
                let (xb, yb) = pos(t + 0.01);
                TrajectorySample {
                    t,
                    pose: SE3Pose::from_yaw((yb - y).atan2(xb - x), Vec3::new(x, y, 0.0)),
                }
            })
            .collect(),
    }
}

fn track(id: &str, class: SemanticClass, n: usize, pos: impl Fn(f64) -> (f64, f64)) -> AgentTrack {
    AgentTrack {
        class,
        trajectory: path(id, n, pos),
        sizes: vec![[4.5, 1.9, 1.6]; n],
    }
}

/// 7 s at 2 Hz: exactly one default clip.
fn small_log(tracks: Vec<AgentTrack>) -> SceneLog {
    let n = 15;
    let road = Polyline::new(
        vec![
            Vec3::new(-20.0, -6.0, 0.0),
            Vec3::new(200.0, -6.0, 0.0),
            Vec3::new(200.0, 6.0, 0.0),
            Vec3::new(-20.0, 6.0, 0.0),
        ],
        SemanticClass::RoadSurface,
        true,
    )
    .unwrap();
    let lane = Polyline::new(
        (0..=20).map(|i| Vec3::new(-20.0 + i as f64 * 10.0, 1.75, 0.0)).collect(),
        SemanticClass::LaneLine,
        false,
    )
    .unwrap();
    let log = SceneLog {
        log_id: "small".into(),
        ego_id: "ego".into(),
        timestamps: (0..n).map(|i| i as f64 * 0.5).collect(),
        map: vec![road, lane],
        tracks,
        lights: vec![],
        cameras: vec![CameraMount::forward(
            "front",
            CameraIntrinsics {
                fx: 80.0,
                fy: 80.0,
                cx: 80.0,
                cy: 45.0,
            },
            Vec3::new(1.5, 0.0, 1.6),
            0.03,
            160,
            90,
        )],
    };
    log.validate().unwrap();
    log
}

fn accelerating(id: &str, y: f64) -> AgentTrack {
    track(id, SemanticClass::Vehicle, 15, move |t| (20.0 + 2.0 * t + 0.5 * t * t, y))
}

#[test]
fn perturbation_stays_within_its_bound() {
    let traj = path("ego", 15, |t| (8.0 * t, 0.3 * t));
    let spec = PerturbationSpec::default();
    let bound = spec.lat_range[0].abs().max(spec.lat_range[1].abs())
        + spec.long_range[0].abs().max(spec.long_range[1].abs())
        + 6.0 * spec.noise_sigma;
    let mut worst = 0.0f64;
    for seed in 0..10_000u64 {
        let out = perturb_trajectory(&traj, &PerturbationSpec { seed, ..spec }).unwrap();
        for (a, b) in traj.samples.iter().zip(&out.samples) {
            assert_eq!(a.t, b.t);
            let d = b.pose.translation - a.pose.translation;
            assert_eq!(d.z, 0.0);
            worst = worst.max((d.x * d.x + d.y * d.y).sqrt());
        }
    }
    assert!(worst <= bound, "{worst} > {bound}");
}

#[test]
fn zero_spec_is_identity_and_same_seed_repeats() {
    let traj = path("ego", 15, |t| (8.0 * t, (0.3 * t).sin()));
    assert_eq!(perturb_trajectory(&traj, &PerturbationSpec::zero()).unwrap(), traj);
    let spec = PerturbationSpec {
        seed: 99,
        ..Default::default()
    };
    let a = perturb_trajectory_with_draw(&traj, &spec).unwrap();
    let b = perturb_trajectory_with_draw(&traj, &spec).unwrap();
    assert_eq!(a, b);
}

fn rigid_strategy() -> impl Strategy<Value = SE3Pose> {
    (-3.2..3.2f64, -0.5..0.5f64, -3.2..3.2f64, -100.0..100.0f64, -100.0..100.0f64, -5.0..5.0f64)
        .prop_map(|(r, p, y, tx, ty, tz)| SE3Pose::from_rpy(r, p, y, Vec3::new(tx, ty, tz)))
}

proptest! {
    #[test]
    fn ade_is_invariant_to_rigid_motion(g in rigid_strategy(), a in -2.0..2.0f64, v in 0.0..15.0f64, curve in -0.3..0.3f64) {
        let traj = path("x", 15, |t| (v * t + 0.5 * a * t * t, curve * t * t));
        let moved = Trajectory {
            agent_id: "x".into(),
            samples: traj.samples.iter().map(|s| TrajectorySample { t: s.t, pose: g.compose(&s.pose) }).collect(),
        };
        let (e0, e1) = (constant_velocity_ade(&traj, 2.0, 5.0).unwrap(), constant_velocity_ade(&moved, 2.0, 5.0).unwrap());
        prop_assert!((e0 - e1).abs() < 1e-9, "{} vs {}", e0, e1);
    }

    #[test]
    fn perturbation_keeps_timestamps(seed in any::<u64>(), lat in 0.0..3.0f64, long in 0.0..3.0f64) {
        let traj = path("ego", 15, |t| (8.0 * t, 0.0));
        let spec = PerturbationSpec { seed, lat_range: [-lat, lat], long_range: [-long, long], noise_sigma: 0.0, ..Default::default() };
        let (out, draw) = perturb_trajectory_with_draw(&traj, &spec).unwrap();
        for (a, b) in traj.samples.iter().zip(&out.samples) {
            prop_assert_eq!(a.t, b.t);
            // Straight east-bound: offsets land on the axes.
            prop_assert!((b.pose.translation.x - a.pose.translation.x - draw.delta_long).abs() < 1e-9);
            prop_assert!((b.pose.translation.y - a.pose.translation.y - draw.delta_lat).abs() < 1e-9);
        }
    }
}

#[test]
fn curate_threshold_extremes() {
    let log = small_log(vec![
        track("ego", SemanticClass::Vehicle, 15, |t| (8.0 * t, 0.0)),
        accelerating("a", 3.5),
        track("short", SemanticClass::Vehicle, 6, |t| (5.0 * t, -3.5)),
    ]);
    let cfg = ClipConfig::default();
    let window = clip_windows(&log.timestamps, &cfg)[0];
    let clips: Vec<CandidateClip> = log
        .tracks
        .iter()
        .map(|t| CandidateClip::assess(&log.log_id, &t.trajectory, window, &cfg))
        .collect();
    assert!(curate(&clips, f64::INFINITY).is_empty());
    let all_valid: Vec<_> = clips.iter().filter(|c| c.valid).cloned().collect();
    assert_eq!(all_valid.len(), 2);
    assert_eq!(curate(&clips, -1.0), all_valid);
    // Uniform motion is perfectly extrapolated. For x = 0.5·t² + 2t the
    // backward-difference velocity lags by 0.25, so the error at lead τ is
    // 0.5·τ² + 0.25·τ, averaging 5.5 over τ = 0.5..=5.
    assert!(clips[0].ade.unwrap() < 1e-12);
    assert!((clips[1].ade.unwrap() - 5.5).abs() < 1e-9);
}

#[test]
fn one_clip_two_agents_gives_three_jobs() {
    let log = small_log(vec![
        track("ego", SemanticClass::Vehicle, 15, |t| (8.0 * t, 0.0)),
        accelerating("a", 3.5),
        accelerating("b", -3.5),
    ]);
    let cfg = DatasetConfig {
        fraction_perturbed: 0.0,
        ..Default::default()
    };
    let jobs = build_dataset(std::slice::from_ref(&log), &cfg).unwrap();
    let kinds: Vec<_> = jobs.iter().map(|(_, j)| j.provenance.clone()).collect();
    assert_eq!(jobs.len(), 3, "{kinds:?}");
    assert!(kinds.contains(&Provenance::Ego));
    assert!(kinds.contains(&Provenance::CrossAgent { agent_id: "a".into() }));
    assert!(kinds.contains(&Provenance::CrossAgent { agent_id: "b".into() }));

    let all = build_dataset(
        std::slice::from_ref(&log),
        &DatasetConfig {
            fraction_perturbed: 1.0,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(all.len(), 4);
    let ego = all.iter().find(|(_, j)| j.provenance == Provenance::Ego).unwrap();
    let twin = all.iter().find(|(_, j)| j.provenance == Provenance::Perturbed).unwrap();
    assert_eq!(ego.1.clip_index, twin.1.clip_index);
    assert_eq!(ego.1.timestamps, twin.1.timestamps);
    assert_ne!(ego.1.trajectory, twin.1.trajectory);

    // Same inputs, same jobs.
    assert_eq!(all, build_dataset(std::slice::from_ref(&log), &DatasetConfig { fraction_perturbed: 1.0, ..Default::default() }).unwrap());
}

#[test]
fn cross_agent_view_equals_shifted_ego_render() {
    let ego = track("ego", SemanticClass::Vehicle, 15, |t| (8.0 * t, 0.0));
    let twin = track("twin", SemanticClass::Vehicle, 15, |t| (8.0 * t, 3.5));
    let cone = AgentTrack {
        class: SemanticClass::TrafficCone,
        trajectory: path("cone", 15, |t| (70.0 + 1e-9 * t, 1.0)),
        sizes: vec![[0.4, 0.4, 0.7]; 15],
    };
    let parked = track("parked", SemanticClass::Vehicle, 15, |t| (50.0 + 1e-9 * t, -3.5));
    let log = small_log(vec![ego, twin, cone, parked]);
    let clips = ClipConfig::default();
    let window = clip_windows(&log.timestamps, &clips)[0];
    let job = cross_agent_job(&log, "twin", &window, &clips).unwrap();
    let views = render_job(&log, &job).unwrap();
    assert_eq!(views.len(), clips.history_frames);

    let ego_track = log.ego().unwrap();
    for view in &views {
        let shifted = ego_track
            .trajectory
            .interpolate(view.t)
            .unwrap()
            .compose(&SE3Pose::from_translation(Vec3::new(0.0, 3.5, 0.0)));
        let actors: Vec<Cuboid> = log.tracks.iter().filter(|t| t.id() != "twin").filter_map(|t| t.cuboid_at(view.t)).collect();
        let mut frame = log.frame_at(view.t, &shifted, &[]);
        frame.actors = actors;
        let reference = render_frame(&frame, 0, &job.cfg).unwrap();
        assert_eq!(view.image, reference, "t = {}", view.t);
    }
}
