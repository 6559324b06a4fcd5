use nalgebra::{Matrix3, Matrix3x4, Matrix4, Rotation3, UnitQuaternion, Vector3, Vector4};
use proptest::prelude::*;
use rasterkit_core::geometry::{project, CameraIntrinsics, CameraRig, Mat3, SE3Pose, Vec3};
use rasterkit_core::scene::{corners, cuboid_faces, Cuboid, SemanticClass, Trajectory, TrajectorySample};

fn to_na(p: &SE3Pose) -> Matrix4<f64> {
    let r = p.rotation.0;
    Matrix4::new(
        r[0][0], r[0][1], r[0][2], p.translation.x,
        r[1][0], r[1][1], r[1][2], p.translation.y,
        r[2][0], r[2][1], r[2][2], p.translation.z,
        0.0, 0.0, 0.0, 1.0,
    )
}

fn close4(a: &Matrix4<f64>, b: &Matrix4<f64>, tol: f64) -> bool {
    (a - b).abs().max() < tol
}

fn pose_strategy() -> impl Strategy<Value = SE3Pose> {
    (-3.2..3.2f64, -1.5..1.5f64, -3.2..3.2f64, -50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64)
        .prop_map(|(r, p, y, tx, ty, tz)| SE3Pose::from_rpy(r, p, y, Vec3::new(tx, ty, tz)))
}

fn rig_strategy() -> impl Strategy<Value = CameraRig> {
    (pose_strategy(), 50.0..2000.0f64, 50.0..2000.0f64, 0.0..1024.0f64, 0.0..576.0f64, 0.05..1.0f64).prop_map(
        |(pose, fx, fy, cx, cy, z_near)| CameraRig {
            intrinsics: CameraIntrinsics { fx, fy, cx, cy },
            world_to_camera: pose,
            z_near,
            width: 1024,
            height: 576,
        },
    )
}

/// `K [R | t]` assembled as a 3×4 matrix.
fn projection_matrix(rig: &CameraRig) -> Matrix3x4<f64> {
    let k = rig.intrinsics;
    let kmat = Matrix3::new(k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0);
    let rt = to_na(&rig.world_to_camera).fixed_view::<3, 4>(0, 0).into_owned();
    kmat * rt
}

#[test]
fn spec_examples() {
    let rig = CameraRig {
        intrinsics: CameraIntrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 320.0,
            cy: 240.0,
        },
        world_to_camera: SE3Pose::IDENTITY,
        z_near: 0.1,
        width: 640,
        height: 480,
    };
    let p = project(Vec3::new(0.0, 0.0, 5.0), &rig).unwrap();
    assert_eq!((p.u, p.v, p.depth), (320.0, 240.0, 5.0));
    assert!(project(Vec3::new(0.0, 0.0, 0.05), &rig).is_none());
    let h = projection_matrix(&rig) * Vector4::new(1.0, 2.0, 4.0, 1.0);
    let p = project(Vec3::new(1.0, 2.0, 4.0), &rig).unwrap();
    assert!((p.u - h.x / h.z).abs() < 1e-12 && (p.v - h.y / h.z).abs() < 1e-12);
    assert_eq!((p.u, p.v, p.depth), (345.0, 290.0, 4.0));
}

proptest! {
    #[test]
    fn projection_matches_matrix_oracle(rig in rig_strategy(), x in -60.0..60.0f64, y in -60.0..60.0f64, z in -20.0..20.0f64) {
        let h = projection_matrix(&rig) * Vector4::new(x, y, z, 1.0);
        match project(Vec3::new(x, y, z), &rig) {
            None => prop_assert!(h.z < rig.z_near),
            Some(p) => {
                prop_assert!(h.z >= rig.z_near);
                prop_assert!((p.u - h.x / h.z).abs() < 1e-9);
                prop_assert!((p.v - h.y / h.z).abs() < 1e-9);
                prop_assert!((p.depth - h.z).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn points_along_a_ray_share_pixels(rig in rig_strategy(), dir in (-1.0..1.0f64, -1.0..1.0f64), s in 1.1..20.0f64) {
        // A camera-frame point at depth 1 and its scaled copy.
        let cam_to_world = rig.world_to_camera.inverse();
        let a = cam_to_world.apply(Vec3::new(dir.0, dir.1, 1.0));
        let b = cam_to_world.apply(Vec3::new(dir.0 * s, dir.1 * s, s));
        let (pa, pb) = (project(a, &rig).unwrap(), project(b, &rig).unwrap());
        prop_assert!((pa.u - pb.u).abs() < 1e-9 * (1.0 + pa.u.abs()));
        prop_assert!((pa.v - pb.v).abs() < 1e-9 * (1.0 + pa.v.abs()));
        prop_assert!((pb.depth - s * pa.depth).abs() < 1e-9 * s);
    }

    #[test]
    fn projection_is_equivariant(rig in rig_strategy(), extra in pose_strategy(), x in -30.0..30.0f64, y in -30.0..30.0f64, z in -5.0..5.0f64) {
        let p = Vec3::new(x, y, z);
        let moved = CameraRig { world_to_camera: rig.world_to_camera.compose(&extra), ..rig };
        let a = project(extra.inverse().apply(p), &moved);
        let b = project(p, &rig);
        match (a, b) {
            (Some(a), Some(b)) => {
                prop_assert!((a.u - b.u).abs() < 1e-6 * (1.0 + b.u.abs()));
                prop_assert!((a.depth - b.depth).abs() < 1e-9 * (1.0 + b.depth.abs()));
            }
            (None, None) => {}
            // Only a point sitting on the near plane may land on either side.
            (a, b) => prop_assert!((rig.to_camera(p).z - rig.z_near).abs() < 1e-9, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn compose_and_invert_match_homogeneous_matrices(a in pose_strategy(), b in pose_strategy()) {
        prop_assert!(close4(&to_na(&a.compose(&b)), &(to_na(&a) * to_na(&b)), 1e-9));
        prop_assert!(close4(&to_na(&a.inverse()), &to_na(&a).try_inverse().unwrap(), 1e-9));
        prop_assert!(close4(&to_na(&a.compose(&a.inverse())), &Matrix4::identity(), 1e-9));
        prop_assert!(close4(&to_na(&SE3Pose::IDENTITY.compose(&a)), &to_na(&a), 0.0 + 1e-15));
    }

    #[test]
    fn corners_commute_with_pose_composition(q in pose_strategy(), p in pose_strategy(), l in 0.5..10.0f64, w in 0.5..4.0f64, h in 0.5..4.0f64) {
        let boxed = |pose| Cuboid { length: l, width: w, height: h, pose, class: SemanticClass::Vehicle };
        let direct = corners(&boxed(q.compose(&p)));
        let moved = corners(&boxed(p)).map(|c| q.apply(c));
        for (a, b) in direct.iter().zip(&moved) {
            prop_assert!((*a - *b).norm() < 1e-9);
        }
        let bottom = direct[..4].iter().fold(Vec3::ZERO, |acc, c| acc + *c).scale(0.25);
        prop_assert!((bottom - q.compose(&p).translation).norm() < 1e-9);
    }
}

#[test]
fn rotations_stay_orthonormal_after_many_compositions() {
    let step = SE3Pose::from_rpy(0.3, -0.2, 1.1, Vec3::new(0.5, -0.1, 0.02));
    let mut acc = SE3Pose::IDENTITY;
    for _ in 0..1000 {
        acc = acc.compose(&step);
    }
    assert!(acc.rotation.orthonormality_error() < 1e-7);
}

#[test]
fn yaw_quarter_turn_corners() {
    let base = Cuboid {
        length: 4.0,
        width: 2.0,
        height: 1.5,
        pose: SE3Pose::IDENTITY,
        class: SemanticClass::Vehicle,
    };
    let turned = Cuboid {
        pose: SE3Pose::from_yaw(std::f64::consts::FRAC_PI_2, Vec3::ZERO),
        ..base
    };
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
    for (a, b) in corners(&base).iter().zip(corners(&turned)) {
        let o = rot * Vector3::new(a.x, a.y, a.z);
        assert!((o.x - b.x).abs() < 1e-12 && (o.y - b.y).abs() < 1e-12 && (o.z - b.z).abs() < 1e-12);
        assert!((b.x + a.y).abs() < 1e-12 && (b.y - a.x).abs() < 1e-12);
    }
}

#[test]
fn faces_cover_each_corner_three_times() {
    let b = Cuboid {
        length: 2.0,
        width: 3.0,
        height: 5.0,
        pose: SE3Pose::from_rpy(0.1, 0.2, 0.3, Vec3::new(1.0, 2.0, 3.0)),
        class: SemanticClass::Barrier,
    };
    let cs = corners(&b);
    let faces = cuboid_faces(&b);
    for c in cs {
        let hits = faces.iter().flatten().filter(|v| **v == c).count();
        assert_eq!(hits, 3);
    }
    let areas: Vec<f64> = faces
        .iter()
        .map(|f| (f[1] - f[0]).cross(f[3] - f[0]).norm())
        .collect();
    let mut sorted = areas.clone();
    sorted.sort_by(f64::total_cmp);
    for (got, want) in sorted.iter().zip([6.0, 6.0, 10.0, 10.0, 15.0, 15.0]) {
        assert!((got - want).abs() < 1e-9);
    }
}

#[test]
fn interpolation_matches_quaternion_slerp() {
    let traj = Trajectory {
        agent_id: "a".into(),
        samples: vec![
            TrajectorySample {
                t: 0.0,
                pose: SE3Pose::from_rpy(0.2, -0.1, 0.0, Vec3::ZERO),
            },
            TrajectorySample {
                t: 1.0,
                pose: SE3Pose::from_rpy(-0.3, 0.4, 1.2, Vec3::new(2.0, 4.0, 6.0)),
            },
        ],
    };
    let quat = |m: Mat3| {
        let r = m.0;
        UnitQuaternion::from_matrix(&Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        ))
    };
    let (qa, qb) = (quat(traj.samples[0].pose.rotation), quat(traj.samples[1].pose.rotation));
    for s in [0.0, 0.25, 0.5, 0.9, 1.0] {
        let got = traj.interpolate(s).unwrap();
        let want = qa.slerp(&qb, s).to_rotation_matrix();
        let g = got.rotation.0;
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[i][j] - want[(i, j)]).abs() < 1e-9, "s = {s}");
            }
        }
        assert!((got.translation - Vec3::new(2.0 * s, 4.0 * s, 6.0 * s)).norm() < 1e-12);
    }
    let mid = Trajectory {
        agent_id: "b".into(),
        samples: vec![
            TrajectorySample {
                t: 0.0,
                pose: SE3Pose::IDENTITY,
            },
            TrajectorySample {
                t: 2.0,
                pose: SE3Pose::from_yaw(std::f64::consts::FRAC_PI_2, Vec3::ZERO),
            },
        ],
    };
    assert!((mid.interpolate(1.0).unwrap().rotation.yaw() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    assert!(mid.interpolate(2.5).is_err());
}
