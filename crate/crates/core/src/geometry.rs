//! Rigid-body poses, the pinhole camera model and world-to-image projection.
//!
//! Conventions: the world frame is right-handed and z-up. Carrier (vehicle)
//! frames are x-forward, y-left, z-up. Camera frames are x-right, y-down,
//! z-forward, so the depth of a point is its camera-frame z.

use serde::{Deserialize, Deserializer, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Orthonormality tolerance used when validating rotations on input.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Default near-plane distance in meters.
pub const DEFAULT_Z_NEAR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Linear interpolation `self + t (o - self)`.
    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self).scale(t)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose() * *self;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - target).abs());
            }
        }
        worst
    }

    /// Rotation about the world z axis.
    pub fn rot_z(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn rot_y(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_x(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    /// `Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Mat3 {
        Mat3::rot_z(yaw) * Mat3::rot_y(pitch) * Mat3::rot_x(roll)
    }

    /// Rodrigues' formula for the rotation vector `w` (axis times angle).
    pub fn exp(w: Vec3) -> Mat3 {
        let theta = w.norm();
        let k = skew(w);
        let (a, b) = if theta < 1e-8 {
            (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
        } else {
            (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
        };
        Mat3::IDENTITY + k.scale(a) + (k * k).scale(b)
    }

    /// Rotation vector of this rotation; inverse of [`Mat3::exp`] for angles in `[0, π]`.
    pub fn log(&self) -> Vec3 {
        let m = &self.0;
        let cos = ((m[0][0] + m[1][1] + m[2][2] - 1.0) * 0.5).clamp(-1.0, 1.0);
        let theta = cos.acos();
        let v = Vec3::new(m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]);
        if theta < 1e-8 {
            return v.scale(0.5);
        }
        if std::f64::consts::PI - theta < 1e-6 {
            // Near π the antisymmetric part vanishes; recover the axis from R + I.
            let diag = [m[0][0], m[1][1], m[2][2]];
            let i = (0..3)
                .max_by(|&a, &b| diag[a].partial_cmp(&diag[b]).unwrap())
                .unwrap();
            let col = Vec3::new(
                m[0][i] + if i == 0 { 1.0 } else { 0.0 },
                m[1][i] + if i == 1 { 1.0 } else { 0.0 },
                m[2][i] + if i == 2 { 1.0 } else { 0.0 },
            );
            let mut axis = col.scale(1.0 / col.norm());
            // Resolve the sign with the small antisymmetric residue when present.
            if axis.dot(v) < 0.0 {
                axis = -axis;
            }
            return axis.scale(theta);
        }
        v.scale(theta / (2.0 * theta.sin()))
    }

    /// Heading of the rotated x axis in the world xy-plane.
    pub fn yaw(&self) -> f64 {
        self.0[1][0].atan2(self.0[0][0])
    }

    fn scale(&self, s: f64) -> Mat3 {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|v| *v *= s);
        Mat3(out)
    }
}

fn skew(w: Vec3) -> Mat3 {
    Mat3([[0.0, -w.z, w.y], [w.z, 0.0, -w.x], [-w.y, w.x, 0.0]])
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        Mat3(out)
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self.0;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += o.0[i][j];
            }
        }
        Mat3(out)
    }
}

/// Rigid-body transform `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SE3Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for SE3Pose {
    fn default() -> Self {
        SE3Pose::IDENTITY
    }
}

impl SE3Pose {
    pub const IDENTITY: SE3Pose = SE3Pose {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    /// Checked constructor: the rotation must be orthonormal with determinant +1.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<SE3Pose> {
        let pose = SE3Pose {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn from_translation(t: Vec3) -> SE3Pose {
        SE3Pose {
            rotation: Mat3::IDENTITY,
            translation: t,
        }
    }

    pub fn from_yaw(yaw: f64, translation: Vec3) -> SE3Pose {
        SE3Pose {
            rotation: Mat3::rot_z(yaw),
            translation,
        }
    }

    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64, translation: Vec3) -> SE3Pose {
        SE3Pose {
            rotation: Mat3::from_rpy(roll, pitch, yaw),
            translation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.rotation.0.iter().flatten().all(|v| v.is_finite())
            && self.translation.is_finite();
        if !finite {
            return Err(Error::invalid("pose has non-finite entries"));
        }
        let err = self.rotation.orthonormality_error();
        if err >= ROTATION_TOLERANCE {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (|RᵀR − I|∞ = {err:.3e})"
            )));
        }
        if self.rotation.determinant() <= 0.0 {
            return Err(Error::invalid("rotation has negative determinant"));
        }
        Ok(())
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &SE3Pose) -> SE3Pose {
        SE3Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.mul_vec(other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> SE3Pose {
        let rt = self.rotation.transpose();
        SE3Pose {
            rotation: rt,
            translation: -rt.mul_vec(self.translation),
        }
    }
}

/// Convenience free function mirroring [`SE3Pose::compose`].
pub fn compose(a: &SE3Pose, b: &SE3Pose) -> SE3Pose {
    a.compose(b)
}

pub fn invert(p: &SE3Pose) -> SE3Pose {
    p.inverse()
}

// Poses are written canonically as a rotation matrix plus translation. On input
// a roll/pitch/yaw form is also accepted, which is easier to author by hand.
#[derive(Deserialize)]
#[serde(untagged)]
enum PoseRepr {
    Matrix {
        rotation: Mat3,
        translation: Vec3,
    },
    Euler {
        #[serde(default)]
        roll: f64,
        #[serde(default)]
        pitch: f64,
        yaw: f64,
        translation: Vec3,
    },
}

impl<'de> Deserialize<'de> for SE3Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pose = match PoseRepr::deserialize(d)? {
            PoseRepr::Matrix {
                rotation,
                translation,
            } => SE3Pose {
                rotation,
                translation,
            },
            PoseRepr::Euler {
                roll,
                pitch,
                yaw,
                translation,
            } => SE3Pose::from_rpy(roll, pitch, yaw, translation),
        };
        Ok(pose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("intrinsics need finite fx, fy > 0 and finite principal point"))
        }
    }

    /// The zero-skew matrix `K`.
    pub fn matrix(&self) -> Mat3 {
        Mat3([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])
    }
}

/// A camera placed in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub intrinsics: CameraIntrinsics,
    pub world_to_camera: SE3Pose,
    pub z_near: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraRig {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.world_to_camera.validate()?;
        if !(self.z_near > 0.0 && self.z_near.is_finite()) {
            return Err(Error::invalid("z_near must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be at least 1x1"));
        }
        Ok(())
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.world_to_camera.apply(p)
    }

    /// Projects a camera-frame point already known to be in front of the near plane.
    pub fn project_camera_point(&self, pc: Vec3) -> ProjectedPoint {
        let k = &self.intrinsics;
        let ux = k.fx * pc.x + k.cx * pc.z;
        let uy = k.fy * pc.y + k.cy * pc.z;
        ProjectedPoint {
            u: ux / pc.z,
            v: uy / pc.z,
            depth: pc.z,
        }
    }
}

/// A camera rigidly attached to a moving carrier (ego or another agent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraMount {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-carrier transform.
    pub mount: SE3Pose,
    #[serde(default = "default_z_near")]
    pub z_near: f64,
    pub width: u32,
    pub height: u32,
}

fn default_z_near() -> f64 {
    DEFAULT_Z_NEAR
}

/// Rotation taking camera axes (x-right, y-down, z-forward) to carrier axes
/// (x-forward, y-left, z-up) for a camera looking straight ahead.
pub fn forward_camera_rotation() -> Mat3 {
    Mat3::from_cols(
        Vec3::new(0.0, -1.0, 0.0),
        Vec3::new(0.0, 0.0, -1.0),
        Vec3::new(1.0, 0.0, 0.0),
    )
}

impl CameraMount {
    /// Forward-looking camera at `offset` in the carrier frame, pitched by
    /// `pitch` radians (positive looks down).
    pub fn forward(
        name: impl Into<String>,
        intrinsics: CameraIntrinsics,
        offset: Vec3,
        pitch: f64,
        width: u32,
        height: u32,
    ) -> CameraMount {
        let rotation = Mat3::rot_y(pitch) * forward_camera_rotation();
        CameraMount {
            name: name.into(),
            intrinsics,
            mount: SE3Pose {
                rotation,
                translation: offset,
            },
            z_near: DEFAULT_Z_NEAR,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rig_for(&SE3Pose::IDENTITY).validate()
    }

    /// The world-placed rig when the carrier sits at `carrier_pose` (carrier-to-world).
    pub fn rig_for(&self, carrier_pose: &SE3Pose) -> CameraRig {
        CameraRig {
            intrinsics: self.intrinsics,
            world_to_camera: carrier_pose.compose(&self.mount).inverse(),
            z_near: self.z_near,
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Projects a world point through `K · T_{w→c}` with perspective division.
///
/// Returns `None` for points closer than the rig's near plane. Off-screen
/// points are still returned.
pub fn project(point: Vec3, rig: &CameraRig) -> Option<ProjectedPoint> {
    let pc = rig.to_camera(point);
    if pc.z < rig.z_near {
        return None;
    }
    Some(rig.project_camera_point(pc))
}
