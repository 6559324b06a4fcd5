//! Annotated scene primitives: map polylines, oriented cuboids, traffic
//! lights, trajectories and the per-instant [`SceneFrame`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Mat3, SE3Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticClass {
    RoadSurface,
    Crosswalk,
    LaneLine,
    Vehicle,
    Bicycle,
    Pedestrian,
    TrafficCone,
    Barrier,
    ConstructionSign,
    GenericObject,
    TrafficLightRed,
    TrafficLightYellow,
    TrafficLightGreen,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 13] = [
        SemanticClass::RoadSurface,
        SemanticClass::Crosswalk,
        SemanticClass::LaneLine,
        SemanticClass::Vehicle,
        SemanticClass::Bicycle,
        SemanticClass::Pedestrian,
        SemanticClass::TrafficCone,
        SemanticClass::Barrier,
        SemanticClass::ConstructionSign,
        SemanticClass::GenericObject,
        SemanticClass::TrafficLightRed,
        SemanticClass::TrafficLightYellow,
        SemanticClass::TrafficLightGreen,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// Classes that can be carried by an actor cuboid.
    pub fn is_actor(self) -> bool {
        matches!(
            self,
            SemanticClass::Vehicle
                | SemanticClass::Bicycle
                | SemanticClass::Pedestrian
                | SemanticClass::TrafficCone
                | SemanticClass::Barrier
                | SemanticClass::ConstructionSign
                | SemanticClass::GenericObject
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0, 0, 0]);
}

/// One color per semantic class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<SemanticClass, Rgb>", into = "BTreeMap<SemanticClass, Rgb>")]
pub struct Palette([Rgb; 13]);

impl Palette {
    pub fn color(&self, class: SemanticClass) -> Rgb {
        self.0[class.index()]
    }

    pub fn set(&mut self, class: SemanticClass, color: Rgb) {
        self.0[class.index()] = color;
    }

    /// A second, visibly different palette. Used to synthesize a stand-in
    /// "camera" domain for the alignment demo.
    pub fn alternate() -> Palette {
        use SemanticClass::*;
        let mut p = Palette::default();
        for (class, c) in [
            (RoadSurface, [118, 112, 104]),
            (Crosswalk, [205, 200, 190]),
            (LaneLine, [230, 230, 225]),
            (Vehicle, [150, 40, 45]),
            (Bicycle, [60, 70, 40]),
            (Pedestrian, [70, 110, 60]),
            (TrafficCone, [240, 90, 30]),
            (Barrier, [170, 160, 150]),
            (ConstructionSign, [230, 150, 30]),
            (GenericObject, [100, 95, 90]),
            (TrafficLightRed, [255, 60, 40]),
            (TrafficLightYellow, [255, 200, 60]),
            (TrafficLightGreen, [60, 255, 140]),
        ] {
            p.set(class, Rgb(c));
        }
        p
    }
}

impl Default for Palette {
    fn default() -> Self {
        use SemanticClass::*;
        let mut colors = [Rgb::BLACK; 13];
        for (class, c) in [
            (RoadSurface, [64, 64, 64]),
            (Crosswalk, [255, 255, 255]),
            (LaneLine, [255, 215, 0]),
            (Vehicle, [0, 90, 255]),
            (Bicycle, [0, 255, 255]),
            (Pedestrian, [220, 20, 60]),
            (TrafficCone, [255, 140, 0]),
            (Barrier, [255, 0, 255]),
            (ConstructionSign, [139, 69, 19]),
            (GenericObject, [160, 160, 160]),
            (TrafficLightRed, [255, 0, 0]),
            (TrafficLightYellow, [255, 255, 0]),
            (TrafficLightGreen, [0, 255, 0]),
        ] {
            colors[class.index()] = Rgb(c);
        }
        Palette(colors)
    }
}

impl From<BTreeMap<SemanticClass, Rgb>> for Palette {
    fn from(map: BTreeMap<SemanticClass, Rgb>) -> Self {
        let mut p = Palette::default();
        for (class, c) in map {
            p.set(class, c);
        }
        p
    }
}

impl From<Palette> for BTreeMap<SemanticClass, Rgb> {
    fn from(p: Palette) -> Self {
        SemanticClass::ALL.iter().map(|&c| (c, p.color(c))).collect()
    }
}

/// A map element. Closed polylines bound filled areas (road surface,
/// crosswalks); open ones are stroked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<Vec3>,
    pub class: SemanticClass,
    #[serde(default)]
    pub closed: bool,
}

impl Polyline {
    pub fn new(vertices: Vec<Vec3>, class: SemanticClass, closed: bool) -> Result<Polyline> {
        let p = Polyline {
            vertices,
            class,
            closed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let min = if self.closed { 3 } else { 2 };
        if self.vertices.len() < min {
            return Err(Error::invalid(format!(
                "{} polyline needs at least {min} vertices, got {}",
                if self.closed { "closed" } else { "open" },
                self.vertices.len()
            )));
        }
        if let Some(i) = self.vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("polyline vertex {i} is not finite")));
        }
        Ok(())
    }
}

/// Oriented box with its origin at the center of the bottom face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub pose: SE3Pose,
    pub class: SemanticClass,
}

/// Fixed traffic-light box size (length, width, height) in meters.
pub const TRAFFIC_LIGHT_DIMS: (f64, f64, f64) = (0.4, 0.4, 1.2);

/// Vertex indices of the six faces into [`Cuboid::corners`], wound
/// counter-clockwise when seen from outside the box.
pub const CUBOID_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1], // bottom
    [4, 5, 6, 7], // top
    [0, 1, 5, 4], // front (+x)
    [1, 2, 6, 5], // left (+y)
    [2, 3, 7, 6], // rear (−x)
    [3, 0, 4, 7], // right (−y)
];

/// Corner index pairs of the twelve box edges.
pub const CUBOID_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

impl Cuboid {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("length", self.length), ("width", self.width), ("height", self.height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("cuboid {name} must be positive, got {v}")));
            }
        }
        self.pose.validate()
    }

    /// The eight corners in world coordinates.
    ///
    /// Bottom face first, counter-clockwise seen from above starting at the
    /// front-right corner `(+l/2, −w/2, 0)`, then the top face in the same order.
    pub fn corners(&self) -> [Vec3; 8] {
        let (hl, hw, h) = (self.length / 2.0, self.width / 2.0, self.height);
        let footprint = [(hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)];
        let mut out = [Vec3::ZERO; 8];
        for (i, &(x, y)) in footprint.iter().enumerate() {
            out[i] = self.pose.apply(Vec3::new(x, y, 0.0));
            out[i + 4] = self.pose.apply(Vec3::new(x, y, h));
        }
        out
    }

    /// Six planar quads covering the surface, outward winding.
    pub fn faces(&self) -> [[Vec3; 4]; 6] {
        let c = self.corners();
        CUBOID_FACES.map(|f| f.map(|i| c[i]))
    }
}

pub fn corners(b: &Cuboid) -> [Vec3; 8] {
    b.corners()
}

pub fn cuboid_faces(b: &Cuboid) -> [[Vec3; 4]; 6] {
    b.faces()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightState {
    Red,
    Yellow,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficLight {
    pub pose: SE3Pose,
    pub state: LightState,
}

impl TrafficLight {
    pub fn as_cuboid(&self) -> Cuboid {
        let (length, width, height) = TRAFFIC_LIGHT_DIMS;
        Cuboid {
            length,
            width,
            height,
            pose: self.pose,
            class: match self.state {
                LightState::Red => SemanticClass::TrafficLightRed,
                LightState::Yellow => SemanticClass::TrafficLightYellow,
                LightState::Green => SemanticClass::TrafficLightGreen,
            },
        }
    }
}

pub fn light_as_cuboid(light: &TrafficLight) -> Cuboid {
    light.as_cuboid()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: SE3Pose,
}

/// Timestamped poses of one agent, carrier-to-world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent_id: String,
    pub samples: Vec<TrajectorySample>,
}

/// Tolerance used to match a requested timestamp against stored samples.
pub const TIME_EPS: f64 = 1e-6;

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid(format!("trajectory '{}' has no samples", self.agent_id)));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.t.is_finite() {
                return Err(Error::invalid(format!("sample {i} has a non-finite timestamp")));
            }
            s.pose
                .validate()
                .map_err(|e| Error::invalid(format!("sample {i}: {e}")))?;
        }
        if let Some(i) = self.samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(format!(
                "timestamps not strictly increasing at sample {} ({} after {})",
                i + 1,
                self.samples[i + 1].t,
                self.samples[i].t
            )));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Index of the stored sample within [`TIME_EPS`] of `t`, if any.
    pub fn sample_index(&self, t: f64) -> Option<usize> {
        let i = self.samples.partition_point(|s| s.t < t - TIME_EPS);
        (i < self.samples.len() && (self.samples[i].t - t).abs() <= TIME_EPS).then_some(i)
    }

    /// Pose at time `t`: exact at stored timestamps, otherwise linear in
    /// translation and geodesic in rotation between the bracketing samples.
    pub fn interpolate(&self, t: f64) -> Result<SE3Pose> {
        if self.samples.is_empty() || !(t >= self.start() && t <= self.end()) {
            return Err(Error::OutOfRange {
                what: "interpolation time",
                value: t,
                lo: self.samples.first().map_or(f64::NAN, |s| s.t),
                hi: self.samples.last().map_or(f64::NAN, |s| s.t),
            });
        }
        let hi = self.samples.partition_point(|s| s.t < t);
        let b = &self.samples[hi];
        if b.t == t {
            return Ok(b.pose);
        }
        let a = &self.samples[hi - 1];
        let s = (t - a.t) / (b.t - a.t);
        let rel = (a.pose.rotation.transpose() * b.pose.rotation).log();
        Ok(SE3Pose {
            rotation: a.pose.rotation * Mat3::exp(rel.scale(s)),
            translation: a.pose.translation.lerp(b.pose.translation, s),
        })
    }
}

pub fn interpolate(traj: &Trajectory, t: f64) -> Result<SE3Pose> {
    traj.interpolate(t)
}

/// Everything needed to render one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFrame {
    pub timestamp: f64,
    pub map: Vec<Polyline>,
    pub actors: Vec<Cuboid>,
    pub lights: Vec<TrafficLight>,
    pub rigs: Vec<CameraRig>,
}

impl SceneFrame {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.map.iter().enumerate() {
            p.validate().map_err(|e| Error::invalid(format!("map[{i}]: {e}")))?;
        }
        for (i, a) in self.actors.iter().enumerate() {
            a.validate().map_err(|e| Error::invalid(format!("actors[{i}]: {e}")))?;
        }
        for (i, l) in self.lights.iter().enumerate() {
            l.pose.validate().map_err(|e| Error::invalid(format!("lights[{i}]: {e}")))?;
        }
        for (i, r) in self.rigs.iter().enumerate() {
            r.validate().map_err(|e| Error::invalid(format!("rigs[{i}]: {e}")))?;
        }
        Ok(())
    }
}
