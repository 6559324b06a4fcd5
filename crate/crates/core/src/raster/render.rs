use crate::clip::{clip_polygon, clip_polygon_near, clip_segment_near, ClipRect, ClipVertex, Polygon2D};
use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Vec3};
use crate::scene::{Cuboid, Polyline, SceneFrame, SemanticClass, CUBOID_EDGES};

use super::{
    fan, fill_triangle_with, stroke_segment, Background, FaceMode, Framebuffer, Paint, RenderConfig, GROUND_COLOR,
    SKY_COLOR, TRANSPARENT_FACE_FACTOR,
};

/// Depth offsets (meters) that keep coplanar layers from z-fighting: filled
/// ground areas are pushed back, strokes pulled forward.
const ROAD_DEPTH_OFFSET: f64 = 0.10;
const CROSSWALK_DEPTH_OFFSET: f64 = 0.05;
const STROKE_DEPTH_OFFSET: f64 = -0.05;

/// Map areas and strokes are split until every edge is at most this fraction
/// of the piece's nearest depth (floored at 1 m), so screen-linear depth stays
/// close to the true depth even for huge primitives that cross the near plane.
const AREA_SPLIT_RATIO: f64 = 0.25;
const AREA_SPLIT_MAX_LEVEL: u32 = 20;

/// A clipped, projected triangle and how to paint it.
#[derive(Debug, Clone, Copy)]
pub struct ScreenTriangle {
    pub vertices: [ClipVertex; 3],
    pub paint: Paint,
}

struct Emitter<'a> {
    rig: &'a CameraRig,
    rect: ClipRect,
    cfg: &'a RenderConfig,
    out: Vec<ScreenTriangle>,
}

impl Emitter<'_> {
    fn project(&self, pc: Vec3, offset: f64) -> ClipVertex {
        let p = self.rig.project_camera_point(pc);
        ClipVertex::new(p.u, p.v, (p.depth + offset).max(0.0))
    }

    /// True when every point lies outside one of the view frustum's planes.
    fn culled(&self, cam: &[Vec3]) -> bool {
        let k = &self.rig.intrinsics;
        let (w, h) = (self.rig.width as f64, self.rig.height as f64);
        let all = |f: &dyn Fn(&Vec3) -> bool| cam.iter().all(f);
        all(&|p| p.z < self.rig.z_near)
            || all(&|p| k.fx * p.x + k.cx * p.z < 0.0)
            || all(&|p| k.fx * p.x + (k.cx - w) * p.z > 0.0)
            || all(&|p| k.fy * p.y + k.cy * p.z < 0.0)
            || all(&|p| k.fy * p.y + (k.cy - h) * p.z > 0.0)
    }

    /// Camera-space triangle of a filled surface, subdivided by longest-edge
    /// bisection where it is large relative to its distance.
    fn area_triangle(&mut self, cam: [Vec3; 3], paint: Paint, offset: f64, level: u32) {
        if self.culled(&cam) {
            return;
        }
        let near = cam.iter().map(|p| p.z).fold(f64::INFINITY, f64::min).max(1.0);
        let (len, i) = (0..3)
            .map(|i| ((cam[(i + 1) % 3] - cam[i]).norm(), i))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
        if len <= AREA_SPLIT_RATIO * near || level >= AREA_SPLIT_MAX_LEVEL {
            self.camera_polygon(&cam, paint, offset);
            return;
        }
        let (a, b, c) = (cam[i], cam[(i + 1) % 3], cam[(i + 2) % 3]);
        let m = a.lerp(b, 0.5);
        self.area_triangle([a, m, c], paint, offset, level + 1);
        self.area_triangle([m, b, c], paint, offset, level + 1);
    }

    /// Convex planar polygon in camera coordinates.
    fn camera_polygon(&mut self, cam: &[Vec3], paint: Paint, offset: f64) {
        if self.culled(cam) {
            return;
        }
        let front = clip_polygon_near(cam, self.rig.z_near);
        if front.len() < 3 {
            return;
        }
        let screen = Polygon2D::new(front.iter().map(|&p| self.project(p, offset)).collect());
        let clipped = clip_polygon(&screen, &self.rect);
        self.out.extend(fan(&clipped).map(|vertices| ScreenTriangle { vertices, paint }));
    }

    fn segment(&mut self, a: Vec3, b: Vec3, paint: Paint) {
        self.camera_segment(self.rig.to_camera(a), self.rig.to_camera(b), paint, 0);
    }

    fn camera_segment(&mut self, ca: Vec3, cb: Vec3, paint: Paint, level: u32) {
        if self.culled(&[ca, cb]) {
            return;
        }
        let near = ca.z.min(cb.z).max(1.0);
        if (cb - ca).norm() > AREA_SPLIT_RATIO * near && level < AREA_SPLIT_MAX_LEVEL {
            let m = ca.lerp(cb, 0.5);
            self.camera_segment(ca, m, paint, level + 1);
            self.camera_segment(m, cb, paint, level + 1);
            return;
        }
        let Some((ca, cb)) = clip_segment_near(ca, cb, self.rig.z_near) else {
            return;
        };
        let (pa, pb) = (self.project(ca, STROKE_DEPTH_OFFSET), self.project(cb, STROKE_DEPTH_OFFSET));
        for vertices in stroke_segment(pa, pb, self.cfg.line_width, &self.rect) {
            self.out.push(ScreenTriangle { vertices, paint });
        }
    }

    fn map_element(&mut self, line: &Polyline) {
        let cfg = self.cfg;
        let paint = Paint::opaque(cfg.palette.color(line.class), cfg.decays(line.class));
        if line.closed {
            let offset = match line.class {
                SemanticClass::RoadSurface => ROAD_DEPTH_OFFSET,
                SemanticClass::Crosswalk => CROSSWALK_DEPTH_OFFSET,
                _ => 0.0,
            };
            for tri in triangulate(&line.vertices) {
                let cam = tri.map(|p| self.rig.to_camera(p));
                self.area_triangle(cam, paint, offset, 0);
            }
        } else {
            for w in line.vertices.windows(2) {
                self.segment(w[0], w[1], paint);
            }
        }
    }

    fn cuboid(&mut self, b: &Cuboid) {
        let cfg = self.cfg;
        let color = cfg.palette.color(b.class);
        let decay = cfg.decays(b.class);
        let transparent = cfg.face_mode == FaceMode::Transparent;
        let face_paint = Paint {
            color,
            factor: if transparent { TRANSPARENT_FACE_FACTOR } else { 1.0 },
            decay,
        };
        for face in b.faces() {
            let c = face.map(|p| self.rig.to_camera(p));
            self.area_triangle([c[0], c[1], c[2]], face_paint, 0.0, 0);
            self.area_triangle([c[0], c[2], c[3]], face_paint, 0.0, 0);
        }
        if transparent || cfg.draw_wireframe {
            let c = b.corners();
            let edge_paint = Paint::opaque(color, decay);
            for [i, j] in CUBOID_EDGES {
                self.segment(c[i], c[j], edge_paint);
            }
        }
    }
}

/// All triangles `render_frame` would fill, in submission order: map, actors,
/// then traffic lights.
pub fn scene_triangles(frame: &SceneFrame, rig: &CameraRig, cfg: &RenderConfig) -> Vec<ScreenTriangle> {
    let mut em = Emitter {
        rig,
        rect: ClipRect::image(rig.width, rig.height),
        cfg,
        out: Vec::new(),
    };
    for line in &frame.map {
        em.map_element(line);
    }
    for actor in &frame.actors {
        em.cuboid(actor);
    }
    for light in &frame.lights {
        em.cuboid(&light.as_cuboid());
    }
    em.out
}

/// Renders rig `rig_index` of `frame`.
pub fn render_frame(frame: &SceneFrame, rig_index: usize, cfg: &RenderConfig) -> Result<Framebuffer> {
    let rig = frame.rigs.get(rig_index).ok_or_else(|| Error::NotFound {
        kind: "rig index",
        id: rig_index.to_string(),
    })?;
    let mut fb = Framebuffer::new(rig.width, rig.height);
    composite_background(&mut fb, rig, cfg);
    for t in scene_triangles(frame, rig, cfg) {
        fill_triangle_with(&mut fb, &t.vertices, &t.paint, cfg.d_max);
    }
    Ok(fb)
}

/// Image row (continuous `v`) where the horizontal plane through the camera
/// meets infinity straight ahead. `None` when the camera looks straight up or
/// down, in which case the sign says which.
pub fn horizon_row(rig: &CameraRig) -> std::result::Result<f64, bool> {
    let cam_to_world = rig.world_to_camera.rotation.transpose();
    let forward = cam_to_world.mul_vec(Vec3::new(0.0, 0.0, 1.0));
    let flat = Vec3::new(forward.x, forward.y, 0.0);
    let n = flat.norm();
    if n < 1e-12 {
        // true: looking up, everything is sky
        return Err(forward.z > 0.0);
    }
    let dir = rig.world_to_camera.rotation.mul_vec(flat.scale(1.0 / n));
    if dir.z <= 1e-12 {
        return Err(forward.z > 0.0);
    }
    Ok(rig.intrinsics.fy * dir.y / dir.z + rig.intrinsics.cy)
}

/// Clears color to the configured background. Depth stays at `+∞`.
pub fn composite_background(fb: &mut Framebuffer, rig: &CameraRig, cfg: &RenderConfig) {
    match cfg.background {
        Background::Black => fb.fill(crate::scene::Rgb::BLACK),
        Background::SkyGround => {
            let split = match horizon_row(rig) {
                Ok(v) => v,
                Err(true) => f64::INFINITY,
                Err(false) => f64::NEG_INFINITY,
            };
            let w = fb.width as usize;
            for y in 0..fb.height as usize {
                let c = if (y as f64 + 0.5) < split { SKY_COLOR } else { GROUND_COLOR };
                for px in fb.color[y * w * 3..(y + 1) * w * 3].chunks_exact_mut(3) {
                    px.copy_from_slice(&c.0);
                }
            }
        }
    }
}

/// Triangulates a simple polygon by ear clipping in its dominant plane.
/// Convex input produces a fan from the first vertex.
pub fn triangulate(poly: &[Vec3]) -> Vec<[Vec3; 3]> {
    let n = poly.len();
    if n < 3 {
        return Vec::new();
    }
    // Newell normal picks the projection plane.
    let mut normal = Vec3::ZERO;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        normal = normal + Vec3::new((a.y - b.y) * (a.z + b.z), (a.z - b.z) * (a.x + b.x), (a.x - b.x) * (a.y + b.y));
    }
    let (ax, ay, az) = (normal.x.abs(), normal.y.abs(), normal.z.abs());
    let flat: Vec<(f64, f64)> = if az >= ax && az >= ay {
        poly.iter().map(|p| (p.x, p.y)).collect()
    } else if ay >= ax {
        poly.iter().map(|p| (p.z, p.x)).collect()
    } else {
        poly.iter().map(|p| (p.y, p.z)).collect()
    };
    let sign = {
        let mut a = 0.0;
        for i in 0..n {
            let (p, q) = (flat[i], flat[(i + 1) % n]);
            a += p.0 * q.1 - q.0 * p.1;
        }
        if a >= 0.0 { 1.0 } else { -1.0 }
    };
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| ((a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)) * sign;

    let convex = (0..n).all(|i| cross(flat[(i + n - 1) % n], flat[i], flat[(i + 1) % n]) >= 0.0);
    if convex {
        return (1..n - 1).map(|i| [poly[0], poly[i], poly[i + 1]]).collect();
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    let mut guard = 0;
    while idx.len() > 3 && guard < n * n {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ip, ic, inx) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (flat[ip], flat[ic], flat[inx]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ip && j != ic && j != inx && {
                    let p = flat[j];
                    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
                }
            });
            if blocked {
                continue;
            }
            out.push([poly[ip], poly[ic], poly[inx]]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            // Not simple; fall back to a fan over what is left.
            break;
        }
    }
    for i in 1..idx.len().saturating_sub(1) {
        out.push([poly[idx[0]], poly[idx[i]], poly[idx[i + 1]]]);
    }
    out
}
