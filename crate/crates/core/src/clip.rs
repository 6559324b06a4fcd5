//! Sutherland–Hodgman clipping.
//!
//! Near-plane clipping runs in camera space before projection; the image
//! rectangle is clipped in pixel space after projection. Depth is carried per
//! vertex and interpolated linearly at each crossing.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipVertex {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl ClipVertex {
    pub const fn new(u: f64, v: f64, depth: f64) -> Self {
        ClipVertex { u, v, depth }
    }
}

/// Screen-space polygon; empty means fully rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polygon2D {
    pub vertices: Vec<ClipVertex>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<ClipVertex>) -> Self {
        Polygon2D { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Signed shoelace area; positive for counter-clockwise in a y-up frame.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.u * b.v - b.u * a.v;
        }
        0.5 * acc
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRect {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl ClipRect {
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64) -> Option<ClipRect> {
        (u_min < u_max && v_min < v_max).then_some(ClipRect {
            u_min,
            u_max,
            v_min,
            v_max,
        })
    }

    /// The full image `[0, width] × [0, height]`.
    pub fn image(width: u32, height: u32) -> ClipRect {
        ClipRect {
            u_min: 0.0,
            u_max: width as f64,
            v_min: 0.0,
            v_max: height as f64,
        }
    }

    pub fn contains(&self, p: &ClipVertex) -> bool {
        p.u >= self.u_min && p.u <= self.u_max && p.v >= self.v_min && p.v <= self.v_max
    }
}

#[derive(Clone, Copy)]
enum Boundary {
    Left(f64),
    Right(f64),
    Bottom(f64),
    Top(f64),
}

impl Boundary {
    fn inside(self, p: &ClipVertex) -> bool {
        match self {
            Boundary::Left(b) => p.u >= b,
            Boundary::Right(b) => p.u <= b,
            Boundary::Bottom(b) => p.v <= b,
            Boundary::Top(b) => p.v >= b,
        }
    }

    fn intersect(self, s: &ClipVertex, e: &ClipVertex) -> ClipVertex {
        // The clipped coordinate is pinned exactly to the boundary.
        match self {
            Boundary::Left(b) | Boundary::Right(b) => {
                let t = (b - s.u) / (e.u - s.u);
                ClipVertex::new(b, lerp_within(s.v, e.v, t), lerp_within(s.depth, e.depth, t))
            }
            Boundary::Bottom(b) | Boundary::Top(b) => {
                let t = (b - s.v) / (e.v - s.v);
                ClipVertex::new(lerp_within(s.u, e.u, t), b, lerp_within(s.depth, e.depth, t))
            }
        }
    }
}

/// `a + t (b − a)` kept inside `[min(a, b), max(a, b)]` despite rounding.
fn lerp_within(a: f64, b: f64, t: f64) -> f64 {
    (a + t * (b - a)).clamp(a.min(b), a.max(b))
}

fn push_crossing(out: &mut Vec<ClipVertex>, p: ClipVertex) {
    if out.last() != Some(&p) {
        out.push(p);
    }
}

fn clip_against(input: &[ClipVertex], boundary: Boundary, out: &mut Vec<ClipVertex>) {
    out.clear();
    let Some(mut s) = input.last() else {
        return;
    };
    for e in input {
        match (boundary.inside(s), boundary.inside(e)) {
            (true, true) => out.push(*e),
            (true, false) => push_crossing(out, boundary.intersect(s, e)),
            (false, true) => {
                let x = boundary.intersect(s, e);
                if x != *e {
                    push_crossing(out, x);
                }
                out.push(*e);
            }
            (false, false) => {}
        }
        s = e;
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
}

/// Intersection of `poly` with `rect`: left, right, bottom and top half-plane
/// passes in that order. Polygons already inside come back unchanged.
pub fn clip_polygon(poly: &Polygon2D, rect: &ClipRect) -> Polygon2D {
    if poly.vertices.len() < 3 {
        return Polygon2D::default();
    }
    if poly.vertices.iter().all(|p| rect.contains(p)) {
        return poly.clone();
    }
    let mut a = poly.vertices.clone();
    let mut b = Vec::with_capacity(a.len() + 4);
    for boundary in [
        Boundary::Left(rect.u_min),
        Boundary::Right(rect.u_max),
        Boundary::Bottom(rect.v_max),
        Boundary::Top(rect.v_min),
    ] {
        clip_against(&a, boundary, &mut b);
        std::mem::swap(&mut a, &mut b);
        if a.len() < 3 {
            return Polygon2D::default();
        }
    }
    Polygon2D::new(a)
}

/// Keeps the part of segment `p0 → p1` with `z >= z_near` (camera frame).
pub fn clip_segment_near(p0: Vec3, p1: Vec3, z_near: f64) -> Option<(Vec3, Vec3)> {
    match (p0.z >= z_near, p1.z >= z_near) {
        (true, true) => Some((p0, p1)),
        (false, false) => None,
        (false, true) => Some((near_crossing(p0, p1, z_near), p1)),
        (true, false) => Some((p0, near_crossing(p0, p1, z_near))),
    }
}

fn near_crossing(a: Vec3, b: Vec3, z_near: f64) -> Vec3 {
    let t = (z_near - a.z) / (b.z - a.z);
    let mut p = a.lerp(b, t);
    p.z = z_near;
    p
}

/// Sutherland–Hodgman against the plane `z = z_near` for a camera-space polygon.
pub fn clip_polygon_near(poly: &[Vec3], z_near: f64) -> Vec<Vec3> {
    if poly.iter().all(|p| p.z >= z_near) {
        return poly.to_vec();
    }
    let mut out = Vec::with_capacity(poly.len() + 1);
    let Some(mut s) = poly.last() else {
        return out;
    };
    for e in poly {
        match (s.z >= z_near, e.z >= z_near) {
            (true, true) => out.push(*e),
            (true, false) => out.push(near_crossing(*s, *e, z_near)),
            (false, true) => {
                out.push(near_crossing(*s, *e, z_near));
                out.push(*e);
            }
            (false, false) => {}
        }
        s = e;
    }
    if out.len() < 3 {
        out.clear();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(lo: f64, hi: f64) -> Polygon2D {
        Polygon2D::new(vec![
            ClipVertex::new(lo, lo, 1.0),
            ClipVertex::new(hi, lo, 1.0),
            ClipVertex::new(hi, hi, 1.0),
            ClipVertex::new(lo, hi, 1.0),
        ])
    }

    #[test]
    fn inside_is_noop() {
        let rect = ClipRect::new(-5.0, 5.0, -5.0, 5.0).unwrap();
        let sq = square(0.0, 1.0);
        assert_eq!(clip_polygon(&sq, &rect), sq);
    }

    #[test]
    fn outside_is_rejected() {
        let rect = ClipRect::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let tri = Polygon2D::new(vec![
            ClipVertex::new(-5.0, 1.0, 1.0),
            ClipVertex::new(-1.0, 2.0, 1.0),
            ClipVertex::new(-3.0, 5.0, 1.0),
        ]);
        assert!(clip_polygon(&tri, &rect).is_empty());
    }

    #[test]
    fn half_square() {
        let rect = ClipRect::new(0.0, 2.0, -2.0, 2.0).unwrap();
        let out = clip_polygon(&square(-1.0, 1.0), &rect);
        assert!((out.area() - 2.0).abs() < 1e-12);
        for p in &out.vertices {
            assert!(p.u >= 0.0 && p.u <= 1.0 && p.v.abs() <= 1.0);
        }
    }

    #[test]
    fn depth_is_interpolated_at_crossings() {
        let rect = ClipRect::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let tri = Polygon2D::new(vec![
            ClipVertex::new(-2.0, 5.0, 2.0),
            ClipVertex::new(8.0, 4.0, 12.0),
            ClipVertex::new(8.0, 6.0, 12.0),
        ]);
        let out = clip_polygon(&tri, &rect);
        for p in out.vertices.iter().filter(|p| p.u == 0.0) {
            // Crossing at parameter 0.2 along either edge from the left vertex.
            assert!((p.depth - 4.0).abs() < 1e-12);
        }
        assert_eq!(out.vertices.iter().filter(|p| p.u == 0.0).count(), 2);
    }

    #[test]
    fn vertex_on_boundary_does_not_duplicate() {
        let rect = ClipRect::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let tri = Polygon2D::new(vec![
            ClipVertex::new(0.0, 5.0, 1.0),
            ClipVertex::new(-4.0, 1.0, 1.0),
            ClipVertex::new(4.0, 1.0, 1.0),
        ]);
        let out = clip_polygon(&tri, &rect);
        for i in 0..out.vertices.len() {
            assert_ne!(out.vertices[i], out.vertices[(i + 1) % out.vertices.len()]);
        }
    }

    #[test]
    fn segment_near_cases() {
        let a = Vec3::new(0.0, 0.0, 1.0);
        let b = Vec3::new(1.0, 1.0, 2.0);
        assert_eq!(clip_segment_near(a, b, 0.1), Some((a, b)));
        assert_eq!(
            clip_segment_near(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.05), 0.1),
            None
        );
        let p0 = Vec3::new(0.0, 0.0, 0.05);
        let p1 = Vec3::new(6.0, -3.0, 0.35);
        let (q0, q1) = clip_segment_near(p0, p1, 0.1).unwrap();
        let t: f64 = (0.1 - 0.05) / (0.35 - 0.05);
        assert!((t - 1.0 / 6.0).abs() < 1e-15);
        assert!((q0.x - 1.0).abs() < 1e-12 && (q0.y + 0.5).abs() < 1e-12);
        assert_eq!(q0.z, 0.1);
        assert_eq!(q1, p1);
        let (r0, r1) = clip_segment_near(p1, p0, 0.1).unwrap();
        assert_eq!(r0, p1);
        assert_eq!(r1, q0);
    }

    #[test]
    fn near_polygon_clip_cuts_behind_part() {
        let quad = [
            Vec3::new(-1.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, 3.0),
            Vec3::new(-1.0, 0.0, 3.0),
        ];
        let out = clip_polygon_near(&quad, 1.0);
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|p| p.z >= 1.0));
        assert!(clip_polygon_near(&quad[..2], 1.0).is_empty());
    }
}
