//! Depth-buffered scanline rasterization into an RGB canvas.
//!
//! Every fragment is depth-tested against a single z-buffer (strict less-than,
//! first writer wins on ties) and its color is faded by
//! `α = max(0, 1 − d / d_max)` when depth decay is on. Coverage uses pixel
//! centers with a top-left rule so triangles sharing an edge never both write
//! the same pixel.

mod export;
mod render;

pub use export::{depth_to_bytes, depth_from_bytes, ppm_bytes, png_bytes, write_image, ImageFormat};
pub use render::{composite_background, horizon_row, render_frame, scene_triangles, ScreenTriangle};

use serde::{Deserialize, Serialize};

use crate::clip::{clip_polygon, ClipRect, ClipVertex, Polygon2D};
use crate::scene::{Palette, Rgb, SemanticClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceMode {
    #[default]
    Colored,
    Transparent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    #[default]
    Black,
    SkyGround,
}

/// Color multiplier for cuboid faces in [`FaceMode::Transparent`].
pub const TRANSPARENT_FACE_FACTOR: f64 = 0.35;

pub const SKY_COLOR: Rgb = Rgb([135, 206, 235]);
pub const GROUND_COLOR: Rgb = Rgb([90, 77, 65]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub face_mode: FaceMode,
    pub depth_decay: bool,
    pub background: Background,
    /// Distance in meters at which depth decay reaches black.
    pub d_max: f64,
    /// Stroke width in pixels for lane lines and wireframe edges.
    pub line_width: f64,
    pub draw_wireframe: bool,
    /// Draw the camera carrier's own cuboid.
    pub draw_carrier: bool,
    /// Classes exempt from depth decay.
    pub no_decay: Vec<SemanticClass>,
    pub palette: Palette,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            face_mode: FaceMode::Colored,
            depth_decay: true,
            background: Background::Black,
            d_max: 80.0,
            line_width: 2.0,
            draw_wireframe: false,
            draw_carrier: false,
            no_decay: Vec::new(),
            palette: Palette::default(),
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(crate::Error::Config(format!("d_max must be positive, got {}", self.d_max)));
        }
        if !(self.line_width >= 1.0 && self.line_width.is_finite()) {
            return Err(crate::Error::Config(format!(
                "line_width must be at least 1 px, got {}",
                self.line_width
            )));
        }
        Ok(())
    }

    pub(crate) fn decays(&self, class: SemanticClass) -> bool {
        self.depth_decay && !self.no_decay.contains(&class)
    }
}

/// RGB color plus a z-buffer initialized to `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    pub color: Vec<u8>,
    pub depth: Vec<f64>,
}

impl Framebuffer {
    pub fn new(width: u32, height: u32) -> Framebuffer {
        let n = width as usize * height as usize;
        Framebuffer {
            width,
            height,
            color: vec![0; n * 3],
            depth: vec![f64::INFINITY; n],
        }
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = self.index(x, y) * 3;
        Rgb([self.color[i], self.color[i + 1], self.color[i + 2]])
    }

    pub fn depth_at(&self, x: u32, y: u32) -> f64 {
        self.depth[self.index(x, y)]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, c: Rgb) {
        let i = self.index(x, y) * 3;
        self.color[i..i + 3].copy_from_slice(&c.0);
    }

    pub fn fill(&mut self, c: Rgb) {
        for px in self.color.chunks_exact_mut(3) {
            px.copy_from_slice(&c.0);
        }
    }

    pub fn clip_rect(&self) -> ClipRect {
        ClipRect::image(self.width, self.height)
    }

    /// Depth-tested write. Returns whether the fragment won.
    #[inline]
    fn write(&mut self, x: u32, y: u32, depth: f64, c: Rgb) -> bool {
        let i = self.index(x, y);
        if depth < self.depth[i] {
            self.depth[i] = depth;
            self.color[i * 3..i * 3 + 3].copy_from_slice(&c.0);
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub u: u32,
    pub v: u32,
    pub depth: f64,
    pub base_color: Rgb,
}

/// How a primitive's fragments are colored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Paint {
    pub color: Rgb,
    /// Constant coverage multiplier (1 for opaque, 0.35 for transparent faces).
    pub factor: f64,
    pub decay: bool,
}

impl Paint {
    pub fn opaque(color: Rgb, decay: bool) -> Paint {
        Paint {
            color,
            factor: 1.0,
            decay,
        }
    }

    #[inline]
    pub fn shade_at(&self, depth: f64, d_max: f64) -> Rgb {
        let alpha = if self.decay {
            (1.0 - depth / d_max).max(0.0)
        } else {
            1.0
        };
        let k = alpha * self.factor;
        Rgb(self.color.0.map(|c| round_channel(c as f64 * k)))
    }
}

/// `x.round() as u8` (saturating), without the libm call that
/// `round` lowers to on baseline x86-64. `x - trunc(x)` is exact here.
#[inline]
fn round_channel(x: f64) -> u8 {
    let t = x as u8;
    t.saturating_add(u8::from(x - t as f64 >= 0.5))
}

/// Color of an opaque fragment under `cfg`.
pub fn shade(fragment: &Fragment, cfg: &RenderConfig) -> Rgb {
    Paint::opaque(fragment.base_color, cfg.depth_decay).shade_at(fragment.depth, cfg.d_max)
}

/// Edge function of `p` against the directed edge `a → b`; positive on the
/// interior side of a positively oriented triangle.
#[inline]
pub fn edge_function(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Whether the directed edge `a → b` owns pixels lying exactly on it.
#[inline]
pub fn is_top_left(a: (f64, f64), b: (f64, f64)) -> bool {
    let dx = b.0 - a.0;
    let dy = b.1 - a.1;
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

/// A triangle ready for coverage tests: positively oriented, with cached
/// top-left flags. Degenerate (zero-area) input yields `None`.
#[derive(Debug, Clone, Copy)]
pub struct PreparedTriangle {
    pub p: [(f64, f64); 3],
    pub depth: [f64; 3],
    pub area2: f64,
    top_left: [bool; 3],
}

impl PreparedTriangle {
    pub fn new(tri: &[ClipVertex; 3]) -> Option<PreparedTriangle> {
        let mut v = *tri;
        let mut area2 = edge_function((v[0].u, v[0].v), (v[1].u, v[1].v), (v[2].u, v[2].v));
        if !(area2.is_finite()) || area2 == 0.0 {
            return None;
        }
        if area2 < 0.0 {
            v.swap(1, 2);
            area2 = -area2;
        }
        let p = v.map(|c| (c.u, c.v));
        Some(PreparedTriangle {
            p,
            depth: v.map(|c| c.depth),
            area2,
            top_left: [
                is_top_left(p[1], p[2]),
                is_top_left(p[2], p[0]),
                is_top_left(p[0], p[1]),
            ],
        })
    }

    /// Edge weights at `q`, or `None` if `q` is not covered.
    #[inline]
    pub fn weights(&self, q: (f64, f64)) -> Option<[f64; 3]> {
        let w = [
            edge_function(self.p[1], self.p[2], q),
            edge_function(self.p[2], self.p[0], q),
            edge_function(self.p[0], self.p[1], q),
        ];
        for k in 0..3 {
            if !(w[k] > 0.0 || (w[k] == 0.0 && self.top_left[k])) {
                return None;
            }
        }
        Some(w)
    }

    /// Screen-space linear depth from edge weights.
    #[inline]
    pub fn depth_from(&self, w: [f64; 3]) -> f64 {
        ((w[0] * self.depth[0] + w[1] * self.depth[1] + w[2] * self.depth[2]) / self.area2).max(0.0)
    }

    /// Inclusive column range worth testing on the row whose center is `py`.
    fn row_span(&self, py: f64) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let edges = [(self.p[1], self.p[2]), (self.p[2], self.p[0]), (self.p[0], self.p[1])];
        for (a, b) in edges {
            // E(px) = slope · px + offset
            let slope = -(b.1 - a.1);
            let offset = (b.0 - a.0) * (py - a.1) + (b.1 - a.1) * a.0;
            if slope > 0.0 {
                lo = lo.max(-offset / slope);
            } else if slope < 0.0 {
                hi = hi.min(-offset / slope);
            } else if offset < 0.0 {
                return None;
            }
        }
        (lo <= hi + 2.0).then_some((lo, hi))
    }
}

/// Rasterizes one triangle whose vertices already lie inside the framebuffer.
pub fn fill_triangle_with(fb: &mut Framebuffer, tri: &[ClipVertex; 3], paint: &Paint, d_max: f64) -> usize {
    let Some(t) = PreparedTriangle::new(tri) else {
        return 0;
    };
    let (w, h) = (fb.width as i64, fb.height as i64);
    let min_u = t.p.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_u = t.p.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_v = t.p.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_v = t.p.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let x_lo = (min_u - 0.5).floor().max(0.0) as i64;
    let x_hi = ((max_u - 0.5).ceil() as i64).min(w - 1);
    let y_lo = (min_v - 0.5).floor().max(0.0) as i64;
    let y_hi = ((max_v - 0.5).ceil() as i64).min(h - 1);
    let mut written = 0;
    for y in y_lo..=y_hi {
        let py = y as f64 + 0.5;
        let Some((lo, hi)) = t.row_span(py) else {
            continue;
        };
        let xs = if lo.is_finite() { ((lo - 0.5).floor() as i64 - 1).max(x_lo) } else { x_lo };
        let xe = if hi.is_finite() { ((hi - 0.5).ceil() as i64 + 1).min(x_hi) } else { x_hi };
        for x in xs..=xe {
            let Some(wts) = t.weights((x as f64 + 0.5, py)) else {
                continue;
            };
            let d = t.depth_from(wts);
            let i = y as usize * fb.width as usize + x as usize;
            if d < fb.depth[i] {
                fb.write(x as u32, y as u32, d, paint.shade_at(d, d_max));
                written += 1;
            }
        }
    }
    written
}

/// Opaque triangle fill using `cfg`'s decay setting.
pub fn fill_triangle(fb: &mut Framebuffer, tri: &[ClipVertex; 3], color: Rgb, cfg: &RenderConfig) -> usize {
    fill_triangle_with(fb, tri, &Paint::opaque(color, cfg.depth_decay), cfg.d_max)
}

/// Fan-triangulates a convex polygon from its first vertex.
pub fn fan(poly: &Polygon2D) -> impl Iterator<Item = [ClipVertex; 3]> + '_ {
    let v = &poly.vertices;
    (1..v.len().saturating_sub(1)).map(move |i| [v[0], v[i], v[i + 1]])
}

/// Triangles of a `width`-pixel stroke along `a → b`, clipped to `rect`.
pub fn stroke_segment(a: ClipVertex, b: ClipVertex, width: f64, rect: &ClipRect) -> Vec<[ClipVertex; 3]> {
    let (du, dv) = (b.u - a.u, b.v - a.v);
    let len = (du * du + dv * dv).sqrt();
    if !(len > 0.0) {
        return Vec::new();
    }
    let (nu, nv) = (-dv / len * width * 0.5, du / len * width * 0.5);
    let quad = Polygon2D::new(vec![
        ClipVertex::new(a.u + nu, a.v + nv, a.depth),
        ClipVertex::new(b.u + nu, b.v + nv, b.depth),
        ClipVertex::new(b.u - nu, b.v - nv, b.depth),
        ClipVertex::new(a.u - nu, a.v - nv, a.depth),
    ]);
    fan(&clip_polygon(&quad, rect)).collect()
}

/// Strokes consecutive vertex pairs with the configured line width.
pub fn draw_polyline(fb: &mut Framebuffer, vertices: &[ClipVertex], color: Rgb, cfg: &RenderConfig) -> usize {
    let paint = Paint::opaque(color, cfg.depth_decay);
    let rect = fb.clip_rect();
    let mut written = 0;
    for pair in vertices.windows(2) {
        for tri in stroke_segment(pair[0], pair[1], cfg.line_width, &rect) {
            written += fill_triangle_with(fb, &tri, &paint, cfg.d_max);
        }
    }
    written
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(p: [(f64, f64); 3], d: f64) -> [ClipVertex; 3] {
        p.map(|(u, v)| ClipVertex::new(u, v, d))
    }

    #[test]
    fn round_channel_matches_round() {
        for i in 0..=512_000 {
            let x = i as f64 / 2000.0;
            assert_eq!(round_channel(x), x.round() as u8, "{x}");
        }
        for x in [0.49999999999999994, 254.5, 255.49999999999997, 255.5, 1e9, -3.0, f64::NAN] {
            assert_eq!(round_channel(x), x.round() as u8, "{x}");
        }
    }

    #[test]
    fn shading_examples() {
        let cfg = RenderConfig::default();
        let frag = |d| Fragment {
            u: 0,
            v: 0,
            depth: d,
            base_color: Rgb([200, 100, 50]),
        };
        assert_eq!(shade(&frag(0.0), &cfg), Rgb([200, 100, 50]));
        assert_eq!(shade(&frag(80.0), &cfg), Rgb::BLACK);
        assert_eq!(shade(&frag(160.0), &cfg), Rgb::BLACK);
        assert_eq!(shade(&frag(40.0), &cfg), Rgb([100, 50, 25]));
        let off = RenderConfig {
            depth_decay: false,
            ..cfg
        };
        assert_eq!(shade(&frag(79.0), &off), Rgb([200, 100, 50]));
    }

    #[test]
    fn right_triangle_coverage_matches_brute_force() {
        let tri = flat([(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)], 1.0);
        let mut fb = Framebuffer::new(16, 16);
        let n = fill_triangle(&mut fb, &tri, Rgb([255, 0, 0]), &RenderConfig::default());
        let mut brute = 0;
        for y in 0..16 {
            for x in 0..16 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                if px + py < 10.0 {
                    brute += 1;
                }
            }
        }
        // Centers exactly on the hypotenuse (px + py = 10) belong to it only
        // if it is a top-left edge; for this winding it is not.
        assert_eq!(n, brute);
        assert_eq!(n, 45);
    }

    #[test]
    fn nearer_triangle_wins_either_order() {
        let tri = [(1.0, 1.0), (9.0, 1.0), (1.0, 9.0)];
        let cfg = RenderConfig {
            depth_decay: false,
            ..RenderConfig::default()
        };
        for order in [[2.0, 5.0], [5.0, 2.0]] {
            let mut fb = Framebuffer::new(10, 10);
            for d in order {
                let c = if d == 2.0 { Rgb([1, 1, 1]) } else { Rgb([9, 9, 9]) };
                fill_triangle(&mut fb, &flat(tri, d), c, &cfg);
            }
            assert_eq!(fb.pixel(2, 2), Rgb([1, 1, 1]));
            assert_eq!(fb.depth_at(2, 2), 2.0);
        }
    }

    #[test]
    fn degenerate_triangle_writes_nothing() {
        let mut fb = Framebuffer::new(10, 10);
        let n = fill_triangle(
            &mut fb,
            &flat([(0.0, 0.0), (5.0, 5.0), (9.0, 9.0)], 1.0),
            Rgb([1, 2, 3]),
            &RenderConfig::default(),
        );
        assert_eq!(n, 0);
        assert!(fb.depth.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn shared_edge_pixels_written_once() {
        // Two triangles forming a square; every covered pixel is hit by exactly one.
        let a = flat([(0.0, 0.0), (8.0, 0.0), (8.0, 8.0)], 1.0);
        let b = flat([(0.0, 0.0), (8.0, 8.0), (0.0, 8.0)], 1.0);
        let mut fb = Framebuffer::new(8, 8);
        let cfg = RenderConfig::default();
        let n = fill_triangle(&mut fb, &a, Rgb([1, 0, 0]), &cfg) + fill_triangle(&mut fb, &b, Rgb([1, 0, 0]), &cfg);
        assert_eq!(n, 64);
    }

    #[test]
    fn horizontal_stroke_covers_twenty_pixels() {
        let mut fb = Framebuffer::new(20, 20);
        let n = draw_polyline(
            &mut fb,
            &[ClipVertex::new(5.0, 10.0, 3.0), ClipVertex::new(15.0, 10.0, 3.0)],
            Rgb([255, 255, 255]),
            &RenderConfig::default(),
        );
        assert_eq!(n, 20);
    }

    #[test]
    fn occluded_stroke_changes_nothing() {
        let cfg = RenderConfig::default();
        let mut fb = Framebuffer::new(20, 20);
        fill_triangle(&mut fb, &flat([(0.0, 0.0), (20.0, 0.0), (0.0, 20.0)], 1.0), Rgb([7, 7, 7]), &cfg);
        fill_triangle(&mut fb, &flat([(20.0, 0.0), (20.0, 20.0), (0.0, 20.0)], 1.0), Rgb([7, 7, 7]), &cfg);
        let before = fb.clone();
        let n = draw_polyline(
            &mut fb,
            &[ClipVertex::new(2.0, 10.0, 5.0), ClipVertex::new(18.0, 12.0, 6.0)],
            Rgb([255, 255, 255]),
            &cfg,
        );
        assert_eq!(n, 0);
        assert_eq!(fb, before);
    }

    #[test]
    fn config_validation() {
        assert!(RenderConfig::default().validate().is_ok());
        let bad = RenderConfig {
            d_max: 0.0,
            ..RenderConfig::default()
        };
        assert!(bad.validate().is_err());
        let thin = RenderConfig {
            line_width: 0.5,
            ..RenderConfig::default()
        };
        assert!(thin.validate().is_err());
    }
}
