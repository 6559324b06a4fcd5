use proptest::prelude::*;
use rasterkit_core::clip::{clip_polygon, clip_segment_near, ClipRect, ClipVertex, Polygon2D};
use rasterkit_core::geometry::Vec3;
use rasterkit_core::raster::{draw_polyline, fill_triangle, Framebuffer, RenderConfig};
use rasterkit_core::scene::Rgb;

/// Convex polygon from sorted angles on a jittered ellipse.
fn convex_strategy() -> impl Strategy<Value = Polygon2D> {
    (
        -50.0..150.0f64,
        -50.0..150.0f64,
        5.0..80.0f64,
        5.0..80.0f64,
        prop::collection::vec(0.0..std::f64::consts::TAU, 3..9),
        0.0..50.0f64,
    )
        .prop_map(|(cx, cy, rx, ry, mut angles, d0)| {
            angles.sort_by(f64::total_cmp);
            angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let verts = angles
                .iter()
                .enumerate()
                .map(|(i, a)| ClipVertex::new(cx + rx * a.cos(), cy + ry * a.sin(), d0 + i as f64))
                .collect();
            Polygon2D::new(verts)
        })
        .prop_filter("non-degenerate", |p| p.vertices.len() >= 3 && p.area() > 1.0)
}

fn rect_strategy() -> impl Strategy<Value = ClipRect> {
    (0.0..60.0f64, 10.0..120.0f64, 0.0..60.0f64, 10.0..120.0f64)
        .prop_map(|(u0, w, v0, h)| ClipRect::new(u0, u0 + w, v0, v0 + h).unwrap())
}

fn inside(poly: &Polygon2D, u: f64, v: f64) -> bool {
    let s = poly.signed_area().signum();
    let n = poly.vertices.len();
    (0..n).all(|i| {
        let a = poly.vertices[i];
        let b = poly.vertices[(i + 1) % n];
        s * ((b.u - a.u) * (v - a.v) - (b.v - a.v) * (u - a.u)) >= 0.0
    })
}

proptest! {
    #[test]
    fn clip_invariants(poly in convex_strategy(), rect in rect_strategy()) {
        let once = clip_polygon(&poly, &rect);
        for p in &once.vertices {
            prop_assert!(rect.contains(p));
        }
        prop_assert!(once.area() <= poly.area() * (1.0 + 1e-12));
        let twice = clip_polygon(&once, &rect);
        prop_assert_eq!(once.vertices.len(), twice.vertices.len());
        for (a, b) in once.vertices.iter().zip(&twice.vertices) {
            prop_assert!((a.u - b.u).abs() < 1e-9 && (a.v - b.v).abs() < 1e-9 && (a.depth - b.depth).abs() < 1e-9);
        }
        // Fully inside: unchanged.
        let big = ClipRect::new(-1e4, 1e4, -1e4, 1e4).unwrap();
        prop_assert_eq!(clip_polygon(&poly, &big), poly.clone());
    }

    #[test]
    fn clipped_area_matches_grid_estimate(poly in convex_strategy(), rect in rect_strategy()) {
        let clipped = clip_polygon(&poly, &rect);
        let n = 200;
        let (du, dv) = ((rect.u_max - rect.u_min) / n as f64, (rect.v_max - rect.v_min) / n as f64);
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                if inside(&poly, rect.u_min + (i as f64 + 0.5) * du, rect.v_min + (j as f64 + 0.5) * dv) {
                    hits += 1;
                }
            }
        }
        let estimate = hits as f64 * du * dv;
        // Cell-boundary error scales with the perimeter crossing the grid.
        let slack = 4.0 * (du + dv) * (rect.u_max - rect.u_min + rect.v_max - rect.v_min);
        prop_assert!((clipped.area() - estimate).abs() <= slack, "{} vs {}", clipped.area(), estimate);
    }

    #[test]
    fn crossing_depth_is_interpolated(u0 in -40.0..-1.0f64, u1 in 11.0..50.0f64, d0 in 1.0..50.0f64, d1 in 1.0..50.0f64) {
        let rect = ClipRect::new(0.0, 10.0, -100.0, 100.0).unwrap();
        let tri = Polygon2D::new(vec![
            ClipVertex::new(u0, 0.0, d0),
            ClipVertex::new(u1, 0.0, d1),
            ClipVertex::new(u1, 5.0, d1),
        ]);
        let out = clip_polygon(&tri, &rect);
        for p in out.vertices.iter().filter(|p| p.v == 0.0) {
            let s = (p.u - u0) / (u1 - u0);
            prop_assert!((p.depth - (d0 + s * (d1 - d0))).abs() < 1e-9);
        }
    }

    #[test]
    fn near_clip_keeps_front_part(z0 in -5.0..5.0f64, z1 in -5.0..5.0f64, z_near in 0.05..1.0f64) {
        let (a, b) = (Vec3::new(1.0, 2.0, z0), Vec3::new(-3.0, 0.5, z1));
        match clip_segment_near(a, b, z_near) {
            None => prop_assert!(z0 < z_near && z1 < z_near),
            Some((p, q)) => {
                prop_assert!(p.z >= z_near - 1e-12 && q.z >= z_near - 1e-12);
                if z0 >= z_near { prop_assert_eq!(p, a); }
                if z1 >= z_near { prop_assert_eq!(q, b); }
            }
        }
    }
}

#[test]
fn near_clip_example() {
    let (p, q) = clip_segment_near(Vec3::new(0.0, 0.0, 0.05), Vec3::new(6.0, 0.0, 0.35), 0.1).unwrap();
    assert!((p.x - 1.0).abs() < 1e-12 && (p.z - 0.1).abs() < 1e-12);
    assert_eq!(q, Vec3::new(6.0, 0.0, 0.35));
}

#[test]
fn triangle_coverage_matches_half_plane_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let (w, h) = (48u32, 40u32);
    for _ in 0..1000 {
        let tri: [ClipVertex; 3] =
            std::array::from_fn(|_| ClipVertex::new(rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64), 5.0));
        let mut fb = Framebuffer::new(w, h);
        fill_triangle(&mut fb, &tri, Rgb([9, 9, 9]), &RenderConfig::default());
        let e = |a: &ClipVertex, b: &ClipVertex, x: f64, y: f64| (b.u - a.u) * (y - a.v) - (b.v - a.v) * (x - a.u);
        let area = e(&tri[0], &tri[1], tri[2].u, tri[2].v);
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let ws = [e(&tri[1], &tri[2], px, py), e(&tri[2], &tri[0], px, py), e(&tri[0], &tri[1], px, py)];
                // Random float vertices essentially never put a center exactly on an edge.
                let covered = area != 0.0 && ws.iter().all(|v| v * area.signum() > 0.0);
                let ambiguous = ws.iter().any(|v| *v == 0.0);
                if !ambiguous {
                    assert_eq!(fb.depth_at(x, y).is_finite(), covered, "pixel ({x}, {y}) of {tri:?}");
                }
            }
        }
    }
}

#[test]
fn collinear_triangle_writes_nothing() {
    let mut fb = Framebuffer::new(16, 16);
    let tri = [ClipVertex::new(1.0, 1.0, 1.0), ClipVertex::new(5.0, 5.0, 1.0), ClipVertex::new(9.0, 9.0, 1.0)];
    assert_eq!(fill_triangle(&mut fb, &tri, Rgb([1, 2, 3]), &RenderConfig::default()), 0);
}

#[test]
fn stroke_covers_the_segment_band() {
    let mut fb = Framebuffer::new(32, 16);
    let line = [ClipVertex::new(5.0, 8.0, 3.0), ClipVertex::new(15.0, 8.0, 3.0)];
    let n = draw_polyline(&mut fb, &line, Rgb([255, 255, 0]), &RenderConfig::default());
    let mut oracle = 0;
    for y in 0..16 {
        for x in 0..32 {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            if (5.0..=15.0).contains(&px) && (py - 8.0).abs() <= 1.0 {
                oracle += 1;
            }
        }
    }
    assert_eq!(oracle, 20);
    assert!((n as i64 - oracle).abs() <= 2, "{n} pixels");
    // Behind an existing nearer surface nothing changes.
    let mut fb = Framebuffer::new(32, 16);
    let wall = [ClipVertex::new(0.0, 0.0, 1.0), ClipVertex::new(32.0, 0.0, 1.0), ClipVertex::new(0.0, 32.0, 1.0)];
    fill_triangle(&mut fb, &wall, Rgb([1, 1, 1]), &RenderConfig::default());
    fill_triangle(&mut fb, &[wall[1], ClipVertex::new(32.0, 32.0, 1.0), wall[2]], Rgb([1, 1, 1]), &RenderConfig::default());
    let before = fb.clone();
    assert_eq!(draw_polyline(&mut fb, &line, Rgb([255, 255, 0]), &RenderConfig::default()), 0);
    assert_eq!(fb, before);
}
