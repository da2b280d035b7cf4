//! Geometry primitives against brute-force pixel and half-plane oracles.

use inplace_aug::annotations::BoundingBox;
use inplace_aug::geometry::{
    convex_hull, intersection_area, intersects, rasterize, Point, Polygon,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Integer pixel cells covered by an integer box.
fn pixel_set(b: &BoundingBox) -> Vec<(i64, i64)> {
    let mut cells = Vec::new();
    for y in b.y as i64..(b.y + b.h) as i64 {
        for x in b.x as i64..(b.x + b.w) as i64 {
            cells.push((x, y));
        }
    }
    cells
}

fn pixel_overlap(a: &BoundingBox, b: &BoundingBox) -> usize {
    let set: std::collections::HashSet<_> = pixel_set(a).into_iter().collect();
    pixel_set(b).into_iter().filter(|c| set.contains(c)).count()
}

fn random_box(rng: &mut impl Rng, grid: u32) -> BoundingBox {
    let w = rng.gen_range(1..=grid);
    let h = rng.gen_range(1..=grid);
    let x = rng.gen_range(0..=grid - w);
    let y = rng.gen_range(0..=grid - h);
    BoundingBox::new(x as f64, y as f64, w as f64, h as f64)
}

#[test]
fn intersects_exhaustive_against_fixed_box() {
    let fixed = BoundingBox::new(5.0, 5.0, 10.0, 10.0);
    for x in 0..20 {
        for y in 0..20 {
            for w in [1, 5, 10] {
                for h in [1, 5, 10] {
                    let b = BoundingBox::new(x as f64, y as f64, w as f64, h as f64);
                    let oracle = pixel_overlap(&fixed, &b);
                    assert_eq!(intersects(&fixed, &b), oracle > 0, "{b:?}");
                    assert_eq!(intersection_area(&fixed, &b), oracle as f64, "{b:?}");
                }
            }
        }
    }
}

#[test]
fn four_box_arrangements_on_20_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..500 {
        let boxes: Vec<_> = (0..4).map(|_| random_box(&mut rng, 20)).collect();
        for a in &boxes {
            for b in &boxes {
                assert_eq!(intersects(a, b), pixel_overlap(a, b) > 0);
            }
        }
    }
}

#[test]
fn intersection_area_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..2000 {
        let grid = rng.gen_range(1..=64);
        let (a, b) = (random_box(&mut rng, grid), random_box(&mut rng, grid));
        assert_eq!(intersection_area(&a, &b), pixel_overlap(&a, &b) as f64);
    }
}

/// Inside-or-on test for a counter-clockwise convex polygon.
fn half_plane_inside(poly: &[Point], p: Point) -> bool {
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
    })
}

/// Crossing-parity (even-odd) test with explicit boundary detection.
fn parity_inside(poly: &[Point], p: Point) -> bool {
    let mut crossings = 0u32;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let c = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        let within = p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y);
        if c == 0.0 && within {
            return true;
        }
        if a.y <= p.y {
            if b.y > p.y && c > 0.0 {
                crossings += 1;
            }
        } else if b.y <= p.y && c < 0.0 {
            crossings += 1;
        }
    }
    crossings % 2 == 1
}

fn assert_raster_matches(poly: &Polygon, w: u32, h: u32, oracle: impl Fn(Point) -> bool) {
    let mask = rasterize(poly, w, h);
    for row in 0..h {
        for col in 0..w {
            let c = Point::new(col as f64 + 0.5, row as f64 + 0.5);
            assert_eq!(
                mask.get(col, row),
                oracle(c),
                "pixel ({col},{row}) of {poly:?}"
            );
        }
    }
}

#[test]
fn triangle_matches_half_plane_oracle() {
    let tri = vec![
        Point::new(0.0, 0.0),
        Point::new(4.0, 0.0),
        Point::new(0.0, 4.0),
    ];
    // y-up counter-clockwise order for the half-plane test
    let poly = Polygon::new(tri.clone());
    assert!(poly.signed_area() > 0.0);
    assert_raster_matches(&poly, 8, 8, |p| half_plane_inside(&tri, p));
    assert_eq!(rasterize(&poly, 8, 8).count_ones(), 10);
}

fn random_star_polygon(rng: &mut impl Rng, grid: u32) -> Polygon {
    let n = rng.gen_range(3..=12);
    let (cx, cy) = (grid as f64 / 2.0, grid as f64 / 2.0);
    let mut angles: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    let verts = angles
        .into_iter()
        .map(|a| {
            let r = rng.gen_range(1.0..grid as f64 * 0.7);
            // half-pixel lattice makes centers land on edges often
            let snap = |v: f64| (v * 2.0).round() / 2.0;
            Point::new(snap(cx + r * a.cos()), snap(cy + r * a.sin()))
        })
        .collect();
    Polygon::new(verts)
}

#[test]
fn rasterize_matches_parity_oracle_on_random_polygons() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..1500 {
        let grid = rng.gen_range(4..=64);
        let poly = random_star_polygon(&mut rng, grid);
        let verts = poly.vertices.clone();
        assert_raster_matches(&poly, grid, grid, |p| parity_inside(&verts, p));
    }
}

#[test]
fn rasterize_hulls_matches_half_plane_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut done = 0;
    while done < 500 {
        let grid = rng.gen_range(4..=64u32);
        let pts: Vec<Point> = (0..rng.gen_range(3..=12))
            .map(|_| {
                Point::new(
                    rng.gen_range(0..=grid) as f64,
                    rng.gen_range(0..=grid) as f64,
                )
            })
            .collect();
        let Ok(hull) = convex_hull(&pts) else {
            continue;
        };
        let verts = hull.vertices.clone();
        assert_raster_matches(&hull, grid, grid, |p| half_plane_inside(&verts, p));
        done += 1;
    }
}

#[test]
fn hull_contains_random_point_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..1000 {
        let n = rng.gen_range(3..200);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)))
            .collect();
        let hull = convex_hull(&pts).unwrap();
        for &p in &pts {
            assert!(
                half_plane_inside(&hull.vertices, p) || hull.contains(p),
                "{p:?} outside"
            );
        }
        assert_eq!(convex_hull(&hull.vertices).unwrap(), hull);
    }
}

#[test]
fn hull_of_thousand_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let pts: Vec<Point> = (0..1000)
        .map(|_| Point::new(rng.gen_range(0..500) as f64, rng.gen_range(0..500) as f64))
        .collect();
    let hull = convex_hull(&pts).unwrap();
    assert!(pts.iter().all(|&p| half_plane_inside(&hull.vertices, p)));
}

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (0u32..60, 0u32..60, 1u32..40, 1u32..40)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x as f64, y as f64, w as f64, h as f64))
}

proptest! {
    #[test]
    fn intersects_is_symmetric_and_reflexive(a in arb_box(), b in arb_box()) {
        prop_assert_eq!(intersects(&a, &b), intersects(&b, &a));
        prop_assert!(intersects(&a, &a));
        prop_assert_eq!(intersection_area(&a, &b), intersection_area(&b, &a));
    }

    #[test]
    fn area_bounded_by_smaller_box(a in arb_box(), b in arb_box()) {
        let inter = intersection_area(&a, &b);
        prop_assert!(inter <= a.area().min(b.area()));
        let a_in_b = a.x >= b.x && a.y >= b.y && a.right() <= b.right() && a.bottom() <= b.bottom();
        let b_in_a = b.x >= a.x && b.y >= a.y && b.right() <= a.right() && b.bottom() <= a.bottom();
        prop_assert_eq!(inter == a.area().min(b.area()), a_in_b || b_in_a);
    }

    #[test]
    fn hull_is_idempotent(pts in prop::collection::vec((-100i32..100, -100i32..100), 3..40)) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x as f64, y as f64)).collect();
        if let Ok(h) = convex_hull(&pts) {
            prop_assert_eq!(convex_hull(&h.vertices).unwrap(), h.clone());
            prop_assert!(h.signed_area() > 0.0);
        }
    }
}
