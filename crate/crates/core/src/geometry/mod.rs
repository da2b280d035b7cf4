//! Box and polygon primitives shared by placement and ROI blurring.

mod hull;
mod mask;

use serde::{Deserialize, Serialize};

use crate::annotations::BoundingBox;

pub use hull::convex_hull;
pub use mask::{rasterize, BitMask};

/// True iff the open interiors of `a` and `b` meet, i.e. the intersection has
/// positive area. Boxes sharing only an edge or a corner do not intersect.
pub fn intersects(a: &BoundingBox, b: &BoundingBox) -> bool {
    let (ow, oh) = overlap_extent(a, b);
    ow > 0.0 && oh > 0.0
}

pub fn intersection_area(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ow, oh) = overlap_extent(a, b);
    ow.max(0.0) * oh.max(0.0)
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

fn overlap_extent(a: &BoundingBox, b: &BoundingBox) -> (f64, f64) {
    (
        a.right().min(b.right()) - a.x.max(b.x),
        a.bottom().min(b.bottom()) - a.y.max(b.y),
    )
}

/// Half-open range of pixel indices whose centers fall in `[lo, hi)`.
pub fn pixel_range(lo: f64, hi: f64, limit: u32) -> std::ops::Range<u32> {
    let start = (lo - 0.5).ceil().max(0.0);
    let end = (hi - 0.5).ceil().max(0.0);
    let clamp = |v: f64| (v as u64).min(limit as u64) as u32;
    clamp(start)..clamp(end).max(clamp(start))
}

/// Column and row ranges of the pixels a box covers, sampled at pixel centers.
/// Integer boxes cover exactly `x..x+w` by `y..y+h`.
pub fn pixel_span(
    b: &BoundingBox,
    width: u32,
    height: u32,
) -> (std::ops::Range<u32>, std::ops::Range<u32>) {
    (
        pixel_range(b.x, b.right(), width),
        pixel_range(b.y, b.bottom(), height),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// Cross product of `(a - o)` and `(b - o)`. Positive when `o -> a -> b`
/// turns counter-clockwise in a y-up frame.
pub(crate) fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Closed polygon; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn from_box(b: &BoundingBox) -> Self {
        Polygon::new(b.corners().into_iter().map(Point::from).collect())
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace signed area; positive for counter-clockwise order (y-up).
    pub fn signed_area(&self) -> f64 {
        self.edges()
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .sum::<f64>()
            / 2.0
    }

    /// Inside-or-on-boundary test (crossing number plus explicit edge check).
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(a, b, p) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    cross(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}
