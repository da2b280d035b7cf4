use serde::{Deserialize, Serialize};

use super::{pixel_span, Point, Polygon};
use crate::annotations::BoundingBox;
use crate::error::{Error, Result};

/// Row-major boolean grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    #[inline]
    fn idx(&self, col: u32, row: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    #[inline]
    pub fn get(&self, col: u32, row: u32) -> bool {
        self.bits[self.idx(col, row)]
    }

    #[inline]
    pub fn set(&mut self, col: u32, row: u32, value: bool) {
        let i = self.idx(col, row);
        self.bits[i] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Sets every pixel whose center falls inside the box (half-open).
    pub fn fill_box(&mut self, b: &BoundingBox) {
        let (cols, rows) = pixel_span(b, self.width, self.height);
        for row in rows {
            let start = self.idx(cols.start, row);
            self.bits[start..start + cols.len()].fill(true);
        }
    }

    pub fn union_with(&mut self, other: &BitMask) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// Dilation by a Euclidean disk of the given radius in pixels.
    pub fn dilate(&self, radius: u32) -> BitMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as i64;
        let mut out = BitMask::new(self.width, self.height);
        // prefix[row][x] = number of set bits in row before column x
        let prefix: Vec<Vec<u32>> = (0..h)
            .map(|row| {
                let mut acc = Vec::with_capacity(w + 1);
                acc.push(0u32);
                for col in 0..w {
                    acc.push(acc[col] + self.bits[row * w + col] as u32);
                }
                acc
            })
            .collect();
        for dy in -r..=r {
            let half = ((r * r - dy * dy) as f64).sqrt().floor() as i64;
            for row in 0..h as i64 {
                let src = row + dy;
                if src < 0 || src >= h as i64 {
                    continue;
                }
                let p = &prefix[src as usize];
                for col in 0..w as i64 {
                    let lo = (col - half).max(0) as usize;
                    let hi = ((col + half + 1).min(w as i64)) as usize;
                    if p[hi] > p[lo] {
                        out.bits[row as usize * w + col as usize] = true;
                    }
                }
            }
        }
        out
    }

    /// Run lengths of alternating unset/set pixels in row-major order,
    /// starting with an unset run (possibly empty).
    pub fn to_rle(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in &self.bits {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_rle(width: u32, height: u32, runs: &[u32]) -> Result<BitMask> {
        let total = width as usize * height as usize;
        let mut bits = Vec::with_capacity(total);
        let mut value = false;
        for &run in runs {
            bits.extend(std::iter::repeat_n(value, run as usize));
            value = !value;
        }
        if bits.len() != total {
            return Err(Error::Validation(format!(
                "run-length mask covers {} pixels, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(BitMask {
            width,
            height,
            bits,
        })
    }
}

/// Scan-converts `polygon` at pixel centers: bit `(col, row)` is set iff
/// `(col + 0.5, row + 0.5)` lies inside or on the boundary. Self-intersecting
/// outlines are filled with the even-odd rule.
pub fn rasterize(polygon: &Polygon, width: u32, height: u32) -> BitMask {
    let mut mask = BitMask::new(width, height);
    if polygon.vertices.len() < 3 || width == 0 || height == 0 {
        return mask;
    }
    let mut crossings: Vec<f64> = Vec::new();
    for row in 0..height {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for (a, b) in polygon.edges() {
            let (lo, hi) = if a.y <= b.y { (a, b) } else { (b, a) };
            if lo.y == hi.y {
                if lo.y == yc {
                    fill_span(&mut mask, row, a.x.min(b.x), a.x.max(b.x));
                }
                continue;
            }
            if yc < lo.y || yc > hi.y {
                continue;
            }
            let x = edge_x(lo, hi, yc);
            // boundary point
            fill_span(&mut mask, row, x, x);
            if yc < hi.y {
                crossings.push(x);
            }
        }
        crossings.sort_by(f64::total_cmp);
        for pair in crossings.chunks_exact(2) {
            fill_span(&mut mask, row, pair[0], pair[1]);
        }
    }
    mask
}

// Multiply before dividing so lattice intersections come out exact.
fn edge_x(lo: Point, hi: Point, y: f64) -> f64 {
    lo.x + (hi.x - lo.x) * (y - lo.y) / (hi.y - lo.y)
}

/// Sets pixels in `row` whose centers lie in the closed interval `[x0, x1]`.
fn fill_span(mask: &mut BitMask, row: u32, x0: f64, x1: f64) {
    let start = (x0 - 0.5).ceil().max(0.0);
    let end = (x1 - 0.5).floor();
    if end < start || end < 0.0 || start >= mask.width as f64 {
        return;
    }
    let end = end.min(mask.width as f64 - 1.0) as u32;
    for col in start as u32..=end {
        mask.set(col, row, true);
    }
}
