//! Per-camera region of interest and blurring of everything outside it.
//!
//! The region is either the convex hull of every box corner seen by the
//! camera or the union of the boxes themselves, optionally grown by a disk
//! dilation. Blurring is computed over the whole frame and composited back
//! through the region mask, so pixels inside stay untouched.

use std::collections::BTreeMap;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::annotations::{BoundingBox, Dataset};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, rasterize, BitMask, Point, Polygon};
use crate::parallel::{self, Workers};

pub const DEFAULT_SIGMA: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RoiMode {
    #[default]
    ConvexHull,
    BoxUnion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionOfInterest {
    pub camera_id: String,
    pub mode: RoiMode,
    /// Frame size the region was derived for.
    pub width: u32,
    pub height: u32,
    pub dilation: u32,
    /// Hull polygon (hull mode only).
    pub polygon: Option<Polygon>,
    /// Undilated union mask (union mode only).
    pub union_mask: Option<BitMask>,
}

impl RegionOfInterest {
    /// The keep-sharp mask at the region's frame size, dilation applied.
    pub fn mask(&self) -> BitMask {
        let base = match (&self.polygon, &self.union_mask) {
            (Some(p), _) => rasterize(p, self.width, self.height),
            (None, Some(m)) => m.clone(),
            (None, None) => BitMask::new(self.width, self.height),
        };
        base.dilate(self.dilation)
    }
}

pub fn compute_roi(
    camera_id: &str,
    boxes: &[BoundingBox],
    width: u32,
    height: u32,
    mode: RoiMode,
    dilation: u32,
) -> Result<RegionOfInterest> {
    if boxes.is_empty() {
        return Err(Error::Validation(format!(
            "camera '{camera_id}' has no annotations to derive a region from"
        )));
    }
    let (polygon, union_mask) = match mode {
        RoiMode::ConvexHull => {
            let corners: Vec<Point> = boxes
                .iter()
                .flat_map(|b| b.corners())
                .map(Point::from)
                .collect();
            (Some(convex_hull(&corners)?), None)
        }
        RoiMode::BoxUnion => {
            let mut mask = BitMask::new(width, height);
            for b in boxes {
                mask.fill_box(b);
            }
            (None, Some(mask))
        }
    };
    Ok(RegionOfInterest {
        camera_id: camera_id.to_string(),
        mode,
        width,
        height,
        dilation,
        polygon,
        union_mask,
    })
}

/// One region per camera from all annotations of that camera's frames.
/// Every frame of a camera must share one resolution.
pub fn compute_rois(
    d: &Dataset,
    mode: RoiMode,
    dilation: u32,
    workers: Workers,
) -> Result<BTreeMap<String, RegionOfInterest>> {
    let mut per_camera: BTreeMap<&str, ((u32, u32), Vec<BoundingBox>)> = BTreeMap::new();
    let by_image = d.annotations_by_image();
    for img in &d.images {
        if img.camera_id.is_empty() {
            return Err(Error::Index(format!(
                "image {} has no camera id; run tagging first",
                img.image_id
            )));
        }
        let entry = per_camera
            .entry(img.camera_id.as_str())
            .or_insert(((img.width, img.height), Vec::new()));
        if entry.0 != (img.width, img.height) {
            return Err(Error::DimensionMismatch(format!(
                "camera {} has frames of {}x{} and {}x{}",
                img.camera_id, entry.0 .0, entry.0 .1, img.width, img.height
            )));
        }
        entry.1.extend(
            by_image
                .get(&img.image_id)
                .into_iter()
                .flatten()
                .map(|a| a.bbox),
        );
    }
    let jobs: Vec<_> = per_camera.into_iter().collect();
    let rois = parallel::try_map(workers, &jobs, |(cam, ((w, h), boxes))| {
        compute_roi(cam, boxes, *w, *h, mode, dilation)
    })?;
    Ok(rois.into_iter().map(|r| (r.camera_id.clone(), r)).collect())
}

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with clamp-to-edge sampling.
pub fn gaussian_blur(img: &RgbImage, sigma: f64) -> RgbImage {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let src = img.as_raw();
    let mut horiz = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sx = (x + k as i64 - radius).clamp(0, w - 1);
                let base = ((y * w + sx) * 3) as usize;
                for c in 0..3 {
                    acc[c] += wt * src[base + c] as f64;
                }
            }
            let base = ((y * w + x) * 3) as usize;
            horiz[base..base + 3].copy_from_slice(&acc);
        }
    }
    let mut out = RgbImage::new(img.width(), img.height());
    let dst: &mut [u8] = &mut out;
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sy = (y + k as i64 - radius).clamp(0, h - 1);
                let base = ((sy * w + x) * 3) as usize;
                for c in 0..3 {
                    acc[c] += wt * horiz[base + c];
                }
            }
            let base = ((y * w + x) * 3) as usize;
            for c in 0..3 {
                dst[base + c] = acc[c].round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Keeps pixels where `mask` is set and replaces the rest with the blurred
/// frame.
pub fn blur_outside_mask(img: &RgbImage, mask: &BitMask, sigma: f64) -> Result<RgbImage> {
    if (mask.width, mask.height) != img.dimensions() {
        return Err(Error::DimensionMismatch(format!(
            "region mask is {}x{} but image is {}x{}",
            mask.width,
            mask.height,
            img.width(),
            img.height()
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!(
            "blur sigma must be positive, got {sigma}"
        )));
    }
    if mask.bits.iter().all(|&b| b) {
        return Ok(img.clone());
    }
    let mut out = gaussian_blur(img, sigma);
    let src = img.as_raw();
    let dst: &mut [u8] = &mut out;
    for (i, &keep) in mask.bits.iter().enumerate() {
        if keep {
            dst[i * 3..i * 3 + 3].copy_from_slice(&src[i * 3..i * 3 + 3]);
        }
    }
    Ok(out)
}

pub fn blur_outside(img: &RgbImage, roi: &RegionOfInterest, sigma: f64) -> Result<RgbImage> {
    if (roi.width, roi.height) != img.dimensions() {
        return Err(Error::DimensionMismatch(format!(
            "region of camera {} was derived at {}x{} but image is {}x{}",
            roi.camera_id,
            roi.width,
            roi.height,
            img.width(),
            img.height()
        )));
    }
    blur_outside_mask(img, &roi.mask(), sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RoiRecord {
    mode: RoiMode,
    width: u32,
    height: u32,
    dilation: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polygon: Option<Vec<[f64; 2]>>,
    /// Alternating unset/set run lengths, row-major, starting with unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask_rle: Option<Vec<u32>>,
}

/// Serializes regions as `{camera_id: {mode, width, height, dilation,
/// polygon | mask_rle}}`.
pub fn rois_to_json(rois: &BTreeMap<String, RegionOfInterest>) -> String {
    let records: BTreeMap<&str, RoiRecord> = rois
        .iter()
        .map(|(cam, r)| {
            (
                cam.as_str(),
                RoiRecord {
                    mode: r.mode,
                    width: r.width,
                    height: r.height,
                    dilation: r.dilation,
                    polygon: r
                        .polygon
                        .as_ref()
                        .map(|p| p.vertices.iter().map(|v| [v.x, v.y]).collect()),
                    mask_rle: r.union_mask.as_ref().map(BitMask::to_rle),
                },
            )
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("regions serialize")
}

pub fn rois_from_json(text: &str) -> Result<BTreeMap<String, RegionOfInterest>> {
    let records: BTreeMap<String, RoiRecord> =
        serde_json::from_str(text).map_err(|e| Error::json(text, &e))?;
    records
        .into_iter()
        .map(|(cam, r)| {
            let (polygon, union_mask) = match r.mode {
                RoiMode::ConvexHull => {
                    let verts = r.polygon.ok_or_else(|| {
                        Error::Validation(format!("region of camera {cam} lacks a polygon"))
                    })?;
                    if verts.len() < 3 {
                        return Err(Error::Validation(format!(
                            "region of camera {cam} has fewer than 3 vertices"
                        )));
                    }
                    let poly =
                        Polygon::new(verts.into_iter().map(|[x, y]| Point::new(x, y)).collect());
                    (Some(poly), None)
                }
                RoiMode::BoxUnion => {
                    let rle = r.mask_rle.ok_or_else(|| {
                        Error::Validation(format!("region of camera {cam} lacks a mask"))
                    })?;
                    (None, Some(BitMask::from_rle(r.width, r.height, &rle)?))
                }
            };
            let roi = RegionOfInterest {
                camera_id: cam.clone(),
                mode: r.mode,
                width: r.width,
                height: r.height,
                dilation: r.dilation,
                polygon,
                union_mask,
            };
            Ok((cam, roi))
        })
        .collect()
}
