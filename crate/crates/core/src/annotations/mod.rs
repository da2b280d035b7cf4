//! Dataset model plus COCO JSON and YOLO text readers/writers.
//!
//! Boxes are stored as real-valued pixel `[x, y, w, h]`. Class ids are dense
//! and 0-based; COCO category ids are remapped on read and restored on write.

mod coco;
mod yolo;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use coco::{parse_coco, write_coco};
pub use yolo::{format_yolo_line, parse_yolo, write_yolo, YoloLine};

/// Identifier of an image within a dataset.
pub type ImageId = u64;
/// Identifier of an annotation, unique within a dataset.
pub type InstanceId = u64;
/// Dense, 0-based class index.
pub type ClassId = usize;

/// Axis-aligned box in pixel coordinates, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x, self.y),
            (self.right(), self.y),
            (self.right(), self.bottom()),
            (self.x, self.bottom()),
        ]
    }

    pub fn has_positive_size(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.w.is_finite() && self.h.is_finite()
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.right() <= width as f64
            && self.bottom() <= height as f64
    }

    /// Clamps the box to `[0, width] x [0, height]`. Returns `None` when
    /// nothing with positive area remains.
    pub fn clamped(&self, width: u32, height: u32) -> Option<BoundingBox> {
        let x0 = self.x.clamp(0.0, width as f64);
        let y0 = self.y.clamp(0.0, height as f64);
        let x1 = self.right().clamp(0.0, width as f64);
        let y1 = self.bottom().clamp(0.0, height as f64);
        let b = BoundingBox::new(x0, y0, x1 - x0, y1 - y0);
        b.has_positive_size().then_some(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Origin {
    Original,
    Pasted,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub enum Lighting {
    Day,
    Night,
    #[default]
    Untagged,
}

impl fmt::Display for Lighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lighting::Day => "Day",
            Lighting::Night => "Night",
            Lighting::Untagged => "Untagged",
        })
    }
}

impl FromStr for Lighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "day" => Ok(Lighting::Day),
            "night" => Ok(Lighting::Night),
            "untagged" => Ok(Lighting::Untagged),
            other => Err(Error::Validation(format!("unknown lighting tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
    pub instance_id: InstanceId,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: ImageId,
    /// Path relative to the dataset's image root.
    pub file_path: String,
    pub width: u32,
    pub height: u32,
    pub camera_id: String,
    pub frame_index: i64,
    pub lighting: Lighting,
}

impl ImageRecord {
    pub fn file_name(&self) -> &str {
        self.file_path
            .rsplit(['/', '\\'])
            .next()
            .unwrap_or(&self.file_path)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<Annotation>,
    /// Category ids as declared by the source COCO file, indexed by class id.
    /// `None` for datasets that did not come from COCO.
    #[serde(default)]
    pub source_category_ids: Option<Vec<u64>>,
}

impl Dataset {
    pub fn new(class_names: Vec<String>) -> Self {
        Self {
            class_names,
            ..Default::default()
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Checks every structural invariant: class list, unique ids, referential
    /// integrity, box validity and bounds.
    pub fn validate(&self) -> Result<()> {
        if self.class_names.is_empty() {
            return Err(Error::Validation("dataset declares no classes".into()));
        }
        if let Some(ids) = &self.source_category_ids {
            if ids.len() != self.class_names.len() {
                return Err(Error::Validation(format!(
                    "{} category ids for {} classes",
                    ids.len(),
                    self.class_names.len()
                )));
            }
        }
        let mut dims: HashMap<ImageId, (u32, u32)> = HashMap::with_capacity(self.images.len());
        for img in &self.images {
            if img.width == 0 || img.height == 0 {
                return Err(Error::Validation(format!(
                    "image {} has zero dimension {}x{}",
                    img.image_id, img.width, img.height
                )));
            }
            if dims.insert(img.image_id, (img.width, img.height)).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate image id {}",
                    img.image_id
                )));
            }
        }
        let mut seen: HashSet<InstanceId> = HashSet::with_capacity(self.annotations.len());
        for ann in &self.annotations {
            let Some(&(w, h)) = dims.get(&ann.image_id) else {
                return Err(Error::Validation(format!(
                    "annotation {} references unknown image {}",
                    ann.instance_id, ann.image_id
                )));
            };
            if !seen.insert(ann.instance_id) {
                return Err(Error::Validation(format!(
                    "duplicate instance id {}",
                    ann.instance_id
                )));
            }
            if ann.class_id >= self.class_names.len() {
                return Err(Error::Validation(format!(
                    "annotation {} has class {} but only {} classes are declared",
                    ann.instance_id,
                    ann.class_id,
                    self.class_names.len()
                )));
            }
            if !ann.bbox.has_positive_size() {
                return Err(Error::Validation(format!(
                    "annotation {} has non-positive box size {}x{}",
                    ann.instance_id, ann.bbox.w, ann.bbox.h
                )));
            }
            if !ann.bbox.fits_within(w, h) {
                return Err(Error::Validation(format!(
                    "annotation {} box exceeds image {} bounds {}x{}",
                    ann.instance_id, ann.image_id, w, h
                )));
            }
        }
        Ok(())
    }

    /// Number of annotations per class id.
    pub fn class_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.class_names.len()];
        for ann in &self.annotations {
            if let Some(c) = counts.get_mut(ann.class_id) {
                *c += 1;
            }
        }
        counts
    }

    pub fn image(&self, id: ImageId) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.image_id == id)
    }

    /// Annotation indices grouped by image id, in annotation order.
    pub fn annotations_by_image(&self) -> BTreeMap<ImageId, Vec<&Annotation>> {
        let mut map: BTreeMap<ImageId, Vec<&Annotation>> = BTreeMap::new();
        for ann in &self.annotations {
            map.entry(ann.image_id).or_default().push(ann);
        }
        map
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.class_names.iter().position(|n| n == name)
    }

    /// Keeps only the listed images (and their annotations), preserving order.
    pub fn subset(&self, keep: &HashSet<ImageId>) -> Dataset {
        Dataset {
            class_names: self.class_names.clone(),
            images: self
                .images
                .iter()
                .filter(|i| keep.contains(&i.image_id))
                .cloned()
                .collect(),
            annotations: self
                .annotations
                .iter()
                .filter(|a| keep.contains(&a.image_id))
                .cloned()
                .collect(),
            source_category_ids: self.source_category_ids.clone(),
        }
    }
}

/// Last run of ASCII digits in a file stem, used as the frame index.
pub(crate) fn frame_index_from_name(name: &str) -> Option<i64> {
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}
