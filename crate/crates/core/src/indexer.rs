//! Camera identity, day/night tags, size buckets and the per-camera candidate
//! index the augmentor draws from.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use image::RgbImage;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::annotations::{
    BoundingBox, ClassId, Dataset, ImageId, ImageRecord, InstanceId, Lighting, Origin,
};
use crate::error::{Error, Result};
use crate::frames::FrameSource;
use crate::parallel::{self, Workers};

/// Captures the file-name prefix before the first underscore.
pub const DEFAULT_CAMERA_PATTERN: &str = r"^([^_]+)_";
/// Mean Rec. 601 luminance (0..255) at or above which a frame is Day.
pub const DEFAULT_LIGHTING_THRESHOLD: f64 = 60.0;

pub const SMALL_AREA_LIMIT: f64 = 32.0 * 32.0;
pub const MEDIUM_AREA_LIMIT: f64 = 96.0 * 96.0;

/// Applies `pattern` to the record's file name and returns its first capture
/// group.
pub fn extract_camera_id(image: &ImageRecord, pattern: &Regex) -> Result<String> {
    let name = image.file_name();
    pattern
        .captures(name)
        .and_then(|c| c.get(1))
        .map(|m| m.as_str().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| {
            Error::Tagging(format!(
                "camera pattern '{}' does not match file '{}'",
                pattern.as_str(),
                image.file_path
            ))
        })
}

/// Mean of `0.299 R + 0.587 G + 0.114 B` over all pixels.
pub fn mean_luminance(img: &RgbImage) -> f64 {
    let n = img.width() as u64 * img.height() as u64;
    if n == 0 {
        return 0.0;
    }
    luminance_sum_milli(img) as f64 / (1000.0 * n as f64)
}

// Luminance scaled by 1000 so the sum stays exact in integers.
fn luminance_sum_milli(img: &RgbImage) -> u64 {
    img.pixels()
        .map(|p| 299 * p[0] as u64 + 587 * p[1] as u64 + 114 * p[2] as u64)
        .sum()
}

/// Day iff mean luminance is at least `threshold`.
pub fn tag_lighting(img: &RgbImage, threshold: f64) -> Lighting {
    let n = img.width() as u64 * img.height() as u64;
    if luminance_sum_milli(img) as f64 >= threshold * 1000.0 * n as f64 {
        Lighting::Day
    } else {
        Lighting::Night
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 3] = [SizeBucket::Small, SizeBucket::Medium, SizeBucket::Large];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SizeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeBucket::Small => "small",
            SizeBucket::Medium => "medium",
            SizeBucket::Large => "large",
        })
    }
}

pub fn size_bucket(bbox: &BoundingBox) -> SizeBucket {
    let area = bbox.area();
    if area < SMALL_AREA_LIMIT {
        SizeBucket::Small
    } else if area < MEDIUM_AREA_LIMIT {
        SizeBucket::Medium
    } else {
        SizeBucket::Large
    }
}

/// Explicit lighting tags that take precedence over luminance.
///
/// CSV rows of `image_id,Day|Night`; a first column of the form
/// `camera:<id>` tags every frame of that camera. Image tags win over camera
/// tags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LightingOverrides {
    pub by_image: HashMap<ImageId, Lighting>,
    pub by_camera: HashMap<String, Lighting>,
}

impl LightingOverrides {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = LightingOverrides::default();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        for (i, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::Tagging(format!("override line {}: {e}", i + 1)))?;
            if record.len() != 2 {
                return Err(Error::Tagging(format!(
                    "override line {}: expected 2 fields, found {}",
                    i + 1,
                    record.len()
                )));
            }
            let tag: Lighting = record[1].parse()?;
            if tag == Lighting::Untagged {
                return Err(Error::Tagging(format!(
                    "override line {}: tag must be Day or Night",
                    i + 1
                )));
            }
            let key = &record[0];
            if let Some(camera) = key.strip_prefix("camera:") {
                out.by_camera.insert(camera.to_string(), tag);
            } else {
                let id: ImageId = key.parse().map_err(|_| {
                    Error::Tagging(format!("override line {}: invalid image id '{key}'", i + 1))
                })?;
                out.by_image.insert(id, tag);
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn lookup(&self, image: &ImageRecord, camera: &str) -> Option<Lighting> {
        self.by_image
            .get(&image.image_id)
            .or_else(|| self.by_camera.get(camera))
            .copied()
    }
}

#[derive(Debug, Clone)]
pub struct TaggingOptions {
    pub camera_pattern: Regex,
    pub lighting_threshold: f64,
    pub overrides: LightingOverrides,
}

impl Default for TaggingOptions {
    fn default() -> Self {
        Self {
            camera_pattern: Regex::new(DEFAULT_CAMERA_PATTERN).expect("default pattern compiles"),
            lighting_threshold: DEFAULT_LIGHTING_THRESHOLD,
            overrides: LightingOverrides::default(),
        }
    }
}

/// Fills in camera ids and lighting tags for every image.
///
/// Existing non-empty camera ids and Day/Night tags are kept; overrides win
/// over existing tags; pixels are only decoded for frames still untagged.
pub fn tag_dataset(
    d: &Dataset,
    opts: &TaggingOptions,
    frames: &dyn FrameSource,
    workers: Workers,
) -> Result<Dataset> {
    let images = parallel::try_map(workers, &d.images, |img| {
        let camera_id = if img.camera_id.is_empty() {
            extract_camera_id(img, &opts.camera_pattern)?
        } else {
            img.camera_id.clone()
        };
        let lighting = match opts.overrides.lookup(img, &camera_id) {
            Some(tag) => tag,
            None if img.lighting != Lighting::Untagged => img.lighting,
            None => tag_lighting(&frames.load(img)?, opts.lighting_threshold),
        };
        Ok(ImageRecord {
            camera_id,
            lighting,
            ..img.clone()
        })
    })?;
    Ok(Dataset {
        images,
        ..d.clone()
    })
}

/// A pasteable object: an original annotation together with its frame context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub instance_id: InstanceId,
    pub camera_id: String,
    pub frame_image_id: ImageId,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
    pub lighting: Lighting,
}

type ClassMap = BTreeMap<ClassId, Vec<ObjectInstance>>;

/// Immutable lookup camera -> lighting -> class -> instances, each leaf sorted
/// by instance id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CameraIndex {
    cameras: BTreeMap<String, BTreeMap<Lighting, ClassMap>>,
}

impl CameraIndex {
    /// Indexes every Original annotation. All images must be tagged.
    pub fn build(d: &Dataset) -> Result<Self> {
        let mut frames: HashMap<ImageId, &ImageRecord> = HashMap::with_capacity(d.images.len());
        for img in &d.images {
            if img.lighting == Lighting::Untagged {
                return Err(Error::Index(format!(
                    "image {} ({}) has no lighting tag; run tagging first",
                    img.image_id, img.file_path
                )));
            }
            if img.camera_id.is_empty() {
                return Err(Error::Index(format!(
                    "image {} ({}) has no camera id; run tagging first",
                    img.image_id, img.file_path
                )));
            }
            frames.insert(img.image_id, img);
        }
        let mut cameras: BTreeMap<String, BTreeMap<Lighting, ClassMap>> = BTreeMap::new();
        for ann in d
            .annotations
            .iter()
            .filter(|a| a.origin == Origin::Original)
        {
            let img = frames.get(&ann.image_id).ok_or_else(|| {
                Error::Index(format!(
                    "annotation {} references unknown image {}",
                    ann.instance_id, ann.image_id
                ))
            })?;
            cameras
                .entry(img.camera_id.clone())
                .or_default()
                .entry(img.lighting)
                .or_default()
                .entry(ann.class_id)
                .or_default()
                .push(ObjectInstance {
                    instance_id: ann.instance_id,
                    camera_id: img.camera_id.clone(),
                    frame_image_id: img.image_id,
                    class_id: ann.class_id,
                    bbox: ann.bbox,
                    lighting: img.lighting,
                });
        }
        for leaf in cameras
            .values_mut()
            .flat_map(|l| l.values_mut())
            .flat_map(|c| c.values_mut())
        {
            leaf.sort_by_key(|o| o.instance_id);
        }
        Ok(CameraIndex { cameras })
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn contains_camera(&self, camera: &str) -> bool {
        self.cameras.contains_key(camera)
    }

    pub fn cameras(&self) -> impl Iterator<Item = &str> {
        self.cameras.keys().map(String::as_str)
    }

    /// Leaf list for an exact (camera, lighting, class) key.
    pub fn leaf(&self, camera: &str, lighting: Lighting, class: ClassId) -> &[ObjectInstance] {
        self.cameras
            .get(camera)
            .and_then(|l| l.get(&lighting))
            .and_then(|c| c.get(&class))
            .map_or(&[], Vec::as_slice)
    }

    /// Candidates of a class from one camera, restricted to `lighting` when
    /// given, sorted by instance id.
    pub fn candidates(
        &self,
        camera: &str,
        lighting: Option<Lighting>,
        class: ClassId,
    ) -> Vec<&ObjectInstance> {
        let Some(by_light) = self.cameras.get(camera) else {
            return Vec::new();
        };
        let mut out: Vec<&ObjectInstance> = by_light
            .iter()
            .filter(|(l, _)| lighting.is_none_or(|want| **l == want))
            .filter_map(|(_, classes)| classes.get(&class))
            .flatten()
            .collect();
        if lighting.is_none() {
            out.sort_by_key(|o| o.instance_id);
        }
        out
    }

    /// Every (camera, lighting, class, instances) leaf in key order.
    pub fn leaves(&self) -> impl Iterator<Item = (&str, Lighting, ClassId, &[ObjectInstance])> {
        self.cameras.iter().flat_map(|(cam, by_light)| {
            by_light.iter().flat_map(move |(light, classes)| {
                classes
                    .iter()
                    .map(move |(class, list)| (cam.as_str(), *light, *class, list.as_slice()))
            })
        })
    }

    pub fn total(&self) -> usize {
        self.leaves().map(|(_, _, _, l)| l.len()).sum()
    }

    /// Instance totals per class id.
    pub fn class_totals(&self, num_classes: usize) -> Vec<u64> {
        let mut out = vec![0u64; num_classes];
        for (_, _, class, list) in self.leaves() {
            if let Some(slot) = out.get_mut(class) {
                *slot += list.len() as u64;
            }
        }
        out
    }

    /// Nested counts for reporting: camera -> lighting -> class -> count.
    pub fn summary(&self) -> BTreeMap<String, BTreeMap<String, BTreeMap<ClassId, usize>>> {
        let mut out: BTreeMap<String, BTreeMap<String, BTreeMap<ClassId, usize>>> = BTreeMap::new();
        for (cam, light, class, list) in self.leaves() {
            out.entry(cam.to_string())
                .or_default()
                .entry(light.to_string())
                .or_default()
                .insert(class, list.len());
        }
        out
    }
}

/// Convenience wrapper matching the free-function style of the other modules.
pub fn build_index(d: &Dataset) -> Result<CameraIndex> {
    CameraIndex::build(d)
}
