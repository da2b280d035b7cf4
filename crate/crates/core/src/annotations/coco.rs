use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    frame_index_from_name, Annotation, BoundingBox, Dataset, ImageRecord, Lighting, Origin,
};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame_index: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lighting: Option<Lighting>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    #[serde(default, skip_deserializing)]
    area: f64,
    #[serde(default, skip_deserializing)]
    iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Origin>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// Parses a COCO-style detection document.
///
/// Category ids are remapped to contiguous class ids in declaration order.
/// Boxes spilling past the image are clamped with a warning; boxes with
/// non-positive size are rejected. Optional `camera_id`, `frame_index`,
/// `lighting` (images) and `origin` (annotations) keys written by
/// [`write_coco`] are honoured when present.
pub fn parse_coco(json_text: &str) -> Result<Dataset> {
    let file: CocoFile = serde_json::from_str(json_text).map_err(|e| Error::json(json_text, &e))?;

    let mut class_of: HashMap<u64, usize> = HashMap::new();
    let mut class_names = Vec::with_capacity(file.categories.len());
    let mut source_ids = Vec::with_capacity(file.categories.len());
    for cat in &file.categories {
        if class_of.insert(cat.id, class_names.len()).is_some() {
            return Err(Error::Validation(format!(
                "duplicate category id {}",
                cat.id
            )));
        }
        class_names.push(cat.name.clone());
        source_ids.push(cat.id);
    }

    let mut dims: HashMap<u64, (u32, u32)> = HashMap::new();
    let mut images = Vec::with_capacity(file.images.len());
    for img in file.images {
        if dims.insert(img.id, (img.width, img.height)).is_some() {
            return Err(Error::Validation(format!("duplicate image id {}", img.id)));
        }
        let frame_index = img
            .frame_index
            .or_else(|| frame_index_from_name(&img.file_name))
            .unwrap_or(-1);
        images.push(ImageRecord {
            image_id: img.id,
            file_path: img.file_name,
            width: img.width,
            height: img.height,
            camera_id: img.camera_id.unwrap_or_default(),
            frame_index,
            lighting: img.lighting.unwrap_or_default(),
        });
    }

    let mut annotations = Vec::with_capacity(file.annotations.len());
    for ann in file.annotations {
        let Some(&(w, h)) = dims.get(&ann.image_id) else {
            return Err(Error::Validation(format!(
                "annotation {} references unknown image {}",
                ann.id, ann.image_id
            )));
        };
        let Some(&class_id) = class_of.get(&ann.category_id) else {
            return Err(Error::Validation(format!(
                "annotation {} references unknown category {}",
                ann.id, ann.category_id
            )));
        };
        let [x, y, bw, bh] = ann.bbox;
        let raw = BoundingBox::new(x, y, bw, bh);
        if !raw.has_positive_size() || !x.is_finite() || !y.is_finite() {
            return Err(Error::Validation(format!(
                "annotation {} has non-positive box size {bw}x{bh}",
                ann.id
            )));
        }
        let bbox = if raw.fits_within(w, h) {
            raw
        } else {
            let clamped = raw.clamped(w, h).ok_or_else(|| {
                Error::Validation(format!(
                    "annotation {} lies entirely outside image {}",
                    ann.id, ann.image_id
                ))
            })?;
            log::warn!(
                "annotation {} box {:?} clamped to image {} bounds {}x{}",
                ann.id,
                ann.bbox,
                ann.image_id,
                w,
                h
            );
            clamped
        };
        annotations.push(Annotation {
            image_id: ann.image_id,
            class_id,
            bbox,
            instance_id: ann.id,
            origin: ann.origin.unwrap_or(Origin::Original),
        });
    }

    let dataset = Dataset {
        class_names,
        images,
        annotations,
        source_category_ids: Some(source_ids),
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Serializes a dataset as COCO JSON. Original category ids are restored
/// when the dataset came from COCO; otherwise categories are numbered from 1.
pub fn write_coco(d: &Dataset) -> Result<String> {
    d.validate()?;
    let cat_ids: Vec<u64> = match &d.source_category_ids {
        Some(ids) => ids.clone(),
        None => (1..=d.class_names.len() as u64).collect(),
    };
    if cat_ids.iter().collect::<HashSet<_>>().len() != cat_ids.len() {
        return Err(Error::Validation("duplicate category ids".into()));
    }
    let file = CocoFile {
        images: d
            .images
            .iter()
            .map(|i| CocoImage {
                id: i.image_id,
                file_name: i.file_path.clone(),
                width: i.width,
                height: i.height,
                camera_id: (!i.camera_id.is_empty()).then(|| i.camera_id.clone()),
                frame_index: (i.frame_index >= 0).then_some(i.frame_index),
                lighting: (i.lighting != Lighting::Untagged).then_some(i.lighting),
            })
            .collect(),
        annotations: d
            .annotations
            .iter()
            .map(|a| CocoAnnotation {
                id: a.instance_id,
                image_id: a.image_id,
                category_id: cat_ids[a.class_id],
                bbox: [a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h],
                area: a.bbox.area(),
                iscrowd: 0,
                origin: (a.origin == Origin::Pasted).then_some(Origin::Pasted),
            })
            .collect(),
        categories: d
            .class_names
            .iter()
            .zip(&cat_ids)
            .map(|(name, &id)| CocoCategory {
                id,
                name: name.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Validation(e.to_string()))
}
