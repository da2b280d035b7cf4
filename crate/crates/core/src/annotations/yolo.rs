use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    frame_index_from_name, Annotation, BoundingBox, Dataset, ImageRecord, Lighting, Origin,
};
use crate::error::{Error, Result};

pub(crate) const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];
const CLASSES_FILE: &str = "classes.txt";

/// One parsed YOLO label line, center-normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoloLine {
    pub class_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl YoloLine {
    pub fn from_bbox(class_id: usize, b: &BoundingBox, width: u32, height: u32) -> Self {
        let (fw, fh) = (width as f64, height as f64);
        YoloLine {
            class_id,
            cx: (b.x + b.w / 2.0) / fw,
            cy: (b.y + b.h / 2.0) / fh,
            w: b.w / fw,
            h: b.h / fh,
        }
    }

    /// Real-valued pixel box, clamped to the image.
    pub fn to_bbox(&self, width: u32, height: u32) -> Option<BoundingBox> {
        let (fw, fh) = (width as f64, height as f64);
        BoundingBox::new(
            (self.cx - self.w / 2.0) * fw,
            (self.cy - self.h / 2.0) * fh,
            self.w * fw,
            self.h * fh,
        )
        .clamped(width, height)
    }
}

/// Formats a label line with 6-decimal fixed precision.
pub fn format_yolo_line(line: &YoloLine) -> String {
    format!(
        "{} {:.6} {:.6} {:.6} {:.6}",
        line.class_id, line.cx, line.cy, line.w, line.h
    )
}

fn parse_line(
    text: &str,
    path: &Path,
    line_no: usize,
    num_classes: usize,
) -> Result<Option<YoloLine>> {
    let err = |message: String| Error::LabelLine {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.is_empty() {
        return Ok(None);
    }
    if fields.len() != 5 {
        return Err(err(format!("expected 5 fields, found {}", fields.len())));
    }
    let class_id: usize = fields[0]
        .parse()
        .map_err(|_| err(format!("invalid class id '{}'", fields[0])))?;
    if class_id >= num_classes {
        return Err(err(format!(
            "class id {class_id} out of range for {num_classes} classes"
        )));
    }
    let mut vals = [0.0f64; 4];
    for (slot, (name, raw)) in vals
        .iter_mut()
        .zip(["cx", "cy", "w", "h"].iter().zip(&fields[1..]))
    {
        let v: f64 = raw
            .parse()
            .map_err(|_| err(format!("invalid {name} '{raw}'")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(err(format!("{name} = {v} outside [0, 1]")));
        }
        *slot = v;
    }
    Ok(Some(YoloLine {
        class_id,
        cx: vals[0],
        cy: vals[1],
        w: vals[2],
        h: vals[3],
    }))
}

fn collect_files(root: &Path, keep: &dyn Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if keep(&path) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn has_extension(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn rel_string(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

fn stem_key(rel: &str) -> String {
    match rel.rsplit_once('.') {
        Some((stem, _)) if !stem.ends_with('/') => stem.to_string(),
        _ => rel.to_string(),
    }
}

/// Lists image files under `image_dir` (recursively, sorted) as records with
/// ids assigned from 1 in path order. Dimensions are read from the files.
pub(crate) fn scan_images(image_dir: &Path) -> Result<Vec<ImageRecord>> {
    let files = collect_files(image_dir, &|p| has_extension(p, &IMAGE_EXTENSIONS))?;
    files
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let (width, height) = image::image_dimensions(path).map_err(|e| Error::Image {
                path: path.clone(),
                source: e,
            })?;
            let rel = rel_string(image_dir, path);
            let frame_index = frame_index_from_name(&rel).unwrap_or(-1);
            Ok(ImageRecord {
                image_id: i as u64 + 1,
                file_path: rel,
                width,
                height,
                camera_id: String::new(),
                frame_index,
                lighting: Lighting::Untagged,
            })
        })
        .collect()
}

/// Reads a YOLO label tree. Each `.txt` under `label_dir` must have an image
/// with the same relative stem under `image_dir`; images without a label file
/// are kept with no annotations.
pub fn parse_yolo(label_dir: &Path, image_dir: &Path, class_names: &[String]) -> Result<Dataset> {
    if class_names.is_empty() {
        return Err(Error::Validation(
            "YOLO dataset needs at least one class name".into(),
        ));
    }
    let images = scan_images(image_dir)?;
    let by_stem: BTreeMap<String, &ImageRecord> = images
        .iter()
        .map(|img| (stem_key(&img.file_path), img))
        .collect();

    let labels = collect_files(label_dir, &|p| {
        has_extension(p, &["txt"]) && p.file_name().is_some_and(|n| n != CLASSES_FILE)
    })?;

    let mut annotations = Vec::new();
    let mut next_id = 1u64;
    for label in labels {
        let key = stem_key(&rel_string(label_dir, &label));
        let img = by_stem.get(&key).ok_or_else(|| {
            Error::Validation(format!(
                "label file {} has no matching image under {}",
                label.display(),
                image_dir.display()
            ))
        })?;
        let content = fs::read_to_string(&label).map_err(|e| Error::io(&label, e))?;
        for (i, text) in content.lines().enumerate() {
            let Some(line) = parse_line(text, &label, i + 1, class_names.len())? else {
                continue;
            };
            let bbox = line
                .to_bbox(img.width, img.height)
                .ok_or_else(|| Error::LabelLine {
                    path: label.clone(),
                    line: i + 1,
                    message: "box has zero area".into(),
                })?;
            annotations.push(Annotation {
                image_id: img.image_id,
                class_id: line.class_id,
                bbox,
                instance_id: next_id,
                origin: Origin::Original,
            });
            next_id += 1;
        }
    }

    let dataset = Dataset {
        class_names: class_names.to_vec(),
        images,
        annotations,
        source_category_ids: None,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes one label file per image (empty files for images without objects)
/// plus `classes.txt` under `out_dir`.
pub fn write_yolo(d: &Dataset, out_dir: &Path) -> Result<()> {
    d.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let by_image = d.annotations_by_image();
    for img in &d.images {
        let mut text = String::new();
        for ann in by_image.get(&img.image_id).into_iter().flatten() {
            let line = YoloLine::from_bbox(ann.class_id, &ann.bbox, img.width, img.height);
            let _ = writeln!(text, "{}", format_yolo_line(&line));
        }
        let path = out_dir.join(format!("{}.txt", stem_key(&img.file_path)));
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    let classes = out_dir.join(CLASSES_FILE);
    let mut names = d.class_names.join("\n");
    names.push('\n');
    fs::write(&classes, names).map_err(|e| Error::io(&classes, e))
}
