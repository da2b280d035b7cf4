use std::collections::hash_map::Entry;
use std::collections::HashMap;

use image::RgbImage;

use crate::annotations::{Annotation, ImageId, ImageRecord, InstanceId, Origin};
use crate::error::{Error, Result};
use crate::geometry::pixel_span;
use crate::indexer::ObjectInstance;

/// Copies each accepted instance's box rectangle from its source frame into
/// the host at identical coordinates, in acceptance order.
///
/// Returns the composited frame and one `Pasted` annotation per instance,
/// numbered consecutively from `first_instance_id`. Each distinct source
/// frame is loaded once.
pub fn apply_placements<F>(
    host: &RgbImage,
    host_record: &ImageRecord,
    accepted: &[ObjectInstance],
    first_instance_id: InstanceId,
    mut load_source: F,
) -> Result<(RgbImage, Vec<Annotation>)>
where
    F: FnMut(ImageId) -> Result<RgbImage>,
{
    if host.dimensions() != (host_record.width, host_record.height) {
        return Err(Error::DimensionMismatch(format!(
            "image {} ({}) decodes as {}x{} but is recorded as {}x{}",
            host_record.image_id,
            host_record.file_path,
            host.width(),
            host.height(),
            host_record.width,
            host_record.height
        )));
    }
    let mut out = host.clone();
    let mut cache: HashMap<ImageId, RgbImage> = HashMap::new();
    let mut annotations = Vec::with_capacity(accepted.len());
    let row_bytes = out.width() as usize * 3;

    for (n, inst) in accepted.iter().enumerate() {
        if let Entry::Vacant(slot) = cache.entry(inst.frame_image_id) {
            slot.insert(load_source(inst.frame_image_id)?);
        }
        let src = &cache[&inst.frame_image_id];
        if src.dimensions() != out.dimensions() {
            return Err(Error::DimensionMismatch(format!(
                "camera {}: source frame {} is {}x{} but host frame {} is {}x{}",
                inst.camera_id,
                inst.frame_image_id,
                src.width(),
                src.height(),
                host_record.image_id,
                out.width(),
                out.height()
            )));
        }
        if !inst.bbox.fits_within(out.width(), out.height()) {
            return Err(Error::DimensionMismatch(format!(
                "camera {}: instance {} box exceeds host frame {}",
                inst.camera_id, inst.instance_id, host_record.image_id
            )));
        }
        let (cols, rows) = pixel_span(&inst.bbox, out.width(), out.height());
        let (c0, c1) = (cols.start as usize * 3, cols.end as usize * 3);
        let src_raw = src.as_raw();
        let dst_raw: &mut [u8] = &mut out;
        for row in rows {
            let base = row as usize * row_bytes;
            dst_raw[base + c0..base + c1].copy_from_slice(&src_raw[base + c0..base + c1]);
        }
        annotations.push(Annotation {
            image_id: host_record.image_id,
            class_id: inst.class_id,
            bbox: inst.bbox,
            instance_id: first_instance_id + n as u64,
            origin: Origin::Pasted,
        });
    }
    Ok((out, annotations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{BoundingBox, Lighting};

    fn record(id: ImageId) -> ImageRecord {
        ImageRecord {
            image_id: id,
            file_path: format!("cam_{id}.png"),
            width: 20,
            height: 20,
            camera_id: "cam".into(),
            frame_index: id as i64,
            lighting: Lighting::Day,
        }
    }

    fn instance(id: InstanceId, frame: ImageId, b: BoundingBox) -> ObjectInstance {
        ObjectInstance {
            instance_id: id,
            camera_id: "cam".into(),
            frame_image_id: frame,
            class_id: 0,
            bbox: b,
            lighting: Lighting::Day,
        }
    }

    #[test]
    fn single_crop_is_verbatim() {
        let host = RgbImage::from_pixel(20, 20, image::Rgb([1, 2, 3]));
        let src = RgbImage::from_fn(20, 20, |x, y| image::Rgb([x as u8, y as u8, 99]));
        let b = BoundingBox::new(4.0, 5.0, 10.0, 10.0);
        let (out, anns) = apply_placements(&host, &record(1), &[instance(9, 2, b)], 50, |_| {
            Ok(src.clone())
        })
        .unwrap();
        let mut changed = 0;
        for (x, y, p) in out.enumerate_pixels() {
            let inside = (4..14).contains(&x) && (5..15).contains(&y);
            if inside {
                assert_eq!(p, src.get_pixel(x, y));
                changed += 1;
            } else {
                assert_eq!(p, host.get_pixel(x, y));
            }
        }
        assert_eq!(changed, 100);
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].instance_id, 50);
        assert_eq!(anns[0].bbox, b);
        assert_eq!(anns[0].origin, Origin::Pasted);
    }

    #[test]
    fn nothing_accepted_is_identity() {
        let host = RgbImage::from_fn(20, 20, |x, y| image::Rgb([x as u8, y as u8, 0]));
        let (out, anns) = apply_placements(&host, &record(1), &[], 1, |_| unreachable!()).unwrap();
        assert_eq!(out, host);
        assert!(anns.is_empty());
    }

    #[test]
    fn size_mismatch_names_camera_and_frames() {
        let host = RgbImage::new(20, 20);
        let b = BoundingBox::new(0.0, 0.0, 5.0, 5.0);
        let err = apply_placements(&host, &record(1), &[instance(9, 7, b)], 1, |_| {
            Ok(RgbImage::new(30, 20))
        })
        .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("camera cam") && msg.contains("frame 7") && msg.contains("frame 1"),
            "{msg}"
        );
    }

    #[test]
    fn sources_are_loaded_once() {
        let host = RgbImage::new(20, 20);
        let a = instance(1, 2, BoundingBox::new(0.0, 0.0, 5.0, 5.0));
        let b = instance(2, 2, BoundingBox::new(10.0, 10.0, 5.0, 5.0));
        let mut loads = 0;
        apply_placements(&host, &record(1), &[a, b], 1, |_| {
            loads += 1;
            Ok(RgbImage::new(20, 20))
        })
        .unwrap();
        assert_eq!(loads, 1);
    }
}
