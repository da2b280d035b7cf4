//! Synthetic stationary-camera datasets for tests, benchmarks and demos.

use image::RgbImage;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::annotations::{Annotation, BoundingBox, Dataset, ImageRecord, Lighting, Origin};
use crate::frames::MemoryFrames;

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub cameras: usize,
    pub frames_per_camera: usize,
    pub width: u32,
    pub height: u32,
    pub class_names: Vec<String>,
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_box: u32,
    pub max_box: u32,
    /// Probability that a frame is tagged Night.
    pub night_fraction: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            cameras: 4,
            frames_per_camera: 10,
            width: 64,
            height: 64,
            class_names: vec!["car".into(), "bus".into(), "bike".into()],
            min_objects: 1,
            max_objects: 5,
            min_box: 4,
            max_box: 20,
            night_fraction: 0.3,
            seed: 0,
        }
    }
}

/// Random tagged scenes. File names follow `cam{c}_f{n}.png` and images are
/// numbered from 1 camera by camera.
pub fn synthetic_dataset(spec: &SceneSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut d = Dataset::new(spec.class_names.clone());
    let mut next_ann = 1u64;
    for cam in 0..spec.cameras {
        for frame in 0..spec.frames_per_camera {
            let image_id = d.images.len() as u64 + 1;
            let lighting = if rng.gen_bool(spec.night_fraction) {
                Lighting::Night
            } else {
                Lighting::Day
            };
            d.images.push(ImageRecord {
                image_id,
                file_path: format!("cam{cam}_f{frame:04}.png"),
                width: spec.width,
                height: spec.height,
                camera_id: format!("cam{cam}"),
                frame_index: frame as i64,
                lighting,
            });
            let n = rng.gen_range(spec.min_objects..=spec.max_objects);
            for _ in 0..n {
                let bw = rng.gen_range(spec.min_box..=spec.max_box.min(spec.width));
                let bh = rng.gen_range(spec.min_box..=spec.max_box.min(spec.height));
                let x = rng.gen_range(0..=spec.width - bw);
                let y = rng.gen_range(0..=spec.height - bh);
                d.annotations.push(Annotation {
                    image_id,
                    class_id: rng.gen_range(0..spec.class_names.len()),
                    bbox: BoundingBox::new(x as f64, y as f64, bw as f64, bh as f64),
                    instance_id: next_ann,
                    origin: Origin::Original,
                });
                next_ann += 1;
            }
        }
    }
    d
}

/// Noise frames, distinct per image, so any misplaced copy shows up.
pub fn synthetic_frames(d: &Dataset, seed: u64) -> MemoryFrames {
    let mut frames = MemoryFrames::default();
    for img in &d.images {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ img.image_id.wrapping_mul(0x9E37_79B9));
        let mut buf = vec![0u8; img.width as usize * img.height as usize * 3];
        rng.fill_bytes(&mut buf);
        let frame = RgbImage::from_raw(img.width, img.height, buf).expect("buffer sized to frame");
        frames.frames.insert(img.image_id, frame);
    }
    frames
}

pub const FISHEYE_CLASSES: [&str; 5] = ["Bus", "Bike", "Car", "Pedestrian", "Truck"];
/// Object totals of the 450-image small Fisheye8K subset, in class order.
pub const FISHEYE_SMALL_TOTALS: [u64; 5] = [219, 5060, 3720, 812, 325];
pub const FISHEYE_SMALL_IMAGES: usize = 450;

/// COCO document shaped like the small Fisheye8K subset: 450 frames of
/// 1280x1280 from 14 cameras carrying exactly [`FISHEYE_SMALL_TOTALS`]
/// objects. Category ids start at 0 as in the public release.
pub fn fisheye_small_coco() -> String {
    let (w, h) = (1280u32, 1280u32);
    let cameras = 14;
    let images: Vec<_> = (0..FISHEYE_SMALL_IMAGES)
        .map(|i| {
            let cam = i % cameras;
            let part = ["A", "E", "N", "M"][i % 4];
            json!({
                "id": i as u64 + 1,
                "file_name": format!("camera{}_{}_{}.png", cam + 1, part, i / cameras),
                "width": w,
                "height": h,
            })
        })
        .collect();
    let mut annotations = Vec::new();
    let mut next = 1u64;
    let mut slot = 0usize;
    for (class, &total) in FISHEYE_SMALL_TOTALS.iter().enumerate() {
        for k in 0..total {
            let image = slot % FISHEYE_SMALL_IMAGES;
            // spread sizes across the three buckets
            let side = [20.0, 60.0, 140.0][(k % 3) as usize];
            let cell = slot / FISHEYE_SMALL_IMAGES;
            let x = (cell % 8) as f64 * 150.0 + 5.0;
            let y = (cell / 8 % 8) as f64 * 150.0 + 5.0;
            annotations.push(json!({
                "id": next,
                "image_id": image as u64 + 1,
                "category_id": class,
                "bbox": [x, y, side, side],
                "area": side * side,
                "iscrowd": 0,
            }));
            next += 1;
            slot += 1;
        }
    }
    let categories: Vec<_> = FISHEYE_CLASSES
        .iter()
        .enumerate()
        .map(|(i, n)| json!({"id": i, "name": n}))
        .collect();
    serde_json::to_string(&json!({
        "images": images,
        "annotations": annotations,
        "categories": categories,
    }))
    .expect("fixture serializes")
}
