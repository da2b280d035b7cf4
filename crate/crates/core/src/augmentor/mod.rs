//! In-place copy-paste augmentation.
//!
//! For every host image, objects of each class are drawn from other frames of
//! the same camera (optionally restricted to the same day/night tag), visited
//! once in a seeded random order, and accepted when their original box does
//! not collide with anything already in the frame. Accepted boxes join the
//! occupied set immediately, so later candidates must avoid them too. Each
//! class stops after `k` acceptances or when its pool runs out.

mod paste;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::{
    Annotation, BoundingBox, ClassId, Dataset, ImageId, ImageRecord, InstanceId,
};
use crate::error::{Error, Result};
use crate::frames::{FrameSink, FrameSource};
use crate::geometry;
use crate::indexer::{CameraIndex, ObjectInstance};
use crate::parallel::{self, Workers};

pub use paste::apply_placements;

/// Multipliers used for the fixed-k variants.
pub const STANDARD_MULTIPLIERS: [u32; 3] = [3, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OverlapMode {
    /// Any intersection with positive area is a collision.
    #[default]
    AnyIntersection,
    /// Collision iff IoU exceeds `tau`.
    IouThreshold { tau: f64 },
}

impl OverlapMode {
    pub fn collides(&self, a: &BoundingBox, b: &BoundingBox) -> bool {
        match *self {
            OverlapMode::AnyIntersection => geometry::intersects(a, b),
            OverlapMode::IouThreshold { tau } => geometry::iou(a, b) > tau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassOrder {
    #[default]
    ByClassId,
    BySeedShuffle,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    /// Per-image, per-class acceptance cap. Missing classes get 0.
    pub per_class_multiplier: BTreeMap<ClassId, u32>,
    #[serde(default = "yes")]
    pub lighting_match: bool,
    #[serde(default)]
    pub overlap_mode: OverlapMode,
    #[serde(default = "yes")]
    pub exclude_same_frame: bool,
    pub seed: u64,
    #[serde(default)]
    pub class_order: ClassOrder,
}

impl AugmentationConfig {
    /// Same cap `k` for every class in `0..num_classes`.
    pub fn uniform(num_classes: usize, k: u32, seed: u64) -> Self {
        Self {
            per_class_multiplier: (0..num_classes).map(|c| (c, k)).collect(),
            lighting_match: true,
            overlap_mode: OverlapMode::AnyIntersection,
            exclude_same_frame: true,
            seed,
            class_order: ClassOrder::ByClassId,
        }
    }

    pub fn multiplier(&self, class: ClassId) -> u32 {
        self.per_class_multiplier.get(&class).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if let OverlapMode::IouThreshold { tau } = self.overlap_mode {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::Config(format!("IoU threshold {tau} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-image random stream, independent of scheduling.
pub fn image_rng(seed: u64, image_id: ImageId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(image_id)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPlacement {
    pub class_id: ClassId,
    pub cap: u32,
    pub pool_size: usize,
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Candidates in the order they were scanned (prefix of the shuffle).
    pub scanned: Vec<InstanceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedPaste {
    pub source_instance_id: InstanceId,
    pub source_image_id: ImageId,
    /// Id of the pasted annotation; 0 until ids are assigned.
    pub new_instance_id: InstanceId,
}

/// Audit trail for one host image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementLog {
    pub image_id: ImageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub classes: Vec<ClassPlacement>,
    pub accepted: Vec<AcceptedPaste>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub accepted: Vec<ObjectInstance>,
    pub log: PlacementLog,
}

/// Chooses which instances to paste into `host`.
///
/// `host_annotations` seeds the occupied set. Deterministic in
/// `(cfg.seed, host.image_id)`.
pub fn plan_placements(
    host: &ImageRecord,
    host_annotations: &[&Annotation],
    index: &CameraIndex,
    cfg: &AugmentationConfig,
    num_classes: usize,
) -> Placement {
    let mut log = PlacementLog {
        image_id: host.image_id,
        note: None,
        classes: Vec::new(),
        accepted: Vec::new(),
    };
    let mut accepted: Vec<ObjectInstance> = Vec::new();
    if !index.contains_camera(&host.camera_id) {
        if cfg.per_class_multiplier.values().any(|&k| k > 0) {
            log.note = Some(format!("camera '{}' not in index", host.camera_id));
        }
        return Placement { accepted, log };
    }

    let mut rng = image_rng(cfg.seed, host.image_id);
    let mut classes: Vec<ClassId> = (0..num_classes).collect();
    if cfg.class_order == ClassOrder::BySeedShuffle {
        classes.shuffle(&mut rng);
    }
    let mut occupied: Vec<BoundingBox> = host_annotations.iter().map(|a| a.bbox).collect();
    let lighting = cfg.lighting_match.then_some(host.lighting);

    for class in classes {
        let cap = cfg.multiplier(class);
        if cap == 0 {
            continue;
        }
        let mut pool: Vec<&ObjectInstance> = index
            .candidates(&host.camera_id, lighting, class)
            .into_iter()
            .filter(|c| !(cfg.exclude_same_frame && c.frame_image_id == host.image_id))
            .collect();
        pool.shuffle(&mut rng);

        let mut entry = ClassPlacement {
            class_id: class,
            cap,
            pool_size: pool.len(),
            attempted: 0,
            accepted: 0,
            rejected: 0,
            scanned: Vec::new(),
        };
        for cand in pool {
            if entry.accepted as u32 >= cap {
                break;
            }
            entry.attempted += 1;
            entry.scanned.push(cand.instance_id);
            if occupied
                .iter()
                .any(|b| cfg.overlap_mode.collides(&cand.bbox, b))
            {
                entry.rejected += 1;
                continue;
            }
            entry.accepted += 1;
            occupied.push(cand.bbox);
            log.accepted.push(AcceptedPaste {
                source_instance_id: cand.instance_id,
                source_image_id: cand.frame_image_id,
                new_instance_id: 0,
            });
            accepted.push(cand.clone());
        }
        log.classes.push(entry);
    }
    Placement { accepted, log }
}

/// Where augmented pixels come from and go to.
#[derive(Clone, Copy)]
pub struct Pixels<'a> {
    pub frames: &'a dyn FrameSource,
    pub sink: &'a dyn FrameSink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub dataset: Dataset,
    /// One log per input image, in dataset order.
    pub logs: Vec<PlacementLog>,
}

impl Augmented {
    /// Placement logs as JSON lines.
    pub fn logs_jsonl(&self) -> String {
        let mut out = String::new();
        for log in &self.logs {
            out.push_str(&serde_json::to_string(log).expect("log serializes"));
            out.push('\n');
        }
        out
    }

    pub fn pasted_count(&self) -> usize {
        self.logs.iter().map(|l| l.accepted.len()).sum()
    }
}

/// Augments every image of `d`. Image count is unchanged; originals keep
/// their order and ids, and pasted annotations follow them grouped by host
/// image in dataset order, numbered after the largest existing id.
///
/// With `pixels`, every output frame (augmented or untouched) is rendered and
/// handed to the sink. Output never depends on `workers`.
pub fn augment_dataset(
    d: &Dataset,
    index: &CameraIndex,
    cfg: &AugmentationConfig,
    pixels: Option<Pixels<'_>>,
    workers: Workers,
) -> Result<Augmented> {
    cfg.validate()?;
    d.validate()?;
    let by_image = d.annotations_by_image();
    let empty: Vec<&Annotation> = Vec::new();
    let placements: Vec<Placement> = parallel::map(workers, &d.images, |img| {
        let host_anns = by_image.get(&img.image_id).unwrap_or(&empty);
        plan_placements(img, host_anns, index, cfg, d.num_classes())
    });

    let mut next_id = d
        .annotations
        .iter()
        .map(|a| a.instance_id)
        .max()
        .unwrap_or(0)
        + 1;
    let mut first_ids = Vec::with_capacity(placements.len());
    for p in &placements {
        first_ids.push(next_id);
        next_id += p.accepted.len() as u64;
    }

    let records: HashMap<ImageId, &ImageRecord> =
        d.images.iter().map(|i| (i.image_id, i)).collect();
    let jobs: Vec<usize> = (0..d.images.len()).collect();
    let pasted: Vec<Vec<Annotation>> = parallel::try_map(workers, &jobs, |&i| {
        let host = &d.images[i];
        let placement = &placements[i];
        match pixels {
            Some(px) => {
                let host_img = px.frames.load(host)?;
                let (out, anns) =
                    apply_placements(&host_img, host, &placement.accepted, first_ids[i], |id| {
                        let rec = records.get(&id).ok_or_else(|| {
                            Error::Index(format!("source image {id} not in dataset"))
                        })?;
                        px.frames.load(rec)
                    })?;
                px.sink.store(host, out)?;
                Ok(anns)
            }
            None => Ok(pasted_annotations(host, &placement.accepted, first_ids[i])),
        }
    })?;

    let mut annotations = d.annotations.clone();
    annotations.extend(pasted.into_iter().flatten());
    let logs = placements
        .into_iter()
        .zip(&first_ids)
        .map(|(p, &first)| {
            let mut log = p.log;
            for (n, acc) in log.accepted.iter_mut().enumerate() {
                acc.new_instance_id = first + n as u64;
            }
            log
        })
        .collect();
    let dataset = Dataset {
        annotations,
        ..d.clone()
    };
    Ok(Augmented { dataset, logs })
}

fn pasted_annotations(
    host: &ImageRecord,
    accepted: &[ObjectInstance],
    first: InstanceId,
) -> Vec<Annotation> {
    accepted
        .iter()
        .enumerate()
        .map(|(n, inst)| Annotation {
            image_id: host.image_id,
            class_id: inst.class_id,
            bbox: inst.bbox,
            instance_id: first + n as u64,
            origin: crate::annotations::Origin::Pasted,
        })
        .collect()
}

/// Builds the per-class "best variant" dataset in a single coherent pass:
/// every class gets its own multiplier drawn from `{0, 3, 10, 20}`, where 0
/// keeps the class unaugmented.
pub fn assemble(
    d: &Dataset,
    index: &CameraIndex,
    per_class_variant: &BTreeMap<ClassId, u32>,
    base: &AugmentationConfig,
    pixels: Option<Pixels<'_>>,
    workers: Workers,
) -> Result<Augmented> {
    for (&class, &k) in per_class_variant {
        if class >= d.num_classes() {
            return Err(Error::Config(format!("assemble: unknown class id {class}")));
        }
        if k != 0 && !STANDARD_MULTIPLIERS.contains(&k) {
            return Err(Error::Config(format!(
                "assemble: class {} multiplier {k} not in {{0, 3, 10, 20}}",
                d.class_names[class]
            )));
        }
    }
    let cfg = AugmentationConfig {
        per_class_multiplier: per_class_variant.clone(),
        ..base.clone()
    };
    augment_dataset(d, index, &cfg, pixels, workers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{Lighting, Origin};

    fn record(id: ImageId, lighting: Lighting) -> ImageRecord {
        ImageRecord {
            image_id: id,
            file_path: format!("cam_{id}.png"),
            width: 100,
            height: 100,
            camera_id: "cam".into(),
            frame_index: id as i64,
            lighting,
        }
    }

    fn ann(id: InstanceId, image: ImageId, class: ClassId, b: (f64, f64, f64, f64)) -> Annotation {
        Annotation {
            image_id: image,
            class_id: class,
            bbox: BoundingBox::new(b.0, b.1, b.2, b.3),
            instance_id: id,
            origin: Origin::Original,
        }
    }

    /// Host image 1 with one box; pool frames 2 and 3 hold one candidate each.
    fn small_scene() -> Dataset {
        Dataset {
            class_names: vec!["car".into()],
            images: vec![
                record(1, Lighting::Day),
                record(2, Lighting::Day),
                record(3, Lighting::Day),
            ],
            annotations: vec![
                ann(1, 1, 0, (0.0, 0.0, 50.0, 50.0)),
                ann(2, 2, 0, (0.0, 0.0, 50.0, 50.0)),
                ann(3, 3, 0, (50.0, 50.0, 40.0, 40.0)),
            ],
            source_category_ids: None,
        }
    }

    #[test]
    fn overlapping_candidate_rejected_disjoint_accepted() {
        let d = small_scene();
        let idx = CameraIndex::build(&d).unwrap();
        let cfg = AugmentationConfig::uniform(1, 2, 0);
        let host_anns = [&d.annotations[0]];
        let p = plan_placements(&d.images[0], &host_anns, &idx, &cfg, 1);
        assert_eq!(p.accepted.len(), 1);
        assert_eq!(p.accepted[0].instance_id, 3);
        let c = &p.log.classes[0];
        assert_eq!(
            (c.attempted, c.accepted, c.rejected, c.pool_size),
            (2, 1, 1, 2)
        );
    }

    #[test]
    fn zero_multipliers_are_identity() {
        let d = small_scene();
        let idx = CameraIndex::build(&d).unwrap();
        let out = augment_dataset(
            &d,
            &idx,
            &AugmentationConfig::uniform(1, 0, 5),
            None,
            Workers(1),
        )
        .unwrap();
        assert_eq!(out.dataset, d);
        assert!(out
            .logs
            .iter()
            .all(|l| l.classes.is_empty() && l.accepted.is_empty()));
    }

    #[test]
    fn tiled_host_accepts_nothing() {
        let mut d = small_scene();
        d.annotations.retain(|a| a.image_id != 1);
        for (i, (x, y)) in [(0.0, 0.0), (50.0, 0.0), (0.0, 50.0), (50.0, 50.0)]
            .into_iter()
            .enumerate()
        {
            d.annotations
                .push(ann(10 + i as u64, 1, 0, (x, y, 50.0, 50.0)));
        }
        let idx = CameraIndex::build(&d).unwrap();
        let out = augment_dataset(
            &d,
            &idx,
            &AugmentationConfig::uniform(1, 20, 1),
            None,
            Workers(1),
        )
        .unwrap();
        assert!(out.logs[0].accepted.is_empty());
    }

    #[test]
    fn lighting_and_same_frame_filters() {
        let mut d = small_scene();
        d.images[2].lighting = Lighting::Night;
        let idx = CameraIndex::build(&d).unwrap();
        let host_anns = [&d.annotations[0]];
        let mut cfg = AugmentationConfig::uniform(1, 5, 0);
        let p = plan_placements(&d.images[0], &host_anns, &idx, &cfg, 1);
        assert!(p.accepted.is_empty(), "night candidate must be excluded");
        assert_eq!(p.log.classes[0].pool_size, 1);

        cfg.lighting_match = false;
        let p = plan_placements(&d.images[0], &host_anns, &idx, &cfg, 1);
        assert_eq!(p.accepted.len(), 1);

        cfg.exclude_same_frame = false;
        let p = plan_placements(&d.images[0], &host_anns, &idx, &cfg, 1);
        assert_eq!(p.log.classes[0].pool_size, 3);
    }

    #[test]
    fn unknown_camera_logs_note() {
        let d = small_scene();
        let idx = CameraIndex::build(&d).unwrap();
        let mut host = d.images[0].clone();
        host.camera_id = "elsewhere".into();
        let p = plan_placements(&host, &[], &idx, &AugmentationConfig::uniform(1, 3, 0), 1);
        assert!(p.accepted.is_empty());
        assert!(p.log.note.as_deref().unwrap().contains("elsewhere"));
    }

    #[test]
    fn iou_mode_tolerates_small_overlap() {
        let cfg = OverlapMode::IouThreshold { tau: 0.2 };
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert!(!cfg.collides(&a, &BoundingBox::new(9.0, 0.0, 10.0, 10.0)));
        assert!(cfg.collides(&a, &BoundingBox::new(2.0, 0.0, 10.0, 10.0)));
        let mut bad = AugmentationConfig::uniform(1, 3, 0);
        bad.overlap_mode = OverlapMode::IouThreshold { tau: 0.0 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn new_ids_follow_max_existing() {
        let d = small_scene();
        let idx = CameraIndex::build(&d).unwrap();
        let out = augment_dataset(
            &d,
            &idx,
            &AugmentationConfig::uniform(1, 3, 0),
            None,
            Workers(1),
        )
        .unwrap();
        let pasted: Vec<_> = out
            .dataset
            .annotations
            .iter()
            .filter(|a| a.origin == Origin::Pasted)
            .collect();
        assert!(!pasted.is_empty());
        assert_eq!(pasted[0].instance_id, 4);
        let logged: Vec<_> = out
            .logs
            .iter()
            .flat_map(|l| &l.accepted)
            .map(|a| a.new_instance_id)
            .collect();
        let ids: Vec<_> = pasted.iter().map(|a| a.instance_id).collect();
        assert_eq!(logged, ids);
        out.dataset.validate().unwrap();
    }

    #[test]
    fn assemble_rejects_non_standard_multiplier() {
        let d = small_scene();
        let idx = CameraIndex::build(&d).unwrap();
        let base = AugmentationConfig::uniform(1, 0, 0);
        let bad: BTreeMap<_, _> = [(0, 5)].into();
        assert!(assemble(&d, &idx, &bad, &base, None, Workers(1)).is_err());
        let zero: BTreeMap<_, _> = [(0, 0)].into();
        assert_eq!(
            assemble(&d, &idx, &zero, &base, None, Workers(1))
                .unwrap()
                .dataset,
            d
        );
    }

    #[test]
    fn rng_streams_differ_per_image() {
        use rand::RngCore;
        assert_ne!(image_rng(1, 1).next_u64(), image_rng(1, 2).next_u64());
        assert_eq!(image_rng(9, 4).next_u64(), image_rng(9, 4).next_u64());
    }
}
