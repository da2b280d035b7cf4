use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use inplace_aug::annotations::{parse_coco, parse_yolo, write_coco, write_yolo, ClassId, Dataset};
use inplace_aug::augmentor::{assemble, augment_dataset, AugmentationConfig, Augmented, Pixels};
use inplace_aug::frames::{save_rgb, DirFrames, DirSink, FrameSource};
use inplace_aug::indexer::{
    extract_camera_id, tag_dataset, CameraIndex, LightingOverrides, TaggingOptions,
};
use inplace_aug::report::{count_table, emit, size_histogram};
use inplace_aug::roi::{blur_outside, compute_rois, rois_from_json, rois_to_json};
use inplace_aug::sampler::stratified_sample;
use inplace_aug::{parallel, Workers};
use regex::Regex;
use serde_json::json;

use crate::config::{DatasetConfig, DatasetFormat, RunConfig, VariantSource};
use crate::staging::Staging;

pub struct Loaded {
    pub dataset: Dataset,
    pub image_root: PathBuf,
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<Loaded> {
    let Some(ann) = &cfg.annotations else {
        bail!("no dataset annotations configured");
    };
    match cfg.format {
        DatasetFormat::Coco => {
            let text = std::fs::read_to_string(ann)
                .with_context(|| format!("reading {}", ann.display()))?;
            let dataset =
                parse_coco(&text).with_context(|| format!("parsing {}", ann.display()))?;
            let image_root = match &cfg.images {
                Some(p) => p.clone(),
                None => ann.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            Ok(Loaded {
                dataset,
                image_root,
            })
        }
        DatasetFormat::Yolo => {
            let Some(images) = &cfg.images else {
                bail!("YOLO datasets need an image folder");
            };
            let classes = match &cfg.classes {
                Some(c) => c.clone(),
                None => read_class_file(&ann.join("classes.txt"))?,
            };
            let dataset = parse_yolo(ann, images, &classes)?;
            Ok(Loaded {
                dataset,
                image_root: images.clone(),
            })
        }
    }
}

fn read_class_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading class names from {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn write_dataset(stage: &Staging, d: &Dataset, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::Coco => stage.write("annotations.json", write_coco(d)?),
        DatasetFormat::Yolo => Ok(write_yolo(d, &stage.path().join("labels"))?),
    }
}

fn workers(cfg: &RunConfig) -> Workers {
    Workers(cfg.workers.unwrap_or(0))
}

fn tagging_options(cfg: &RunConfig) -> Result<TaggingOptions> {
    let overrides = match &cfg.tagging.lighting_overrides {
        Some(p) => LightingOverrides::load(p)?,
        None => LightingOverrides::default(),
    };
    Ok(TaggingOptions {
        camera_pattern: Regex::new(&cfg.tagging.camera_pattern)?,
        lighting_threshold: cfg.tagging.lighting_threshold,
        overrides,
    })
}

fn tagged(cfg: &RunConfig) -> Result<Loaded> {
    let loaded = load_dataset(&cfg.dataset)?;
    let frames = DirFrames::new(&loaded.image_root);
    let dataset = tag_dataset(
        &loaded.dataset,
        &tagging_options(cfg)?,
        &frames,
        workers(cfg),
    )?;
    Ok(Loaded { dataset, ..loaded })
}

/// Camera ids from file names only, leaving lighting alone.
fn with_camera_ids(d: &Dataset, pattern: &str, strict: bool) -> Result<Dataset> {
    let re = Regex::new(pattern)?;
    let mut out = d.clone();
    for img in out.images.iter_mut().filter(|i| i.camera_id.is_empty()) {
        match extract_camera_id(img, &re) {
            Ok(id) => img.camera_id = id,
            Err(e) if strict => return Err(e.into()),
            Err(_) => return Ok(d.clone()),
        }
    }
    Ok(out)
}

fn class_ids(
    d: &Dataset,
    names: &BTreeMap<String, u32>,
    key: &str,
) -> Result<BTreeMap<ClassId, u32>> {
    names
        .iter()
        .map(|(name, &k)| match d.class_id(name) {
            Some(id) => Ok((id, k)),
            None => Err(inplace_aug::Error::Config(format!(
                "{key}: unknown class {name:?}; known classes are {:?}",
                d.class_names
            ))
            .into()),
        })
        .collect()
}

fn class_totals(d: &Dataset) -> serde_json::Value {
    d.class_names
        .iter()
        .zip(d.class_counts())
        .map(|(n, c)| (n.clone(), json!(c)))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

pub fn validate(cfg: &RunConfig, stage: &Staging) -> Result<()> {
    let Loaded {
        dataset,
        image_root,
    } = load_dataset(&cfg.dataset)?;
    dataset.validate()?;
    let frames = DirFrames::new(&image_root);
    let missing: Vec<String> = dataset
        .images
        .iter()
        .filter(|img| !frames.path_of(img).is_file())
        .map(|img| img.file_path.clone())
        .collect();
    if !missing.is_empty() {
        bail!(
            "{} image file(s) missing under {}, first: {}",
            missing.len(),
            image_root.display(),
            missing[0]
        );
    }
    log::info!(
        "dataset ok: {} images, {} annotations, {} classes",
        dataset.images.len(),
        dataset.annotations.len(),
        dataset.num_classes()
    );
    stage.write(
        "validation.json",
        to_json(&json!({
            "images": dataset.images.len(),
            "annotations": dataset.annotations.len(),
            "classes": class_totals(&dataset),
        })),
    )
}

pub fn index(cfg: &RunConfig, stage: &Staging) -> Result<()> {
    let Loaded { dataset, .. } = tagged(cfg)?;
    let idx = CameraIndex::build(&dataset)?;
    let cameras: serde_json::Map<String, serde_json::Value> = idx
        .summary()
        .into_iter()
        .map(|(cam, by_light)| {
            let inner: serde_json::Map<String, serde_json::Value> = by_light
                .into_iter()
                .map(|(light, by_class)| {
                    let classes: serde_json::Map<String, serde_json::Value> = by_class
                        .into_iter()
                        .map(|(c, n)| (dataset.class_names[c].clone(), json!(n)))
                        .collect();
                    (light, classes.into())
                })
                .collect();
            (cam, inner.into())
        })
        .collect();
    let totals: serde_json::Map<String, serde_json::Value> = dataset
        .class_names
        .iter()
        .zip(idx.class_totals(dataset.num_classes()))
        .map(|(n, c)| (n.clone(), json!(c)))
        .collect();
    log::info!(
        "indexed {} instances over {} cameras",
        idx.total(),
        cameras.len()
    );
    stage.write(
        "index.json",
        to_json(&json!({"total": idx.total(), "classes": totals, "cameras": cameras})),
    )?;
    stage.write("tagged.json", write_coco(&dataset)?)
}

fn augmentation_config(cfg: &RunConfig, d: &Dataset) -> Result<AugmentationConfig> {
    let a = &cfg.augment;
    let mut per_class: BTreeMap<ClassId, u32> =
        (0..d.num_classes()).map(|c| (c, a.multiplier)).collect();
    per_class.extend(class_ids(d, &a.multipliers, "augment.multipliers")?);
    let out = AugmentationConfig {
        per_class_multiplier: per_class,
        lighting_match: a.lighting_match,
        overlap_mode: a.overlap,
        exclude_same_frame: a.exclude_same_frame,
        seed: a.seed.expect("seeds are materialized before commands run"),
        class_order: a.class_order,
    };
    out.validate()?;
    Ok(out)
}

fn finish_augmented(
    cfg: &RunConfig,
    stage: &Staging,
    before: &Dataset,
    out: &Augmented,
) -> Result<()> {
    log::info!(
        "pasted {} objects into {} images",
        out.pasted_count(),
        out.dataset.images.len()
    );
    write_dataset(stage, &out.dataset, cfg.dataset.format)?;
    stage.write("placements.jsonl", out.logs_jsonl())?;
    stage.write(
        "summary.json",
        to_json(&json!({
            "images": out.dataset.images.len(),
            "pasted": out.pasted_count(),
            "before": class_totals(before),
            "after": class_totals(&out.dataset),
        })),
    )
}

fn run_placement(
    cfg: &RunConfig,
    stage: &Staging,
    place: impl FnOnce(
        &Dataset,
        &CameraIndex,
        &AugmentationConfig,
        Option<Pixels<'_>>,
    ) -> Result<Augmented>,
) -> Result<()> {
    let Loaded {
        dataset,
        image_root,
    } = tagged(cfg)?;
    let idx = CameraIndex::build(&dataset)?;
    let acfg = augmentation_config(cfg, &dataset)?;
    let frames = DirFrames::new(&image_root);
    let sink = DirSink::new(stage.path().join("images"));
    let pixels = cfg.augment.write_images.then_some(Pixels {
        frames: &frames,
        sink: &sink,
    });
    let out = place(&dataset, &idx, &acfg, pixels)?;
    finish_augmented(cfg, stage, &dataset, &out)
}

pub fn augment(cfg: &RunConfig, stage: &Staging) -> Result<()> {
    run_placement(cfg, stage, |d, idx, acfg, px| {
        Ok(augment_dataset(d, idx, acfg, px, workers(cfg))?)
    })
}

pub fn assemble_cmd(cfg: &RunConfig, stage: &Staging) -> Result<()> {
    if cfg.assemble.variant.is_empty() {
        bail!("assemble needs a per-class variant map (assemble.variant or --variant NAME=K)");
    }
    run_placement(cfg, stage, |d, idx, acfg, px| {
        let mapping = class_ids(d, &cfg.assemble.variant, "assemble.variant")?;
        Ok(assemble(d, idx, &mapping, acfg, px, workers(cfg))?)
    })
}

pub fn blur(cfg: &RunConfig, stage: &Staging) -> Result<()> {
    let Loaded {
        dataset,
        image_root,
    } = load_dataset(&cfg.dataset)?;
    let dataset = with_camera_ids(&dataset, &cfg.tagging.camera_pattern, true)?;
    let rois = match &cfg.roi.rois {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            rois_from_json(&text)?
        }
        None => compute_rois(&dataset, cfg.roi.mode, cfg.roi.dilation, workers(cfg))?,
    };
    stage.write("rois.json", rois_to_json(&rois))?;
    let frames = DirFrames::new(&image_root);
    let out_root = stage.path().join("images");
    parallel::try_map(workers(cfg), &dataset.images, |img| {
        let Some(roi) = rois.get(&img.camera_id) else {
            return Err(inplace_aug::Error::Index(format!(
                "no region for camera {} (image {})",
                img.camera_id, img.file_path
            )));
        };
        let blurred = blur_outside(&frames.load(img)?, roi, cfg.roi.sigma)?;
        save_rgb(&blurred, &out_root.join(&img.file_path))
    })?;
    log::info!(
        "blurred {} images over {} cameras",
        dataset.images.len(),
        rois.len()
    );
    write_dataset(stage, &dataset, cfg.dataset.format)
}

pub fn sample(cfg: &RunConfig, stage: &Staging) -> Result<()> {
    let Loaded { dataset, .. } = load_dataset(&cfg.dataset)?;
    let dataset = with_camera_ids(&dataset, &cfg.tagging.camera_pattern, false)?;
    let s = &cfg.sample;
    let seed = s.seed.expect("seeds are materialized before commands run");
    let out = stratified_sample(&dataset, s.fraction, seed, s.max_iters, workers(cfg))?;
    log::info!(
        "selected {} of {} images, profile distance {:.6}",
        out.image_ids.len(),
        dataset.images.len(),
        out.distance()
    );
    let names = |rows: Vec<inplace_aug::sampler::StratumRow>| -> Vec<serde_json::Value> {
        rows.into_iter()
            .map(|r| {
                json!({
                    "class": dataset.class_names[r.class_id],
                    "bucket": r.bucket.to_string(),
                    "proportion": r.proportion,
                })
            })
            .collect()
    };
    stage.write("manifest.txt", out.manifest())?;
    stage.write(
        "profile.json",
        to_json(&json!({
            "images": out.image_ids.len(),
            "distance": out.distance(),
            "trace": out.trace,
            "full": names(out.full_profile.rows()),
            "subset": names(out.subset_profile.rows()),
            "cameras": out.camera_counts,
        })),
    )?;
    write_dataset(stage, &out.dataset, cfg.dataset.format)
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "variant".into()
    } else {
        s
    }
}

pub fn report(cfg: &RunConfig, stage: &Staging, to_stdout: bool) -> Result<()> {
    let variants = &cfg.report.variants;
    if variants.is_empty() {
        bail!("report needs at least one variant (report.variants or --variant NAME=PATH)");
    }
    let mut seen = HashSet::new();
    let mut loaded = Vec::new();
    for v in variants {
        if !seen.insert(v.name.as_str()) {
            bail!("report variant {:?} listed twice", v.name);
        }
        let VariantSource {
            annotations,
            format,
            images,
            classes,
            ..
        } = v.clone();
        let d = load_dataset(&DatasetConfig {
            format,
            annotations: Some(annotations),
            images,
            classes,
        })
        .with_context(|| format!("loading variant {:?}", v.name))?;
        loaded.push((v.name.as_str(), d.dataset));
    }
    let refs: Vec<(&str, &Dataset)> = loaded.iter().map(|(n, d)| (*n, d)).collect();
    let fmt = cfg.report.format;
    let counts = emit(&count_table(&refs)?, fmt);
    stage.write(&format!("counts.{}", fmt.extension()), &counts)?;
    for (name, d) in &refs {
        stage.write(
            &format!("sizes/{}.{}", slug(name), fmt.extension()),
            emit(&size_histogram(d), fmt),
        )?;
    }
    if to_stdout {
        print!("{counts}");
    }
    Ok(())
}
