//! Declarative run configuration, read from JSON and patched by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use inplace_aug::augmentor::{ClassOrder, OverlapMode};
use inplace_aug::indexer::{DEFAULT_CAMERA_PATTERN, DEFAULT_LIGHTING_THRESHOLD};
use inplace_aug::report::Format;
use inplace_aug::roi::{RoiMode, DEFAULT_SIGMA};
use inplace_aug::sampler::{DEFAULT_FRACTION, DEFAULT_MAX_ITERS};
use serde::{Deserialize, Serialize};

pub const WORKERS_ENV: &str = "INPLACE_AUG_WORKERS";
pub const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    #[default]
    Coco,
    Yolo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub format: DatasetFormat,
    /// COCO JSON file, or the YOLO label directory.
    pub annotations: Option<PathBuf>,
    /// Root that image file paths are relative to. COCO defaults to the
    /// folder holding the JSON file.
    pub images: Option<PathBuf>,
    /// YOLO class names; read from `classes.txt` beside the labels if absent.
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggingConfig {
    pub camera_pattern: String,
    pub lighting_threshold: f64,
    pub lighting_overrides: Option<PathBuf>,
}

impl Default for TaggingConfig {
    fn default() -> Self {
        Self {
            camera_pattern: DEFAULT_CAMERA_PATTERN.into(),
            lighting_threshold: DEFAULT_LIGHTING_THRESHOLD,
            lighting_overrides: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    /// Cap applied to every class not listed in `multipliers`.
    pub multiplier: u32,
    /// Per-class caps keyed by class name.
    pub multipliers: BTreeMap<String, u32>,
    pub lighting_match: bool,
    pub overlap: OverlapMode,
    pub exclude_same_frame: bool,
    pub class_order: ClassOrder,
    pub seed: Option<u64>,
    pub write_images: bool,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self {
            multiplier: 3,
            multipliers: BTreeMap::new(),
            lighting_match: true,
            overlap: OverlapMode::default(),
            exclude_same_frame: true,
            class_order: ClassOrder::default(),
            seed: None,
            write_images: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleSection {
    /// Class name to multiplier; unlisted classes keep their originals only.
    pub variant: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiSection {
    pub mode: RoiMode,
    pub sigma: f64,
    pub dilation: u32,
    /// Reuse regions from an earlier `rois.json` instead of deriving them.
    pub rois: Option<PathBuf>,
}

impl Default for RoiSection {
    fn default() -> Self {
        Self {
            mode: RoiMode::default(),
            sigma: DEFAULT_SIGMA,
            dilation: 0,
            rois: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub fraction: f64,
    pub seed: Option<u64>,
    pub max_iters: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            fraction: DEFAULT_FRACTION,
            seed: None,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSource {
    pub name: String,
    pub annotations: PathBuf,
    #[serde(default)]
    pub format: DatasetFormat,
    #[serde(default)]
    pub images: Option<PathBuf>,
    #[serde(default)]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Columns of the count table, left to right.
    pub variants: Vec<VariantSource>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub tagging: TaggingConfig,
    pub augment: AugmentSection,
    pub assemble: AssembleSection,
    pub roi: RoiSection,
    pub sample: SampleSection,
    pub report: ReportSection,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fills unset seeds with fresh random values so the echo file pins them.
    pub fn materialize_seeds(&mut self) {
        self.augment.seed.get_or_insert_with(rand::random);
        self.sample.seed.get_or_insert_with(rand::random);
    }

    /// Worker count from the config, else the environment, else automatic.
    pub fn resolve_workers(&mut self) -> Result<()> {
        if self.workers.is_none() {
            if let Ok(v) = std::env::var(WORKERS_ENV) {
                let n = v
                    .trim()
                    .parse()
                    .with_context(|| format!("{WORKERS_ENV}={v:?} is not a worker count"))?;
                self.workers = Some(n);
            }
        }
        self.workers.get_or_insert(0);
        Ok(())
    }

    /// Makes every path absolute so the echo reruns from any directory.
    pub fn absolutize(&mut self) -> Result<()> {
        fn abs(p: &mut Option<PathBuf>) -> Result<()> {
            if let Some(path) = p {
                *path = std::path::absolute(&*path)
                    .with_context(|| format!("resolving {}", path.display()))?;
            }
            Ok(())
        }
        abs(&mut self.dataset.annotations)?;
        abs(&mut self.dataset.images)?;
        abs(&mut self.tagging.lighting_overrides)?;
        abs(&mut self.roi.rois)?;
        abs(&mut self.output)?;
        for v in &mut self.report.variants {
            let mut a = Some(v.annotations.clone());
            abs(&mut a)?;
            v.annotations = a.expect("set above");
            abs(&mut v.images)?;
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path> {
        match &self.output {
            Some(p) => Ok(p),
            None => bail!("no output directory; pass --output or set \"output\" in the config"),
        }
    }

    pub fn check_dataset_paths(&self) -> Result<()> {
        let Some(ann) = &self.dataset.annotations else {
            bail!("no dataset annotations; pass --annotations or set dataset.annotations");
        };
        must_exist(ann, "dataset.annotations")?;
        if let Some(images) = &self.dataset.images {
            must_exist(images, "dataset.images")?;
        } else if self.dataset.format == DatasetFormat::Yolo {
            bail!("YOLO datasets need dataset.images (or --images)");
        }
        if let Some(p) = &self.tagging.lighting_overrides {
            must_exist(p, "tagging.lighting_overrides")?;
        }
        if let Some(p) = &self.roi.rois {
            must_exist(p, "roi.rois")?;
        }
        regex::Regex::new(&self.tagging.camera_pattern)
            .with_context(|| format!("tagging.camera_pattern {:?}", self.tagging.camera_pattern))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

pub fn must_exist(path: &Path, key: &str) -> Result<()> {
    if !path.exists() {
        bail!("{key}: {} does not exist", path.display());
    }
    Ok(())
}
