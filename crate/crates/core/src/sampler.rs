//! Small-subset selection that keeps the class x size-bucket composition of
//! the full dataset.
//!
//! Whole images are selected. A seeded random subset of the requested size is
//! refined by steepest-descent single swaps (one selected image out, one
//! unselected image in) on the L1 distance between stratum profiles.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::{ClassId, Dataset, ImageId};
use crate::error::{Error, Result};
use crate::indexer::{size_bucket, SizeBucket};
use crate::parallel::{self, Workers};

pub const DEFAULT_FRACTION: f64 = 0.085;
pub const DEFAULT_MAX_ITERS: usize = 1000;

/// Share of objects in each (class, size bucket) stratum.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StratumProfile {
    pub proportions: BTreeMap<(ClassId, SizeBucket), f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub class_id: ClassId,
    pub bucket: SizeBucket,
    pub proportion: f64,
}

impl StratumProfile {
    pub fn get(&self, class: ClassId, bucket: SizeBucket) -> f64 {
        self.proportions
            .get(&(class, bucket))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn l1_distance(&self, other: &StratumProfile) -> f64 {
        let keys: HashSet<_> = self
            .proportions
            .keys()
            .chain(other.proportions.keys())
            .collect();
        keys.into_iter()
            .map(|&(c, b)| (self.get(c, b) - other.get(c, b)).abs())
            .sum()
    }

    pub fn rows(&self) -> Vec<StratumRow> {
        self.proportions
            .iter()
            .map(|(&(class_id, bucket), &proportion)| StratumRow {
                class_id,
                bucket,
                proportion,
            })
            .collect()
    }
}

pub fn profile(d: &Dataset) -> Result<StratumProfile> {
    if d.annotations.is_empty() {
        return Err(Error::Sampling(
            "dataset has no annotations to profile".into(),
        ));
    }
    let mut counts: BTreeMap<(ClassId, SizeBucket), u64> = BTreeMap::new();
    for ann in &d.annotations {
        *counts
            .entry((ann.class_id, size_bucket(&ann.bbox)))
            .or_default() += 1;
    }
    let total = d.annotations.len() as f64;
    Ok(StratumProfile {
        proportions: counts
            .into_iter()
            .map(|(k, v)| (k, v as f64 / total))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub dataset: Dataset,
    /// Selected image ids in dataset order.
    pub image_ids: Vec<ImageId>,
    /// Objective after initialization and after every accepted swap.
    pub trace: Vec<f64>,
    pub full_profile: StratumProfile,
    pub subset_profile: StratumProfile,
    /// Images per camera in the subset; empty when cameras are untagged.
    pub camera_counts: BTreeMap<String, usize>,
}

impl SampleOutcome {
    pub fn distance(&self) -> f64 {
        *self.trace.last().expect("trace has an initial entry")
    }

    /// Newline-delimited image ids.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for id in &self.image_ids {
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }
}

/// Number of images a fraction selects.
pub fn subset_size(fraction: f64, num_images: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Sampling(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    if fraction * (num_images as f64) < 1.0 {
        return Err(Error::Sampling(format!(
            "fraction {fraction} of {num_images} images selects less than one image"
        )));
    }
    Ok((fraction * num_images as f64).round() as usize)
}

/// Dense per-image stratum counts plus the target proportions.
pub(crate) struct Strata {
    pub per_image: Vec<Vec<u32>>,
    pub target: Vec<f64>,
}

impl Strata {
    pub fn new(d: &Dataset) -> Self {
        let width = d.num_classes() * SizeBucket::ALL.len();
        let pos: BTreeMap<ImageId, usize> = d
            .images
            .iter()
            .enumerate()
            .map(|(i, img)| (img.image_id, i))
            .collect();
        let mut per_image = vec![vec![0u32; width]; d.images.len()];
        let mut target = vec![0.0f64; width];
        for ann in &d.annotations {
            let s = ann.class_id * SizeBucket::ALL.len() + size_bucket(&ann.bbox).index();
            if let Some(&i) = pos.get(&ann.image_id) {
                per_image[i][s] += 1;
            }
            target[s] += 1.0;
        }
        let total: f64 = target.iter().sum();
        if total > 0.0 {
            target.iter_mut().for_each(|t| *t /= total);
        }
        Strata { per_image, target }
    }

    /// L1 distance between the profile of `sums` and the target. An empty
    /// subset scores the maximum, 2.
    pub fn distance(&self, sums: &[i64]) -> f64 {
        let total: i64 = sums.iter().sum();
        if total <= 0 {
            return 2.0;
        }
        let t = total as f64;
        sums.iter()
            .zip(&self.target)
            .map(|(&c, &p)| (c as f64 / t - p).abs())
            .sum()
    }

    pub fn sums_of(&self, images: &[usize]) -> Vec<i64> {
        let mut sums = vec![0i64; self.target.len()];
        for &i in images {
            for (s, &c) in sums.iter_mut().zip(&self.per_image[i]) {
                *s += c as i64;
            }
        }
        sums
    }
}

#[derive(Debug, Clone, Copy)]
struct Swap {
    distance: f64,
    out_slot: usize,
    in_slot: usize,
}

fn best_swap(
    strata: &Strata,
    selected: &[usize],
    unselected: &[usize],
    sums: &[i64],
    workers: Workers,
) -> Option<Swap> {
    let slots: Vec<usize> = (0..selected.len()).collect();
    let per_slot = parallel::map(workers, &slots, |&a| {
        let out_counts = &strata.per_image[selected[a]];
        let mut trial = sums.to_vec();
        let mut best: Option<Swap> = None;
        for (b, &img) in unselected.iter().enumerate() {
            for ((t, &s), (&o, &i)) in trial
                .iter_mut()
                .zip(sums)
                .zip(out_counts.iter().zip(&strata.per_image[img]))
            {
                *t = s - o as i64 + i as i64;
            }
            let d = strata.distance(&trial);
            if best.is_none_or(|bs| d < bs.distance) {
                best = Some(Swap {
                    distance: d,
                    out_slot: a,
                    in_slot: b,
                });
            }
        }
        best
    });
    // first minimum in slot order keeps the choice independent of threading
    per_slot
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<Swap>, s| match acc {
            Some(a) if a.distance <= s.distance => Some(a),
            _ => Some(s),
        })
}

/// Selects `round(fraction * N)` whole images whose stratum profile tracks
/// the full dataset. Deterministic for a fixed seed.
pub fn stratified_sample(
    d: &Dataset,
    fraction: f64,
    seed: u64,
    max_iters: usize,
    workers: Workers,
) -> Result<SampleOutcome> {
    let n = subset_size(fraction, d.images.len())?;
    let full_profile = profile(d)?;
    let strata = Strata::new(d);

    let mut order: Vec<usize> = (0..d.images.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut selected = order[..n].to_vec();
    let mut unselected = order[n..].to_vec();
    let mut sums = strata.sums_of(&selected);
    let mut trace = vec![strata.distance(&sums)];

    for _ in 0..max_iters {
        if unselected.is_empty() {
            break;
        }
        let current = *trace.last().expect("non-empty trace");
        let Some(swap) = best_swap(&strata, &selected, &unselected, &sums, workers) else {
            break;
        };
        if swap.distance >= current {
            break;
        }
        let (out_img, in_img) = (selected[swap.out_slot], unselected[swap.in_slot]);
        for ((s, &o), &i) in sums
            .iter_mut()
            .zip(&strata.per_image[out_img])
            .zip(&strata.per_image[in_img])
        {
            *s += i as i64 - o as i64;
        }
        selected[swap.out_slot] = in_img;
        unselected[swap.in_slot] = out_img;
        trace.push(strata.distance(&sums));
    }

    selected.sort_unstable();
    let image_ids: Vec<ImageId> = selected.iter().map(|&i| d.images[i].image_id).collect();
    let keep: HashSet<ImageId> = image_ids.iter().copied().collect();
    let dataset = d.subset(&keep);
    let subset_profile = if dataset.annotations.is_empty() {
        StratumProfile::default()
    } else {
        profile(&dataset)?
    };
    let mut camera_counts = BTreeMap::new();
    for img in dataset.images.iter().filter(|i| !i.camera_id.is_empty()) {
        *camera_counts.entry(img.camera_id.clone()).or_insert(0) += 1;
    }
    Ok(SampleOutcome {
        dataset,
        image_ids,
        trace,
        full_profile,
        subset_profile,
        camera_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{Annotation, BoundingBox, ImageRecord, Lighting, Origin};

    fn dataset(objects_per_image: &[Vec<(ClassId, f64)>]) -> Dataset {
        let mut d = Dataset::new(vec!["Car".into(), "Bus".into()]);
        let mut next = 1;
        for (i, objs) in objects_per_image.iter().enumerate() {
            let id = i as u64 + 1;
            d.images.push(ImageRecord {
                image_id: id,
                file_path: format!("c_{id}.png"),
                width: 500,
                height: 500,
                camera_id: "c".into(),
                frame_index: id as i64,
                lighting: Lighting::Untagged,
            });
            for &(class, side) in objs {
                d.annotations.push(Annotation {
                    image_id: id,
                    class_id: class,
                    bbox: BoundingBox::new(0.0, 0.0, side, side),
                    instance_id: next,
                    origin: Origin::Original,
                });
                next += 1;
            }
        }
        d
    }

    #[test]
    fn direct_ratio_profile() {
        let d = dataset(&[vec![(0, 10.0), (0, 10.0), (1, 200.0), (1, 200.0)]]);
        let p = profile(&d).unwrap();
        assert_eq!(p.proportions.len(), 2);
        assert_eq!(p.get(0, SizeBucket::Small), 0.5);
        assert_eq!(p.get(1, SizeBucket::Large), 0.5);
    }

    #[test]
    fn single_object_profile() {
        let p = profile(&dataset(&[vec![(1, 40.0)]])).unwrap();
        assert_eq!(p.get(1, SizeBucket::Medium), 1.0);
    }

    #[test]
    fn empty_dataset_profile_errors() {
        assert!(profile(&dataset(&[vec![]])).is_err());
    }

    #[test]
    fn full_fraction_selects_everything() {
        let d = dataset(&[
            vec![(0, 10.0)],
            vec![(1, 50.0)],
            vec![(0, 200.0), (1, 10.0)],
        ]);
        let s = stratified_sample(&d, 1.0, 3, 100, Workers(1)).unwrap();
        assert_eq!(s.image_ids, vec![1, 2, 3]);
        assert_eq!(s.distance(), 0.0);
        assert_eq!(s.dataset, d);
    }

    #[test]
    fn homogeneous_dataset_reaches_zero() {
        let d = dataset(&vec![vec![(0, 10.0), (1, 100.0)]; 40]);
        let s = stratified_sample(&d, 0.25, 11, 10, Workers(1)).unwrap();
        assert_eq!(s.image_ids.len(), 10);
        assert!(s.distance().abs() < 1e-12);
    }

    #[test]
    fn infeasible_sizes() {
        let d = dataset(&vec![vec![(0, 10.0)]; 5]);
        assert!(stratified_sample(&d, 0.1, 0, 10, Workers(1)).is_err());
        assert!(stratified_sample(&d, 0.0, 0, 10, Workers(1)).is_err());
        assert!(stratified_sample(&d, 1.5, 0, 10, Workers(1)).is_err());
        assert_eq!(subset_size(0.085, 1000).unwrap(), 85);
        assert_eq!(subset_size(0.085, 5287).unwrap(), 449);
    }

    #[test]
    fn hill_climb_improves_a_skewed_start() {
        // half the images carry only cars, half only buses
        let mut imgs = vec![vec![(0, 10.0)]; 30];
        imgs.extend(vec![vec![(1, 10.0)]; 30]);
        let d = dataset(&imgs);
        let s = stratified_sample(&d, 0.2, 5, 50, Workers(2)).unwrap();
        assert!(s.trace.windows(2).all(|w| w[1] < w[0]));
        assert!(s.distance() < 1e-12, "{:?}", s.trace);
        assert_eq!(s.manifest().lines().count(), 12);
    }

    #[test]
    fn deterministic_for_seed() {
        let imgs: Vec<_> = (0..50)
            .map(|i| vec![((i % 2) as usize, 10.0 + (i * 7 % 90) as f64)])
            .collect();
        let d = dataset(&imgs);
        let a = stratified_sample(&d, 0.2, 9, 20, Workers(1)).unwrap();
        let b = stratified_sample(&d, 0.2, 9, 20, Workers(4)).unwrap();
        assert_eq!(a.image_ids, b.image_ids);
        assert_eq!(a.trace, b.trace);
    }
}
