#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use inplace_aug::annotations::{write_coco, Dataset};
use inplace_aug::frames::{save_rgb, FrameSource};
use inplace_aug::synth::synthetic_frames;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_inplace-aug"));
    c.env_remove("INPLACE_AUG_WORKERS")
        .arg("--log-level")
        .arg("warn");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Writes `annotations.json` with PNG frames beside it; returns the JSON path.
pub fn write_fixture(dir: &Path, d: &Dataset, pixel_seed: Option<u64>) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    if let Some(seed) = pixel_seed {
        let frames = synthetic_frames(d, seed);
        for img in &d.images {
            save_rgb(&frames.load(img).unwrap(), &dir.join(&img.file_path)).unwrap();
        }
    }
    let path = dir.join("annotations.json");
    std::fs::write(&path, write_coco(d).unwrap()).unwrap();
    path
}

/// Every file under `root` keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p
                    .strip_prefix(base)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
