//! Loading and saving frame pixels. Everything is handled as 8-bit RGB.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use image::RgbImage;

use crate::annotations::{ImageId, ImageRecord};
use crate::error::{Error, Result};

/// Anything that can produce the pixels of a dataset image.
pub trait FrameSource: Sync {
    fn load(&self, record: &ImageRecord) -> Result<RgbImage>;
}

/// Frames stored on disk, addressed by `ImageRecord::file_path` under a root.
#[derive(Debug, Clone)]
pub struct DirFrames {
    root: PathBuf,
}

impl DirFrames {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_of(&self, record: &ImageRecord) -> PathBuf {
        self.root.join(&record.file_path)
    }
}

impl FrameSource for DirFrames {
    fn load(&self, record: &ImageRecord) -> Result<RgbImage> {
        load_rgb(&self.path_of(record))
    }
}

/// In-memory frames keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct MemoryFrames {
    pub frames: HashMap<ImageId, RgbImage>,
}

impl FrameSource for MemoryFrames {
    fn load(&self, record: &ImageRecord) -> Result<RgbImage> {
        self.frames.get(&record.image_id).cloned().ok_or_else(|| {
            Error::io(
                &record.file_path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "frame not in memory"),
            )
        })
    }
}

/// Destination for rendered frames.
pub trait FrameSink: Sync {
    fn store(&self, record: &ImageRecord, img: RgbImage) -> Result<()>;
}

/// Writes frames under a root directory at `ImageRecord::file_path`.
#[derive(Debug, Clone)]
pub struct DirSink {
    root: PathBuf,
}

impl DirSink {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl FrameSink for DirSink {
    fn store(&self, record: &ImageRecord, img: RgbImage) -> Result<()> {
        save_rgb(&img, &self.root.join(&record.file_path))
    }
}

/// Collects frames in memory, keyed by image id.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub frames: Mutex<HashMap<ImageId, RgbImage>>,
}

impl MemorySink {
    pub fn into_frames(self) -> HashMap<ImageId, RgbImage> {
        self.frames.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

impl FrameSink for MemorySink {
    fn store(&self, record: &ImageRecord, img: RgbImage) -> Result<()> {
        self.frames
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(record.image_id, img);
        Ok(())
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(img.into_rgb8())
}

/// Saves with the encoder implied by the extension, creating parent folders.
pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    img.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::Lighting;

    #[test]
    fn png_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::from_fn(9, 5, |x, y| image::Rgb([x as u8 * 20, y as u8 * 40, 7]));
        let path = dir.path().join("sub/a.png");
        save_rgb(&img, &path).unwrap();
        let rec = ImageRecord {
            image_id: 1,
            file_path: "sub/a.png".into(),
            width: 9,
            height: 5,
            camera_id: String::new(),
            frame_index: 0,
            lighting: Lighting::Untagged,
        };
        assert_eq!(DirFrames::new(dir.path()).load(&rec).unwrap(), img);
        assert!(MemoryFrames::default().load(&rec).is_err());
    }
}
