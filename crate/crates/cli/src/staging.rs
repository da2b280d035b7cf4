//! Outputs are written into a sibling temp folder and renamed into place
//! only once the whole command has succeeded.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tempfile::TempDir;

use crate::config::RESOLVED_CONFIG;

pub struct Staging {
    dir: TempDir,
    target: PathBuf,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        if target.exists() && !is_previous_output(target) {
            bail!(
                "refusing to replace {}: it exists and is not an output folder of this tool",
                target.display()
            );
        }
        let parent = parent_of(target);
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".inplace-aug-")
            .tempdir_in(&parent)
            .with_context(|| format!("creating a staging folder in {}", parent.display()))?;
        Ok(Self {
            dir,
            target: target.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path().join(name);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn commit(self) -> Result<PathBuf> {
        let parent = parent_of(&self.target);
        // Move any previous output aside first so the swap is two renames.
        let graveyard = if self.target.exists() {
            let g = tempfile::Builder::new()
                .prefix(".inplace-aug-old-")
                .tempdir_in(&parent)?;
            fs::rename(&self.target, g.path().join("previous"))
                .with_context(|| format!("moving aside {}", self.target.display()))?;
            Some(g)
        } else {
            None
        };
        let staged = self.dir.keep();
        if let Err(e) = fs::rename(&staged, &self.target) {
            if let Some(g) = &graveyard {
                let _ = fs::rename(g.path().join("previous"), &self.target);
            }
            let _ = fs::remove_dir_all(&staged);
            return Err(e).with_context(|| format!("moving output into {}", self.target.display()));
        }
        drop(graveyard);
        Ok(self.target)
    }
}

fn parent_of(p: &Path) -> PathBuf {
    match p.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn is_previous_output(p: &Path) -> bool {
    p.is_dir() && p.join(RESOLVED_CONFIG).is_file()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_creates_and_replaces() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("out");
        let s = Staging::new(&target).unwrap();
        s.write(RESOLVED_CONFIG, "{}").unwrap();
        s.write("a/b.txt", "one").unwrap();
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(target.join("a/b.txt")).unwrap(), "one");

        let s = Staging::new(&target).unwrap();
        s.write(RESOLVED_CONFIG, "{}").unwrap();
        s.commit().unwrap();
        assert!(!target.join("a").exists());
        // nothing left behind next to the output
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 1);
    }

    #[test]
    fn foreign_folder_is_left_alone() {
        let root = tempfile::tempdir().unwrap();
        fs::write(root.path().join("keep.txt"), "x").unwrap();
        assert!(Staging::new(root.path()).is_err());
    }

    #[test]
    fn dropped_staging_leaves_no_trace() {
        let root = tempfile::tempdir().unwrap();
        let s = Staging::new(&root.path().join("out")).unwrap();
        s.write("x", "y").unwrap();
        drop(s);
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }
}
