//! In-place copy-paste augmentation for object detection datasets recorded
//! by stationary cameras.
//!
//! Objects are lifted from other frames of the same camera and pasted back at
//! their original pixel coordinates wherever they do not collide with existing
//! boxes. Supporting modules cover dataset I/O, camera/lighting indexing,
//! region-of-interest blurring, stratified subset selection and count reports.

pub mod annotations;
pub mod augmentor;
pub mod error;
pub mod frames;
pub mod geometry;
pub mod indexer;
pub mod parallel;
pub mod report;
pub mod roi;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use parallel::Workers;
