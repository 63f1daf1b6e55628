//! Clothing-texture cloning and character curation toolkit.
//!
//! Stages:
//! * [`pose`] gates detections and classifies person views;
//! * [`curate`] clusters persons over a precomputed distance matrix and
//!   samples train/test characters per cluster;
//! * [`cloner`] transfers garment textures onto UV maps via [`homography`]
//!   registration and [`cell`] expansion;
//! * [`crop`] applies disturbance cropping to rendered persons;
//! * [`pipeline`] wires the stages together through files.

pub mod cell;
pub mod cloner;
pub mod crop;
pub mod curate;
pub mod data;
pub mod features;
pub mod homography;
pub mod imaging;
pub mod pipeline;
pub mod pose;
pub mod probe;
pub mod raster;
pub mod seed;
pub mod template;

pub use image::RgbImage;
pub use raster::{BBox, Mask, Point2, Rect};
