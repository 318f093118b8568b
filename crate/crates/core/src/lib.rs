//! Structural classification of fancy QR codes.
//!
//! The pipeline turns a raster into a binary module grid
//! ([`preprocess`], [`extract`]), repairs the function patterns ([`fast`]),
//! derives a fixed feature vector ([`features`]) and scores it with a bagged
//! decision-tree ensemble ([`classifier`]). [`synth`] produces labelled
//! specimens with known ground truth.

pub mod classifier;
pub mod dataset;
pub mod extract;
pub mod fast;
pub mod features;
pub mod grid;
pub mod image;
pub mod pipeline;
pub mod preprocess;
pub mod protocol;
pub mod synth;

pub use classifier::{ForestModel, Label};
pub use extract::{extract, ExtractionResult, UNIDENTIFIABLE_MESSAGE};
pub use grid::BinaryGrid;
pub use image::{GrayImage, RgbImage};
pub use pipeline::{analyze, classify, Analysis, ClassifyResponse, PipelineOptions};
pub use protocol::{EccLevel, Version};
