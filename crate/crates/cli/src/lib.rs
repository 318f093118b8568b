//! Command-line workflow and HTTP inference endpoint for the fancy-QR
//! classifier.

pub mod cli;
pub mod service;

use alfa_core::classifier::ForestModel;
use alfa_core::image::{decode_gray, ImageError};
use alfa_core::pipeline::{classify, ClassifyResponse, PipelineOptions};

/// Decodes PGM/PPM bytes and runs the full pipeline. Both the CLI and the
/// service go through here.
pub fn classify_bytes(
    bytes: &[u8],
    model: &ForestModel,
    opts: &PipelineOptions,
    decision_threshold: Option<f64>,
) -> Result<ClassifyResponse, ImageError> {
    let img = decode_gray(bytes)?;
    Ok(classify(&img, model, opts, decision_threshold))
}
