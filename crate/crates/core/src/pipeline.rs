//! End-to-end analysis: preprocess, extract, recover, featurize, predict.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ForestModel;
use crate::extract::{extract_with, ExtractError, ExtractOptions, ExtractionResult};
use crate::fast::{fast, recovery_region, RecoveryReport};
use crate::features::{extract_features, FeatureVector, GridSource};
use crate::grid::BinaryGrid;
use crate::image::GrayImage;
use crate::preprocess::{preprocess, PreprocessReport};
use crate::protocol::EccLevel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("cannot identify fancy QR code")]
    Unidentifiable,
}

impl From<ExtractError> for PipelineError {
    fn from(_: ExtractError) -> Self {
        PipelineError::Unidentifiable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Run function-pattern recovery. When off the raw grid is passed
    /// through and all fix counts are zero.
    pub use_fast: bool,
    pub grid_source: GridSource,
    pub extract: ExtractOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            use_fast: true,
            grid_source: GridSource::Fast,
            extract: ExtractOptions::default(),
        }
    }
}

impl PipelineOptions {
    /// Options for the raw-grid experiment arm.
    pub fn raw() -> Self {
        PipelineOptions {
            use_fast: false,
            grid_source: GridSource::Raw,
            ..PipelineOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub pre: PreprocessReport,
    pub extraction: ExtractionResult,
    pub recovered: BinaryGrid,
    pub recovery: RecoveryReport,
    pub features: FeatureVector,
}

pub fn analyze(img: &GrayImage, opts: &PipelineOptions) -> Result<Analysis, PipelineError> {
    let (normalized, pre) = preprocess(img).map_err(|_| PipelineError::Unidentifiable)?;
    let extraction = extract_with(&normalized, &opts.extract)?;
    let (recovered, recovery) = if opts.use_fast {
        fast(&extraction.grid)
    } else {
        let total = recovery_region(&extraction.grid).iter().filter(|&&b| b).count();
        let report = RecoveryReport {
            total_function_modules: total,
            ..RecoveryReport::default()
        };
        (extraction.grid.clone(), report)
    };
    let features = extract_features(&extraction, &pre, &recovery, &recovered, opts.grid_source);
    Ok(Analysis {
        pre,
        extraction,
        recovered,
        recovery,
        features,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FastCounts {
    pub finder: usize,
    pub alignment: usize,
    pub separator: usize,
    pub timing: usize,
}

impl From<&RecoveryReport> for FastCounts {
    fn from(r: &RecoveryReport) -> Self {
        FastCounts {
            finder: r.finder_fixes,
            alignment: r.alignment_fixes,
            separator: r.separator_fixes,
            timing: r.timing_fixes,
        }
    }
}

/// Wire shape shared by the CLI and the HTTP service. Either every result
/// field is set and `error` is absent, or only `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ecc: Option<EccLevel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mask: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold_used: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inverted: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fast_report: Option<FastCounts>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub features: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl ClassifyResponse {
    pub fn failure(err: &PipelineError) -> Self {
        ClassifyResponse {
            label: None,
            score: None,
            version: None,
            ecc: None,
            mask: None,
            threshold_used: None,
            inverted: None,
            fast_report: None,
            features: None,
            error: Some(err.to_string()),
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    /// Compact JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("response serializes");
        s.push('\n');
        s
    }
}

/// Runs the full pipeline and scores the result. `decision_threshold`
/// overrides the model's stored threshold when given.
pub fn classify(
    img: &GrayImage,
    model: &ForestModel,
    opts: &PipelineOptions,
    decision_threshold: Option<f64>,
) -> ClassifyResponse {
    let analysis = match analyze(img, opts) {
        Ok(a) => a,
        Err(e) => return ClassifyResponse::failure(&e),
    };
    let mut pred = model.predict(&analysis.features);
    if let Some(t) = decision_threshold {
        pred.label = model.label_for(pred.score, t);
    }
    let ex = &analysis.extraction;
    ClassifyResponse {
        label: Some(pred.label.to_string()),
        score: Some(pred.score),
        version: Some(ex.grid.version().number()),
        ecc: Some(ex.format.ecc),
        mask: Some(ex.format.mask),
        threshold_used: Some(ex.threshold_used),
        inverted: Some(analysis.pre.inverted),
        fast_report: Some(FastCounts::from(&analysis.recovery)),
        features: Some(analysis.features.0.to_vec()),
        error: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_specimen, StyleSpec};

    #[test]
    fn noise_is_unidentifiable() {
        let mut state = 12345u32;
        let img = GrayImage::from_fn(200, 200, |_, _| {
            state = state.wrapping_mul(1_103_515_245).wrapping_add(12345);
            (state >> 16) as u8
        });
        assert_eq!(analyze(&img, &PipelineOptions::default()).unwrap_err(), PipelineError::Unidentifiable);
        let blank = GrayImage::filled(50, 50, 255);
        assert!(analyze(&blank, &PipelineOptions::default()).is_err());
    }

    #[test]
    fn error_response_has_only_error_key() {
        let json = ClassifyResponse::failure(&PipelineError::Unidentifiable).to_json();
        assert_eq!(json, "{\"error\":\"cannot identify fancy QR code\"}\n");
    }

    #[test]
    fn raw_options_skip_recovery() {
        let spec = make_specimen(b"https://example.org/x", EccLevel::H, None, &StyleSpec::preset("circle").unwrap()).unwrap();
        let img = spec.image.to_gray();
        let raw = analyze(&img, &PipelineOptions::raw()).unwrap();
        let fast = analyze(&img, &PipelineOptions::default()).unwrap();
        assert!(raw.recovery.is_clean());
        assert_eq!(raw.recovered, raw.extraction.grid);
        assert!(fast.recovery.total_fixes() > 0);
        assert_eq!(raw.recovery.total_function_modules, fast.recovery.total_function_modules);
        assert_eq!(fast.recovered, spec.truth_grid);
    }
}
