//! Binary-grid recovery from a preprocessed raster.
//!
//! Versions 1 to 40 are tried in order. For each, the raster is cut into
//! `side_modules(v)` x `side_modules(v)` blocks and every block whose mean
//! luminance is below 189 becomes a dark module. When more than 65% of the
//! resulting grid is light, the modules are probably drawn small and the grid
//! is resampled with the looser 238 threshold. The first version whose format
//! information matches a standard format word is accepted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::BinaryGrid;
use crate::image::GrayImage;
use crate::protocol::{self, EccLevel, Version};

pub const STANDARD_THRESHOLD: u8 = 189;
pub const SMALL_MODULE_THRESHOLD: u8 = 238;
/// Light fraction above which the small-module threshold is used.
pub const SMALL_MODULE_LIGHT_FRACTION: f64 = 0.65;

pub const UNIDENTIFIABLE_MESSAGE: &str = "cannot identify fancy QR code";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("module size below one pixel for {side} modules on {pixels}px")]
    ImageTooSmall { side: usize, pixels: usize },
    #[error("no format copy matches a standard format word")]
    NoMatch,
    #[error("cannot identify fancy QR code")]
    Unidentifiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatInfo {
    pub ecc: EccLevel,
    pub mask: u8,
    pub copy1_valid: bool,
    pub copy2_valid: bool,
    /// Both copies valid but decoding to different (ecc, mask); copy 1 wins.
    pub copies_disagree: bool,
}

impl FormatInfo {
    pub fn valid_copies(&self) -> u8 {
        self.copy1_valid as u8 + self.copy2_valid as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub grid: BinaryGrid,
    pub format: FormatInfo,
    pub threshold_used: u8,
    pub module_size: f64,
    pub light_fraction_first_pass: f64,
}

/// How format words are matched against the 32-entry table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormatMatch {
    #[default]
    Exact,
    /// Accept the nearest word within this many bit errors (at most 3).
    Tolerant(u32),
}

/// How the per-version module pitch is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModuleSizing {
    /// `min(width, height) / side_modules(v)`.
    #[default]
    Analytic,
    /// Rasterise a reference black-white symbol of the same version and size
    /// and measure its finder width. Debug path for comparing against the
    /// analytic pitch.
    ReferenceRender,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtractOptions {
    pub format_match: FormatMatch,
    pub module_sizing: ModuleSizing,
}

/// Summed-area table for O(1) block sums.
pub struct Integral {
    width: usize,
    height: usize,
    sums: Vec<u64>,
}

impl Integral {
    pub fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let mut sums = vec![0u64; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += img.get(x, y) as u64;
                sums[(y + 1) * (w + 1) + x + 1] = sums[y * (w + 1) + x + 1] + row;
            }
        }
        Integral {
            width: w,
            height: h,
            sums,
        }
    }

    /// Sum over `[x0, x1) x [y0, y1)`.
    fn block_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u64 {
        let w = self.width + 1;
        self.sums[y1 * w + x1] + self.sums[y0 * w + x0] - self.sums[y0 * w + x1] - self.sums[y1 * w + x0]
    }
}

/// Pixel span of module `i` starting at `origin` with pitch `pitch`, clamped.
fn span(origin: f64, pitch: f64, i: usize, limit: usize) -> (usize, usize) {
    let a = (origin + i as f64 * pitch).round().max(0.0) as usize;
    let b = (origin + (i + 1) as f64 * pitch).round().max(0.0) as usize;
    let a = a.min(limit.saturating_sub(1));
    let b = b.clamp(a + 1, limit);
    (a, b)
}

fn sample_with(
    integral: &Integral,
    version: Version,
    threshold: u8,
    pitch: f64,
) -> BinaryGrid {
    let side = version.side();
    let extent = integral.width.min(integral.height) as f64;
    let ox = (integral.width as f64 - extent) / 2.0;
    let oy = (integral.height as f64 - extent) / 2.0;
    let cols: Vec<(usize, usize)> = (0..side).map(|c| span(ox, pitch, c, integral.width)).collect();
    let mut grid = BinaryGrid::new(version);
    for r in 0..side {
        let (y0, y1) = span(oy, pitch, r, integral.height);
        for (c, &(x0, x1)) in cols.iter().enumerate() {
            let sum = integral.block_sum(x0, y0, x1, y1);
            let count = ((x1 - x0) * (y1 - y0)) as u64;
            // mean < threshold, without rounding
            grid.set(r, c, sum < threshold as u64 * count);
        }
    }
    grid
}

fn analytic_pitch(integral: &Integral, version: Version) -> Result<f64, ExtractError> {
    let pixels = integral.width.min(integral.height);
    let side = version.side();
    let pitch = pixels as f64 / side as f64;
    if pitch < 1.0 {
        return Err(ExtractError::ImageTooSmall { side, pixels });
    }
    Ok(pitch)
}

/// Labels each module dark iff its mean luminance is strictly below `threshold`.
pub fn sample_grid(img: &GrayImage, version: Version, threshold: u8) -> Result<BinaryGrid, ExtractError> {
    let integral = Integral::new(img);
    let pitch = analytic_pitch(&integral, version)?;
    Ok(sample_with(&integral, version, threshold, pitch))
}

/// Both 15-bit format copies, most significant bit first.
pub fn read_format_bits(grid: &BinaryGrid) -> (u16, u16) {
    let (first, second) = protocol::format_positions(grid.side());
    (grid.read_word(&first) as u16, grid.read_word(&second) as u16)
}

fn match_word(word: u16, how: FormatMatch) -> Option<protocol::FormatSequence> {
    match how {
        FormatMatch::Exact => protocol::lookup_format(word),
        FormatMatch::Tolerant(n) => protocol::nearest_format(word, n.min(3)),
    }
}

pub fn verify_format_with(copy1: u16, copy2: u16, how: FormatMatch) -> Result<FormatInfo, ExtractError> {
    let a = match_word(copy1, how);
    let b = match_word(copy2, how);
    let chosen = a.or(b).ok_or(ExtractError::NoMatch)?;
    let copies_disagree = matches!((a, b), (Some(x), Some(y)) if x.bits != y.bits);
    Ok(FormatInfo {
        ecc: chosen.ecc,
        mask: chosen.mask,
        copy1_valid: a.is_some(),
        copy2_valid: b.is_some(),
        copies_disagree,
    })
}

/// Exact-membership check of both copies against the format table.
pub fn verify_format(copy1: u16, copy2: u16) -> Result<FormatInfo, ExtractError> {
    verify_format_with(copy1, copy2, FormatMatch::Exact)
}

/// Module pitch measured from a rasterised reference symbol of `version`
/// drawn over `pixels` x `pixels`.
fn reference_pitch(version: Version, pixels: usize) -> Result<f64, ExtractError> {
    let side = version.side();
    if pixels < side {
        return Err(ExtractError::ImageTooSmall { side, pixels });
    }
    // The top-left finder row 0 is dark for modules 0..7 and light at 7.
    let module_of = |px: usize| px * side / pixels;
    let row0_dark = |px: usize| module_of(px) < 7;
    let run = (0..pixels).take_while(|&px| row0_dark(px)).count();
    Ok(run as f64 / 7.0)
}

fn try_version(
    integral: &Integral,
    version: Version,
    opts: &ExtractOptions,
) -> Result<ExtractionResult, ExtractError> {
    let pitch = match opts.module_sizing {
        ModuleSizing::Analytic => analytic_pitch(integral, version)?,
        ModuleSizing::ReferenceRender => {
            reference_pitch(version, integral.width.min(integral.height))?
        }
    };
    let first = sample_with(integral, version, STANDARD_THRESHOLD, pitch);
    let light = first.light_fraction();
    let (grid, threshold_used) = if light > SMALL_MODULE_LIGHT_FRACTION {
        (
            sample_with(integral, version, SMALL_MODULE_THRESHOLD, pitch),
            SMALL_MODULE_THRESHOLD,
        )
    } else {
        (first, STANDARD_THRESHOLD)
    };
    let (c1, c2) = read_format_bits(&grid);
    let format = verify_format_with(c1, c2, opts.format_match)?;
    Ok(ExtractionResult {
        grid,
        format,
        threshold_used,
        module_size: pitch,
        light_fraction_first_pass: light,
    })
}

pub fn extract_with(img: &GrayImage, opts: &ExtractOptions) -> Result<ExtractionResult, ExtractError> {
    let integral = Integral::new(img);
    for version in Version::all() {
        match try_version(&integral, version, opts) {
            Ok(res) => return Ok(res),
            // pitch only shrinks with version
            Err(ExtractError::ImageTooSmall { .. }) => break,
            Err(_) => continue,
        }
    }
    Err(ExtractError::Unidentifiable)
}

/// Scans versions 1..=40 and returns the first whose format bits verify.
pub fn extract(img: &GrayImage) -> Result<ExtractionResult, ExtractError> {
    extract_with(img, &ExtractOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{format_positions, format_word, Version};

    fn v(n: u32) -> Version {
        Version::new(n).unwrap()
    }

    #[test]
    fn uniform_images() {
        for n in [1, 5, 12] {
            let dark = GrayImage::filled(300, 300, 0);
            assert_eq!(sample_grid(&dark, v(n), 189).unwrap().dark_count(), v(n).side().pow(2));
            let light = GrayImage::filled(300, 300, 255);
            assert_eq!(sample_grid(&light, v(n), 189).unwrap().dark_count(), 0);
        }
    }

    #[test]
    fn threshold_is_strict() {
        let img = GrayImage::filled(42, 42, 189);
        assert_eq!(sample_grid(&img, v(1), 189).unwrap().dark_count(), 0);
        assert_eq!(sample_grid(&img, v(1), 190).unwrap().dark_count(), 441);
        // mixed block whose exact mean is 189
        let img = GrayImage::from_fn(42, 42, |_, y| if y % 2 == 0 { 188 } else { 190 });
        assert_eq!(sample_grid(&img, v(1), 189).unwrap().dark_count(), 0);
    }

    #[test]
    fn too_small() {
        let img = GrayImage::filled(20, 20, 0);
        assert!(matches!(
            sample_grid(&img, v(1), 189),
            Err(ExtractError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn higher_threshold_only_adds_dark_cells() {
        let img = GrayImage::from_fn(123, 123, |x, y| ((x * 37 + y * 91) % 256) as u8);
        for n in [1, 3, 5] {
            let lo = sample_grid(&img, v(n), 189).unwrap();
            let hi = sample_grid(&img, v(n), 238).unwrap();
            for (a, b) in lo.cells().iter().zip(hi.cells()) {
                assert!(*a <= *b);
            }
        }
    }

    #[test]
    fn format_copy_positions_read_back() {
        let mut g = BinaryGrid::new(v(2));
        let word = format_word(EccLevel::Q, 6);
        let (first, second) = format_positions(g.side());
        for (i, &(r, c)) in first.iter().enumerate() {
            g.set(r, c, (word >> (14 - i)) & 1 == 1);
        }
        for (i, &(r, c)) in second.iter().enumerate() {
            g.set(r, c, (word >> (14 - i)) & 1 == 1);
        }
        assert_eq!(read_format_bits(&g), (word, word));
        // zero the top-left surround: copy 1 collapses, copy 2 survives
        for &(r, c) in &first {
            g.set(r, c, false);
        }
        assert_eq!(read_format_bits(&g), (0, word));
        let info = verify_format(0, word).unwrap();
        assert!(!info.copy1_valid && info.copy2_valid);
    }

    #[test]
    fn verify_examples() {
        let l3 = format_word(EccLevel::L, 3);
        assert_eq!(
            verify_format(l3, l3).unwrap(),
            FormatInfo {
                ecc: EccLevel::L,
                mask: 3,
                copy1_valid: true,
                copy2_valid: true,
                copies_disagree: false
            }
        );
        let h5 = format_word(EccLevel::H, 5);
        let info = verify_format(0, h5).unwrap();
        assert_eq!((info.ecc, info.mask, info.copy1_valid, info.copy2_valid), (EccLevel::H, 5, false, true));
        // neither 0 nor 0x7fff is one of the 32 words
        assert!(protocol::format_sequences().iter().all(|s| s.bits != 0 && s.bits != 0x7fff));
        assert_eq!(verify_format(0, 0x7fff), Err(ExtractError::NoMatch));
    }

    #[test]
    fn disagreement_prefers_copy1() {
        let a = format_word(EccLevel::M, 1);
        let b = format_word(EccLevel::H, 4);
        let info = verify_format(a, b).unwrap();
        assert_eq!((info.ecc, info.mask), (EccLevel::M, 1));
        assert!(info.copies_disagree);
    }

    #[test]
    fn tolerant_matching_is_opt_in() {
        let w = format_word(EccLevel::H, 2) ^ 0b11;
        assert!(verify_format(w, w).is_err());
        let info = verify_format_with(w, w, FormatMatch::Tolerant(3)).unwrap();
        assert_eq!((info.ecc, info.mask), (EccLevel::H, 2));
    }

    #[test]
    fn gray_noise_is_unidentifiable() {
        let img = GrayImage::filled(400, 400, 128);
        assert_eq!(extract(&img), Err(ExtractError::Unidentifiable));
        assert_eq!(ExtractError::Unidentifiable.to_string(), UNIDENTIFIABLE_MESSAGE);
    }

    #[test]
    fn reference_pitch_tracks_analytic() {
        for n in [1, 4, 10, 25] {
            let ver = v(n);
            let pixels = ver.side() * 6 + 3;
            let measured = reference_pitch(ver, pixels).unwrap();
            let analytic = pixels as f64 / ver.side() as f64;
            assert!((measured - analytic).abs() < 1.0 / 7.0 + 1e-9, "{n}: {measured} vs {analytic}");
        }
    }
}
