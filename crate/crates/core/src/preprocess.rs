//! Grayscale normalisation ahead of grid sampling: Otsu-based inversion check
//! and white-background trimming.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::GrayImage;

/// Inversion triggers when the white fraction is strictly below this.
pub const INVERSION_WHITE_RATIO: f64 = 0.51;
/// Border rows/columns whose pixels are all at or above this are background.
pub const BACKGROUND_LUMA: f64 = 250.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("histogram has a single occupied bin at {value}")]
    DegenerateImage { value: u8 },
    #[error("image is entirely background")]
    EmptyAfterCrop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub inverted: bool,
    pub otsu_threshold: u8,
    /// White fraction of the input raster, before any inversion.
    pub white_ratio: f64,
    /// White fraction of the final cropped raster (same threshold rule).
    pub white_ratio_cropped: f64,
    pub crop_box: CropBox,
}

/// Otsu threshold `t`: pixels `>= t` form the light class. Maximises
/// between-class variance over `t` in 1..=255, ties going to the lower `t`.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8, PreprocessError> {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let occupied: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    if occupied.len() == 1 {
        return Err(PreprocessError::DegenerateImage {
            value: occupied[0] as u8,
        });
    }
    let total = img.pixels().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &n)| i as f64 * n as f64).sum();
    let mut best_t = 1u8;
    let mut best_var = -1.0f64;
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    for t in 1..256usize {
        w0 += hist[t - 1] as f64;
        sum0 += (t - 1) as f64 * hist[t - 1] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    Ok(best_t)
}

/// Otsu threshold with the degenerate case folded in.
fn threshold_or_bin(img: &GrayImage) -> u8 {
    match otsu_threshold(img) {
        Ok(t) => t,
        Err(PreprocessError::DegenerateImage { value }) => value,
        Err(_) => unreachable!(),
    }
}

pub fn white_ratio(img: &GrayImage, threshold: u8) -> f64 {
    let white = img.pixels().iter().filter(|&&v| v >= threshold).count();
    white as f64 / img.pixels().len() as f64
}

/// Inverts the raster when fewer than 51% of its Otsu-binarised pixels are
/// white. Returns the (possibly inverted) image, the flag, the threshold and
/// the pre-inversion white ratio.
pub fn inversion_check(img: &GrayImage) -> (GrayImage, bool, u8, f64) {
    let t = threshold_or_bin(img);
    let ratio = white_ratio(img, t);
    if ratio < INVERSION_WHITE_RATIO {
        (img.negative(), true, t, ratio)
    } else {
        (img.clone(), false, t, ratio)
    }
}

/// Inversion check alone, reported with a full-image crop box.
pub fn inversion_normalize(img: &GrayImage) -> (GrayImage, PreprocessReport) {
    let (out, inverted, t, ratio) = inversion_check(img);
    let report = PreprocessReport {
        inverted,
        otsu_threshold: t,
        white_ratio: ratio,
        white_ratio_cropped: white_ratio(&out, threshold_or_bin(&out)),
        crop_box: CropBox {
            x: 0,
            y: 0,
            width: img.width(),
            height: img.height(),
        },
    };
    (out, report)
}

fn row_is_background(img: &GrayImage, y: usize, x0: usize, x1: usize) -> bool {
    img.row(y)[x0..x1].iter().all(|&v| v as f64 >= BACKGROUND_LUMA)
}

fn col_is_background(img: &GrayImage, x: usize, y0: usize, y1: usize) -> bool {
    (y0..y1).all(|y| img.get(x, y) as f64 >= BACKGROUND_LUMA)
}

/// Strips border rows and columns in which every pixel is at least 250,
/// independently on each side.
pub fn crop_white_background(img: &GrayImage) -> Result<(GrayImage, CropBox), PreprocessError> {
    let (w, h) = (img.width(), img.height());
    let (mut top, mut bottom) = (0usize, h);
    while top < bottom && row_is_background(img, top, 0, w) {
        top += 1;
    }
    if top == bottom {
        return Err(PreprocessError::EmptyAfterCrop);
    }
    while row_is_background(img, bottom - 1, 0, w) {
        bottom -= 1;
    }
    let (mut left, mut right) = (0usize, w);
    while left < right && col_is_background(img, left, top, bottom) {
        left += 1;
    }
    if left == right {
        return Err(PreprocessError::EmptyAfterCrop);
    }
    while col_is_background(img, right - 1, top, bottom) {
        right -= 1;
    }
    let bx = CropBox {
        x: left,
        y: top,
        width: right - left,
        height: bottom - top,
    };
    Ok((img.crop(bx.x, bx.y, bx.width, bx.height), bx))
}

/// Full preprocessing: inversion check on the raw raster, then background
/// trim. The inversion check runs first because a dark quiet zone is never
/// trimmed, and a trimmed light-on-dark raster would keep its dark border.
pub fn preprocess(img: &GrayImage) -> Result<(GrayImage, PreprocessReport), PreprocessError> {
    let (normalized, inverted, t, ratio) = inversion_check(img);
    let (cropped, crop_box) = crop_white_background(&normalized)?;
    let cropped_ratio = white_ratio(&cropped, threshold_or_bin(&cropped));
    Ok((
        cropped,
        PreprocessReport {
            inverted,
            otsu_threshold: t,
            white_ratio: ratio,
            white_ratio_cropped: cropped_ratio,
            crop_box,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn between_class_variance(pixels: &[u8], t: usize) -> f64 {
        let (a, b): (Vec<f64>, Vec<f64>) = (
            pixels.iter().filter(|&&v| (v as usize) < t).map(|&v| v as f64).collect(),
            pixels.iter().filter(|&&v| (v as usize) >= t).map(|&v| v as f64).collect(),
        );
        if a.is_empty() || b.is_empty() {
            return -1.0;
        }
        let n = pixels.len() as f64;
        let (wa, wb) = (a.len() as f64 / n, b.len() as f64 / n);
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        wa * wb * (ma - mb).powi(2)
    }

    // Exhaustive oracle: scan every candidate and keep the first maximum.
    fn otsu_oracle(pixels: &[u8]) -> u8 {
        let mut best = (1usize, -1.0f64);
        for t in 1..256 {
            let v = between_class_variance(pixels, t);
            if v > best.1 + 1e-9 * best.1.abs() {
                best = (t, v);
            }
        }
        best.0 as u8
    }

    #[test]
    fn bimodal_half_and_half() {
        let img = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 0 } else { 255 });
        let t = otsu_threshold(&img).unwrap();
        assert!(t > 0);
        assert_eq!(t, 1);
        assert_eq!(white_ratio(&img, t), 0.5);
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = GrayImage::filled(30, 30, 128);
        assert_eq!(
            otsu_threshold(&img),
            Err(PreprocessError::DegenerateImage { value: 128 })
        );
        let (out, report) = inversion_normalize(&img);
        assert_eq!(report.otsu_threshold, 128);
        assert_eq!(report.white_ratio, 1.0);
        assert!(!report.inverted);
        assert_eq!(out, img);
    }

    #[test]
    fn skewed_bimodal_threshold_between_modes() {
        let img = GrayImage::from_fn(10, 10, |x, y| if y * 10 + x < 10 { 20 } else { 230 });
        let t = otsu_threshold(&img).unwrap();
        assert!(t > 20 && t <= 230);
        assert_eq!(t, otsu_oracle(img.pixels()));
        // frozen from the oracle scan
        assert_eq!(t, 21);
    }

    #[test]
    fn exactly_51_percent_white_is_not_inverted() {
        let img = GrayImage::from_fn(100, 1, |x, _| if x < 51 { 255 } else { 0 });
        let (_, report) = inversion_normalize(&img);
        assert_eq!(report.white_ratio, 0.51);
        assert!(!report.inverted);
        let img = GrayImage::from_fn(100, 1, |x, _| if x < 50 { 255 } else { 0 });
        assert!(inversion_normalize(&img).1.inverted);
    }

    #[test]
    fn negative_is_restored() {
        let img = GrayImage::from_fn(40, 40, |x, y| if (x / 5 + y / 7) % 4 == 0 { 0 } else { 255 });
        let (same, r) = inversion_normalize(&img);
        assert!(!r.inverted);
        assert_eq!(same, img);
        let (restored, r) = inversion_normalize(&img.negative());
        assert!(r.inverted);
        assert_eq!(restored, img);
    }

    #[test]
    fn crop_examples() {
        let img = GrayImage::from_fn(30, 30, |x, y| {
            if (4..26).contains(&x) && (5..25).contains(&y) && (x + y) % 3 == 0 {
                0
            } else {
                255
            }
        });
        let (out, bx) = crop_white_background(&img).unwrap();
        assert_eq!(bx.x, 4);
        assert_eq!(bx.y, 5);
        assert!(bx.width <= 22 && bx.height <= 20);
        assert!(out.pixels().iter().any(|&v| v < 250));

        let dark = GrayImage::filled(25, 25, 0);
        let (out, bx) = crop_white_background(&dark).unwrap();
        assert_eq!(out, dark);
        assert_eq!(
            bx,
            CropBox {
                x: 0,
                y: 0,
                width: 25,
                height: 25
            }
        );

        let white = GrayImage::filled(25, 25, 255);
        assert_eq!(crop_white_background(&white), Err(PreprocessError::EmptyAfterCrop));
    }

    #[test]
    fn near_half_ratio_inverts_twice() {
        // 49 of 100 light: the negative has 51 light... under a shifted threshold
        let pixels: Vec<u8> = (0..100).map(|i| if i < 49 { 200 } else { 50 }).collect();
        let img = GrayImage::new(100, 1, pixels).unwrap();
        let (once, r1) = inversion_normalize(&img);
        assert!(r1.inverted);
        let (_, r2) = inversion_normalize(&once);
        assert!((r2.white_ratio - 0.51).abs() < 1e-12);
        assert!(!r2.inverted);
        let pixels: Vec<u8> = (0..1000).map(|i| if i < 495 { 200 } else { 50 }).collect();
        let img = GrayImage::new(1000, 1, pixels).unwrap();
        let (once, r1) = inversion_normalize(&img);
        let (twice, r2) = inversion_normalize(&once);
        assert!(r1.inverted && r2.inverted);
        assert_eq!(twice, img);
    }

    proptest! {
        #[test]
        fn otsu_matches_exhaustive_oracle(pixels in prop::collection::vec(any::<u8>(), 2..200)) {
            let n = pixels.len();
            let img = GrayImage::new(n, 1, pixels.clone()).unwrap();
            match otsu_threshold(&img) {
                Ok(t) => {
                    let got = between_class_variance(&pixels, t as usize);
                    let want = between_class_variance(&pixels, otsu_oracle(&pixels) as usize);
                    prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
                }
                Err(PreprocessError::DegenerateImage { value }) => {
                    prop_assert!(pixels.iter().all(|&v| v == value));
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn inversion_is_idempotent(pixels in prop::collection::vec(any::<u8>(), 4..300)) {
            let n = pixels.len();
            let img = GrayImage::new(n, 1, pixels).unwrap();
            let (once, report) = inversion_normalize(&img);
            // inside (0.49, 0.51) the negative is itself below 0.51
            prop_assume!(report.white_ratio <= 0.49 || report.white_ratio >= INVERSION_WHITE_RATIO);
            let (twice, _) = inversion_normalize(&once);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn negative_pairs_agree(pixels in prop::collection::vec(any::<u8>(), 4..300)) {
            let n = pixels.len();
            let img = GrayImage::new(n, 1, pixels).unwrap();
            let neg = img.negative();
            let (a, ra) = inversion_normalize(&img);
            let (b, rb) = inversion_normalize(&neg);
            if ra.inverted != rb.inverted {
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn crop_never_removes_content(
            w in 3usize..20, h in 3usize..20,
            seed in any::<u64>(),
        ) {
            let img = GrayImage::from_fn(w, h, |x, y| {
                let k = (x as u64 * 31 + y as u64 * 17) ^ seed;
                if k.is_multiple_of(11) { (k % 250) as u8 } else { 255 }
            });
            match crop_white_background(&img) {
                Ok((_, bx)) => {
                    for y in 0..h {
                        for x in 0..w {
                            let inside = x >= bx.x && x < bx.x + bx.width && y >= bx.y && y < bx.y + bx.height;
                            if !inside {
                                prop_assert!(img.get(x, y) >= 250);
                            }
                        }
                    }
                }
                Err(_) => prop_assert!(img.pixels().iter().all(|&v| v >= 250)),
            }
        }
    }
}
