//! Raster types and binary PGM (P5) / PPM (P6) codecs.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image dimensions {width}x{height} do not match {len} samples")]
    Dimensions { width: usize, height: usize, len: usize },
}

/// Row-major 8-bit luminance raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width * height != data.len() || width == 0 || height == 0 {
            return Err(ImageError::Dimensions {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Pixelwise `255 - v`.
    pub fn negative(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| 255 - v).collect(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> GrayImage {
        let mut data = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + width]);
        }
        GrayImage { width, height, data }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0, 0, 0]);
    pub const WHITE: Rgb = Rgb([255, 255, 255]);

    /// `round(0.299 R + 0.587 G + 0.114 B)`, in integer arithmetic.
    pub fn luma(self) -> u8 {
        let [r, g, b] = self.0;
        ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
    }

    pub fn negative(self) -> Rgb {
        let [r, g, b] = self.0;
        Rgb([255 - r, 255 - g, 255 - b])
    }
}

/// Row-major RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        RgbImage {
            width,
            height,
            data: vec![color; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        self.data[y * self.width + x] = color;
    }

    pub fn map(&mut self, f: impl Fn(Rgb) -> Rgb) {
        for px in &mut self.data {
            *px = f(*px);
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|p| p.luma()).collect(),
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.data.len() * 3);
        for p in &self.data {
            out.extend_from_slice(&p.0);
        }
        out
    }
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, ImageError> {
    let truncated = || ImageError::Io(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated header"));
    if bytes.len() < 2 {
        return Err(truncated());
    }
    let magic = [bytes[0], bytes[1]];
    if magic != *b"P5" && magic != *b"P6" {
        return Err(ImageError::UnsupportedFormat(format!(
            "magic {:?}, expected P5 or P6",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(truncated()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::UnsupportedFormat("malformed header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::UnsupportedFormat("malformed header".into()))?;
    }
    // exactly one whitespace byte before the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(truncated());
    }
    let [width, height, maxval] = fields;
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        offset: pos + 1,
    })
}

/// Decodes P5 or P6 bytes into luminance. Colour pixels go through [`Rgb::luma`].
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let h = parse_header(bytes)?;
    if h.maxval != 255 {
        return Err(ImageError::UnsupportedFormat(format!("maxval {}", h.maxval)));
    }
    if h.width == 0 || h.height == 0 {
        return Err(ImageError::UnsupportedFormat("empty raster".into()));
    }
    let channels = if h.magic == *b"P6" { 3 } else { 1 };
    let need = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImageError::UnsupportedFormat("raster too large".into()))?;
    let body = &bytes[h.offset..];
    if body.len() < need {
        return Err(ImageError::Io(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("expected {need} raster bytes, found {}", body.len()),
        )));
    }
    let data = if channels == 1 {
        body[..need].to_vec()
    } else {
        body[..need]
            .chunks_exact(3)
            .map(|p| Rgb([p[0], p[1], p[2]]).luma())
            .collect()
    };
    GrayImage::new(h.width, h.height, data)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    decode_gray(&fs::read(path)?)
}
