//! QR symbology constants and derived tables.
//!
//! Geometry, function-pattern layouts, alignment centers, format and
//! version-information words. Everything here is immutable; the format table
//! is computed once by BCH division and self-checked on first use.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("version {0} outside 1..=40")]
    InvalidVersion(u32),
    #[error("mask {0} outside 0..=7")]
    InvalidMask(u32),
    #[error("unknown ECC level {0:?}")]
    InvalidEcc(String),
}

/// Symbol version, 1 through 40.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Version(u8);

impl Version {
    pub const MIN: Version = Version(1);
    pub const MAX: Version = Version(40);

    pub fn new(number: u32) -> Result<Self, ProtocolError> {
        if (1..=40).contains(&number) {
            Ok(Version(number as u8))
        } else {
            Err(ProtocolError::InvalidVersion(number))
        }
    }

    pub fn number(self) -> u32 {
        u32::from(self.0)
    }

    /// Modules per side: `17 + 4 * version`.
    pub fn side(self) -> usize {
        side_modules(self)
    }

    pub fn all() -> impl Iterator<Item = Version> {
        (1..=40).map(Version)
    }
}

impl TryFrom<u32> for Version {
    type Error = ProtocolError;
    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Version::new(value)
    }
}

impl From<Version> for u32 {
    fn from(v: Version) -> u32 {
        v.number()
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn side_modules(version: Version) -> usize {
    17 + 4 * version.0 as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EccLevel {
    L,
    M,
    Q,
    H,
}

impl EccLevel {
    pub const ALL: [EccLevel; 4] = [EccLevel::L, EccLevel::M, EccLevel::Q, EccLevel::H];

    /// Two-bit code stored in the format word.
    pub fn indicator_bits(self) -> u16 {
        match self {
            EccLevel::L => 0b01,
            EccLevel::M => 0b00,
            EccLevel::Q => 0b11,
            EccLevel::H => 0b10,
        }
    }

    pub fn from_indicator_bits(bits: u16) -> EccLevel {
        match bits & 0b11 {
            0b01 => EccLevel::L,
            0b00 => EccLevel::M,
            0b11 => EccLevel::Q,
            _ => EccLevel::H,
        }
    }

    /// 0 = L, 1 = M, 2 = Q, 3 = H. Increasing recovery capacity.
    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EccLevel::L => "L",
            EccLevel::M => "M",
            EccLevel::Q => "Q",
            EccLevel::H => "H",
        }
    }
}

impl fmt::Display for EccLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EccLevel {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L" => Ok(EccLevel::L),
            "M" => Ok(EccLevel::M),
            "Q" => Ok(EccLevel::Q),
            "H" => Ok(EccLevel::H),
            _ => Err(ProtocolError::InvalidEcc(s.to_string())),
        }
    }
}

/// Generator polynomial of the (15,5) BCH code protecting format information:
/// x^10 + x^8 + x^5 + x^4 + x^2 + x + 1.
pub const FORMAT_GENERATOR: u32 = 0b101_0011_0111;
/// XOR mask applied to every format word.
pub const FORMAT_MASK: u16 = 0b101_0100_0001_0010;
/// Generator polynomial of the (18,6) BCH code protecting version information.
pub const VERSION_GENERATOR: u32 = 0b1_1111_0010_0101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FormatSequence {
    pub bits: u16,
    pub ecc: EccLevel,
    pub mask: u8,
}

/// Remainder of `data * x^(gen_degree)` divided by `generator` over GF(2).
fn bch_remainder(data: u32, generator: u32) -> u32 {
    let degree = 31 - generator.leading_zeros();
    let mut rem = data << degree;
    for shift in (0..=31 - degree).rev() {
        if rem & (1 << (shift + degree)) != 0 {
            rem ^= generator << shift;
        }
    }
    rem
}

pub fn format_word(ecc: EccLevel, mask: u8) -> u16 {
    let data = (u32::from(ecc.indicator_bits()) << 3) | u32::from(mask & 7);
    let word = (data << 10) | bch_remainder(data, FORMAT_GENERATOR);
    (word as u16) ^ FORMAT_MASK
}

/// 18-bit version information word, defined for versions 7 and up.
pub fn version_word(version: Version) -> Option<u32> {
    if version.number() < 7 {
        return None;
    }
    let data = version.number();
    Some((data << 12) | bch_remainder(data, VERSION_GENERATOR))
}

fn hamming(a: u16, b: u16) -> u32 {
    (a ^ b).count_ones()
}

/// All 32 format sequences, ECC-major (L, M, Q, H) and mask-minor.
pub fn format_sequences() -> &'static [FormatSequence; 32] {
    static TABLE: OnceLock<[FormatSequence; 32]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [FormatSequence {
            bits: 0,
            ecc: EccLevel::L,
            mask: 0,
        }; 32];
        for (e, ecc) in EccLevel::ALL.iter().enumerate() {
            for mask in 0..8u8 {
                table[e * 8 + mask as usize] = FormatSequence {
                    bits: format_word(*ecc, mask),
                    ecc: *ecc,
                    mask,
                };
            }
        }
        let min_distance = table
            .iter()
            .enumerate()
            .flat_map(|(i, a)| table[i + 1..].iter().map(move |b| hamming(a.bits, b.bits)))
            .min()
            .unwrap_or(0);
        assert!(min_distance >= 7, "format table self-check failed: distance {min_distance}");
        table
    })
}

/// Exact table lookup of a 15-bit format word.
pub fn lookup_format(bits: u16) -> Option<FormatSequence> {
    format_sequences().iter().copied().find(|s| s.bits == bits)
}

/// Nearest table entry within `max_errors` bit flips. Ties cannot occur for
/// `max_errors <= 3` because the code has minimum distance 7.
pub fn nearest_format(bits: u16, max_errors: u32) -> Option<FormatSequence> {
    format_sequences()
        .iter()
        .copied()
        .map(|s| (hamming(s.bits, bits), s))
        .filter(|(d, _)| *d <= max_errors)
        .min_by_key(|(d, _)| *d)
        .map(|(_, s)| s)
}

const ALIGNMENT_TABLE: [&[u8]; 40] = [
    &[],
    &[6, 18],
    &[6, 22],
    &[6, 26],
    &[6, 30],
    &[6, 34],
    &[6, 22, 38],
    &[6, 24, 42],
    &[6, 26, 46],
    &[6, 28, 50],
    &[6, 30, 54],
    &[6, 32, 58],
    &[6, 34, 62],
    &[6, 26, 46, 66],
    &[6, 26, 48, 70],
    &[6, 26, 50, 74],
    &[6, 30, 54, 78],
    &[6, 30, 56, 82],
    &[6, 30, 58, 86],
    &[6, 34, 62, 90],
    &[6, 28, 50, 72, 94],
    &[6, 26, 50, 74, 98],
    &[6, 30, 54, 78, 102],
    &[6, 28, 54, 80, 106],
    &[6, 32, 58, 84, 110],
    &[6, 30, 58, 86, 114],
    &[6, 34, 62, 90, 118],
    &[6, 26, 50, 74, 98, 122],
    &[6, 30, 54, 78, 102, 126],
    &[6, 26, 52, 78, 104, 130],
    &[6, 30, 56, 82, 108, 134],
    &[6, 34, 60, 86, 112, 138],
    &[6, 30, 58, 86, 114, 142],
    &[6, 34, 62, 90, 118, 146],
    &[6, 30, 54, 78, 102, 126, 150],
    &[6, 24, 50, 76, 102, 128, 154],
    &[6, 28, 54, 80, 106, 132, 158],
    &[6, 32, 58, 84, 110, 136, 162],
    &[6, 26, 54, 82, 110, 138, 166],
    &[6, 30, 58, 86, 114, 142, 170],
];

/// Row/column coordinates from the published alignment table.
pub fn alignment_coordinates(version: Version) -> &'static [u8] {
    ALIGNMENT_TABLE[version.0 as usize - 1]
}

/// Top-left corners of the three finder patterns: top-left, top-right, bottom-left.
pub fn finder_origins(side: usize) -> [(usize, usize); 3] {
    [(0, 0), (0, side - 7), (side - 7, 0)]
}

fn overlaps_finder_zone(side: usize, row: usize, col: usize) -> bool {
    // 8x8 finder + separator zones; the pattern spans center +/- 2.
    let (r0, r1, c0, c1) = (row - 2, row + 2, col - 2, col + 2);
    let zones = [(0, 7, 0, 7), (0, 7, side - 8, side - 1), (side - 8, side - 1, 0, 7)];
    zones
        .iter()
        .any(|&(zr0, zr1, zc0, zc1)| r0 <= zr1 && zr0 <= r1 && c0 <= zc1 && zc0 <= c1)
}

/// Centers `(row, col)` of every placed alignment pattern, sorted row-major.
/// Combinations whose 5x5 area would overlap a finder or separator are skipped.
pub fn alignment_centers(version: Version) -> Vec<(usize, usize)> {
    let coords = alignment_coordinates(version);
    let side = version.side();
    let mut centers = Vec::new();
    for &r in coords {
        for &c in coords {
            let (r, c) = (r as usize, c as usize);
            if !overlaps_finder_zone(side, r, c) {
                centers.push((r, c));
            }
        }
    }
    centers
}

/// Value of the standard 7x7 finder at local `(dr, dc)`.
pub fn finder_module(dr: usize, dc: usize) -> bool {
    let ring = dr.min(dc).min(6 - dr).min(6 - dc);
    ring != 1
}

/// Value of the standard 5x5 alignment pattern at offset from its center.
pub fn alignment_module(dr: i32, dc: i32) -> bool {
    dr.abs().max(dc.abs()) != 1
}

/// Cells of the L-shaped separator strips (8 + 7 cells per finder).
pub fn separator_cells(side: usize) -> Vec<(usize, usize)> {
    let mut cells = Vec::with_capacity(45);
    // top-left: row 7 cols 0..=7, col 7 rows 0..=6
    for c in 0..8 {
        cells.push((7, c));
    }
    for r in 0..7 {
        cells.push((r, 7));
    }
    // top-right: row 7 cols side-8..side, col side-8 rows 0..=6
    for c in side - 8..side {
        cells.push((7, c));
    }
    for r in 0..7 {
        cells.push((r, side - 8));
    }
    // bottom-left: row side-8 cols 0..=7, col 7 rows side-7..side
    for c in 0..8 {
        cells.push((side - 8, c));
    }
    for r in side - 7..side {
        cells.push((r, 7));
    }
    cells
}

/// Timing-track cells `(row, col, expected)` on row 6 and column 6, between
/// the separators.
pub fn timing_cells(side: usize) -> Vec<(usize, usize, bool)> {
    let mut cells = Vec::with_capacity(2 * (side - 16));
    for i in 8..=side - 9 {
        cells.push((6, i, i % 2 == 0));
    }
    for i in 8..=side - 9 {
        cells.push((i, 6, i % 2 == 0));
    }
    cells
}

/// Position of the always-dark module.
pub fn dark_module(version: Version) -> (usize, usize) {
    (4 * version.number() as usize + 9, 8)
}

/// Boolean matrix (row-major) marking every function or reserved module:
/// finders, separators, timing, alignment, format areas, version areas and
/// the dark module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionMask {
    side: usize,
    cells: Vec<bool>,
}

impl FunctionMask {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn is_function(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.side + col]
    }

    fn mark(&mut self, row: usize, col: usize) {
        self.cells[row * self.side + col] = true;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }
}

pub fn function_pattern_mask(version: Version) -> FunctionMask {
    let side = version.side();
    let mut mask = FunctionMask {
        side,
        cells: vec![false; side * side],
    };
    // finders + separators
    for &(r0, c0) in &[(0, 0), (0, side - 8), (side - 8, 0)] {
        for r in r0..r0 + 8 {
            for c in c0..c0 + 8 {
                mask.mark(r, c);
            }
        }
    }
    for i in 0..side {
        mask.mark(6, i);
        mask.mark(i, 6);
    }
    for (r, c) in alignment_centers(version) {
        for rr in r - 2..=r + 2 {
            for cc in c - 2..=c + 2 {
                mask.mark(rr, cc);
            }
        }
    }
    // format areas
    for i in 0..9 {
        mask.mark(8, i);
        mask.mark(i, 8);
    }
    for i in 0..8 {
        mask.mark(8, side - 1 - i);
        mask.mark(side - 1 - i, 8);
    }
    let (dr, dc) = dark_module(version);
    mask.mark(dr, dc);
    if version.number() >= 7 {
        for i in 0..6 {
            for j in 0..3 {
                mask.mark(i, side - 11 + j);
                mask.mark(side - 11 + j, i);
            }
        }
    }
    mask
}

/// `(row, col)` of the 15 format bits, most significant first.
pub type FormatPositions = [(usize, usize); 15];
/// `(row, col)` of the 18 version bits, least significant first.
pub type VersionPositions = [(usize, usize); 18];

/// Format-word bit positions, most significant bit first.
///
/// Copy 1 wraps the top-left finder: row 8 cols 0-5, 7, 8, then col 8 rows
/// 7, 5-0. Copy 2 runs up column 8 from the bottom (rows side-1 .. side-7)
/// and continues along row 8 on the right (cols side-8 .. side-1).
pub fn format_positions(side: usize) -> (FormatPositions, FormatPositions) {
    let mut first = [(0, 0); 15];
    let mut k = 0;
    for c in [0, 1, 2, 3, 4, 5, 7, 8] {
        first[k] = (8, c);
        k += 1;
    }
    for r in [7, 5, 4, 3, 2, 1, 0] {
        first[k] = (r, 8);
        k += 1;
    }
    let mut second = [(0, 0); 15];
    for (k, slot) in second.iter_mut().enumerate().take(7) {
        *slot = (side - 1 - k, 8);
    }
    for k in 0..8 {
        second[7 + k] = (8, side - 8 + k);
    }
    (first, second)
}

/// Version-information positions `(row, col)` for both copies; bit `i`
/// (LSB = 0) of the 18-bit word lives at index `i`.
pub fn version_positions(side: usize) -> (VersionPositions, VersionPositions) {
    let mut bottom_left = [(0, 0); 18];
    let mut top_right = [(0, 0); 18];
    for i in 0..18 {
        let a = side - 11 + i % 3;
        let b = i / 3;
        bottom_left[i] = (a, b);
        top_right[i] = (b, a);
    }
    (bottom_left, top_right)
}
