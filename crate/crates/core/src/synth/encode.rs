//! Byte-mode QR encoder for versions 1-10.

use thiserror::Error;

use crate::features::penalty_scores;
use crate::grid::BinaryGrid;
use crate::protocol::{
    self, alignment_centers, dark_module, finder_origins, format_positions, format_word,
    function_pattern_mask, version_positions, version_word, EccLevel, FunctionMask, Version,
};

/// Highest version the encoder carries block tables for.
pub const MAX_ENCODE_VERSION: u32 = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("payload of {len} bytes exceeds capacity {capacity} at version {version} / ECC {ecc}")]
    PayloadTooLarge {
        len: usize,
        capacity: usize,
        version: u32,
        ecc: EccLevel,
    },
    #[error("version {0} not supported by the encoder (1..=10)")]
    UnsupportedVersion(u32),
    #[error("mask {0} outside 0..=7")]
    InvalidMask(u8),
}

// Indexed [ecc ordinal][version - 1].
const ECC_CODEWORDS_PER_BLOCK: [[u8; 10]; 4] = [
    [7, 10, 15, 20, 26, 18, 20, 24, 30, 18],
    [10, 16, 26, 18, 24, 16, 18, 22, 22, 26],
    [13, 22, 18, 26, 18, 24, 18, 22, 20, 24],
    [17, 28, 22, 16, 22, 28, 26, 26, 24, 28],
];

const NUM_BLOCKS: [[u8; 10]; 4] = [
    [1, 1, 1, 1, 1, 2, 2, 2, 2, 4],
    [1, 1, 1, 2, 2, 4, 4, 4, 5, 5],
    [1, 1, 2, 2, 4, 4, 6, 6, 8, 8],
    [1, 1, 2, 4, 4, 4, 5, 6, 8, 8],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub grid: BinaryGrid,
    pub version: Version,
    pub ecc: EccLevel,
    pub mask: u8,
}

fn check_version(version: Version) -> Result<(), EncodeError> {
    if version.number() > MAX_ENCODE_VERSION {
        Err(EncodeError::UnsupportedVersion(version.number()))
    } else {
        Ok(())
    }
}

fn raw_codewords(version: Version) -> usize {
    let side = version.side();
    (side * side - function_pattern_mask(version).count()) / 8
}

fn block_layout(version: Version, ecc: EccLevel) -> (usize, usize) {
    let v = version.number() as usize - 1;
    let e = ecc.ordinal();
    (NUM_BLOCKS[e][v] as usize, ECC_CODEWORDS_PER_BLOCK[e][v] as usize)
}

pub fn data_codewords(version: Version, ecc: EccLevel) -> usize {
    let (blocks, per_block) = block_layout(version, ecc);
    raw_codewords(version) - blocks * per_block
}

fn count_bits(version: Version) -> usize {
    if version.number() <= 9 {
        8
    } else {
        16
    }
}

/// Largest byte-mode payload for `version` / `ecc`.
pub fn byte_capacity(version: Version, ecc: EccLevel) -> usize {
    (data_codewords(version, ecc) * 8 - 4 - count_bits(version)) / 8
}

pub mod gf256 {
    //! Arithmetic in GF(2^8) modulo x^8 + x^4 + x^3 + x^2 + 1 (285).

    pub const PRIMITIVE: u16 = 0x11d;

    pub fn mul(a: u8, b: u8) -> u8 {
        let (mut a, mut b, mut out) = (a as u16, b, 0u16);
        while b != 0 {
            if b & 1 != 0 {
                out ^= a;
            }
            a <<= 1;
            if a & 0x100 != 0 {
                a ^= PRIMITIVE;
            }
            b >>= 1;
        }
        out as u8
    }

    /// Monic generator `prod (x - 2^i)` for `i < degree`, highest power first,
    /// leading 1 omitted.
    pub fn generator(degree: usize) -> Vec<u8> {
        let mut poly = vec![0u8; degree];
        poly[degree - 1] = 1;
        let mut root = 1u8;
        for _ in 0..degree {
            for j in 0..degree {
                poly[j] = mul(poly[j], root);
                if j + 1 < degree {
                    poly[j] ^= poly[j + 1];
                }
            }
            root = mul(root, 2);
        }
        poly
    }

    /// Remainder of `data * x^degree` modulo the generator.
    pub fn remainder(data: &[u8], generator: &[u8]) -> Vec<u8> {
        let mut rem = vec![0u8; generator.len()];
        for &byte in data {
            let factor = byte ^ rem[0];
            rem.rotate_left(1);
            let last = rem.len() - 1;
            rem[last] = 0;
            for (r, &g) in rem.iter_mut().zip(generator) {
                *r ^= mul(g, factor);
            }
        }
        rem
    }
}

struct BitBuffer(Vec<bool>);

impl BitBuffer {
    fn push(&mut self, value: u32, len: usize) {
        for i in (0..len).rev() {
            self.0.push((value >> i) & 1 == 1);
        }
    }
}

/// Data codewords: mode indicator, length, payload, terminator and padding.
fn data_stream(payload: &[u8], version: Version, ecc: EccLevel) -> Vec<u8> {
    let capacity_bits = data_codewords(version, ecc) * 8;
    let mut bits = BitBuffer(Vec::with_capacity(capacity_bits));
    bits.push(0b0100, 4);
    bits.push(payload.len() as u32, count_bits(version));
    for &b in payload {
        bits.push(b as u32, 8);
    }
    let terminator = (capacity_bits - bits.0.len()).min(4);
    bits.push(0, terminator);
    let pad = (8 - bits.0.len() % 8) % 8;
    bits.push(0, pad);
    let mut bytes: Vec<u8> = bits
        .0
        .chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8))
        .collect();
    let mut filler = [0xEC, 0x11].into_iter().cycle();
    while bytes.len() < capacity_bits / 8 {
        bytes.push(filler.next().unwrap());
    }
    bytes
}

/// Splits data into blocks, appends Reed-Solomon ECC and interleaves.
fn interleave(data: &[u8], version: Version, ecc: EccLevel) -> Vec<u8> {
    let (blocks, ecc_len) = block_layout(version, ecc);
    let raw = raw_codewords(version);
    let short_blocks = blocks - raw % blocks;
    let short_len = raw / blocks - ecc_len;
    let generator = gf256::generator(ecc_len);
    let mut data_blocks = Vec::with_capacity(blocks);
    let mut ecc_blocks = Vec::with_capacity(blocks);
    let mut k = 0;
    for i in 0..blocks {
        let len = short_len + usize::from(i >= short_blocks);
        let block = &data[k..k + len];
        k += len;
        ecc_blocks.push(gf256::remainder(block, &generator));
        data_blocks.push(block.to_vec());
    }
    let mut out = Vec::with_capacity(raw);
    for i in 0..=short_len {
        for block in &data_blocks {
            if let Some(&b) = block.get(i) {
                out.push(b);
            }
        }
    }
    for i in 0..ecc_len {
        for block in &ecc_blocks {
            out.push(block[i]);
        }
    }
    out
}

pub fn mask_applies(mask: u8, row: usize, col: usize) -> bool {
    let (i, j) = (row, col);
    match mask {
        0 => (i + j) % 2 == 0,
        1 => i % 2 == 0,
        2 => j % 3 == 0,
        3 => (i + j) % 3 == 0,
        4 => (i / 2 + j / 3) % 2 == 0,
        5 => (i * j) % 2 + (i * j) % 3 == 0,
        6 => ((i * j) % 2 + (i * j) % 3) % 2 == 0,
        7 => ((i + j) % 2 + (i * j) % 3) % 2 == 0,
        _ => unreachable!("mask id checked by caller"),
    }
}

fn draw_function_patterns(grid: &mut BinaryGrid) {
    let side = grid.side();
    for (r0, c0) in finder_origins(side) {
        for dr in 0..7 {
            for dc in 0..7 {
                grid.set(r0 + dr, c0 + dc, protocol::finder_module(dr, dc));
            }
        }
    }
    for (r, c, dark) in protocol::timing_cells(side) {
        grid.set(r, c, dark);
    }
    for (r, c) in alignment_centers(grid.version()) {
        for dr in -2i32..=2 {
            for dc in -2i32..=2 {
                grid.set(
                    (r as i32 + dr) as usize,
                    (c as i32 + dc) as usize,
                    protocol::alignment_module(dr, dc),
                );
            }
        }
    }
    let (r, c) = dark_module(grid.version());
    grid.set(r, c, true);
    if let Some(word) = version_word(grid.version()) {
        let (a, b) = version_positions(side);
        for i in 0..18 {
            let bit = (word >> i) & 1 == 1;
            grid.set(a[i].0, a[i].1, bit);
            grid.set(b[i].0, b[i].1, bit);
        }
    }
}

fn draw_format(grid: &mut BinaryGrid, ecc: EccLevel, mask: u8) {
    let word = format_word(ecc, mask);
    let (first, second) = format_positions(grid.side());
    for i in 0..15 {
        let bit = (word >> (14 - i)) & 1 == 1;
        grid.set(first[i].0, first[i].1, bit);
        grid.set(second[i].0, second[i].1, bit);
    }
}

/// Zig-zag placement of codeword bits into the non-function modules.
fn place_codewords(grid: &mut BinaryGrid, mask: &FunctionMask, codewords: &[u8]) {
    let side = grid.side();
    let total_bits = codewords.len() * 8;
    let mut i = 0usize;
    let mut right = side as isize - 1;
    while right >= 1 {
        if right == 6 {
            right = 5;
        }
        let upward = ((right + 1) & 2) == 0;
        for vert in 0..side {
            let row = if upward { side - 1 - vert } else { vert };
            for j in 0..2 {
                let col = (right - j) as usize;
                if !mask.is_function(row, col) && i < total_bits {
                    let bit = (codewords[i >> 3] >> (7 - (i & 7))) & 1 == 1;
                    grid.set(row, col, bit);
                    i += 1;
                }
            }
        }
        right -= 2;
    }
}

fn apply_mask(grid: &mut BinaryGrid, functions: &FunctionMask, mask: u8) {
    let side = grid.side();
    for r in 0..side {
        for c in 0..side {
            if !functions.is_function(r, c) && mask_applies(mask, r, c) {
                let v = grid.get(r, c);
                grid.set(r, c, !v);
            }
        }
    }
}

/// Smallest version in 1..=10 whose byte capacity fits `len`.
pub fn auto_version(len: usize, ecc: EccLevel) -> Result<Version, EncodeError> {
    (1..=MAX_ENCODE_VERSION)
        .map(|n| Version::new(n).unwrap())
        .find(|&v| byte_capacity(v, ecc) >= len)
        .ok_or_else(|| EncodeError::PayloadTooLarge {
            len,
            capacity: byte_capacity(Version::new(MAX_ENCODE_VERSION).unwrap(), ecc),
            version: MAX_ENCODE_VERSION,
            ecc,
        })
}

fn unmasked(payload: &[u8], ecc: EccLevel, version: Option<Version>) -> Result<(BinaryGrid, FunctionMask), EncodeError> {
    let version = match version {
        Some(v) => {
            check_version(v)?;
            let capacity = byte_capacity(v, ecc);
            if payload.len() > capacity {
                return Err(EncodeError::PayloadTooLarge {
                    len: payload.len(),
                    capacity,
                    version: v.number(),
                    ecc,
                });
            }
            v
        }
        None => auto_version(payload.len(), ecc)?,
    };
    let functions = function_pattern_mask(version);
    let mut grid = BinaryGrid::new(version);
    draw_function_patterns(&mut grid);
    let codewords = interleave(&data_stream(payload, version, ecc), version, ecc);
    place_codewords(&mut grid, &functions, &codewords);
    Ok((grid, functions))
}

/// Encodes with a fixed mask.
pub fn encode_with_mask(
    payload: &[u8],
    ecc: EccLevel,
    version: Option<Version>,
    mask: u8,
) -> Result<Encoded, EncodeError> {
    if mask > 7 {
        return Err(EncodeError::InvalidMask(mask));
    }
    let (mut grid, functions) = unmasked(payload, ecc, version)?;
    apply_mask(&mut grid, &functions, mask);
    draw_format(&mut grid, ecc, mask);
    Ok(Encoded {
        version: grid.version(),
        grid,
        ecc,
        mask,
    })
}

/// Encodes `payload` in byte mode. `version = None` picks the smallest
/// fitting version; the mask with the lowest total penalty wins, ties going
/// to the lower mask id.
pub fn encode(payload: &[u8], ecc: EccLevel, version: Option<Version>) -> Result<Encoded, EncodeError> {
    let (base, functions) = unmasked(payload, ecc, version)?;
    let mut best: Option<(u64, u8, BinaryGrid)> = None;
    for mask in 0..8u8 {
        let mut grid = base.clone();
        apply_mask(&mut grid, &functions, mask);
        draw_format(&mut grid, ecc, mask);
        let score = penalty_scores(&grid).total();
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, mask, grid));
        }
    }
    let (_, mask, grid) = best.expect("eight masks tried");
    Ok(Encoded {
        version: grid.version(),
        grid,
        ecc,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: u32) -> Version {
        Version::new(n).unwrap()
    }

    #[test]
    fn capacity_table_spot_checks() {
        // published byte-mode capacities
        assert_eq!(byte_capacity(v(1), EccLevel::L), 17);
        assert_eq!(byte_capacity(v(1), EccLevel::H), 7);
        assert_eq!(byte_capacity(v(2), EccLevel::M), 26);
        assert_eq!(byte_capacity(v(5), EccLevel::Q), 60);
        assert_eq!(byte_capacity(v(7), EccLevel::H), 64);
        assert_eq!(byte_capacity(v(10), EccLevel::L), 271);
        assert_eq!(byte_capacity(v(10), EccLevel::H), 119);
        assert_eq!(data_codewords(v(1), EccLevel::L), 19);
        assert_eq!(data_codewords(v(10), EccLevel::H), 122);
    }

    #[test]
    fn auto_version_examples() {
        assert_eq!(encode(b"HELLO", EccLevel::L, None).unwrap().version, v(1));
        let big = vec![b'a'; 200];
        // 200 bytes at H does not fit even version 10
        assert!(matches!(
            encode(&big, EccLevel::H, None),
            Err(EncodeError::PayloadTooLarge { .. })
        ));
        let mid = vec![b'a'; 100];
        assert!(encode(&mid, EccLevel::H, None).unwrap().version > v(1));
        assert!(matches!(
            encode(b"x", EccLevel::L, Some(v(11))),
            Err(EncodeError::UnsupportedVersion(11))
        ));
        assert!(matches!(
            encode(&[0; 20], EccLevel::L, Some(v(1))),
            Err(EncodeError::PayloadTooLarge { .. })
        ));
    }

    #[test]
    fn gf_generator_known_values() {
        // degree-7 generator from the standard's annex, as exponents of 2:
        // 87, 229, 146, 149, 238, 102, 21
        let mut antilog = [0u8; 255];
        let mut x = 1u8;
        for e in antilog.iter_mut() {
            *e = x;
            x = gf256::mul(x, 2);
        }
        let expected: Vec<u8> = [87, 229, 146, 149, 238, 102, 21]
            .iter()
            .map(|&e: &usize| antilog[e])
            .collect();
        assert_eq!(gf256::generator(7), expected);
    }

    #[test]
    fn rs_remainder_root_check() {
        // A codeword (data || ecc) evaluated at every generator root is zero.
        let data: Vec<u8> = (0..19u8).map(|i| i.wrapping_mul(37).wrapping_add(5)).collect();
        let gen = gf256::generator(7);
        let ecc = gf256::remainder(&data, &gen);
        let word: Vec<u8> = data.iter().chain(ecc.iter()).copied().collect();
        let mut root = 1u8;
        for _ in 0..7 {
            let value = word.iter().fold(0u8, |acc, &c| gf256::mul(acc, root) ^ c);
            assert_eq!(value, 0);
            root = gf256::mul(root, 2);
        }
    }

    #[test]
    fn hello_world_codewords() {
        // Byte-mode "HELLO WORLD" at 1-M (the standard's worked example
        // uses alphanumeric mode; this is the byte-mode equivalent).
        let data = data_stream(b"HELLO WORLD", v(1), EccLevel::M);
        assert_eq!(data.len(), 16);
        assert_eq!(data[0], 0x40);
        assert_eq!(data[1], 0xB4);
        assert_eq!(data[2], 0x84);
        assert_eq!(&data[13..], &[0xEC, 0x11, 0xEC]);
    }

    #[test]
    fn format_and_function_patterns_conform() {
        use crate::extract::{read_format_bits, verify_format};
        use crate::fast::fast;
        for n in 1..=10 {
            for ecc in EccLevel::ALL {
                let payload = format!("u{n}{ecc}");
                let enc = encode(payload.as_bytes(), ecc, Some(v(n))).unwrap();
                let (c1, c2) = read_format_bits(&enc.grid);
                let info = verify_format(c1, c2).unwrap();
                assert!(info.copy1_valid && info.copy2_valid);
                assert_eq!((info.ecc, info.mask), (ecc, enc.mask));
                let (_, report) = fast(&enc.grid);
                assert!(report.is_clean());
            }
        }
    }

    #[test]
    fn mask_choice_is_minimal_penalty() {
        let payload = b"https://example.com/a/b/c";
        let best = encode(payload, EccLevel::Q, None).unwrap();
        let best_score = penalty_scores(&best.grid).total();
        for mask in 0..8 {
            let other = encode_with_mask(payload, EccLevel::Q, None, mask).unwrap();
            let s = penalty_scores(&other.grid).total();
            assert!(s > best_score || (s == best_score && mask >= best.mask));
        }
    }
}
