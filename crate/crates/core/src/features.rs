//! The 24 structural features fed to the classifier.
//!
//! Features 1-11 describe the symbol (version, format, extraction path and
//! recovery counts); 12-24 are statistics of the module grid. The order and
//! names are frozen: models store them and refuse to load on mismatch.

use serde::{Deserialize, Serialize};

use crate::extract::{ExtractionResult, SMALL_MODULE_THRESHOLD};
use crate::fast::RecoveryReport;
use crate::grid::BinaryGrid;
use crate::preprocess::PreprocessReport;
use crate::protocol::function_pattern_mask;

pub const FEATURE_COUNT: usize = 24;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "f1_version",
    "f2_side_modules",
    "f3_ecc_level",
    "f4_mask_id",
    "f5_format_copies_valid",
    "f6_inverted",
    "f7_high_threshold",
    "f8_finder_fixes",
    "f9_alignment_fixes",
    "f10_separator_fixes",
    "f11_timing_fixes",
    "f12_dark_ratio",
    "f13_data_dark_ratio",
    "f14_penalty_n1_rows",
    "f15_penalty_n1_cols",
    "f16_penalty_n2",
    "f17_penalty_n3",
    "f18_penalty_n4",
    "f19_row_transition_rate",
    "f20_col_transition_rate",
    "f21_longest_dark_run",
    "f22_longest_light_run",
    "f23_block_entropy",
    "f24_center_dark_ratio",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn from_slice(values: &[f64]) -> Option<Self> {
        <[f64; FEATURE_COUNT]>::try_from(values).ok().map(FeatureVector)
    }
}

/// Which grid the statistical features (12-24) are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSource {
    Raw,
    #[default]
    Fast,
}

impl std::str::FromStr for GridSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(GridSource::Raw),
            "fast" => Ok(GridSource::Fast),
            other => Err(format!("unknown grid source {other:?} (raw|fast)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Penalties {
    pub n1_rows: u64,
    pub n1_cols: u64,
    pub n2: u64,
    pub n3: u64,
    pub n4: u64,
}

impl Penalties {
    pub fn total(&self) -> u64 {
        self.n1_rows + self.n1_cols + self.n2 + self.n3 + self.n4
    }
}

fn line(grid: &BinaryGrid, index: usize, horizontal: bool) -> impl Iterator<Item = bool> + '_ {
    (0..grid.side()).map(move |i| {
        if horizontal {
            grid.get(index, i)
        } else {
            grid.get(i, index)
        }
    })
}

/// Maximal same-colour runs along one line as `(dark, length)`.
fn runs(cells: impl Iterator<Item = bool>) -> Vec<(bool, usize)> {
    let mut out: Vec<(bool, usize)> = Vec::new();
    for cell in cells {
        match out.last_mut() {
            Some((color, len)) if *color == cell => *len += 1,
            _ => out.push((cell, 1)),
        }
    }
    out
}

fn n1_axis(grid: &BinaryGrid, horizontal: bool) -> u64 {
    (0..grid.side())
        .flat_map(|i| runs(line(grid, i, horizontal)))
        .filter(|&(_, len)| len >= 5)
        .map(|(_, len)| 3 + (len as u64 - 5))
        .sum()
}

const FINDER_LIKE: [[bool; 11]; 2] = [
    [true, false, true, true, true, false, true, false, false, false, false],
    [false, false, false, false, true, false, true, true, true, false, true],
];

fn n3_axis(grid: &BinaryGrid, horizontal: bool) -> u64 {
    let side = grid.side();
    let mut count = 0;
    for i in 0..side {
        let cells: Vec<bool> = line(grid, i, horizontal).collect();
        for window in cells.windows(11) {
            count += FINDER_LIKE.iter().filter(|p| p[..] == *window).count() as u64;
        }
    }
    count
}

/// Mask-evaluation penalties: runs of five or more (N1, per axis), uniform
/// 2x2 blocks (N2), finder-like 1011101 sequences flanked by four light
/// modules (N3) and dark-proportion imbalance (N4).
pub fn penalty_scores(grid: &BinaryGrid) -> Penalties {
    let side = grid.side();
    let mut blocks = 0u64;
    for r in 0..side - 1 {
        for c in 0..side - 1 {
            let a = grid.get(r, c);
            if grid.get(r, c + 1) == a && grid.get(r + 1, c) == a && grid.get(r + 1, c + 1) == a {
                blocks += 1;
            }
        }
    }
    let total = (side * side) as u64;
    let dark = grid.dark_count() as u64;
    // floor(|100 * dark / total - 50| / 5) in exact integer arithmetic
    let deviation = (100 * dark).abs_diff(50 * total);
    let steps = deviation / (5 * total);
    Penalties {
        n1_rows: n1_axis(grid, true),
        n1_cols: n1_axis(grid, false),
        n2: 3 * blocks,
        n3: 40 * (n3_axis(grid, true) + n3_axis(grid, false)),
        n4: 10 * steps,
    }
}

fn transition_rate(grid: &BinaryGrid, horizontal: bool) -> f64 {
    let side = grid.side();
    let mut transitions = 0usize;
    for i in 0..side {
        let cells: Vec<bool> = line(grid, i, horizontal).collect();
        transitions += cells.windows(2).filter(|w| w[0] != w[1]).count();
    }
    transitions as f64 / (side * (side - 1)) as f64
}

fn longest_run(grid: &BinaryGrid, dark: bool) -> usize {
    let side = grid.side();
    [true, false]
        .iter()
        .flat_map(|&h| (0..side).flat_map(move |i| runs(line(grid, i, h))))
        .filter(|&(color, _)| color == dark)
        .map(|(_, len)| len)
        .max()
        .unwrap_or(0)
}

/// Shannon entropy (bits) of the 16 possible overlapping 2x2 patterns.
fn block_entropy(grid: &BinaryGrid) -> f64 {
    let side = grid.side();
    let mut counts = [0usize; 16];
    for r in 0..side - 1 {
        for c in 0..side - 1 {
            let code = (grid.get(r, c) as usize) << 3
                | (grid.get(r, c + 1) as usize) << 2
                | (grid.get(r + 1, c) as usize) << 1
                | grid.get(r + 1, c + 1) as usize;
            counts[code] += 1;
        }
    }
    let n = ((side - 1) * (side - 1)) as f64;
    counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

fn center_dark_ratio(grid: &BinaryGrid) -> f64 {
    let side = grid.side();
    let w = side.div_ceil(5);
    let start = (side - w) / 2;
    let dark = (start..start + w)
        .flat_map(|r| (start..start + w).map(move |c| (r, c)))
        .filter(|&(r, c)| grid.get(r, c))
        .count();
    dark as f64 / (w * w) as f64
}

fn data_dark_ratio(grid: &BinaryGrid) -> f64 {
    let mask = function_pattern_mask(grid.version());
    let side = grid.side();
    let (mut dark, mut total) = (0usize, 0usize);
    for r in 0..side {
        for c in 0..side {
            if !mask.is_function(r, c) {
                total += 1;
                dark += grid.get(r, c) as usize;
            }
        }
    }
    dark as f64 / total as f64
}

/// Features 12-24 from a grid alone.
pub fn grid_statistics(grid: &BinaryGrid) -> [f64; 13] {
    let p = penalty_scores(grid);
    let cells = (grid.side() * grid.side()) as f64;
    [
        grid.dark_count() as f64 / cells,
        data_dark_ratio(grid),
        p.n1_rows as f64,
        p.n1_cols as f64,
        p.n2 as f64,
        p.n3 as f64,
        p.n4 as f64,
        transition_rate(grid, true),
        transition_rate(grid, false),
        longest_run(grid, true) as f64,
        longest_run(grid, false) as f64,
        block_entropy(grid),
        center_dark_ratio(grid),
    ]
}

/// Assembles the feature vector for one pipeline run. `recovered` is the
/// post-recovery grid; statistics use it when `source` is [`GridSource::Fast`].
pub fn extract_features(
    res: &ExtractionResult,
    pre: &PreprocessReport,
    recovery: &RecoveryReport,
    recovered: &BinaryGrid,
    source: GridSource,
) -> FeatureVector {
    let grid = match source {
        GridSource::Raw => &res.grid,
        GridSource::Fast => recovered,
    };
    let mut f = [0.0; FEATURE_COUNT];
    f[0] = res.grid.version().number() as f64;
    f[1] = res.grid.side() as f64;
    f[2] = res.format.ecc.ordinal() as f64;
    f[3] = res.format.mask as f64;
    f[4] = res.format.valid_copies() as f64;
    f[5] = pre.inverted as u8 as f64;
    f[6] = (res.threshold_used == SMALL_MODULE_THRESHOLD) as u8 as f64;
    f[7] = recovery.finder_fixes as f64;
    f[8] = recovery.alignment_fixes as f64;
    f[9] = recovery.separator_fixes as f64;
    f[10] = recovery.timing_fixes as f64;
    f[11..].copy_from_slice(&grid_statistics(grid));
    FeatureVector(f)
}

/// CSV header: the 24 feature names then `label`.
pub fn csv_header() -> String {
    let mut h = FEATURE_NAMES.join(",");
    h.push_str(",label");
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Version;

    fn v1() -> Version {
        Version::new(1).unwrap()
    }

    #[test]
    fn all_dark_grid() {
        let g = BinaryGrid::from_fn(v1(), |_, _| true);
        let s = grid_statistics(&g);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[7], 0.0);
        assert_eq!(s[9], 21.0);
        assert_eq!(s[10], 0.0);
        let p = penalty_scores(&g);
        assert_eq!(p.n1_rows, 21 * (3 + 16));
        assert_eq!(p.n1_cols, 399);
        assert_eq!(p.n2, 3 * 400);
        assert_eq!(p.n4, 100);
        assert_eq!(s[11], 0.0);
    }

    #[test]
    fn checkerboard_grid() {
        let g = BinaryGrid::from_fn(v1(), |r, c| (r + c) % 2 == 0);
        let s = grid_statistics(&g);
        assert!((s[0] - 0.5).abs() < 0.01);
        assert_eq!(s[4], 0.0);
        assert_eq!(s[9], 1.0);
        assert_eq!(s[7], 1.0);
        assert_eq!(penalty_scores(&g), Penalties::default());
        // two alternating 2x2 patterns, equally frequent
        assert!((s[11] - 1.0).abs() < 1e-12);
    }

    // Brute-force N3 oracle: test every start position against both
    // 11-module sequences.
    fn n3_oracle(g: &BinaryGrid) -> u64 {
        let pats = ["10111010000", "00001011101"];
        let side = g.side();
        let mut n = 0;
        for i in 0..side {
            let row: String = (0..side).map(|j| if g.get(i, j) { '1' } else { '0' }).collect();
            let col: String = (0..side).map(|j| if g.get(j, i) { '1' } else { '0' }).collect();
            for s in [row, col] {
                for p in pats {
                    n += (0..=side - 11).filter(|&k| &s[k..k + 11] == p).count() as u64;
                }
            }
        }
        40 * n
    }

    #[test]
    fn n3_matches_string_search() {
        let g = BinaryGrid::from_fn(Version::new(3).unwrap(), |r, c| (r * 7 + c * 3 + r * c) % 5 < 2);
        assert_eq!(penalty_scores(&g).n3, n3_oracle(&g));
        let mut g = BinaryGrid::new(v1());
        for (c, ch) in "000010111010000".chars().enumerate() {
            g.set(10, c, ch == '1');
        }
        // both flanked forms occur once on row 10
        assert_eq!(penalty_scores(&g).n3, 80);
        assert_eq!(n3_oracle(&g), 80);
    }

    #[test]
    fn n4_buckets() {
        // 441 cells: 243 dark = 55.1% -> one step
        let mut k = 0;
        let g = BinaryGrid::from_fn(v1(), |_, _| {
            k += 1;
            k <= 243
        });
        assert_eq!(penalty_scores(&g).n4, 10);
        let mut k = 0;
        let g = BinaryGrid::from_fn(v1(), |_, _| {
            k += 1;
            k <= 242
        });
        assert_eq!(penalty_scores(&g).n4, 0);
    }

    #[test]
    fn center_window() {
        // side 21 -> window 5, rows/cols 8..13
        let g = BinaryGrid::from_fn(v1(), |r, c| (8..13).contains(&r) && (8..13).contains(&c));
        assert_eq!(center_dark_ratio(&g), 1.0);
        let s = grid_statistics(&g);
        assert_eq!(s[12], 1.0);
    }

    #[test]
    fn header_names() {
        let h = csv_header();
        assert!(h.starts_with("f1_version,f2_side_modules,"));
        assert!(h.ends_with("f24_center_dark_ratio,label"));
        assert_eq!(h.split(',').count(), 25);
    }
}
