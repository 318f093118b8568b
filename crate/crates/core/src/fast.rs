//! Finder / alignment / separator / timing recovery.
//!
//! These four region types sit at fixed positions in every symbol, so any
//! module in them that disagrees with the standard pattern is a sampling
//! error and can be overwritten. Format, version-information and the dark
//! module are left as read.

use serde::{Deserialize, Serialize};

use crate::grid::BinaryGrid;
use crate::protocol::{self, alignment_centers, finder_origins, separator_cells, timing_cells};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub finder_fixes: usize,
    pub alignment_fixes: usize,
    pub separator_fixes: usize,
    pub timing_fixes: usize,
    /// Distinct cells covered by the four region types.
    pub total_function_modules: usize,
}

impl RecoveryReport {
    pub fn total_fixes(&self) -> usize {
        self.finder_fixes + self.alignment_fixes + self.separator_fixes + self.timing_fixes
    }

    pub fn is_clean(&self) -> bool {
        self.total_fixes() == 0
    }
}

/// Rewrites the three 7x7 finders. Returns the number of cells changed.
pub fn recover_finders(grid: &mut BinaryGrid) -> usize {
    let mut fixes = 0;
    for (r0, c0) in finder_origins(grid.side()) {
        for dr in 0..7 {
            for dc in 0..7 {
                fixes += grid.assign(r0 + dr, c0 + dc, protocol::finder_module(dr, dc)) as usize;
            }
        }
    }
    fixes
}

pub fn recover_separators(grid: &mut BinaryGrid) -> usize {
    separator_cells(grid.side())
        .into_iter()
        .map(|(r, c)| grid.assign(r, c, false) as usize)
        .sum()
}

/// Row 6 and column 6 alternate dark/light between the separators, dark on
/// even indices.
pub fn recover_timing(grid: &mut BinaryGrid) -> usize {
    timing_cells(grid.side())
        .into_iter()
        .map(|(r, c, dark)| grid.assign(r, c, dark) as usize)
        .sum()
}

pub fn recover_alignments(grid: &mut BinaryGrid) -> usize {
    let mut fixes = 0;
    for (r, c) in alignment_centers(grid.version()) {
        for dr in -2i32..=2 {
            for dc in -2i32..=2 {
                let (rr, cc) = ((r as i32 + dr) as usize, (c as i32 + dc) as usize);
                fixes += grid.assign(rr, cc, protocol::alignment_module(dr, dc)) as usize;
            }
        }
    }
    fixes
}

/// Cells touched by the four recoveries.
pub fn recovery_region(grid: &BinaryGrid) -> Vec<bool> {
    let side = grid.side();
    let mut region = vec![false; side * side];
    for (r0, c0) in finder_origins(side) {
        for r in r0..r0 + 7 {
            for c in c0..c0 + 7 {
                region[r * side + c] = true;
            }
        }
    }
    for (r, c) in separator_cells(side) {
        region[r * side + c] = true;
    }
    for (r, c, _) in timing_cells(side) {
        region[r * side + c] = true;
    }
    for (r, c) in alignment_centers(grid.version()) {
        for rr in r - 2..=r + 2 {
            for cc in c - 2..=c + 2 {
                region[rr * side + cc] = true;
            }
        }
    }
    region
}

/// Applies the recoveries in the order finders, alignments, separators,
/// timing.
pub fn fast(grid: &BinaryGrid) -> (BinaryGrid, RecoveryReport) {
    let mut out = grid.clone();
    let finder_fixes = recover_finders(&mut out);
    let alignment_fixes = recover_alignments(&mut out);
    let separator_fixes = recover_separators(&mut out);
    let timing_fixes = recover_timing(&mut out);
    let total_function_modules = recovery_region(grid).iter().filter(|&&b| b).count();
    (
        out,
        RecoveryReport {
            finder_fixes,
            alignment_fixes,
            separator_fixes,
            timing_fixes,
            total_function_modules,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Version;

    fn v(n: u32) -> Version {
        Version::new(n).unwrap()
    }

    fn standard(version: Version) -> BinaryGrid {
        fast(&BinaryGrid::new(version)).0
    }

    #[test]
    fn finder_examples() {
        let mut g = standard(v(3));
        assert_eq!(recover_finders(&mut g), 0);
        let mut zeroed = g.clone();
        for (r0, c0) in finder_origins(zeroed.side()) {
            for r in r0..r0 + 7 {
                for c in c0..c0 + 7 {
                    zeroed.set(r, c, false);
                }
            }
        }
        assert_eq!(recover_finders(&mut zeroed), 3 * 33);
        let mut one = g.clone();
        one.set(3, 3, false);
        assert_eq!(recover_finders(&mut one), 1);
        assert_eq!(one, g);
    }

    #[test]
    fn separator_examples() {
        let mut g = standard(v(1));
        assert_eq!(recover_separators(&mut g), 0);
        for (r, c) in separator_cells(g.side()) {
            g.set(r, c, true);
        }
        assert_eq!(recover_separators(&mut g), 45);
        // only the top-right and bottom-left strips mislabeled
        let mut g = standard(v(4));
        let side = g.side();
        for (r, c) in separator_cells(side).into_iter().skip(15) {
            g.set(r, c, true);
        }
        assert_eq!(recover_separators(&mut g), 30);
        assert!(separator_cells(side).iter().all(|&(r, c)| !g.get(r, c)));
    }

    #[test]
    fn timing_examples() {
        let mut g = standard(v(2));
        assert_eq!(recover_timing(&mut g), 0);
        let side = g.side();
        for c in 0..side {
            g.set(6, c, true);
        }
        let fixes = recover_timing(&mut g);
        // odd columns in 8..=side-9
        assert_eq!(fixes, (8..=side - 9).filter(|c| c % 2 == 1).count());
        assert_eq!(timing_cells(21).len() / 2, 5);
        assert_eq!(timing_cells(21)[0], (6, 8, true));
        assert_eq!(timing_cells(21)[4], (6, 12, true));
    }

    #[test]
    fn alignment_examples() {
        let mut g = BinaryGrid::new(v(1));
        assert_eq!(recover_alignments(&mut g), 0);
        let mut g = standard(v(2));
        assert_eq!(recover_alignments(&mut g), 0);
        for r in 16..=20 {
            for c in 16..=20 {
                g.set(r, c, false);
            }
        }
        assert_eq!(recover_alignments(&mut g), 17);
    }

    #[test]
    fn standard_grid_reports_zero() {
        for ver in Version::all() {
            let g = standard(ver);
            let (again, report) = fast(&g);
            assert!(report.is_clean(), "version {ver}: {report:?}");
            assert_eq!(again, g);
        }
    }

    #[test]
    fn region_size_version1() {
        // 3*49 finders + 45 separators + 10 timing cells
        let (_, report) = fast(&BinaryGrid::new(v(1)));
        assert_eq!(report.total_function_modules, 147 + 45 + 10);
    }
}
