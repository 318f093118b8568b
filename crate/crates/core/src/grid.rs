//! Square module matrix (1 = dark, 0 = light) tagged with its version.

use std::fmt::Write as _;

use thiserror::Error;

use crate::protocol::Version;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryGrid {
    version: Version,
    side: usize,
    cells: Vec<u8>,
}

impl BinaryGrid {
    /// All-light grid for `version`.
    pub fn new(version: Version) -> Self {
        let side = version.side();
        BinaryGrid {
            version,
            side,
            cells: vec![0; side * side],
        }
    }

    pub fn from_fn(version: Version, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut g = BinaryGrid::new(version);
        for r in 0..g.side {
            for c in 0..g.side {
                g.cells[r * g.side + c] = f(r, c) as u8;
            }
        }
        g
    }

    pub fn version(&self) -> Version {
        self.version
    }

    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.side + col] == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, dark: bool) {
        self.cells[row * self.side + col] = dark as u8;
    }

    /// Sets a cell and reports whether it changed.
    pub fn assign(&mut self, row: usize, col: usize, dark: bool) -> bool {
        let changed = self.get(row, col) != dark;
        self.set(row, col, dark);
        changed
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn dark_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    pub fn light_fraction(&self) -> f64 {
        1.0 - self.dark_count() as f64 / self.cells.len() as f64
    }

    /// Reads the bits at `positions`, first position as most significant.
    pub fn read_word(&self, positions: &[(usize, usize)]) -> u32 {
        positions
            .iter()
            .fold(0u32, |acc, &(r, c)| (acc << 1) | self.get(r, c) as u32)
    }

    /// `version <v>` followed by one `0`/`1` line per row.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.side * (self.side + 1) + 12);
        let _ = writeln!(out, "version {}", self.version);
        for r in 0..self.side {
            for c in 0..self.side {
                out.push(if self.get(r, c) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| GridError::Parse("empty input".into()))?;
        let number: u32 = header
            .strip_prefix("version ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| GridError::Parse(format!("bad header {header:?}")))?;
        let version = Version::new(number).map_err(|e| GridError::Parse(e.to_string()))?;
        let mut grid = BinaryGrid::new(version);
        let side = grid.side;
        let mut rows = 0;
        for (r, line) in lines.enumerate() {
            if r >= side {
                if line.is_empty() {
                    continue;
                }
                return Err(GridError::Parse(format!("more than {side} rows")));
            }
            if line.len() != side {
                return Err(GridError::Parse(format!("row {r} has {} cells, want {side}", line.len())));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => grid.set(r, c, true),
                    other => return Err(GridError::Parse(format!("unexpected {other:?}"))),
                }
            }
            rows += 1;
        }
        if rows != side {
            return Err(GridError::Parse(format!("{rows} rows, want {side}")));
        }
        Ok(grid)
    }
}
