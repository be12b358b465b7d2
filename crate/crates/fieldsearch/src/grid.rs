//! Square binary grids, cells and field-of-view arithmetic.
//!
//! Axis convention used throughout the crate: `x` is the row index
//! (increases flying south), `y` is the column index (increases flying
//! east). A mask cell `(x, y)` lives at `bits[x * size + y]`.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A grid cell, row `x` / column `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

impl From<(usize, usize)> for Cell {
    fn from((x, y): (usize, usize)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (usize, usize) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A square binary map over grid cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMask {
    size: usize,
    bits: Vec<bool>,
}

impl GridMask {
    /// All-false mask with `size` cells per side.
    pub fn new(size: usize) -> Self {
        GridMask {
            size,
            bits: vec![false; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, cell: Cell) -> bool {
        debug_assert!(cell.x < self.size && cell.y < self.size);
        self.bits[cell.x * self.size + cell.y]
    }

    pub fn set(&mut self, cell: Cell, value: bool) {
        debug_assert!(cell.x < self.size && cell.y < self.size);
        self.bits[cell.x * self.size + cell.y] = value;
    }

    /// Number of true cells.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Iterate over true cells in row-major order.
    pub fn iter_true(&self) -> impl Iterator<Item = Cell> + '_ {
        let size = self.size;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| Cell::new(i / size, i % size))
    }

    /// True cells collected in row-major order.
    pub fn true_cells(&self) -> Vec<Cell> {
        self.iter_true().collect()
    }

    /// OR the other mask into this one. Sizes must match.
    pub fn union_with(&mut self, other: &GridMask) {
        assert_eq!(self.size, other.size, "mask size mismatch");
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    /// Build a mask of the given size from a list of true cells.
    pub fn from_cells(size: usize, cells: &[Cell]) -> Result<Self> {
        let mut mask = GridMask::new(size);
        for &c in cells {
            if c.x >= size || c.y >= size {
                return Err(Error::Parse(format!(
                    "cell {c} outside {size}x{size} grid"
                )));
            }
            mask.set(c, true);
        }
        Ok(mask)
    }

    /// Write the mask as a binary PGM raster (P5, true cells white).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.size, self.size)?;
        let row: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        w.write_all(&row)?;
        Ok(())
    }

    /// Read a mask back from a binary PGM raster produced by [`GridMask::write_pgm`].
    pub fn read_pgm<R: Read>(mut r: R) -> Result<Self> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        let header_end = data
            .windows(1)
            .enumerate()
            .filter(|(_, w)| w[0] == b'\n')
            .map(|(i, _)| i)
            .nth(2)
            .ok_or_else(|| Error::Parse("truncated PGM header".into()))?;
        let header = std::str::from_utf8(&data[..header_end])
            .map_err(|_| Error::Parse("non-UTF8 PGM header".into()))?;
        let mut lines = header.lines();
        if lines.next() != Some("P5") {
            return Err(Error::Parse("expected P5 PGM".into()));
        }
        let dims = lines
            .next()
            .ok_or_else(|| Error::Parse("missing PGM dimensions".into()))?;
        let mut parts = dims.split_whitespace();
        let w: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad PGM width".into()))?;
        let h: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad PGM height".into()))?;
        if w != h {
            return Err(Error::Parse(format!("PGM raster {w}x{h} is not square")));
        }
        let pixels = &data[header_end + 1..];
        if pixels.len() != w * h {
            return Err(Error::Parse(format!(
                "PGM payload has {} bytes, expected {}",
                pixels.len(),
                w * h
            )));
        }
        Ok(GridMask {
            size: w,
            bits: pixels.iter().map(|&p| p > 0).collect(),
        })
    }
}

/// JSON form of a mask: side length plus the list of true cells.
#[derive(Serialize, Deserialize)]
struct GridMaskRepr {
    size: usize,
    cells: Vec<Cell>,
}

impl Serialize for GridMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridMaskRepr {
            size: self.size,
            cells: self.true_cells(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = GridMaskRepr::deserialize(d)?;
        GridMask::from_cells(repr.size, &repr.cells).map_err(serde::de::Error::custom)
    }
}

/// Field-of-view window arithmetic for an `N x N` sensor footprint.
///
/// The footprint of a drone at center cell `c` spans
/// `[c - N/2, c - N/2 + N - 1]` per axis (integer division), so valid
/// center positions on an `M`-cell axis run from `N/2` to `M - N + N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fov {
    size: usize,
}

impl Fov {
    pub fn new(size: usize) -> Self {
        assert!(size >= 1, "FOV must be at least 1 cell");
        Fov { size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Offset from center to the low (north/west) FOV edge.
    pub fn lo(&self) -> usize {
        self.size / 2
    }

    /// Offset from center to the high (south/east) FOV edge.
    pub fn hi(&self) -> usize {
        self.size - 1 - self.size / 2
    }

    /// Smallest valid center coordinate on any axis.
    pub fn min_center(&self) -> usize {
        self.lo()
    }

    /// Largest valid center coordinate on an `field_size`-cell axis.
    pub fn max_center(&self, field_size: usize) -> usize {
        field_size - self.size + self.size / 2
    }

    /// Whether `center` keeps the footprint fully inside the field.
    pub fn center_valid(&self, center: Cell, field_size: usize) -> bool {
        if self.size > field_size {
            return false;
        }
        let (lo, hi) = (self.min_center(), self.max_center(field_size));
        center.x >= lo && center.x <= hi && center.y >= lo && center.y <= hi
    }

    /// North-west corner of the footprint around `center`.
    pub fn origin(&self, center: Cell) -> Cell {
        Cell::new(center.x - self.lo(), center.y - self.lo())
    }

    /// Whether the footprint around `center` contains `cell`.
    pub fn contains(&self, center: Cell, cell: Cell) -> bool {
        let o = self.origin(center);
        cell.x >= o.x && cell.x < o.x + self.size && cell.y >= o.y && cell.y < o.y + self.size
    }

    /// Iterate over all footprint cells around `center`, row-major.
    pub fn cells(&self, center: Cell) -> impl Iterator<Item = Cell> + '_ {
        let o = self.origin(center);
        let n = self.size;
        (0..n).flat_map(move |dx| (0..n).map(move |dy| Cell::new(o.x + dx, o.y + dy)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_set_get_count() {
        let mut m = GridMask::new(4);
        assert_eq!(m.count(), 0);
        m.set(Cell::new(1, 2), true);
        m.set(Cell::new(3, 3), true);
        assert!(m.get(Cell::new(1, 2)));
        assert!(!m.get(Cell::new(2, 1)));
        assert_eq!(m.count(), 2);
        assert_eq!(m.true_cells(), vec![Cell::new(1, 2), Cell::new(3, 3)]);
    }

    #[test]
    fn mask_json_roundtrip() {
        let mut m = GridMask::new(5);
        m.set(Cell::new(0, 0), true);
        m.set(Cell::new(4, 2), true);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"size\":5"));
        assert!(json.contains("[0,0]"));
        let back: GridMask = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn mask_pgm_roundtrip() {
        let mut m = GridMask::new(7);
        m.set(Cell::new(2, 5), true);
        m.set(Cell::new(6, 6), true);
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        let back = GridMask::read_pgm(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn mask_rejects_out_of_range_cells() {
        assert!(GridMask::from_cells(3, &[Cell::new(3, 0)]).is_err());
    }

    #[test]
    fn fov_window_spans_n_cells_both_parities() {
        for n in [1usize, 2, 3, 6, 12] {
            let f = Fov::new(n);
            assert_eq!(f.lo() + f.hi() + 1, n, "N={n}");
        }
    }

    #[test]
    fn fov_even_n_matches_coverage_row_offset() {
        // N=12, M=96: valid centers span [6, 90].
        let f = Fov::new(12);
        assert_eq!(f.min_center(), 6);
        assert_eq!(f.max_center(96), 90);
        let o = f.origin(Cell::new(6, 6));
        assert_eq!(o, Cell::new(0, 0));
        assert!(f.contains(Cell::new(90, 90), Cell::new(95, 95)));
        assert!(!f.contains(Cell::new(90, 90), Cell::new(84, 96)));
    }

    #[test]
    fn fov_cells_enumerates_footprint() {
        let f = Fov::new(3);
        let cells: Vec<Cell> = f.cells(Cell::new(2, 2)).collect();
        assert_eq!(cells.len(), 9);
        assert_eq!(cells[0], Cell::new(1, 1));
        assert_eq!(cells[8], Cell::new(3, 3));
    }
}
