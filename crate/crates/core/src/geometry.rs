//! Pixel-space primitives shared by the engine, scenes and the baseline.
//!
//! All coordinates are 1-indexed and all ranges are inclusive.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Image axis. `Rows` indexes `1..=N1` (height), `Cols` indexes `1..=N2` (width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Rows,
    Cols,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Rows => Axis::Cols,
            Axis::Cols => Axis::Rows,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Rows => "rows",
            Axis::Cols => "cols",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which side of the split a query region covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `[1, X]`
    Low,
    /// `[X + 1, N]`
    High,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Low => "low",
            Side::High => "high",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Image size as `rows x cols` (`N1 x N2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
}

impl Dims {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("image dims must be positive, got {rows}x{cols}")));
        }
        Ok(Self { rows, cols })
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::Rows => self.rows,
            Axis::Cols => self.cols,
        }
    }

    pub fn full_rect(&self) -> Rect {
        Rect { row_lo: 1, row_hi: self.rows, col_lo: 1, col_hi: self.cols }
    }

    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for Dims {
    type Err = Error;

    /// Parses `ROWSxCOLS`, e.g. `200x300`.
    fn from_str(s: &str) -> Result<Self> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::invalid(format!("expected ROWSxCOLS, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad dimension {v:?} in {s:?}")))
        };
        Dims::new(parse(r)?, parse(c)?)
    }
}

/// A pixel coordinate `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub row: usize,
    pub col: usize,
}

impl Point {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn coord(&self, axis: Axis) -> usize {
        match axis {
            Axis::Rows => self.row,
            Axis::Cols => self.col,
        }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        (dr * dr + dc * dc).sqrt()
    }
}

impl FromStr for Point {
    type Err = Error;

    /// Parses `ROW,COL`.
    fn from_str(s: &str) -> Result<Self> {
        let (r, c) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("expected ROW,COL, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad coordinate {v:?} in {s:?}")))
        };
        Ok(Point::new(parse(r)?, parse(c)?))
    }
}

/// Inclusive, 1-indexed pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub row_lo: usize,
    pub row_hi: usize,
    pub col_lo: usize,
    pub col_hi: usize,
}

impl Rect {
    pub fn new(row_lo: usize, row_hi: usize, col_lo: usize, col_hi: usize) -> Self {
        Self { row_lo, row_hi, col_lo, col_hi }
    }

    /// Square of side `side` with its top-left pixel at `(row, col)`.
    pub fn square(row: usize, col: usize, side: usize) -> Self {
        Self::new(row, row + side - 1, col, col + side - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.row_lo == 0 || self.col_lo == 0 || self.row_hi < self.row_lo || self.col_hi < self.col_lo
    }

    pub fn height(&self) -> usize {
        if self.is_empty() { 0 } else { self.row_hi - self.row_lo + 1 }
    }

    pub fn width(&self) -> usize {
        if self.is_empty() { 0 } else { self.col_hi - self.col_lo + 1 }
    }

    pub fn is_square(&self) -> bool {
        !self.is_empty() && self.height() == self.width()
    }

    pub fn interval(&self, axis: Axis) -> (usize, usize) {
        match axis {
            Axis::Rows => (self.row_lo, self.row_hi),
            Axis::Cols => (self.col_lo, self.col_hi),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.row_lo..=self.row_hi).contains(&p.row) && (self.col_lo..=self.col_hi).contains(&p.col)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.row_lo >= self.row_lo
            && other.row_hi <= self.row_hi
            && other.col_lo >= self.col_lo
            && other.col_hi <= self.col_hi
    }

    pub fn within(&self, dims: Dims) -> bool {
        !self.is_empty() && dims.full_rect().contains_rect(self)
    }

    /// Center pixel, rounding toward the low corner for even sides.
    pub fn center(&self) -> Point {
        Point::new((self.row_lo + self.row_hi) / 2, (self.col_lo + self.col_hi) / 2)
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rows [{},{}] cols [{},{}]", self.row_lo, self.row_hi, self.col_lo, self.col_hi)
    }
}
