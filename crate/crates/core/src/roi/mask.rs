use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::frame_store::FrameError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    Ingested,
    ClassicalSegmenter,
}

/// Binary headset mask with the parent frame's dimensions, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
    source: MaskSource,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>, source: MaskSource) -> Self {
        assert_eq!(bits.len(), height * width, "mask bits must match dimensions");
        Self {
            height,
            width,
            bits,
            source,
        }
    }

    pub fn empty(height: usize, width: usize, source: MaskSource) -> Self {
        Self::new(height, width, vec![false; height * width], source)
    }

    /// Mask from a predicate over `(row, col)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        source: MaskSource,
        f: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let bits = (0..height * width).map(|k| f(k / width, k % width)).collect();
        Self::new(height, width, bits, source)
    }

    /// Filled axis-aligned rectangle covering rows `r0..r1` and cols `c0..c1` (exclusive ends).
    pub fn rect(height: usize, width: usize, r0: usize, c0: usize, r1: usize, c1: usize) -> Self {
        Self::from_fn(height, width, MaskSource::Ingested, |r, c| {
            (r0..r1).contains(&r) && (c0..c1).contains(&c)
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn source(&self) -> MaskSource {
        self.source
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Foreground pixel coordinates in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| (k / self.width, k % self.width))
    }

    /// Inclusive bounding box `(row0, col0, row1, col1)` of the foreground.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (r, c) in self.pixels() {
            bb = Some(match bb {
                None => (r, c, r, c),
                Some((r0, c0, r1, c1)) => (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
            });
        }
        bb
    }

    /// Shift the foreground by `(dr, dc)`; pixels leaving the frame are dropped.
    pub fn translated(&self, dr: isize, dc: isize) -> Self {
        let mut out = Self::empty(self.height, self.width, self.source);
        for (r, c) in self.pixels() {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr >= 0 && nc >= 0 && (nr as usize) < self.height && (nc as usize) < self.width {
                out.set(nr as usize, nc as usize, true);
            }
        }
        out
    }

    /// Nearest-neighbour upscale by an integer factor.
    pub fn scaled(&self, factor: usize) -> Self {
        let (h, w) = (self.height * factor, self.width * factor);
        Self::from_fn(h, w, self.source, |r, c| self.get(r / factor, c / factor))
    }

    /// Largest 4-connected foreground component; ties go to the component found first in
    /// raster order.
    pub fn largest_component(&self) -> Mask {
        let mut label = vec![0u32; self.bits.len()];
        let mut best: (usize, u32) = (0, 0);
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || label[start] != 0 {
                continue;
            }
            next += 1;
            label[start] = next;
            stack.push(start);
            let mut size = 0usize;
            while let Some(k) = stack.pop() {
                size += 1;
                let (r, c) = (k / self.width, k % self.width);
                let mut visit = |nk: usize| {
                    if self.bits[nk] && label[nk] == 0 {
                        label[nk] = next;
                        stack.push(nk);
                    }
                };
                if r > 0 {
                    visit(k - self.width);
                }
                if r + 1 < self.height {
                    visit(k + self.width);
                }
                if c > 0 {
                    visit(k - 1);
                }
                if c + 1 < self.width {
                    visit(k + 1);
                }
            }
            if size > best.0 {
                best = (size, next);
            }
        }
        let keep = best.1;
        Mask::new(
            self.height,
            self.width,
            label.iter().map(|&l| keep != 0 && l == keep).collect(),
            self.source,
        )
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.bits.len() * 2);
        for row in self.bits.chunks(self.width) {
            for (c, &b) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", b as u8);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Mask, String> {
        let mut width = None;
        let mut bits = Vec::new();
        let mut height = 0;
        for (row, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut n = 0;
            for field in line.split(',') {
                bits.push(match field.trim() {
                    "0" => false,
                    "1" => true,
                    other => return Err(format!("row {row}: expected 0 or 1, found {other:?}")),
                });
                n += 1;
            }
            match width {
                None => width = Some(n),
                Some(w) if w != n => {
                    return Err(format!("row {row}: expected {w} columns, found {n}"))
                }
                _ => {}
            }
            height += 1;
        }
        let width = width.ok_or("empty mask")?;
        Ok(Mask::new(height, width, bits, MaskSource::Ingested))
    }

    pub fn load_csv(path: &Path) -> Result<Mask, FrameError> {
        let text = fs::read_to_string(path).map_err(|e| FrameError::io(path, e))?;
        Mask::parse_csv(&text).map_err(|message| FrameError::Mask {
            path: path.display().to_string(),
            message,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), FrameError> {
        fs::write(path, self.to_csv_string()).map_err(|e| FrameError::io(path, e))
    }
}
