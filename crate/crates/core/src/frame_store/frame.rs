use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FrameError;

/// Lower plausibility bound for a radiometric reading, °C.
pub const MIN_PLAUSIBLE_C: f64 = -40.0;
/// Upper plausibility bound for a radiometric reading, °C.
pub const MAX_PLAUSIBLE_C: f64 = 150.0;
/// Smallest accepted frame side, pixels.
pub const MIN_FRAME_SIDE: usize = 16;
/// Fractional digits written to frame CSV files.
pub const CSV_DECIMALS: usize = 6;

/// One timestamped matrix of absolute per-pixel temperatures (°C), row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiometricFrame {
    timestamp_ms: i64,
    frame_index: usize,
    height: usize,
    width: usize,
    temps: Vec<f64>,
    implausible: bool,
}

impl RadiometricFrame {
    pub fn new(
        timestamp_ms: i64,
        frame_index: usize,
        height: usize,
        width: usize,
        temps: Vec<f64>,
    ) -> Result<Self, FrameError> {
        if height < MIN_FRAME_SIDE || width < MIN_FRAME_SIDE {
            return Err(FrameError::TooSmall { height, width });
        }
        if temps.len() != height * width {
            return Err(FrameError::Shape {
                expected: height * width,
                found: temps.len(),
            });
        }
        let mut implausible = false;
        for (k, &t) in temps.iter().enumerate() {
            if !t.is_finite() {
                return Err(FrameError::NonFinite {
                    row: k / width,
                    col: k % width,
                });
            }
            if !(MIN_PLAUSIBLE_C..=MAX_PLAUSIBLE_C).contains(&t) {
                implausible = true;
            }
        }
        if implausible {
            log::warn!("frame {timestamp_ms}: temperatures outside [{MIN_PLAUSIBLE_C}, {MAX_PLAUSIBLE_C}] °C");
        }
        Ok(Self {
            timestamp_ms,
            frame_index,
            height,
            width,
            temps,
            implausible,
        })
    }

    /// A frame with every pixel at `value`.
    pub fn constant(
        timestamp_ms: i64,
        height: usize,
        width: usize,
        value: f64,
    ) -> Result<Self, FrameError> {
        Self::new(timestamp_ms, 0, height, width, vec![value; height * width])
    }

    pub fn timestamp_ms(&self) -> i64 {
        self.timestamp_ms
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn with_frame_index(mut self, index: usize) -> Self {
        self.frame_index = index;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.temps[row * self.width + col]
    }

    /// True when at least one pixel lies outside the plausibility bounds.
    pub fn implausible(&self) -> bool {
        self.implausible
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.temps.len() * 10);
        for row in self.temps.chunks(self.width) {
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{:.*}", CSV_DECIMALS, v);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), FrameError> {
        fs::write(path, self.to_csv_string()).map_err(|e| FrameError::io(path, e))
    }
}

/// Parse a rectangular CSV of °C values. Ragged rows and non-finite cells are errors.
pub fn parse_frame_csv(
    text: &str,
    timestamp_ms: i64,
    frame_index: usize,
) -> Result<RadiometricFrame, FrameError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut width = None;
    let mut temps = Vec::new();
    let mut height = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FrameError::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(FrameError::Ragged {
                    row,
                    expected: w,
                    found: record.len(),
                })
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| FrameError::Parse {
                row,
                message: format!("column {col}: not a number: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(FrameError::NonFinite { row, col });
            }
            temps.push(value);
        }
        height += 1;
    }
    let width = width.ok_or(FrameError::Parse {
        row: 0,
        message: "empty frame".into(),
    })?;
    RadiometricFrame::new(timestamp_ms, frame_index, height, width, temps)
}

/// Extract the epoch-millisecond stamp from a `<prefix>_<epochms>.csv` file name.
pub fn timestamp_from_name(path: &Path, prefix: &str) -> Option<i64> {
    let stem = path.file_stem()?.to_str()?;
    stem.strip_prefix(prefix)?.strip_prefix('_')?.parse().ok()
}

/// Load `frame_<epochms>.csv`.
pub fn load_frame(path: &Path) -> Result<RadiometricFrame, FrameError> {
    let timestamp = timestamp_from_name(path, "frame").ok_or_else(|| FrameError::Name {
        path: path.display().to_string(),
    })?;
    let text = fs::read_to_string(path).map_err(|e| FrameError::io(path, e))?;
    parse_frame_csv(&text, timestamp, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_of(rows: usize, cols: usize, cell: &str) -> String {
        let row = vec![cell; cols].join(",");
        let mut s = String::new();
        for _ in 0..rows {
            s.push_str(&row);
            s.push('\n');
        }
        s
    }

    #[test]
    fn constant_field_parses() {
        let f = parse_frame_csv(&csv_of(192, 256, "25.0"), 1000, 0).unwrap();
        assert_eq!((f.height(), f.width()), (192, 256));
        assert!(f.temps().iter().all(|&t| t == 25.0));
        assert!(!f.implausible());
    }

    #[test]
    fn ragged_rows_name_the_row() {
        let mut text = csv_of(1, 256, "25.0");
        text.push_str(&csv_of(1, 255, "25.0"));
        match parse_frame_csv(&text, 0, 0) {
            Err(FrameError::Ragged { row, expected, found }) => {
                assert_eq!((row, expected, found), (1, 256, 255));
            }
            other => panic!("expected ragged error, got {other:?}"),
        }
    }

    #[test]
    fn nan_cell_reports_position() {
        let mut rows: Vec<Vec<&str>> = vec![vec!["20.5"; 16]; 16];
        rows[3][7] = "NaN";
        let text: String = rows.iter().map(|r| r.join(",") + "\n").collect();
        match parse_frame_csv(&text, 0, 0) {
            Err(FrameError::NonFinite { row, col }) => assert_eq!((row, col), (3, 7)),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn implausible_values_are_flagged_not_rejected() {
        let mut temps = vec![22.0; 16 * 16];
        temps[5] = 400.0;
        let f = RadiometricFrame::new(0, 0, 16, 16, temps).unwrap();
        assert!(f.implausible());
    }

    #[test]
    fn tiny_frames_rejected() {
        assert!(matches!(
            RadiometricFrame::constant(0, 8, 32, 20.0),
            Err(FrameError::TooSmall { .. })
        ));
    }

    #[test]
    fn timestamp_from_file_name() {
        let p = Path::new("/x/frames/frame_1712345678901.csv");
        assert_eq!(timestamp_from_name(p, "frame"), Some(1_712_345_678_901));
        assert_eq!(timestamp_from_name(Path::new("frame.csv"), "frame"), None);
    }
}
