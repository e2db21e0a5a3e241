use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roi::Mask;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("mask shapes differ: {a:?} vs {b:?}")]
pub struct ShapeError {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub dice: f64,
    pub iou: f64,
    /// Pixels; `+inf` when exactly one mask is empty.
    pub hd95: f64,
    pub asd: f64,
}

/// Foreground pixels with a background (or out-of-frame) 4-neighbour.
pub fn boundary(mask: &Mask) -> Vec<(usize, usize)> {
    let (h, w) = (mask.height(), mask.width());
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let edge = r == 0
                || c == 0
                || r + 1 == h
                || c + 1 == w
                || !mask.get(r - 1, c)
                || !mask.get(r + 1, c)
                || !mask.get(r, c - 1)
                || !mask.get(r, c + 1);
            if edge {
                out.push((r, c));
            }
        }
    }
    out
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let mut first = None;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        match first {
            None => {
                first = Some(q);
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                k = 0;
            }
            Some(_) => loop {
                let p = v[k];
                let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= z[k] && k > 0 {
                    k -= 1;
                    continue;
                }
                if s <= z[k] {
                    // k == 0 and the new parabola dominates everywhere
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            },
        }
    }
    if first.is_none() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from every pixel to the nearest seed.
pub fn squared_distance_map(h: usize, w: usize, seeds: &[(usize, usize)]) -> Vec<f64> {
    let mut grid = vec![f64::INFINITY; h * w];
    for &(r, c) in seeds {
        grid[r * w + c] = 0.0;
    }
    let mut col = vec![0.0; h];
    let mut tmp = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = grid[r * w + c];
        }
        edt_1d(&col, &mut tmp);
        for r in 0..h {
            grid[r * w + c] = tmp[r];
        }
    }
    let mut row = vec![0.0; w];
    for r in 0..h {
        edt_1d(&grid[r * w..(r + 1) * w], &mut row);
        grid[r * w..(r + 1) * w].copy_from_slice(&row);
    }
    grid
}

/// Nearest-rank percentile of a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Overlap and boundary-distance agreement between a predicted and a true mask.
/// Distances are symmetric: both masks' boundary pixels contribute their
/// nearest distance to the other boundary.
pub fn seg_metrics(pred: &Mask, truth: &Mask) -> Result<SegMetrics, ShapeError> {
    let (h, w) = (pred.height(), pred.width());
    if (h, w) != (truth.height(), truth.width()) {
        return Err(ShapeError {
            a: (h, w),
            b: (truth.height(), truth.width()),
        });
    }
    let (a, b) = (pred.area(), truth.area());
    let inter = pred
        .bits()
        .iter()
        .zip(truth.bits())
        .filter(|(x, y)| **x && **y)
        .count();
    if a == 0 && b == 0 {
        return Ok(SegMetrics {
            dice: 1.0,
            iou: 1.0,
            hd95: 0.0,
            asd: 0.0,
        });
    }
    let dice = 2.0 * inter as f64 / (a + b) as f64;
    let iou = inter as f64 / (a + b - inter) as f64;
    if a == 0 || b == 0 {
        return Ok(SegMetrics {
            dice,
            iou,
            hd95: f64::INFINITY,
            asd: f64::INFINITY,
        });
    }
    let (ba, bb) = (boundary(pred), boundary(truth));
    let da = squared_distance_map(h, w, &ba);
    let db = squared_distance_map(h, w, &bb);
    let mut d: Vec<f64> = ba
        .iter()
        .map(|&(r, c)| db[r * w + c].sqrt())
        .chain(bb.iter().map(|&(r, c)| da[r * w + c].sqrt()))
        .collect();
    d.sort_unstable_by(f64::total_cmp);
    let asd = d.iter().sum::<f64>() / d.len() as f64;
    Ok(SegMetrics {
        dice,
        iou,
        hd95: percentile(&d, 95.0),
        asd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(h: usize, w: usize, seeds: &[(usize, usize)]) -> Vec<f64> {
        (0..h * w)
            .map(|k| {
                let (r, c) = ((k / w) as f64, (k % w) as f64);
                seeds
                    .iter()
                    .map(|&(a, b)| (r - a as f64).powi(2) + (c - b as f64).powi(2))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn distance_map_matches_brute_force() {
        let seeds = [(0, 0), (5, 7), (9, 2), (3, 11)];
        assert_eq!(squared_distance_map(10, 12, &seeds), brute(10, 12, &seeds));
        assert!(squared_distance_map(4, 4, &[]).iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn identical_masks() {
        let m = Mask::rect(32, 32, 4, 4, 20, 28);
        assert_eq!(
            seg_metrics(&m, &m).unwrap(),
            SegMetrics {
                dice: 1.0,
                iou: 1.0,
                hd95: 0.0,
                asd: 0.0
            }
        );
    }

    #[test]
    fn half_overlap() {
        // two 10x10 squares sharing 50 pixels
        let a = Mask::rect(40, 40, 0, 0, 10, 10);
        let b = Mask::rect(40, 40, 5, 0, 15, 10);
        let s = seg_metrics(&a, &b).unwrap();
        assert!((s.dice - 0.5).abs() < 1e-12);
        assert!((s.iou - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn single_pixels_three_apart() {
        let a = Mask::rect(20, 20, 5, 5, 6, 6);
        let b = Mask::rect(20, 20, 5, 8, 6, 9);
        let s = seg_metrics(&a, &b).unwrap();
        assert_eq!((s.hd95, s.asd), (3.0, 3.0));
        assert_eq!((s.dice, s.iou), (0.0, 0.0));
    }

    #[test]
    fn empty_cases() {
        let e = Mask::empty(20, 20, crate::roi::MaskSource::Ingested);
        let m = Mask::rect(20, 20, 2, 2, 5, 5);
        assert_eq!(seg_metrics(&e, &e).unwrap().dice, 1.0);
        let s = seg_metrics(&e, &m).unwrap();
        assert_eq!((s.dice, s.iou), (0.0, 0.0));
        assert!(s.hd95.is_infinite() && s.asd.is_infinite());
        assert!(seg_metrics(&m, &Mask::rect(21, 20, 0, 0, 1, 1)).is_err());
    }
}
