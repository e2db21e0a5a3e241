use serde::{Deserialize, Serialize};

use super::Mask;

/// Accepted bounding-box width/height range for a front-facing headset.
pub const ASPECT_RANGE: (f64, f64) = (1.3, 2.8);
/// Minimum component area / convex-hull area.
pub const MIN_SOLIDITY: f64 = 0.80;

/// Shape descriptors of a mask's largest component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskQuality {
    pub component_area: usize,
    /// Inclusive `(row0, col0, row1, col1)`.
    pub bbox: (usize, usize, usize, usize),
    pub aspect_ratio: f64,
    pub solidity: f64,
    pub valid: bool,
}

impl MaskQuality {
    fn empty() -> Self {
        Self {
            component_area: 0,
            bbox: (0, 0, 0, 0),
            aspect_ratio: 0.0,
            solidity: 0.0,
            valid: false,
        }
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise, no collinear points) by the monotone chain.
pub fn convex_hull(mut points: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    points.sort_unstable();
    points.dedup();
    if points.len() < 3 {
        return points;
    }
    let mut lower: Vec<(i64, i64)> = Vec::with_capacity(points.len());
    for &p in &points {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::with_capacity(points.len());
    for &p in points.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(poly: &[(i64, i64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: i64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() as f64 / 2.0
}

/// Corner points of every foreground pixel that can lie on the hull. Within a
/// row only the outermost pixels contribute.
fn hull_candidates(mask: &Mask) -> Vec<(i64, i64)> {
    let mut pts = Vec::new();
    for r in 0..mask.height() {
        let row = &mask.bits()[r * mask.width()..(r + 1) * mask.width()];
        let first = row.iter().position(|&b| b);
        let last = row.iter().rposition(|&b| b);
        if let (Some(c0), Some(c1)) = (first, last) {
            let (r, c0, c1) = (r as i64, c0 as i64, c1 as i64);
            pts.extend([(r, c0), (r + 1, c0), (r, c1 + 1), (r + 1, c1 + 1)]);
        }
    }
    pts
}

/// Area, bounding box, aspect ratio and solidity of the largest 4-connected component.
/// Solidity uses the convex hull of pixel-corner points, so filled convex
/// pixel shapes such as rectangles score exactly 1.0.
pub fn mask_geometry(mask: &Mask) -> MaskQuality {
    let component = mask.largest_component();
    let area = component.area();
    let Some(bbox) = component.bbox() else {
        return MaskQuality::empty();
    };
    let (r0, c0, r1, c1) = bbox;
    let aspect_ratio = (c1 - c0 + 1) as f64 / (r1 - r0 + 1) as f64;
    let hull_area = polygon_area(&convex_hull(hull_candidates(&component)));
    let solidity = area as f64 / hull_area;
    let mut q = MaskQuality {
        component_area: area,
        bbox,
        aspect_ratio,
        solidity,
        valid: false,
    };
    q.valid = validate_mask(&q);
    q
}

/// Aspect ratio within [1.3, 2.8] and solidity of at least 0.80.
pub fn validate_mask(q: &MaskQuality) -> bool {
    q.component_area > 0
        && q.aspect_ratio >= ASPECT_RANGE.0
        && q.aspect_ratio <= ASPECT_RANGE.1
        && q.solidity >= MIN_SOLIDITY
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quality(aspect: f64, solidity: f64) -> MaskQuality {
        MaskQuality {
            component_area: 100,
            bbox: (0, 0, 9, 9),
            aspect_ratio: aspect,
            solidity,
            valid: false,
        }
    }

    #[test]
    fn threshold_examples() {
        assert!(validate_mask(&quality(1.5, 0.90)));
        assert!(!validate_mask(&quality(1.0, 0.95)));
        assert!(!validate_mask(&quality(2.0, 0.70)));
        assert!(validate_mask(&quality(1.3, 0.80)));
        assert!(validate_mask(&quality(2.8, 1.0)));
    }

    #[test]
    fn rectangle_and_square() {
        let q = mask_geometry(&Mask::rect(64, 64, 5, 5, 25, 35));
        assert_eq!(q.component_area, 600);
        assert_eq!(q.bbox, (5, 5, 24, 34));
        assert_eq!(q.aspect_ratio, 1.5);
        assert_eq!(q.solidity, 1.0);
        assert!(q.valid);

        let q = mask_geometry(&Mask::rect(64, 64, 10, 10, 30, 30));
        assert_eq!((q.aspect_ratio, q.solidity), (1.0, 1.0));
        assert!(!q.valid);
    }

    #[test]
    fn empty_mask_is_zeroed_and_invalid() {
        let q = mask_geometry(&Mask::empty(32, 32, super::super::MaskSource::Ingested));
        assert_eq!(q.component_area, 0);
        assert_eq!(q.solidity, 0.0);
        assert!(!q.valid);
    }

    #[test]
    fn hull_of_square_points() {
        let hull = convex_hull(vec![(0, 0), (2, 0), (1, 1), (2, 2), (0, 2), (1, 0)]);
        assert_eq!(hull.len(), 4);
        assert_eq!(polygon_area(&hull), 4.0);
    }
}
