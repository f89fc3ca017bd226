//! Brush geometry to hard-edged binary masks.
//!
//! Pixel `(i, j)` is sampled at the lattice point `(i, j)`. Input coordinates
//! are snapped half-up first, so every test below is exact integer math.
//! Polygon fills use the even-odd rule with a half-open crossing convention:
//! an edge crosses row `y` when exactly one endpoint has `y_end > y`, and a
//! pixel is inside when an odd number of crossings lie at or left of it.

use crate::model::{Brush, BrushAction, Point, RegionSpec};
use crate::raster::{BinaryMask, Size};

use super::hull::{convex_hull, IPoint};
use super::MaskError;

fn snap_all(points: &[Point]) -> Vec<IPoint> {
    points.iter().copied().map(IPoint::snap).collect()
}

/// Whether `p` lies within `width / 2` of segment `a..b`, decided exactly.
#[inline]
fn within_capsule(a: IPoint, b: IPoint, p: IPoint, width: u32) -> bool {
    let w2 = (width as i128) * (width as i128);
    let (dx, dy) = ((b.x - a.x) as i128, (b.y - a.y) as i128);
    let (px, py) = ((p.x - a.x) as i128, (p.y - a.y) as i128);
    let len2 = dx * dx + dy * dy;
    let t = px * dx + py * dy;
    if len2 == 0 || t <= 0 {
        return 4 * (px * px + py * py) <= w2;
    }
    if t >= len2 {
        let (qx, qy) = ((p.x - b.x) as i128, (p.y - b.y) as i128);
        return 4 * (qx * qx + qy * qy) <= w2;
    }
    let c = px * dy - py * dx;
    4 * c * c <= w2 * len2
}

fn stamp_segment(mask: &mut BinaryMask, a: IPoint, b: IPoint, width: u32) {
    let reach = (width as i64 + 1) / 2;
    let x0 = (a.x.min(b.x) - reach).max(0);
    let y0 = (a.y.min(b.y) - reach).max(0);
    let x1 = (a.x.max(b.x) + reach).min(mask.width() as i64 - 1);
    let y1 = (a.y.max(b.y) + reach).min(mask.height() as i64 - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if within_capsule(a, b, IPoint::new(x, y), width) {
                mask.set(x as u32, y as u32, true);
            }
        }
    }
}

fn pencil_into(mask: &mut BinaryMask, stroke: &[IPoint], width: u32) {
    match stroke {
        [] => {}
        [p] => stamp_segment(mask, *p, *p, width),
        _ => stroke.windows(2).for_each(|w| stamp_segment(mask, w[0], w[1], width)),
    }
}

/// Union of round-capped capsules of diameter `stroke_width` along each stroke.
pub fn rasterize_pencil(strokes: &[Vec<Point>], stroke_width: u32, size: Size) -> BinaryMask {
    let width = stroke_width.max(1);
    let mut mask = BinaryMask::new(size);
    for stroke in strokes {
        pencil_into(&mut mask, &snap_all(stroke), width);
    }
    mask
}

/// Even-odd fill of the closed polygon through `vertices`.
pub fn fill_polygon(vertices: &[IPoint], size: Size) -> BinaryMask {
    let mut mask = BinaryMask::new(size);
    let n = vertices.len();
    if n < 3 {
        return mask;
    }
    let y_min = vertices.iter().map(|p| p.y).min().unwrap().max(0);
    let y_max = vertices.iter().map(|p| p.y).max().unwrap().min(size.height as i64 - 1);
    let mut xs: Vec<i64> = Vec::new();
    for y in y_min..=y_max {
        xs.clear();
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if (a.y > y) != (b.y > y) {
                // x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y), taken as a ceiling
                let mut num = (y - a.y) as i128 * (b.x - a.x) as i128;
                let mut den = (b.y - a.y) as i128;
                if den < 0 {
                    num = -num;
                    den = -den;
                }
                let ceil = num.div_euclid(den) + i128::from(num.rem_euclid(den) != 0);
                xs.push(a.x + ceil as i64);
            }
        }
        xs.sort_unstable();
        for pair in xs.chunks_exact(2) {
            let start = pair[0].max(0);
            let end = pair[1].min(size.width as i64);
            if start < end {
                mask.fill_span(y as u32, start as u32, end as u32);
            }
        }
    }
    mask
}

/// Filled convex hull; fewer than three non-collinear points fall back to a
/// 1-px pencil rendering of the point or segment.
pub fn rasterize_hull(points: &[Point], size: Size) -> BinaryMask {
    let snapped = snap_all(points);
    let Ok(hull) = convex_hull(&snapped) else {
        return BinaryMask::new(size);
    };
    if hull.len() < 3 {
        let mut mask = BinaryMask::new(size);
        pencil_into(&mut mask, &hull, 1);
        return mask;
    }
    fill_polygon(&hull, size)
}

/// Even-odd fill of the implicitly closed lasso path.
pub fn rasterize_lasso(path: &[Point], size: Size) -> Result<BinaryMask, MaskError> {
    if path.len() < 3 {
        return Err(MaskError::LassoTooShort(path.len()));
    }
    Ok(fill_polygon(&snap_all(path), size))
}

pub fn rasterize_action(action: &BrushAction, size: Size) -> Result<BinaryMask, MaskError> {
    match action.brush {
        Brush::Pencil => Ok(rasterize_pencil(std::slice::from_ref(&action.points), action.stroke_width, size)),
        Brush::Hull => Ok(rasterize_hull(&action.points, size)),
        Brush::Lasso => rasterize_lasso(&action.points, size),
    }
}

/// Union of every brush action of a region.
pub fn rasterize_region(region: &RegionSpec, size: Size) -> Result<BinaryMask, MaskError> {
    let mut mask = BinaryMask::new(size);
    for action in &region.geometry {
        mask.union_with(&rasterize_action(action, size)?);
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    /// Independent even-odd ray cast in floating point.
    fn ray_cast(poly: &[(f64, f64)], px: f64, py: f64) -> bool {
        let mut inside = false;
        let n = poly.len();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = poly[i];
            let (xj, yj) = poly[j];
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    fn oracle_mask(poly: &[(f64, f64)], size: Size) -> BinaryMask {
        let mut m = BinaryMask::new(size);
        for y in 0..size.height {
            for x in 0..size.width {
                if ray_cast(poly, x as f64, y as f64) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    #[test]
    fn empty_pencil() {
        assert!(rasterize_pencil(&[], 5, Size::new(8, 8)).is_empty());
    }

    #[test]
    fn single_point_width_one_is_one_pixel() {
        let m = rasterize_pencil(&[pts(&[(3.0, 4.0)])], 1, Size::new(8, 8));
        assert_eq!(m.iter_set().collect::<Vec<_>>(), vec![(3, 4)]);
    }

    #[test]
    fn horizontal_segment_matches_distance_oracle() {
        let size = Size::new(32, 16);
        let m = rasterize_pencil(&[pts(&[(5.0, 8.0), (15.0, 8.0)])], 3, size);
        for y in 0..size.height {
            for x in 0..size.width {
                let (fx, fy) = (x as f64, y as f64);
                let cx = fx.clamp(5.0, 15.0);
                let d = ((fx - cx).powi(2) + (fy - 8.0).powi(2)).sqrt();
                assert_eq!(m.get(x, y), d <= 1.5, "({x},{y}) d={d}");
            }
        }
        // rows 7..=9 across 4..=16: the caps reach one column past each end
        assert_eq!(m.count_ones(), 3 * 13);
    }

    #[test]
    fn pencil_clips_at_canvas_edges() {
        let m = rasterize_pencil(&[pts(&[(-3.0, -3.0), (2.0, 2.0)])], 2, Size::new(4, 4));
        assert!(m.get(0, 0) && m.get(2, 2));
    }

    #[test]
    fn triangle_lasso_matches_ray_cast() {
        let tri = [(0.0, 0.0), (40.0, 0.0), (0.0, 40.0)];
        let size = Size::new(64, 64);
        let m = rasterize_lasso(&pts(&tri), size).unwrap();
        assert_eq!(m, oracle_mask(&tri, size));
        // x + y < 40 with x, y >= 0 and the half-open rule
        assert_eq!(m.count_ones(), 40 * 41 / 2);
    }

    #[test]
    fn lasso_orientation_does_not_matter() {
        let size = Size::new(64, 64);
        let cw = rasterize_lasso(&pts(&[(0.0, 0.0), (0.0, 40.0), (40.0, 0.0)]), size).unwrap();
        let ccw = rasterize_lasso(&pts(&[(0.0, 0.0), (40.0, 0.0), (0.0, 40.0)]), size).unwrap();
        assert_eq!(cw, ccw);
    }

    #[test]
    fn bow_tie_fills_two_lobes() {
        let bow = [(4.0, 4.0), (40.0, 40.0), (40.0, 4.0), (4.0, 40.0)];
        let size = Size::new(48, 48);
        let m = rasterize_lasso(&pts(&bow), size).unwrap();
        assert_eq!(m, oracle_mask(&bow, size));
        assert!(m.get(8, 22) && m.get(36, 22));
        assert!(!m.get(22, 8) && !m.get(22, 36));
    }

    #[test]
    fn lasso_needs_three_points() {
        assert_eq!(rasterize_lasso(&pts(&[(0.0, 0.0), (1.0, 1.0)]), Size::new(4, 4)), Err(MaskError::LassoTooShort(2)));
    }

    #[test]
    fn hull_square_matches_scanline_oracle() {
        let size = Size::new(64, 64);
        let corners: Vec<(f64, f64)> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].iter().map(|&(x, y)| (x * 32.0, y * 32.0)).collect();
        let m = rasterize_hull(&pts(&corners), size);
        assert_eq!(m, oracle_mask(&corners, size));
        assert_eq!(m.count_ones(), 32 * 32);
        let mut with_interior = corners.clone();
        with_interior.extend([(10.0, 10.0), (16.0, 3.0), (31.0, 31.0)]);
        assert_eq!(rasterize_hull(&pts(&with_interior), size), m);
    }

    #[test]
    fn collinear_hull_is_a_thin_segment() {
        let size = Size::new(16, 16);
        let m = rasterize_hull(&pts(&[(2.0, 2.0), (6.0, 6.0), (10.0, 10.0)]), size);
        assert_eq!(m, rasterize_pencil(&[pts(&[(2.0, 2.0), (10.0, 10.0)])], 1, size));
        assert_eq!(m.count_ones(), 9);
    }

    #[test]
    fn region_is_union_of_actions() {
        let size = Size::new(16, 16);
        let region = RegionSpec {
            region_id: "r0".into(),
            color: [255, 0, 0],
            description: String::new(),
            geometry: vec![
                BrushAction::pencil(pts(&[(1.0, 1.0)]), 1),
                BrushAction::pencil(pts(&[(10.0, 10.0)]), 1),
            ],
        };
        assert_eq!(rasterize_region(&region, size).unwrap().count_ones(), 2);
    }
}
