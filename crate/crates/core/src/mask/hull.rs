//! Andrew's monotone chain over integer lattice points.
//!
//! Points are sorted lexicographically, lower and upper chains are built with
//! a strict left-turn test, so collinear points on hull edges are dropped.
//! Exact integer arithmetic: no epsilon anywhere.

use serde::{Deserialize, Serialize};

use crate::model::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IPoint {
    pub x: i64,
    pub y: i64,
}

impl IPoint {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    /// Rounds half-up to the nearest pixel center.
    pub fn snap(p: Point) -> Self {
        Self { x: (p.x + 0.5).floor() as i64, y: (p.y + 0.5).floor() as i64 }
    }
}

/// Twice the signed area of triangle `o, a, b`; positive for a left turn.
#[inline]
pub fn cross(o: IPoint, a: IPoint, b: IPoint) -> i128 {
    (a.x - o.x) as i128 * (b.y - o.y) as i128 - (a.y - o.y) as i128 * (b.x - o.x) as i128
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("convex hull of an empty point set")]
pub struct EmptyHull;

/// Convex hull in counter-clockwise order (y axis up) starting at the
/// lexicographically smallest vertex. Degenerate input yields one point or
/// the two endpoints of a segment.
pub fn convex_hull(points: &[IPoint]) -> Result<Vec<IPoint>, EmptyHull> {
    if points.is_empty() {
        return Err(EmptyHull);
    }
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return Ok(pts);
    }

    let mut hull: Vec<IPoint> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    // all points collinear: the chains collapse onto the two extremes
    if hull.len() == 2 || hull.len() == 1 {
        return Ok(vec![pts[0], pts[pts.len() - 1]]);
    }
    Ok(hull)
}

/// Point-in-convex-polygon with boundary counted as inside. Works for the
/// degenerate hulls returned by [`convex_hull`] too.
pub fn hull_contains(hull: &[IPoint], p: IPoint) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, p) == 0 && p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
        }
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0),
    }
}
