use rand::Rng;

pub type P = (i64, i64);

fn cross(o: P, a: P, b: P) -> i128 {
    (a.0 - o.0) as i128 * (b.1 - o.1) as i128 - (a.1 - o.1) as i128 * (b.0 - o.0) as i128
}

fn strictly_between(p: P, q: P, r: P) -> bool {
    let (lo_x, hi_x) = (p.0.min(q.0), p.0.max(q.0));
    let (lo_y, hi_y) = (p.1.min(q.1), p.1.max(q.1));
    r != p && r != q && (lo_x..=hi_x).contains(&r.0) && (lo_y..=hi_y).contains(&r.1)
}

/// Hull vertices found by testing every ordered pair as a candidate edge
/// against every point: O(n^3). Counter-clockwise, starting at the
/// lexicographically smallest vertex, collinear points excluded.
pub fn brute_force_hull(points: &[P]) -> Vec<P> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut vertices: Vec<P> = Vec::new();
    for &p in &pts {
        for &q in &pts {
            if p == q {
                continue;
            }
            let is_edge = pts.iter().all(|&r| {
                let c = cross(p, q, r);
                c > 0 || (c == 0 && (r == p || r == q || strictly_between(p, q, r)))
            });
            if is_edge {
                vertices.push(p);
                vertices.push(q);
            }
        }
    }
    vertices.sort();
    vertices.dedup();
    if vertices.is_empty() {
        // every point collinear: no pair has all others strictly to one side
        return vec![pts[0], pts[pts.len() - 1]];
    }
    let n = vertices.len() as f64;
    let cx = vertices.iter().map(|v| v.0 as f64).sum::<f64>() / n;
    let cy = vertices.iter().map(|v| v.1 as f64).sum::<f64>() / n;
    vertices.sort_by(|a, b| {
        let ta = (a.1 as f64 - cy).atan2(a.0 as f64 - cx);
        let tb = (b.1 as f64 - cy).atan2(b.0 as f64 - cx);
        ta.total_cmp(&tb)
    });
    let start = vertices.iter().enumerate().min_by_key(|(_, v)| **v).map(|(i, _)| i).unwrap();
    vertices.rotate_left(start);
    vertices
}

/// Classic crossing-number test in floating point.
pub fn point_in_polygon(vertices: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = vertices[i];
        let (xj, yj) = vertices[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Per-pixel polygon membership, row-major, sampling each pixel at its
/// integer coordinates.
pub fn polygon_pixels(vertices: &[P], width: u32, height: u32) -> Vec<bool> {
    let fv: Vec<(f64, f64)> = vertices.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    let mut out = Vec::with_capacity((width * height) as usize);
    for y in 0..height {
        for x in 0..width {
            out.push(fv.len() >= 3 && point_in_polygon(&fv, x as f64, y as f64));
        }
    }
    out
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, range: i64) -> Vec<P> {
    (0..n).map(|_| (rng.random_range(-range..=range), rng.random_range(-range..=range))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_edge_midpoints() {
        let pts = [(0, 0), (2, 0), (4, 0), (4, 4), (0, 4), (2, 2), (0, 2)];
        assert_eq!(brute_force_hull(&pts), vec![(0, 0), (4, 0), (4, 4), (0, 4)]);
    }

    #[test]
    fn collinear_set() {
        assert_eq!(brute_force_hull(&[(3, 3), (1, 1), (2, 2)]), vec![(1, 1), (3, 3)]);
    }

    #[test]
    fn triangle_membership() {
        let tri = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];
        assert!(point_in_polygon(&tri, 1.0, 1.0));
        assert!(!point_in_polygon(&tri, 3.0, 3.0));
    }
}
