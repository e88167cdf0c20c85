//! Planar point-set measures used to characterize sweep results.

use std::f64::consts::PI;

pub type Pt = (f64, f64);

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Pt]) -> Vec<Pt> {
    let mut pts: Vec<Pt> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Pt> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Pt>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn polygon_area(poly: &[Pt]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
}

pub fn hull_area(points: &[Pt]) -> f64 {
    polygon_area(&convex_hull(points))
}

/// Principal direction through the centroid.
pub fn principal_axis(points: &[Pt]) -> (Pt, Pt) {
    let n = points.len().max(1) as f64;
    let c = (points.iter().map(|p| p.0).sum::<f64>() / n, points.iter().map(|p| p.1).sum::<f64>() / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.0 - c.0, p.1 - c.1);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (c, (angle.cos(), angle.sin()))
}

/// Largest distance of any point from the best-fit line.
pub fn max_line_distance(points: &[Pt]) -> f64 {
    let (c, d) = principal_axis(points);
    points.iter().map(|p| ((p.0 - c.0) * d.1 - (p.1 - c.1) * d.0).abs()).fold(0.0, f64::max)
}

/// The two extreme points along the principal direction.
pub fn segment_endpoints(points: &[Pt]) -> Option<(Pt, Pt)> {
    let (c, d) = principal_axis(points);
    let proj = |p: &Pt| (p.0 - c.0) * d.0 + (p.1 - c.1) * d.1;
    let lo = points.iter().min_by(|a, b| proj(a).total_cmp(&proj(b)))?;
    let hi = points.iter().max_by(|a, b| proj(a).total_cmp(&proj(b)))?;
    Some((*lo, *hi))
}

/// True when some sampled direction `d` has `d.p >= max_q d.q - tol`, i.e. `p`
/// lies on the boundary of the hull of `cloud` up to `tol`.
pub fn on_boundary(p: Pt, cloud: &[Pt], directions: usize, tol: f64) -> bool {
    (0..directions).any(|k| {
        let a = 2.0 * PI * k as f64 / directions as f64;
        let d = (a.cos(), a.sin());
        let support = cloud.iter().map(|q| q.0 * d.0 + q.1 * d.1).fold(f64::NEG_INFINITY, f64::max);
        p.0 * d.0 + p.1 * d.1 >= support - tol
    })
}

pub fn distance(a: Pt, b: Pt) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5), (0.5, 0.0)];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((hull_area(&pts) - 1.0).abs() < 1e-15);
        assert!(on_boundary((1.0, 0.5), &pts, 360, 1e-9));
        assert!(!on_boundary((0.5, 0.5), &pts, 360, 1e-9));
    }

    #[test]
    fn collinear_points() {
        let pts: Vec<Pt> = (0..10).map(|k| (k as f64, 2.0 * k as f64 + 1.0)).collect();
        assert!(max_line_distance(&pts) < 1e-12);
        assert!(hull_area(&pts) < 1e-12);
        let (a, b) = segment_endpoints(&pts).unwrap();
        let mut ends = [a, b];
        ends.sort_by(|x, y| x.0.total_cmp(&y.0));
        assert_eq!(ends, [(0.0, 1.0), (9.0, 19.0)]);
    }
}
