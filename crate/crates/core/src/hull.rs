//! Convex-hull scheme in the plane: the hypothesis is a convex set, its cost
//! the perimeter and its margin the distance to the set.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{ood_bound, EpsilonCache, OodBound};
use crate::complexity::{ComplexityReport, Flags};
use crate::error::{usage, Error, Result};
use crate::model::Scheme;
use crate::rng::{stream, stream_rng};

pub type Point = [f64; 2];

/// Membership tolerance for hull boundary points.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Distance beyond the boundary at which shifted mass is placed.
const OUTSIDE_OFFSET: f64 = 1e-9;

/// Minimum Monte Carlo sample count for shift estimates.
pub const MIN_MC_SAMPLES: usize = 10_000;

/// A convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullModel {
    pub vertices: Vec<Point>,
    pub perimeter: f64,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Smallest convex polygon containing `points` (Andrew's monotone chain).
pub fn convex_hull(points: &[Point]) -> Result<HullModel> {
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return usage("hull points must be finite");
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::Degenerate("need at least three distinct points".into()));
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Err(Error::Degenerate("all points are collinear".into()));
    }
    let perimeter = (0..hull.len()).map(|i| dist(hull[i], hull[(i + 1) % hull.len()])).sum();
    Ok(HullModel { vertices: hull, perimeter })
}

impl HullModel {
    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn contains(&self, p: Point) -> bool {
        self.edges().all(|(a, b)| cross(a, b, p) >= 0.0)
    }

    /// Distance to the boundary, for any point.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the complement of the hull (0 outside).
    pub fn inward_distance(&self, p: Point) -> f64 {
        if self.contains(p) {
            self.boundary_distance(p)
        } else {
            0.0
        }
    }

    pub fn centroid(&self) -> Point {
        // area centroid
        let mut a = 0.0;
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let c = p[0] * q[1] - q[0] * p[1];
            a += c;
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        [cx / (3.0 * a), cy / (3.0 * a)]
    }

    /// Parameter `t > 0` at which the ray `origin + t dir` leaves the hull,
    /// for `origin` inside.
    fn exit_param(&self, origin: Point, dir: Point) -> f64 {
        let mut t = f64::INFINITY;
        for (a, b) in self.edges() {
            // outward normal of a CCW edge
            let n = [b[1] - a[1], a[0] - b[0]];
            let den = n[0] * dir[0] + n[1] * dir[1];
            if den > 0.0 {
                let num = n[0] * (a[0] - origin[0]) + n[1] * (a[1] - origin[1]);
                t = t.min(num / den);
            }
        }
        t
    }
}

/// Distance from `p` to the hull: 0 inside or on it.
pub fn hull_margin(h: &HullModel, p: Point) -> f64 {
    if h.contains(p) {
        0.0
    } else {
        h.boundary_distance(p)
    }
}

/// Convex-hull scheme: cost is the perimeter, margin the distance to the set.
#[derive(Debug, Clone, Copy, Default)]
pub struct HullScheme;

impl Scheme for HullScheme {
    type Hypothesis = HullModel;
    type Sample = Point;

    fn cost(&self, h: &HullModel) -> f64 {
        h.perimeter
    }

    fn margin(&self, h: &HullModel, x: &Point) -> Result<f64> {
        Ok(hull_margin(h, *x))
    }
}

fn flags_at(h: &HullModel, p: Point, r: f64, tol: f64) -> Flags {
    let margin = hull_margin(h, p);
    let inward = h.inward_distance(p);
    Flags {
        cond_i: margin > 0.0 || inward < r,
        cond_ii: margin <= tol && h.boundary_distance(p) <= tol,
        cond_iii: margin > tol,
        indeterminate: false,
    }
}

/// Complexity of the hull under closed balls of radius `r` around each
/// point, with each point as its own approximation.
pub fn hull_complexity(points: &[Point], h: &HullModel, r: f64, tol: f64) -> Result<ComplexityReport> {
    if !(r >= 0.0 && r.is_finite()) {
        return usage("radius must be non-negative");
    }
    if !(tol >= 0.0) {
        return usage("tolerance must be non-negative");
    }
    let flags = points.iter().map(|&p| flags_at(h, p, r, tol)).collect();
    Ok(ComplexityReport::from_flags(flags, tol))
}

/// Uniform sample from the unit disk.
pub fn sample_unit_disk<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let th = 2.0 * PI * rng.random::<f64>();
            [r * th.cos(), r * th.sin()]
        })
        .collect()
}

/// Training sample for the hull demo.
pub fn hull_training_points(n: usize, seed: u64) -> Vec<Point> {
    sample_unit_disk(&mut stream_rng(seed, stream::HULL_DATA), n)
}

/// How mass is moved to build the shifted distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    /// The outer annulus of the disk is projected onto the unit circle.
    AnnulusToBoundary,
    /// Mass in an inner band along the hull boundary moves radially outside.
    BoundaryBandRadial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    pub mu: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return usage("mu must be positive");
        }
        if self.mc_samples < MIN_MC_SAMPLES {
            return usage(format!("mc_samples must be at least {MIN_MC_SAMPLES}"));
        }
        Ok(())
    }
}

/// Monte Carlo risk of the hull under a shifted distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodRisk {
    pub risk: f64,
    pub std_error: f64,
    /// Inner radius of the annulus, or thickness of the boundary band.
    pub shift_param: f64,
    /// Transport cost actually spent (Monte Carlo for the band shift).
    pub spent: f64,
    pub samples: usize,
}

/// Transport cost of projecting the annulus `[a, 1]` onto the unit circle
/// under the uniform law on the disk.
pub fn annulus_cost(a: f64) -> f64 {
    (1.0 - a).powi(2) * (1.0 + 2.0 * a) / 3.0
}

/// Inner radius whose annulus exhausts the budget `mu`.
pub fn annulus_radius(mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return usage("mu must be positive");
    }
    if mu > annulus_cost(0.0) {
        return usage(format!("mu exceeds the maximal transport budget {}", annulus_cost(0.0)));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if annulus_cost(mid) > mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn finish(outside: usize, n: usize, shift_param: f64, spent: f64) -> OodRisk {
    let p = outside as f64 / n as f64;
    OodRisk { risk: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), shift_param, spent, samples: n }
}

/// Empirical risk `P'{margin > 0}` of the hull under the shift.
pub fn ood_empirical_risk(h: &HullModel, shift: &ShiftSpec) -> Result<OodRisk> {
    shift.validate()?;
    let mut rng = stream_rng(shift.seed, stream::SHIFT_MC);
    let sample = sample_unit_disk(&mut rng, shift.mc_samples);
    let n = sample.len();
    match shift.kind {
        ShiftKind::AnnulusToBoundary => {
            let ra = annulus_radius(shift.mu)?;
            let outside = sample
                .iter()
                .filter(|p| {
                    let r = p[0].hypot(p[1]);
                    if r >= ra {
                        // projected onto the circle, which lies outside the hull
                        let q = if r > 0.0 { [p[0] / r, p[1] / r] } else { [1.0, 0.0] };
                        hull_margin(h, q) > 0.0
                    } else {
                        hull_margin(h, **p) > 0.0
                    }
                })
                .count();
            Ok(finish(outside, n, ra, shift.mu))
        }
        ShiftKind::BoundaryBandRadial => {
            let c = h.centroid();
            let mut already = 0usize;
            // (inward distance, cost of moving just outside along the centroid ray)
            let mut inner: Vec<(f64, f64)> = Vec::with_capacity(n);
            for &p in &sample {
                if !h.contains(p) {
                    already += 1;
                    continue;
                }
                let d = [p[0] - c[0], p[1] - c[1]];
                let len = d[0].hypot(d[1]);
                let cost = if len > 0.0 { (h.exit_param(c, d) - 1.0).max(0.0) * len } else { h.boundary_distance(p) };
                inner.push((h.boundary_distance(p), cost + OUTSIDE_OFFSET));
            }
            inner.sort_by(|a, b| a.0.total_cmp(&b.0));
            let budget = shift.mu * n as f64;
            let total: f64 = inner.iter().map(|x| x.1).sum();
            if total < budget {
                return usage(format!("mu exceeds the maximal transport budget {}", total / n as f64));
            }
            // largest band whose Monte Carlo cost stays within the budget
            let mut spent = 0.0;
            let mut moved = 0usize;
            while moved < inner.len() {
                let next = spent + inner[moved].1;
                // points at equal depth move together
                let mut j = moved + 1;
                let mut group = next;
                while j < inner.len() && inner[j].0 == inner[moved].0 {
                    group += inner[j].1;
                    j += 1;
                }
                if group > budget {
                    break;
                }
                spent = group;
                moved = j;
            }
            let thickness = match (moved.checked_sub(1).map(|i| inner[i].0), inner.get(moved)) {
                (Some(a), Some(b)) => 0.5 * (a + b.0),
                (None, Some(b)) => 0.5 * b.0,
                (Some(a), None) => a,
                (None, None) => 0.0,
            };
            Ok(finish(already + moved, n, thickness, spent / n as f64))
        }
    }
}

/// Out-of-distribution bound for the hull over a radius grid.
pub fn hull_r_sweep(
    points: &[Point],
    h: &HullModel,
    radii: &[f64],
    mu: f64,
    beta: f64,
    cache: &mut EpsilonCache,
) -> Result<OodBound> {
    let n = points.len();
    let mut triples = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0 && r.is_finite()) {
            return usage("radii must be positive");
        }
        let k = hull_complexity(points, h, r, BOUNDARY_TOL)?.s_star;
        triples.push((r, k, cache.get(n, k, beta)?.eps_hi));
    }
    ood_bound(&triples, mu, beta)
}

/// Radii `mu + 2 mu (i - 1)` for `i = 1..=h`.
pub fn default_radii(mu: f64, h: usize) -> Vec<f64> {
    (0..h).map(|i| mu + 2.0 * mu * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> HullModel {
        convex_hull(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]).unwrap()
    }

    #[test]
    fn square_hull() {
        let h = square();
        assert_eq!(h.vertices.len(), 4);
        assert!((h.perimeter - 4.0).abs() < 1e-12);
        assert_eq!(hull_margin(&h, [0.5, 0.5]), 0.0);
        assert!((hull_margin(&h, [2.0, 0.5]) - 1.0).abs() < 1e-15);
        assert!((hull_margin(&h, [2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn triangle_is_itself() {
        let h = convex_hull(&[[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]]).unwrap();
        assert_eq!(h.vertices.len(), 3);
        assert!((h.perimeter - 12.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_is_degenerate() {
        let r = convex_hull(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        assert!(matches!(r, Err(Error::Degenerate(_))));
        assert!(convex_hull(&[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn square_complexity() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let h = square();
        let s = |r| hull_complexity(&pts, &h, r, BOUNDARY_TOL).unwrap().s_star;
        assert_eq!(s(0.0), 4);
        assert_eq!(s(0.4), 4);
        assert_eq!(s(0.6), 5);
    }

    #[test]
    fn annulus_radius_spends_budget() {
        for mu in [1e-6, 1e-3, 0.1, 0.3] {
            let a = annulus_radius(mu).unwrap();
            assert!((annulus_cost(a) - mu).abs() < 1e-14);
        }
        assert!(annulus_radius(0.34).is_err());
    }

    #[test]
    fn centroid_of_square() {
        let c = square().centroid();
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
    }
}
