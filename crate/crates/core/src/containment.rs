//! Whether a region around a point lies entirely inside a predictor band.
//!
//! Linear bands are slabs, so a ball fits iff its center is inside and its
//! radius is below the dual-norm distance to the nearer boundary. Kernel
//! bands are handled with a second-order enclosure of the center function
//! and, when that is inconclusive, a deterministic grid over the ball
//! boundary whose mesh error is bounded by a Lipschitz estimate.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, usage, Result};
use crate::model::{dot, DataPoint, KernelPredictor, LinearPredictor, Predictor};
use crate::regions::{Norm, Region, RegionSpec};

/// Which boundary of a linear band is closest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

/// Largest ball around `center` inside a linear band, with the boundary
/// point it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalSet {
    pub center: DataPoint,
    pub r_star: f64,
    pub critical_point: DataPoint,
    pub side: Side,
}

/// How a containment verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentResult {
    pub contained: bool,
    /// A point of the region with positive margin, when one was found.
    pub witness: Option<DataPoint>,
    pub method: Method,
    /// Verdict forced to "not contained" because the grid could not decide.
    pub indeterminate: bool,
    /// Grid mesh used for the final verdict, if a grid was used.
    pub mesh: Option<f64>,
}

impl ContainmentResult {
    fn analytic(contained: bool, witness: Option<DataPoint>) -> Self {
        Self { contained, witness, method: Method::Analytic, indeterminate: false, mesh: None }
    }
}

/// Unit steepest-ascent direction of `sign * (dy - g.du)` in `norm`, as
/// `(du, dy)` coordinates, and the ascent rate (the dual norm of `(-g, 1)`).
fn ascent(g: &[f64], sign: f64, norm: Norm) -> (Vec<f64>, f64) {
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    dir.push(1.0);
    let rate = norm.dual_eval(&dir);
    match norm {
        Norm::L2 => {
            for v in &mut dir {
                *v *= sign / rate;
            }
        }
        Norm::Linf => {
            for v in &mut dir {
                *v = if *v == 0.0 { 0.0 } else { sign * v.signum() };
            }
        }
    }
    (dir, rate)
}

fn offset(c: &DataPoint, dir: &[f64], t: f64) -> DataPoint {
    let coords: Vec<f64> = c.coords().iter().zip(dir).map(|(a, d)| a + t * d).collect();
    DataPoint::from_coords(&coords)
}

/// Closest boundary point of a linear band to an inside center.
pub fn critical_point_linear(p: &LinearPredictor, c: &DataPoint, norm: Norm) -> Result<MaximalSet> {
    check_dim(p.w.len(), c.dim())?;
    let s = c.y - dot(&p.w, &c.u) - p.b;
    if s.abs() > p.gamma {
        return usage("center lies outside the band");
    }
    let (side, sign, gap) = if s >= 0.0 { (Side::Upper, 1.0, p.gamma - s) } else { (Side::Lower, -1.0, p.gamma + s) };
    let (dir, rate) = ascent(&p.w, sign, norm);
    let r_star = gap / rate;
    Ok(MaximalSet { center: c.clone(), r_star, critical_point: offset(c, &dir, r_star), side })
}

/// Exact containment of a ball in a linear band.
pub fn contains_ball_linear(p: &LinearPredictor, c: &DataPoint, r: f64, norm: Norm) -> Result<ContainmentResult> {
    contains_ball_linear_tol(p, c, r, norm, 0.0)
}

fn contains_ball_linear_tol(p: &LinearPredictor, c: &DataPoint, r: f64, norm: Norm, tol: f64) -> Result<ContainmentResult> {
    check_dim(p.w.len(), c.dim())?;
    if !(r >= 0.0) {
        return usage("radius must be non-negative");
    }
    let s = c.y - dot(&p.w, &c.u) - p.b;
    if s.abs() - p.gamma > tol {
        return Ok(ContainmentResult::analytic(false, Some(c.clone())));
    }
    let sign = if s >= 0.0 { 1.0 } else { -1.0 };
    let (dir, rate) = ascent(&p.w, sign, norm);
    let sup = s.abs() + r * rate - p.gamma;
    if sup <= tol {
        Ok(ContainmentResult::analytic(true, None))
    } else {
        Ok(ContainmentResult::analytic(false, Some(offset(c, &dir, r))))
    }
}

/// Largest margin found on a grid of a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSup {
    pub value: f64,
    pub argmax: DataPoint,
    /// Every point of the relevant boundary is within `mesh` of a grid node.
    pub mesh: f64,
    pub nodes: usize,
}

/// Grid nodes `(u, y)` whose margin maximum approximates the sup over the
/// ball. The margin is convex in `y`, so only the top and bottom of each
/// vertical slice matter: the sphere for l2, the two horizontal faces for linf.
fn grid_nodes(c: &DataPoint, r: f64, norm: Norm, res: usize) -> (Vec<Vec<f64>>, f64) {
    let d = c.dim();
    let cc = c.coords();
    let mut nodes = vec![cc.clone()];
    if r == 0.0 {
        return (nodes, 0.0);
    }
    let lattice = |dims: usize| -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for _ in 0..dims {
            let mut next = Vec::with_capacity(out.len() * res);
            for p in &out {
                for k in 0..res {
                    let mut q = p.clone();
                    q.push(-1.0 + 2.0 * k as f64 / (res - 1) as f64);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    };
    let mesh = match (norm, d) {
        (Norm::L2, 1) => {
            for k in 0..res {
                let t = 2.0 * std::f64::consts::PI * k as f64 / res as f64;
                nodes.push(vec![cc[0] + r * t.cos(), cc[1] + r * t.sin()]);
            }
            for (du, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                nodes.push(vec![cc[0] + r * du, cc[1] + r * dy]);
            }
            2.0 * r * (std::f64::consts::PI / (2.0 * res as f64)).sin()
        }
        (Norm::L2, _) => {
            // faces of the cube [-1, 1]^(d+1) projected onto the sphere
            for axis in 0..=d {
                for sign in [1.0, -1.0] {
                    for face in lattice(d) {
                        let mut x = face;
                        x.insert(axis, sign);
                        let len = Norm::L2.eval(&x);
                        nodes.push(cc.iter().zip(&x).map(|(a, v)| a + r * v / len).collect());
                    }
                }
            }
            r * (d as f64).sqrt() / (res - 1) as f64
        }
        (Norm::Linf, _) => {
            for du in lattice(d) {
                for sy in [1.0, -1.0] {
                    let mut x: Vec<f64> = cc[..d].iter().zip(&du).map(|(a, v)| a + r * v).collect();
                    x.push(cc[d] + sy * r);
                    nodes.push(x);
                }
            }
            r * (d as f64).sqrt() / (res - 1) as f64
        }
    };
    (nodes, mesh)
}

/// Maximum of the margin over a deterministic grid of the ball `B(c, r)`.
pub fn sup_margin_grid(p: &Predictor, c: &DataPoint, r: f64, norm: Norm, resolution: usize) -> Result<GridSup> {
    if resolution < 3 {
        return usage("grid resolution must be at least 3");
    }
    if !(r >= 0.0) {
        return usage("radius must be non-negative");
    }
    if let Some(d) = p.input_dim() {
        check_dim(d, c.dim())?;
    }
    let (nodes, mesh) = grid_nodes(c, r, norm, resolution);
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, x) in nodes.iter().enumerate() {
        let m = p.margin(&DataPoint::from_coords(x))?;
        if m > best.0 {
            best = (m, k);
        }
    }
    Ok(GridSup { value: best.0, argmax: DataPoint::from_coords(&nodes[best.1]), mesh, nodes: nodes.len() })
}

/// Containment oracle for one predictor, caching quantities shared by
/// many queries.
#[derive(Debug, Clone)]
pub struct BandChecker<'a> {
    predictor: &'a Predictor,
    /// Bound on the second directional derivative of the center function.
    curvature: f64,
    /// Comparisons against zero use this absolute slack.
    pub tol: f64,
    pub resolution: usize,
}

/// Grid refinements tried before an undecided kernel verdict is resolved
/// pessimistically.
const MAX_REFINEMENTS: usize = 4;

impl<'a> BandChecker<'a> {
    pub fn new(predictor: &'a Predictor, tol: f64, resolution: usize) -> Result<Self> {
        if resolution < 3 {
            return usage("grid resolution must be at least 3");
        }
        if !(tol >= 0.0) {
            return usage("tolerance must be non-negative");
        }
        let curvature = match predictor {
            Predictor::Linear(_) => 0.0,
            Predictor::Kernel(k) => k.norm_sq().sqrt() * k.kernel.second_derivative_bound(),
        };
        Ok(Self { predictor, curvature, tol, resolution })
    }

    pub fn predictor(&self) -> &Predictor {
        self.predictor
    }

    /// Containment of the region instantiated at `pt`.
    pub fn contains(&self, region: &Region) -> Result<ContainmentResult> {
        match region {
            Region::Point(c) => {
                let m = self.predictor.margin(c)?;
                Ok(ContainmentResult::analytic(m <= self.tol, (m > self.tol).then(|| c.clone())))
            }
            Region::Ball { center, radius, norm } => match self.predictor {
                Predictor::Linear(p) => contains_ball_linear_tol(p, center, *radius, *norm, self.tol),
                Predictor::Kernel(k) => self.contains_ball_kernel(k, center, *radius, *norm),
            },
        }
    }

    fn contains_ball_kernel(&self, k: &KernelPredictor, c: &DataPoint, r: f64, norm: Norm) -> Result<ContainmentResult> {
        if let Some(d) = self.predictor.input_dim() {
            check_dim(d, c.dim())?;
        }
        let (fc, g) = k.expansion_with_gradient(&c.u);
        let s = c.y - fc - k.b;
        if s.abs() - k.gamma > self.tol {
            return Ok(ContainmentResult::analytic(false, Some(c.clone())));
        }
        if r == 0.0 {
            return Ok(ContainmentResult::analytic(true, None));
        }
        // Taylor enclosure: f(c + du) = f(c) + g.du + e with |e| <= curvature |du|^2 / 2
        let du_max = match norm {
            Norm::L2 => r,
            Norm::Linf => r * (c.dim() as f64).sqrt(),
        };
        let sign = if s >= 0.0 { 1.0 } else { -1.0 };
        let (dir, rate) = ascent(&g, sign, norm);
        let slack = 0.5 * self.curvature * du_max * du_max;
        if s.abs() + r * rate + slack - k.gamma <= self.tol {
            return Ok(ContainmentResult::analytic(true, None));
        }
        let probe = offset(c, &dir, r);
        if self.predictor.margin(&probe)? > self.tol {
            return Ok(ContainmentResult::analytic(false, Some(probe)));
        }
        // gradient bound on the ball, for the grid's mesh error
        let grad_max = Norm::L2.eval(&g) + self.curvature * du_max;
        let lipschitz = match norm {
            Norm::L2 => (1.0 + grad_max * grad_max).sqrt(),
            Norm::Linf => grad_max,
        };
        let mut res = self.resolution;
        let mut mesh = 0.0;
        for _ in 0..=MAX_REFINEMENTS {
            let grid = sup_margin_grid(self.predictor, c, r, norm, res)?;
            mesh = grid.mesh;
            if grid.value > self.tol {
                return Ok(ContainmentResult {
                    contained: false,
                    witness: Some(grid.argmax),
                    method: Method::Grid,
                    indeterminate: false,
                    mesh: Some(mesh),
                });
            }
            if grid.value + lipschitz * grid.mesh <= self.tol {
                return Ok(ContainmentResult { contained: true, witness: None, method: Method::Grid, indeterminate: false, mesh: Some(mesh) });
            }
            if c.dim() > 1 {
                break;
            }
            res *= 2;
        }
        Ok(ContainmentResult { contained: false, witness: None, method: Method::Grid, indeterminate: true, mesh: Some(mesh) })
    }
}

/// Containment of `region` instantiated at `pt`, comparing margins against zero.
pub fn contains_region(p: &Predictor, pt: &DataPoint, region: &RegionSpec, grid_resolution: usize) -> Result<ContainmentResult> {
    BandChecker::new(p, 0.0, grid_resolution)?.contains(&region.at(pt))
}
