//! Adversarial regions around data points and their finite approximations.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, usage, Result};
use crate::model::DataPoint;

/// Norm defining a ball region in `(u, y)` space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    L2,
    Linf,
}

impl Norm {
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// The dual norm (l2 is self-dual, linf pairs with l1).
    pub fn dual_eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => Norm::L2.eval(v),
            Norm::Linf => v.iter().map(|x| x.abs()).sum(),
        }
    }
}

/// How the ball radius depends on the point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusRule {
    Constant(f64),
    /// `|cos(1.5 u_1 + pi/3)| / 20`, the varying-disk demo.
    Demo,
}

impl RadiusRule {
    fn eval(self, pt: &DataPoint) -> f64 {
        match self {
            RadiusRule::Constant(r) => r,
            RadiusRule::Demo => (1.5 * pt.u[0] + std::f64::consts::FRAC_PI_3).cos().abs() / 20.0,
        }
    }
}

/// Region `A` attached to every data point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Singleton,
    Ball {
        #[serde(default)]
        norm: Norm,
        radius: RadiusRule,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if let RegionSpec::Ball { radius, scale, .. } = *self {
            if !(scale >= 0.0 && scale.is_finite()) {
                return usage("region scale must be a finite non-negative number");
            }
            if let RadiusRule::Constant(r) = radius {
                if !(r >= 0.0 && r.is_finite()) {
                    return usage("region radius must be a finite non-negative number");
                }
            }
        }
        Ok(())
    }

    /// The concrete region at one data point.
    pub fn at(&self, pt: &DataPoint) -> Region {
        match *self {
            RegionSpec::Singleton => Region::Point(pt.clone()),
            RegionSpec::Ball { norm, radius, scale } => Region::Ball {
                center: pt.clone(),
                radius: scale * radius.eval(pt),
                norm,
            },
        }
    }
}

/// A region instantiated at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Point(DataPoint),
    Ball { center: DataPoint, radius: f64, norm: Norm },
}

impl Region {
    pub fn center(&self) -> &DataPoint {
        match self {
            Region::Point(c) | Region::Ball { center: c, .. } => c,
        }
    }

    /// Closed membership test with absolute slack `tol`.
    pub fn contains_point(&self, p: &DataPoint, tol: f64) -> bool {
        let c = self.center();
        if c.dim() != p.dim() {
            return false;
        }
        let diff: Vec<f64> = p.coords().iter().zip(c.coords()).map(|(a, b)| a - b).collect();
        match self {
            Region::Point(_) => Norm::Linf.eval(&diff) <= tol,
            Region::Ball { radius, norm, .. } => norm.eval(&diff) <= radius + tol,
        }
    }
}

/// Radius of the region at `pt`.
pub fn region_radius(spec: &RegionSpec, pt: &DataPoint) -> Result<f64> {
    match spec.at(pt) {
        Region::Point(_) => usage("a singleton region has no radius"),
        Region::Ball { radius, .. } => Ok(radius),
    }
}

/// Returns the region with its scale multiplied by `lambda`.
pub fn scale_region(spec: &RegionSpec, lambda: f64) -> Result<RegionSpec> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return usage("lambda must be a finite non-negative number");
    }
    Ok(match *spec {
        RegionSpec::Singleton => RegionSpec::Singleton,
        RegionSpec::Ball { norm, radius, scale } => RegionSpec::Ball { norm, radius, scale: scale * lambda },
    })
}

/// Finite stand-in for the region used while training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApproxSpec {
    CenterOnly,
    /// Center plus the axis extremes of the ball scaled by `inflation`.
    Cross5 {
        #[serde(default = "one")]
        inflation: f64,
    },
    /// Center plus fixed offsets in `(u_1, .., u_d, y)` coordinates.
    Explicit { offsets: Vec<Vec<f64>> },
}

/// Approximation points for one data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSet {
    pub points: Vec<DataPoint>,
}

impl ApproxSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds the approximation set for `pt`, in the fixed order
/// center, `+u_1`, `-u_1`, .., `+y`, `-y` for the cross scheme.
pub fn make_approx(spec: &ApproxSpec, region: &RegionSpec, pt: &DataPoint) -> Result<ApproxSet> {
    let points = match spec {
        ApproxSpec::CenterOnly => vec![pt.clone()],
        ApproxSpec::Cross5 { inflation } => {
            if !(*inflation >= 0.0 && inflation.is_finite()) {
                return usage("cross5 inflation must be a finite non-negative number");
            }
            let r = region_radius(region, pt).map_err(|_| {
                crate::Error::Usage("cross5 approximation needs a ball region".into())
            })? * inflation;
            let c = pt.coords();
            let mut out = vec![pt.clone()];
            for axis in 0..c.len() {
                for sign in [1.0, -1.0] {
                    let mut q = c.clone();
                    q[axis] += sign * r;
                    out.push(DataPoint::from_coords(&q));
                }
            }
            out
        }
        ApproxSpec::Explicit { offsets } => {
            let c = pt.coords();
            let mut out = vec![pt.clone()];
            for off in offsets {
                check_dim(c.len(), off.len())?;
                if off.iter().any(|v| !v.is_finite()) {
                    return usage("explicit offsets must be finite");
                }
                let q: Vec<f64> = c.iter().zip(off).map(|(a, b)| a + b).collect();
                out.push(DataPoint::from_coords(&q));
            }
            out
        }
    };
    Ok(ApproxSet { points })
}

/// Approximation sets for every point of a dataset.
pub fn make_approx_all(spec: &ApproxSpec, region: &RegionSpec, pts: &[DataPoint]) -> Result<Vec<ApproxSet>> {
    pts.iter().map(|p| make_approx(spec, region, p)).collect()
}

/// True when every approximation point lies in its region (the subset regime).
pub fn approx_within_region(sets: &[ApproxSet], region: &RegionSpec, pts: &[DataPoint]) -> bool {
    sets.iter().zip(pts).all(|(s, p)| {
        let reg = region.at(p);
        s.points.iter().all(|q| reg.contains_point(q, 1e-12))
    })
}
