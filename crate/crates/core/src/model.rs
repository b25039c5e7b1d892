//! Data points, predictors and the learning-scheme abstraction.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, usage, Result};

/// One observation `(u, y)` with `u` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub u: Vec<f64>,
    pub y: f64,
}

impl DataPoint {
    pub fn new(u: Vec<f64>, y: f64) -> Self {
        Self { u, y }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// Coordinates in `(u_1, .., u_d, y)` order.
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.u.clone();
        c.push(self.y);
        c
    }

    /// Inverse of [`DataPoint::coords`].
    pub fn from_coords(c: &[f64]) -> Self {
        let (y, u) = c.split_last().expect("coordinates must be non-empty");
        Self { u: u.to_vec(), y: *y }
    }
}

/// An ordered collection of points sharing one input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<DataPoint>,
    dim: usize,
}

impl Dataset {
    /// Rejects mixed dimensions and non-finite values. An empty dataset
    /// has dimension 0.
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Ok(Self { points, dim: 0 });
        };
        let dim = first.dim();
        if dim == 0 {
            return usage("input dimension must be at least 1");
        }
        for p in &points {
            check_dim(dim, p.dim())?;
            if !p.y.is_finite() || p.u.iter().any(|v| !v.is_finite()) {
                return usage("dataset contains non-finite values");
            }
        }
        Ok(Self { points, dim })
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn into_points(self) -> Vec<DataPoint> {
        self.points
    }
}

/// Band predictor `{(u, y) : |y - w.u - b| <= gamma}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub w: Vec<f64>,
    pub b: f64,
    pub gamma: f64,
}

/// Reproducing kernel used by kernel predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `K(u, v) = exp(-|u - v|^2 / sigma^2)`.
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            KernelSpec::Gaussian { .. } => usage("gaussian kernel width must be positive"),
        }
    }

    /// Bound on the unit-direction derivative of the feature map, so that
    /// `|grad f| <= norm_h(f) * first_derivative_bound()`.
    pub fn first_derivative_bound(&self) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => std::f64::consts::SQRT_2 / sigma,
        }
    }

    /// Bound on the unit-direction second derivative of the feature map.
    pub fn second_derivative_bound(&self) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => 12f64.sqrt() / (sigma * sigma),
        }
    }
}

/// Evaluates the kernel at a pair of inputs.
pub fn kernel_eval(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    check_dim(u.len(), v.len())?;
    Ok(kernel_unchecked(spec, u, v))
}

pub(crate) fn kernel_unchecked(spec: &KernelSpec, u: &[f64], v: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Gaussian { sigma } => {
            let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (sigma * sigma)).exp()
        }
    }
}

/// Band predictor whose center function is a kernel expansion
/// `f(u) = sum_k alpha_k K(anchor_k, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPredictor {
    pub kernel: KernelSpec,
    pub anchors: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub b: f64,
    pub gamma: f64,
}

impl KernelPredictor {
    /// Center function without the offset.
    pub fn expansion(&self, u: &[f64]) -> f64 {
        self.anchors
            .iter()
            .zip(&self.alpha)
            .map(|(a, w)| w * kernel_unchecked(&self.kernel, a, u))
            .sum()
    }

    /// Value and gradient of the expansion at `u`.
    pub fn expansion_with_gradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let KernelSpec::Gaussian { sigma } = self.kernel;
        let s2 = sigma * sigma;
        let mut value = 0.0;
        let mut grad = vec![0.0; u.len()];
        for (a, w) in self.anchors.iter().zip(&self.alpha) {
            let k = w * kernel_unchecked(&self.kernel, a, u);
            value += k;
            for (g, (ui, ai)) in grad.iter_mut().zip(u.iter().zip(a)) {
                *g -= 2.0 * (ui - ai) / s2 * k;
            }
        }
        (value, grad)
    }

    /// Squared RKHS norm `alpha' G alpha` of the expansion.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for (i, ai) in self.anchors.iter().enumerate() {
            for (j, aj) in self.anchors.iter().enumerate() {
                acc += self.alpha[i] * self.alpha[j] * kernel_unchecked(&self.kernel, ai, aj);
            }
        }
        acc.max(0.0)
    }
}

/// Either kind of band predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Linear(LinearPredictor),
    Kernel(KernelPredictor),
}

impl Predictor {
    pub fn gamma(&self) -> f64 {
        match self {
            Predictor::Linear(p) => p.gamma,
            Predictor::Kernel(p) => p.gamma,
        }
    }

    pub fn bias(&self) -> f64 {
        match self {
            Predictor::Linear(p) => p.b,
            Predictor::Kernel(p) => p.b,
        }
    }

    /// Input dimension, when the predictor pins one down.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Predictor::Linear(p) => Some(p.w.len()),
            Predictor::Kernel(p) => p.anchors.first().map(Vec::len),
        }
    }

    /// Band center `w.u + b` or `f(u) + b`.
    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        if let Some(d) = self.input_dim() {
            check_dim(d, u.len())?;
        }
        Ok(match self {
            Predictor::Linear(p) => dot(&p.w, u) + p.b,
            Predictor::Kernel(p) => p.expansion(u) + p.b,
        })
    }

    /// Signed band violation `|y - center(u)| - gamma`.
    pub fn margin(&self, pt: &DataPoint) -> Result<f64> {
        Ok((pt.y - self.predict(&pt.u)?).abs() - self.gamma())
    }

    /// Squared norm of the center function (Euclidean or RKHS).
    pub fn norm_sq(&self) -> f64 {
        match self {
            Predictor::Linear(p) => dot(&p.w, &p.w),
            Predictor::Kernel(p) => p.norm_sq(),
        }
    }
}

/// Margin of a linear band at one point.
pub fn margin_linear(p: &LinearPredictor, pt: &DataPoint) -> Result<f64> {
    check_dim(p.w.len(), pt.dim())?;
    Ok((pt.y - dot(&p.w, &pt.u) - p.b).abs() - p.gamma)
}

/// Margin of a kernel band at one point.
pub fn margin_kernel(p: &KernelPredictor, pt: &DataPoint) -> Result<f64> {
    Predictor::Kernel(p.clone()).margin(pt)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A learning scheme: a cost to minimize over hypotheses and a signed
/// margin that is positive exactly when a sample is mispredicted.
pub trait Scheme {
    type Hypothesis;
    type Sample: ?Sized;

    fn cost(&self, h: &Self::Hypothesis) -> f64;
    fn margin(&self, h: &Self::Hypothesis, x: &Self::Sample) -> Result<f64>;
}

/// Band regression scheme with cost `gamma + tau * |f|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandScheme {
    pub tau: f64,
}

impl Scheme for BandScheme {
    type Hypothesis = Predictor;
    type Sample = DataPoint;

    fn cost(&self, h: &Predictor) -> f64 {
        h.gamma() + self.tau * h.norm_sq()
    }

    fn margin(&self, h: &Predictor, x: &DataPoint) -> Result<f64> {
        h.margin(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_margin_worked_value() {
        let p = LinearPredictor { w: vec![2.0], b: 1.0, gamma: 0.5 };
        let m = margin_linear(&p, &DataPoint::new(vec![1.0], 4.0)).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kernel_margin_single_anchor() {
        let p = KernelPredictor {
            kernel: KernelSpec::Gaussian { sigma: 2.0 },
            anchors: vec![vec![0.0]],
            alpha: vec![1.0],
            b: 0.0,
            gamma: 0.0,
        };
        let m = margin_kernel(&p, &DataPoint::new(vec![2.0], 0.0)).unwrap();
        assert!((m - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_eval_value() {
        let k = kernel_eval(&KernelSpec::Gaussian { sigma: 1.0 }, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((k - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = LinearPredictor { w: vec![1.0, 2.0], b: 0.0, gamma: 0.0 };
        assert!(margin_linear(&p, &DataPoint::new(vec![1.0], 0.0)).is_err());
        assert!(Dataset::new(vec![DataPoint::new(vec![1.0], 0.0), DataPoint::new(vec![1.0, 2.0], 0.0)]).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = KernelPredictor {
            kernel: KernelSpec::Gaussian { sigma: 1.3 },
            anchors: vec![vec![0.1, -0.4], vec![1.0, 0.5]],
            alpha: vec![0.7, -1.2],
            b: 0.0,
            gamma: 0.0,
        };
        let u = [0.3, 0.2];
        let (_, g) = p.expansion_with_gradient(&u);
        for j in 0..2 {
            let h = 1e-6;
            let mut up = u;
            let mut dn = u;
            up[j] += h;
            dn[j] -= h;
            let fd = (p.expansion(&up) - p.expansion(&dn)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8);
        }
    }
}
