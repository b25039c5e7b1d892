//! Assembly of the training program.

use nalgebra::DMatrix;

use crate::error::{check_dim, usage, Error, Result};
use crate::model::{kernel_unchecked, Dataset, KernelSpec};
use crate::regions::ApproxSet;

use super::TrainConfig;

/// Label of a variable block in the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBlock {
    /// Weights `w` (linear) or expansion coefficients `alpha` (kernel).
    Coef,
    Bias,
    Width,
    Slack,
}

/// Parametrization of the band center.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefKind {
    /// `w.u`; the coefficient block has one entry per input dimension.
    Linear,
    /// `sum_k alpha_k K(anchor_k, u)` with one anchor per approximation input.
    Kernel { kernel: KernelSpec, anchors: Vec<Vec<f64>> },
}

/// The convex program
///
/// ```text
/// min  gamma + c' Q c + rho * sum_i xi_i
/// s.t. +-(y_r - phi_r.c - b) - gamma - xi_{owner(r)} <= 0   for every approximation row r
///      gamma >= 0, xi >= 0
/// ```
///
/// where `phi_r` are the rows of `features` and `Q` is `tau * I` (linear)
/// or `tau * G` (kernel, with `G == features`).
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub kind: CoefKind,
    /// One row per approximation point.
    pub features: DMatrix<f64>,
    pub targets: Vec<f64>,
    /// Index of the data point owning each row.
    pub owners: Vec<usize>,
    pub n_points: usize,
    pub tau: f64,
    pub rho: f64,
}

impl QpProblem {
    pub fn n_coef(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_vars(&self) -> usize {
        self.n_coef() + 2 + self.n_points
    }

    /// Rows coming from approximation points (two per point).
    pub fn n_data_rows(&self) -> usize {
        2 * self.targets.len()
    }

    /// All inequality rows, including `gamma >= 0` and `xi >= 0`.
    pub fn n_rows(&self) -> usize {
        self.n_data_rows() + 1 + self.n_points
    }

    /// Variable layout `(coef, b, gamma, xi)`.
    pub fn blocks(&self) -> Vec<VarBlock> {
        let mut v = vec![VarBlock::Coef; self.n_coef()];
        v.push(VarBlock::Bias);
        v.push(VarBlock::Width);
        v.extend(std::iter::repeat_n(VarBlock::Slack, self.n_points));
        v
    }

    /// Quadratic cost matrix on the coefficient block.
    pub fn quad_matrix(&self) -> DMatrix<f64> {
        match self.kind {
            CoefKind::Linear => DMatrix::identity(self.n_coef(), self.n_coef()) * self.tau,
            CoefKind::Kernel { .. } => &self.features * self.tau,
        }
    }

    /// Objective at `x = (coef, b, gamma, xi)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let p = self.n_coef();
        let c = nalgebra::DVector::from_column_slice(&x[..p]);
        let quad = match self.kind {
            CoefKind::Linear => self.tau * c.norm_squared(),
            CoefKind::Kernel { .. } => self.tau * c.dot(&(&self.features * &c)),
        };
        quad + x[p + 1] + self.rho * x[p + 2..].iter().sum::<f64>()
    }

    /// Largest violation of any inequality row at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let p = self.n_coef();
        let (b, gamma) = (x[p], x[p + 1]);
        let xi = &x[p + 2..];
        let mut worst = (-gamma).max(0.0);
        for v in xi {
            worst = worst.max(-v);
        }
        for (r, (&y, &o)) in self.targets.iter().zip(&self.owners).enumerate() {
            let pred: f64 = (0..p).map(|k| self.features[(r, k)] * x[k]).sum::<f64>() + b;
            worst = worst.max((y - pred).abs() - gamma - xi[o]);
        }
        worst
    }

    /// Dense standard form `min 1/2 x'Px + q'x  s.t.  Ax <= h`.
    pub fn standard_form(&self) -> StandardForm {
        let n = self.n_vars();
        let p = self.n_coef();
        let mut pm = DMatrix::zeros(n, n);
        pm.view_mut((0, 0), (p, p)).copy_from(&(self.quad_matrix() * 2.0));
        let mut q = vec![0.0; n];
        q[p + 1] = 1.0;
        for v in &mut q[p + 2..] {
            *v = self.rho;
        }
        let m = self.n_rows();
        let mut a = DMatrix::zeros(m, n);
        let mut h = vec![0.0; m];
        for (r, (&y, &o)) in self.targets.iter().zip(&self.owners).enumerate() {
            for (k, s) in [1.0, -1.0].into_iter().enumerate() {
                let row = 2 * r + k;
                for j in 0..p {
                    a[(row, j)] = -s * self.features[(r, j)];
                }
                a[(row, p)] = -s;
                a[(row, p + 1)] = -1.0;
                a[(row, p + 2 + o)] = -1.0;
                h[row] = -s * y;
            }
        }
        let base = self.n_data_rows();
        a[(base, p + 1)] = -1.0;
        for i in 0..self.n_points {
            a[(base + 1 + i, p + 2 + i)] = -1.0;
        }
        StandardForm { p: pm, q, a, h }
    }
}

/// Dense standard-form export of a [`QpProblem`].
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub p: DMatrix<f64>,
    pub q: Vec<f64>,
    pub a: DMatrix<f64>,
    pub h: Vec<f64>,
}

/// Inputs, targets and owning data point of every approximation point.
type Rows = (Vec<Vec<f64>>, Vec<f64>, Vec<usize>);

fn flatten(data: &Dataset, approxs: &[ApproxSet], cfg: &TrainConfig) -> Result<Rows> {
    cfg.validate()?;
    if data.is_empty() {
        return usage("training needs at least one data point");
    }
    check_dim(data.len(), approxs.len())?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut owners = Vec::new();
    for (i, set) in approxs.iter().enumerate() {
        if set.is_empty() {
            return usage("every approximation set needs at least one point");
        }
        for p in &set.points {
            check_dim(data.dim(), p.dim())?;
            if !p.y.is_finite() || p.u.iter().any(|v| !v.is_finite()) {
                return usage("approximation points must be finite");
            }
            inputs.push(p.u.clone());
            targets.push(p.y);
            owners.push(i);
        }
    }
    Ok((inputs, targets, owners))
}

/// Program for a linear band trained on the approximation points.
pub fn build_qp_linear(data: &Dataset, approxs: &[ApproxSet], cfg: &TrainConfig) -> Result<QpProblem> {
    let (inputs, targets, owners) = flatten(data, approxs, cfg)?;
    let features = DMatrix::from_fn(inputs.len(), data.dim(), |r, c| inputs[r][c]);
    Ok(QpProblem { kind: CoefKind::Linear, features, targets, owners, n_points: data.len(), tau: cfg.tau, rho: cfg.rho })
}

/// Program for a kernel band with one coefficient per approximation input.
pub fn build_qp_kernel(data: &Dataset, approxs: &[ApproxSet], cfg: &TrainConfig, kernel: KernelSpec) -> Result<QpProblem> {
    kernel.validate()?;
    let (inputs, targets, owners) = flatten(data, approxs, cfg)?;
    let n = inputs.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        gram[(i, i)] = kernel_unchecked(&kernel, &inputs[i], &inputs[i]);
        for j in 0..i {
            let k = kernel_unchecked(&kernel, &inputs[i], &inputs[j]);
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("gram matrix has non-finite entries".into()));
    }
    Ok(QpProblem {
        kind: CoefKind::Kernel { kernel, anchors: inputs },
        features: gram,
        targets,
        owners,
        n_points: data.len(),
        tau: cfg.tau,
        rho: cfg.rho,
    })
}

/// Low-rank restriction of a kernel program.
///
/// Pivoted Cholesky of the Gram matrix selects anchors `P` with
/// `G[:, P] = L L_P'` exactly. Restricting `alpha` to `P` and substituting
/// `v = L_P' alpha_P` turns the program into a linear band over the rows
/// of `L` with quadratic term `tau |v|^2`.
#[derive(Debug, Clone)]
pub(crate) struct Reduction {
    pub z: DMatrix<f64>,
    pub pivots: Vec<usize>,
    /// Rows of `L` at the pivots (lower triangular, `r x r`).
    pub l_piv: DMatrix<f64>,
}

/// Residual diagonal below which the pivoted factorization stops,
/// relative to the largest Gram diagonal entry.
pub(crate) const PIVOT_TOL: f64 = 1e-12;

pub(crate) fn reduce_gram(gram: &DMatrix<f64>) -> Reduction {
    let n = gram.nrows();
    let mut diag: Vec<f64> = (0..n).map(|i| gram[(i, i)]).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut pivots = Vec::new();
    loop {
        // lowest index wins ties so duplicates resolve deterministically
        let (j, dj) = diag.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if pivots.len() == n || dj <= PIVOT_TOL * scale || dj <= 0.0 {
            break;
        }
        let piv = dj.sqrt();
        let mut col: Vec<f64> = (0..n).map(|i| gram[(i, j)]).collect();
        for c in &cols {
            let cj = c[j];
            for (v, ci) in col.iter_mut().zip(c) {
                *v -= ci * cj;
            }
        }
        for v in &mut col {
            *v /= piv;
        }
        for p in &pivots {
            col[*p] = 0.0;
        }
        col[j] = piv;
        for (d, v) in diag.iter_mut().zip(&col) {
            *d -= v * v;
        }
        diag[j] = 0.0;
        for p in &pivots {
            diag[*p] = 0.0;
        }
        cols.push(col);
        pivots.push(j);
    }
    let r = cols.len();
    let z = DMatrix::from_fn(n, r, |i, k| cols[k][i]);
    let l_piv = DMatrix::from_fn(r, r, |a, k| cols[k][pivots[a]]);
    Reduction { z, pivots, l_piv }
}

impl Reduction {
    /// Expansion coefficients on the pivot anchors for reduced weights `v`.
    pub fn alpha(&self, v: &[f64]) -> Vec<f64> {
        let r = self.pivots.len();
        let mut a = vec![0.0; r];
        // solve L_P' a = v by back substitution
        for i in (0..r).rev() {
            let mut s = v[i];
            for k in i + 1..r {
                s -= self.l_piv[(k, i)] * a[k];
            }
            a[i] = s / self.l_piv[(i, i)];
        }
        a
    }
}
