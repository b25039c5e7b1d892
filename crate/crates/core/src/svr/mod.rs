//! Training of band predictors on finite approximation sets.
//!
//! The program minimizes `gamma + tau |f|^2 + rho sum_i xi_i` subject to
//! every approximation point of data point `i` lying within `gamma + xi_i`
//! of the band center. The optimal center function is unique; ties in
//! `(b, gamma)` are broken by taking the smallest `gamma` and then the
//! smallest `|b|` among near-optimal solutions.

mod ipm;
mod problem;

pub use problem::{build_qp_kernel, build_qp_linear, CoefKind, QpProblem, StandardForm, VarBlock};

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::model::{Dataset, KernelPredictor, KernelSpec, LinearPredictor, Predictor};
use crate::regions::{make_approx_all, ApproxSet, ApproxSpec, RegionSpec};

use ipm::{solve_band, BandQp};
use problem::{reduce_gram, Reduction};

/// Hyper-parameters and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the squared norm of the center function.
    pub tau: f64,
    /// Price of each unit of slack.
    pub rho: f64,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_max_iter() -> usize {
    200
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { tau: 1e-3, rho: 1.0, solver_tol: default_tol(), max_iter: default_max_iter() }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("rho", self.rho), ("solver_tol", self.solver_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return usage(format!("{name} must be a finite positive number"));
            }
        }
        if self.max_iter == 0 {
            return usage("max_iter must be positive");
        }
        Ok(())
    }

    fn tie_tol(&self) -> f64 {
        self.solver_tol.max(1e-8)
    }
}

/// Output of [`solve_qp`] before tie-breaking.
#[derive(Debug, Clone)]
pub struct RawSolution {
    /// Point in the variable layout of [`QpProblem::blocks`].
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    reduced: Reduced,
}

#[derive(Debug, Clone)]
struct Reduced {
    z: nalgebra::DMatrix<f64>,
    reduction: Option<Reduction>,
    v: Vec<f64>,
    b: f64,
    gamma: f64,
}

/// Diagnostics of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// Objective of the interior-point solution.
    pub raw_objective: f64,
    /// Change in `gamma` made by the tie-break.
    pub gamma_shift: f64,
    /// Change in `b` made by the tie-break.
    pub bias_shift: f64,
    /// Relative cost slack the tie-break ended up using.
    pub tie_tolerance: f64,
    /// Coefficients kept after the low-rank restriction (kernel only).
    pub rank: Option<usize>,
}

/// Trained predictor with its slacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrSolution {
    pub predictor: Predictor,
    pub slacks: Vec<f64>,
    pub objective: f64,
    pub diagnostics: SolveDiagnostics,
}

/// Solves the program to `cfg.solver_tol`.
///
/// Kernel programs are first restricted to the anchors picked by a pivoted
/// Cholesky factorization of the Gram matrix (residual below `1e-12`), which
/// also makes the coefficients unique.
pub fn solve_qp(p: &QpProblem, cfg: &TrainConfig) -> Result<RawSolution> {
    cfg.validate()?;
    let (z, reduction) = match p.kind {
        CoefKind::Linear => (p.features.clone(), None),
        CoefKind::Kernel { .. } => {
            let red = reduce_gram(&p.features);
            (red.z.clone(), Some(red))
        }
    };
    let band = BandQp { z: &z, y: &p.targets, owner: &p.owners, n_points: p.n_points, tau: p.tau, rho: p.rho };
    let sol = solve_band(&band, cfg.solver_tol, cfg.max_iter)?;
    let gamma = sol.gamma.max(0.0);
    let xi = slacks(&z, &p.targets, &p.owners, p.n_points, &sol.v, sol.b, gamma);
    let objective = p.tau * sol.v.iter().map(|v| v * v).sum::<f64>() + gamma + p.rho * xi.iter().sum::<f64>();
    let mut x = match &reduction {
        None => sol.v.clone(),
        Some(red) => {
            let mut full = vec![0.0; p.n_coef()];
            for (a, &piv) in red.alpha(&sol.v).iter().zip(&red.pivots) {
                full[piv] = *a;
            }
            full
        }
    };
    x.push(sol.b);
    x.push(gamma);
    x.extend_from_slice(&xi);
    Ok(RawSolution {
        x,
        objective,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
        reduced: Reduced { z, reduction, v: sol.v, b: sol.b, gamma },
    })
}

fn slacks(z: &nalgebra::DMatrix<f64>, y: &[f64], owner: &[usize], n: usize, v: &[f64], b: f64, gamma: f64) -> Vec<f64> {
    let mut xi = vec![0.0f64; n];
    for (r, (&yr, &o)) in y.iter().zip(owner).enumerate() {
        let pred: f64 = (0..v.len()).map(|k| z[(r, k)] * v[k]).sum::<f64>() + b;
        xi[o] = xi[o].max((yr - pred).abs() - gamma);
    }
    xi
}

/// Residual range `[lo_i, hi_i]` of `y - f(u)` over each point's rows.
struct Ranges {
    lo: Vec<f64>,
    hi: Vec<f64>,
    rho: f64,
}

impl Ranges {
    /// Linear part of the cost, `gamma + rho sum xi`, at `(b, gamma)`.
    fn cost(&self, b: f64, gamma: f64) -> f64 {
        let slack: f64 = self.lo.iter().zip(&self.hi).map(|(lo, hi)| (hi - b - gamma).max(b - lo - gamma).max(0.0)).sum();
        gamma + self.rho * slack
    }

    /// Minimum over `b` of the cost at fixed `gamma`, with the interval of minimizers.
    fn best_bias(&self, gamma: f64) -> (f64, f64, f64) {
        // each slack term is a constant plus the distance from b to an interval
        let n = self.lo.len();
        let mut ends = Vec::with_capacity(2 * n);
        for (lo, hi) in self.lo.iter().zip(&self.hi) {
            let (a, c) = (hi - gamma, lo + gamma);
            if a <= c {
                ends.push(a);
                ends.push(c);
            } else {
                let mid = 0.5 * (a + c);
                ends.push(mid);
                ends.push(mid);
            }
        }
        ends.sort_by(f64::total_cmp);
        let (b_lo, b_hi) = (ends[n - 1], ends[n]);
        (self.cost(b_lo, gamma), b_lo, b_hi)
    }
}

impl Ranges {
    /// Exact minimum over `(b, gamma)` with `gamma` in `[0, gamma_max]`:
    /// the cost is convex and piecewise linear in `gamma` once `b` is optimal.
    fn best_gamma(&self, gamma_max: f64) -> (f64, f64) {
        let f = |g: f64| self.best_bias(g).0;
        let (mut a, mut c) = (0.0f64, gamma_max.max(0.0));
        for _ in 0..200 {
            let (m1, m2) = (a + (c - a) / 3.0, c - (c - a) / 3.0);
            if m1 <= a || m2 >= c || m1 >= m2 {
                break;
            }
            if f(m1) <= f(m2) {
                c = m2;
            } else {
                a = m1;
            }
        }
        [0.0, a, 0.5 * (a + c), c].into_iter().map(|g| (g, f(g))).fold((0.0, f64::INFINITY), |x, y| if y.1 < x.1 { y } else { x })
    }
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, given `pred(hi)` and
/// monotonicity; bisects to floating-point resolution.
fn bisect_first(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Lexicographic refinement: smallest `gamma`, then smallest `|b|`, among
/// solutions whose cost is within a relative `1e-8` of the optimum.
///
/// The center function is unique at the optimum, so it is held fixed and
/// the refinement runs exactly over `(b, gamma)`.
pub fn tie_break(p: &QpProblem, raw: &RawSolution, cfg: &TrainConfig) -> Result<SvrSolution> {
    let red = &raw.reduced;
    let q = red.v.len();
    let n = p.n_points;
    let mut ranges = Ranges { lo: vec![f64::INFINITY; n], hi: vec![f64::NEG_INFINITY; n], rho: p.rho };
    for (r, (&yr, &o)) in p.targets.iter().zip(&p.owners).enumerate() {
        let fr: f64 = (0..q).map(|k| red.z[(r, k)] * red.v[k]).sum();
        let res = yr - fr;
        ranges.lo[o] = ranges.lo[o].min(res);
        ranges.hi[o] = ranges.hi[o].max(res);
    }
    let quad = p.tau * red.v.iter().map(|v| v * v).sum::<f64>();
    let mut base = ranges.cost(red.b, red.gamma);
    let mut gamma_start = red.gamma;
    let (g_opt, c_opt) = ranges.best_gamma(base.max(red.gamma));
    if c_opt < base {
        base = c_opt;
        gamma_start = g_opt;
    }

    let mut tol = cfg.tie_tol();
    let mut attempt = 0;
    let (b, gamma) = loop {
        let budget = base + tol * raw.objective.abs().max(f64::MIN_POSITIVE);
        if let Some(bg) = refine(&ranges, budget, gamma_start, tol) {
            break bg;
        }
        attempt += 1;
        if attempt > 1 {
            return Err(Error::Solver("tie-break refinement infeasible".into()));
        }
        tol *= 10.0;
    };

    let xi = slacks(&red.z, &p.targets, &p.owners, n, &red.v, b, gamma);
    let objective = quad + gamma + p.rho * xi.iter().sum::<f64>();
    let predictor = match (&p.kind, &red.reduction) {
        (CoefKind::Linear, _) => Predictor::Linear(LinearPredictor { w: red.v.clone(), b, gamma }),
        (CoefKind::Kernel { kernel, anchors }, Some(reduction)) => Predictor::Kernel(KernelPredictor {
            kernel: *kernel,
            anchors: reduction.pivots.iter().map(|&i| anchors[i].clone()).collect(),
            alpha: reduction.alpha(&red.v),
            b,
            gamma,
        }),
        (CoefKind::Kernel { .. }, None) => unreachable!("kernel solutions always carry a reduction"),
    };
    Ok(SvrSolution {
        predictor,
        slacks: xi,
        objective,
        diagnostics: SolveDiagnostics {
            iterations: raw.iterations,
            primal_residual: raw.primal_residual,
            dual_residual: raw.dual_residual,
            gap: raw.gap,
            raw_objective: raw.objective,
            gamma_shift: gamma - red.gamma,
            bias_shift: b - red.b,
            tie_tolerance: tol,
            rank: red.reduction.as_ref().map(|r| r.pivots.len()),
        },
    })
}

fn refine(ranges: &Ranges, budget: f64, gamma_start: f64, tol: f64) -> Option<(f64, f64)> {
    let within = |g: f64| ranges.best_bias(g).0 <= budget;
    if !within(gamma_start) {
        return None;
    }
    let gamma1 = if within(0.0) { 0.0 } else { bisect_first(0.0, gamma_start, within) };
    let gamma_cap = (gamma1 * (1.0 + tol) + tol).min(gamma_start.max(gamma1));
    let (_, m_lo, m_hi) = ranges.best_bias(gamma_cap);
    let ok = |b: f64| ranges.cost(b, gamma_cap) <= budget;
    let b = if ok(0.0) {
        0.0
    } else if m_lo > 0.0 {
        bisect_first(0.0, m_lo, ok)
    } else {
        -bisect_first(0.0, -m_hi, |nb| ok(-nb))
    };
    let fits = |g: f64| ranges.cost(b, g) <= budget;
    if !fits(gamma_cap) {
        return None;
    }
    let gamma = if fits(0.0) { 0.0 } else { bisect_first(0.0, gamma_cap, fits) };
    Some((b, gamma))
}

/// Builds approximation sets, solves and tie-breaks.
pub fn train(
    data: &Dataset,
    region: &RegionSpec,
    approx: &ApproxSpec,
    cfg: &TrainConfig,
    kernel: Option<KernelSpec>,
) -> Result<SvrSolution> {
    let sets = make_approx_all(approx, region, data.points())?;
    train_on_sets(data, &sets, cfg, kernel)
}

/// Training on precomputed approximation sets.
pub fn train_on_sets(data: &Dataset, sets: &[ApproxSet], cfg: &TrainConfig, kernel: Option<KernelSpec>) -> Result<SvrSolution> {
    let p = match kernel {
        None => build_qp_linear(data, sets, cfg)?,
        Some(k) => build_qp_kernel(data, sets, cfg, k)?,
    };
    let raw = solve_qp(&p, cfg)?;
    tie_break(&p, &raw, cfg)
}
