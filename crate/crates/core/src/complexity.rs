//! Adversarial complexity of a trained predictor on its training set.
//!
//! A data point counts toward `s*` when its region is not contained in the
//! band (i), when one of its approximation points sits on the band boundary
//! (ii), or when one of its approximation points falls outside (iii).

use serde::{Deserialize, Serialize};

use crate::containment::BandChecker;
use crate::error::{check_dim, usage, Result};
use crate::model::{DataPoint, Predictor};
use crate::regions::{ApproxSet, RegionSpec};

/// Per-point conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Flags {
    /// The region around the point is not contained in the band.
    pub cond_i: bool,
    /// Some approximation point lies on the boundary.
    pub cond_ii: bool,
    /// Some approximation point lies strictly outside.
    pub cond_iii: bool,
    /// `cond_i` was set because the grid could not decide.
    #[serde(default)]
    pub indeterminate: bool,
}

impl Flags {
    pub fn any(&self) -> bool {
        self.cond_i || self.cond_ii || self.cond_iii
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub s_star: usize,
    /// Points with an approximation point strictly outside the band.
    pub eta: usize,
    /// Points whose region is not contained.
    pub kappa: usize,
    /// Boundary tolerance used for condition (ii).
    pub tol: f64,
    /// Number of pessimistic grid verdicts.
    pub indeterminate: usize,
    pub flags: Vec<Flags>,
}

impl ComplexityReport {
    /// Summarizes per-point flags.
    pub fn from_flags(flags: Vec<Flags>, tol: f64) -> Self {
        let count = |f: fn(&Flags) -> bool| flags.iter().filter(|x| f(x)).count();
        Self {
            s_star: count(Flags::any),
            eta: count(|f| f.cond_iii),
            kappa: count(|f| f.cond_i),
            tol,
            indeterminate: count(|f| f.indeterminate),
            flags,
        }
    }

    pub fn n(&self) -> usize {
        self.flags.len()
    }
}

/// Settings for [`complexity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityOptions {
    /// Boundary tolerance; `None` means `1e-6 * (1 + gamma)`.
    pub tol: Option<f64>,
    /// Slack for "not contained" decisions.
    pub zero_tol: f64,
    pub grid_resolution: usize,
}

impl Default for ComplexityOptions {
    fn default() -> Self {
        Self { tol: None, zero_tol: 1e-8, grid_resolution: 64 }
    }
}

impl ComplexityOptions {
    pub fn boundary_tol(&self, p: &Predictor) -> f64 {
        self.tol.unwrap_or(1e-6 * (1.0 + p.gamma()))
    }
}

/// Flags of conditions (ii) and (iii) for one approximation set.
pub fn approx_flags(p: &Predictor, set: &ApproxSet, tol: f64) -> Result<(bool, bool)> {
    let mut on = false;
    let mut out = false;
    for q in &set.points {
        let m = p.margin(q)?;
        on |= m.abs() <= tol;
        out |= m > tol;
    }
    Ok((on, out))
}

/// Computes `s*`, `eta` and `kappa`.
pub fn complexity(
    p: &Predictor,
    data: &[DataPoint],
    region: &RegionSpec,
    approxs: &[ApproxSet],
    opts: &ComplexityOptions,
) -> Result<ComplexityReport> {
    check_dim(data.len(), approxs.len())?;
    let tol = opts.boundary_tol(p);
    if !(tol > 0.0) {
        return usage("boundary tolerance must be positive");
    }
    let checker = BandChecker::new(p, opts.zero_tol, opts.grid_resolution)?;
    let mut flags = Vec::with_capacity(data.len());
    for (pt, set) in data.iter().zip(approxs) {
        let verdict = checker.contains(&region.at(pt))?;
        let (cond_ii, cond_iii) = approx_flags(p, set, tol)?;
        flags.push(Flags { cond_i: !verdict.contained, cond_ii, cond_iii, indeterminate: verdict.indeterminate });
    }
    Ok(ComplexityReport::from_flags(flags, tol))
}

/// Fraction of training points whose region is not contained.
pub fn empirical_adversarial_risk(report: &ComplexityReport) -> Result<f64> {
    if report.n() == 0 {
        return usage("empirical risk needs at least one point");
    }
    Ok(report.kappa as f64 / report.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearPredictor;
    use crate::regions::{make_approx_all, ApproxSpec, Norm, RadiusRule};

    #[test]
    fn worked_example() {
        let p = Predictor::Linear(LinearPredictor { w: vec![0.0], b: 0.0, gamma: 1.0 });
        let data: Vec<DataPoint> = [0.0, 0.95, 1.2].iter().map(|&y| DataPoint::new(vec![0.0], y)).collect();
        let region = RegionSpec::Ball { norm: Norm::Linf, radius: RadiusRule::Constant(0.1), scale: 1.0 };
        let sets = make_approx_all(&ApproxSpec::CenterOnly, &region, &data).unwrap();
        let rep = complexity(&p, &data, &region, &sets, &ComplexityOptions::default()).unwrap();
        let ci: Vec<bool> = rep.flags.iter().map(|f| f.cond_i).collect();
        let ciii: Vec<bool> = rep.flags.iter().map(|f| f.cond_iii).collect();
        assert_eq!(ci, vec![false, true, true]);
        assert_eq!(ciii, vec![false, false, true]);
        assert!(rep.flags.iter().all(|f| !f.cond_ii));
        assert_eq!((rep.s_star, rep.kappa, rep.eta), (2, 2, 1));
    }

    #[test]
    fn empirical_risk_values() {
        let mk = |k: usize, n: usize| {
            let flags = (0..n).map(|i| Flags { cond_i: i < k, ..Default::default() }).collect();
            ComplexityReport::from_flags(flags, 1e-6)
        };
        assert!((empirical_adversarial_risk(&mk(24, 500)).unwrap() - 0.048).abs() < 1e-15);
        assert_eq!(empirical_adversarial_risk(&mk(0, 5)).unwrap(), 0.0);
        assert_eq!(empirical_adversarial_risk(&mk(5, 5)).unwrap(), 1.0);
        assert!(empirical_adversarial_risk(&mk(0, 0)).is_err());
    }
}
