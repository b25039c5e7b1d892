//! Monte Carlo check of a certificate on fresh data.

use advcert_core::bounds::Certificate;
use advcert_core::containment::BandChecker;
use advcert_core::model::{DataPoint, Predictor};
use advcert_core::regions::RegionSpec;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliResult};

pub const MIN_FRESH: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_fresh: usize,
    /// Fraction of fresh points whose region leaves the band.
    pub risk: f64,
    pub std_error: f64,
    pub eps_lo: Option<f64>,
    pub eps_hi: f64,
    /// Risk within the certificate interval widened by two standard errors.
    pub covered: bool,
    /// Verdicts resolved pessimistically by the grid.
    pub indeterminate: usize,
}

/// Estimates the adversarial risk on `n_fresh` points drawn by `sampler(n, seed)`.
pub fn validate(
    predictor: &Predictor,
    region: &RegionSpec,
    sampler: &dyn Fn(usize, u64) -> Vec<DataPoint>,
    n_fresh: usize,
    seed: u64,
    grid_resolution: usize,
    certificate: &Certificate,
) -> CliResult<ValidationReport> {
    if n_fresh < MIN_FRESH {
        return usage(format!("validation needs at least {MIN_FRESH} fresh points"));
    }
    let checker = BandChecker::new(predictor, 0.0, grid_resolution)?;
    let mut bad = 0usize;
    let mut indeterminate = 0usize;
    for pt in sampler(n_fresh, seed) {
        let v = checker.contains(&region.at(&pt))?;
        bad += usize::from(!v.contained);
        indeterminate += usize::from(v.indeterminate);
    }
    let n = n_fresh as f64;
    let risk = bad as f64 / n;
    let std_error = (risk * (1.0 - risk) / n).sqrt();
    let lo = certificate.eps_lo.unwrap_or(0.0);
    let covered = risk + 2.0 * std_error >= lo && risk - 2.0 * std_error <= certificate.eps_hi;
    Ok(ValidationReport { n_fresh, risk, std_error, eps_lo: certificate.eps_lo, eps_hi: certificate.eps_hi, covered, indeterminate })
}
