//! Risk bounds as functions of the complexity `k` out of `N` samples.
//!
//! For `k < N` the bounds come from the two positive roots `t_lo <= t_hi` of
//!
//! ```text
//! C(N,k) t^(N-k) - beta/(2N) sum_{i=k}^{N-1} C(i,k) t^(i-k)
//!                - beta/(6N) sum_{i=N+1}^{4N} C(i,k) t^(i-k) = 0
//! ```
//!
//! and for `k = N` from the single root of
//! `1 - beta/(6N) sum_{i=N+1}^{4N} C(i,N) t^(i-N) = 0`, with `t_lo = 0`.
//! Then `eps_hi = 1 - t_lo` and `eps_lo = max(0, 1 - t_hi)`.
//!
//! Dividing by the leading term gives `phi(t) = 1` where `phi` is a
//! positive combination of powers of `t`. It is evaluated as a log-sum-exp
//! in `s = ln t` with log binomial ratios, so no coefficient overflows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::complexity::{ComplexityOptions, ComplexityReport};
use crate::error::{usage, Error, Result};
use crate::model::{DataPoint, Predictor};
use crate::regions::{approx_within_region, scale_region, ApproxSet, RegionSpec};

/// Bounds for one `(N, k, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPair {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// `phi(t) - 1` at each root.
    pub residual_lo: f64,
    pub residual_hi: f64,
}

/// Terms below this log-ratio to the largest term are dropped.
const LOG_CUTOFF: f64 = 40.0;

/// Normalized equation for fixed `(N, k, beta)`.
struct Equation {
    n: usize,
    k: usize,
    /// `ln(C(i,k)/C(N,k))` for `i` in `k..=4N`, indexed by `i - k`.
    log_ratio: Vec<f64>,
    log_w_low: f64,
    log_w_high: f64,
}

impl Equation {
    fn new(n: usize, k: usize, beta: f64) -> Self {
        let top = 4 * n;
        let mut log_ratio = vec![0.0; top - k + 1];
        for i in (k..n).rev() {
            // C(i,k)/C(i+1,k) = (i+1-k)/(i+1)
            log_ratio[i - k] = log_ratio[i + 1 - k] - (k as f64 / (i + 1 - k) as f64).ln_1p();
        }
        for i in n + 1..=top {
            // C(i,k)/C(i-1,k) = i/(i-k)
            log_ratio[i - k] = log_ratio[i - 1 - k] + (k as f64 / (i - k) as f64).ln_1p();
        }
        let nf = n as f64;
        Self { n, k, log_ratio, log_w_low: (beta / (2.0 * nf)).ln(), log_w_high: (beta / (6.0 * nf)).ln() }
    }

    fn term(&self, i: usize, s: f64) -> f64 {
        self.log_ratio[i - self.k] + (i as f64 - self.n as f64) * s
    }

    /// `(log sum, weighted mean exponent)` of the terms with `i` in `lo..=hi`.
    /// The log terms are concave in `i`, so the sum is built outward from the peak.
    fn block(&self, lo: usize, hi: usize, s: f64) -> (f64, f64) {
        // peak: last i whose increment over i-1 is positive
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = (a + b).div_ceil(2);
            if self.term(mid, s) > self.term(mid - 1, s) {
                a = mid;
            } else {
                b = mid - 1;
            }
        }
        let peak = a;
        let top = self.term(peak, s);
        let mut sum = 0.0;
        let mut moment = 0.0;
        let mut add = |i: usize| -> bool {
            let l = self.term(i, s) - top;
            if l < -LOG_CUTOFF {
                return false;
            }
            let e = l.exp();
            sum += e;
            moment += e * (i as f64 - self.n as f64);
            true
        };
        add(peak);
        let mut i = peak;
        while i > lo && add(i - 1) {
            i -= 1;
        }
        let mut i = peak;
        while i < hi && add(i + 1) {
            i += 1;
        }
        (top + sum.ln(), moment / sum)
    }

    /// `(ln phi(e^s), d ln phi / ds)`.
    fn log_phi(&self, s: f64) -> (f64, f64) {
        let (hl, hm) = self.block(self.n + 1, 4 * self.n, s);
        let hl = hl + self.log_w_high;
        if self.k == self.n {
            return (hl, hm);
        }
        let (ll, lm) = self.block(self.k, self.n - 1, s);
        let ll = ll + self.log_w_low;
        let m = ll.max(hl);
        let (a, b) = ((ll - m).exp(), (hl - m).exp());
        (m + (a + b).ln(), (a * lm + b * hm) / (a + b))
    }

    fn residual(&self, s: f64) -> f64 {
        self.log_phi(s).0.exp_m1()
    }

    /// Root of `ln phi = 0` between `inside` (where it is negative) and
    /// `outside` (where it is positive), to floating-point resolution in `s`.
    fn root(&self, mut inside: f64, mut outside: f64) -> f64 {
        for _ in 0..4000 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if self.log_phi(mid).0 > 0.0 {
                outside = mid;
            } else {
                inside = mid;
            }
        }
        if self.residual(inside).abs() <= self.residual(outside).abs() {
            inside
        } else {
            outside
        }
    }

    /// Moves from `start` by steps of doubling size in `dir` until `ln phi > 0`.
    fn bracket(&self, start: f64, dir: f64) -> Result<f64> {
        let mut step = 1.0;
        let mut s = start;
        for _ in 0..64 {
            s = start + dir * step;
            if self.log_phi(s).0 > 0.0 {
                return Ok(s);
            }
            step *= 2.0;
        }
        Err(Error::Numeric(format!("no sign change bracketing a root (N={}, k={}, s={s})", self.n, self.k)))
    }

    /// Minimizer of `phi` in `s` (only for `k < N`).
    fn argmin(&self) -> Result<f64> {
        let slope = |s: f64| self.log_phi(s).1;
        let (mut a, mut b) = (-1.0, 1.0);
        let mut step = 1.0;
        while slope(a) > 0.0 {
            step *= 2.0;
            a = -step;
            if step > 1e6 {
                return Err(Error::Numeric("minimizer bracket failed".into()));
            }
        }
        step = 1.0;
        while slope(b) < 0.0 {
            step *= 2.0;
            b = step;
            if step > 1e6 {
                return Err(Error::Numeric("minimizer bracket failed".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b || b - a < 1e-13 {
                break;
            }
            if slope(mid) > 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

fn check_args(n: usize, k: usize, beta: f64) -> Result<()> {
    if n == 0 {
        return usage("N must be at least 1");
    }
    if k > n {
        return usage("k must not exceed N");
    }
    if !(beta > 0.0 && beta < 1.0) {
        return usage("beta must lie in (0, 1)");
    }
    Ok(())
}

/// Risk interval `[eps_lo(k), eps_hi(k)]` for complexity `k` out of `n`.
pub fn epsilon(n: usize, k: usize, beta: f64) -> Result<EpsilonPair> {
    check_args(n, k, beta)?;
    let eq = Equation::new(n, k, beta);
    if k == n {
        // phi increases from 0 to infinity
        let mut inside = -1.0;
        let mut step = 1.0;
        while eq.log_phi(inside).0 > 0.0 {
            step *= 2.0;
            inside = -step;
            if step > 1e6 {
                return Err(Error::Numeric("root bracket failed".into()));
            }
        }
        let outside = eq.bracket(inside, 1.0)?;
        let s_hi = eq.root(inside, outside);
        let t_hi = s_hi.exp();
        return Ok(EpsilonPair {
            eps_lo: (1.0 - t_hi).max(0.0),
            eps_hi: 1.0,
            t_lo: 0.0,
            t_hi,
            residual_lo: 0.0,
            residual_hi: eq.residual(s_hi),
        });
    }
    let s_min = eq.argmin()?;
    if eq.log_phi(s_min).0 >= 0.0 {
        return Err(Error::Numeric(format!("equation has no roots (N={n}, k={k}, beta={beta})")));
    }
    let s_lo = eq.root(s_min, eq.bracket(s_min, -1.0)?);
    let s_hi = eq.root(s_min, eq.bracket(s_min, 1.0)?);
    let (t_lo, t_hi) = (s_lo.exp(), s_hi.exp());
    Ok(EpsilonPair {
        eps_lo: (1.0 - t_hi).clamp(0.0, 1.0),
        eps_hi: (1.0 - t_lo).clamp(0.0, 1.0),
        t_lo,
        t_hi,
        residual_lo: eq.residual(s_lo),
        residual_hi: eq.residual(s_hi),
    })
}

/// Bounds for every `k` in `0..=n`.
pub fn epsilon_table(n: usize, beta: f64) -> Result<Vec<EpsilonPair>> {
    (0..=n).map(|k| epsilon(n, k, beta)).collect()
}

/// Memo of [`epsilon`] results keyed by `(N, k, beta)`.
#[derive(Debug, Default, Clone)]
pub struct EpsilonCache {
    map: HashMap<(usize, usize, u64), EpsilonPair>,
}

impl EpsilonCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, n: usize, k: usize, beta: f64) -> Result<EpsilonPair> {
        let key = (n, k, beta.to_bits());
        if let Some(e) = self.map.get(&key) {
            return Ok(*e);
        }
        let e = epsilon(n, k, beta)?;
        self.map.insert(key, e);
        Ok(e)
    }
}

/// Closed-form envelopes around the exact bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub upper: f64,
    pub lower: f64,
}

/// Explicit upper and lower envelopes, clamped to `[0, 1]`.
pub fn epsilon_explicit(n: usize, k: usize, beta: f64) -> Result<Envelope> {
    check_args(n, k, beta)?;
    let (nf, kf) = (n as f64, k as f64);
    let root = (kf + 1.0).sqrt();
    let lk = (kf + 1.0).ln().sqrt();
    let lb = (1.0 / beta).ln();
    let upper = kf / nf + 2.0 * root / nf * (lk + 4.0) + 2.0 * root * lb.sqrt() / nf + lb / nf;
    let lower = kf / nf - 3.0 * root / nf * (lk + 2.0) - 3.0 * root * lb.sqrt() / nf;
    Ok(Envelope { upper: upper.clamp(0.0, 1.0), lower: lower.clamp(0.0, 1.0) })
}

/// Which guarantee applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Approximation points lie inside the regions: two-sided interval.
    Subset,
    /// No containment relation: upper bound only.
    General,
}

/// A risk certificate at confidence `1 - beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    pub s_star: usize,
    pub eps_lo: Option<f64>,
    pub eps_hi: f64,
    pub regime: Regime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Certificate from a complexity value.
pub fn certificate(n: usize, s_star: usize, beta: f64, regime: Regime) -> Result<Certificate> {
    let pair = epsilon(n, s_star, beta)?;
    Ok(Certificate {
        n,
        beta,
        s_star,
        eps_lo: (regime == Regime::Subset).then_some(pair.eps_lo),
        eps_hi: pair.eps_hi,
        regime,
        config_hash: None,
    })
}

/// Certificate for a complexity report.
pub fn certify(report: &ComplexityReport, beta: f64, regime: Regime) -> Result<Certificate> {
    certificate(report.n(), report.s_star, beta, regime)
}

/// One entry of a region-scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub report: ComplexityReport,
    pub certificate: Certificate,
}

/// Certificates for a fixed predictor as the regions are scaled by each
/// `lambda` (ascending). A region that escapes the band at some scale also
/// escapes at every larger scale, so condition (i) is carried forward.
pub fn lambda_sweep(
    p: &Predictor,
    data: &[DataPoint],
    region: &RegionSpec,
    approxs: &[ApproxSet],
    lambdas: &[f64],
    beta: f64,
    opts: &ComplexityOptions,
) -> Result<Vec<SweepEntry>> {
    if lambdas.windows(2).any(|w| !(w[0] <= w[1])) {
        return usage("lambdas must be sorted ascending");
    }
    let mut carried = vec![false; data.len()];
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let scaled = scale_region(region, lambda)?;
        let mut report = crate::complexity::complexity(p, data, &scaled, approxs, opts)?;
        for (f, c) in report.flags.iter_mut().zip(&mut carried) {
            f.cond_i |= *c;
            *c = f.cond_i;
        }
        report = ComplexityReport::from_flags(report.flags, report.tol);
        let regime = if approx_within_region(approxs, &scaled, data) { Regime::Subset } else { Regime::General };
        let certificate = certify(&report, beta, regime)?;
        out.push(SweepEntry { lambda, report, certificate });
    }
    Ok(out)
}

/// Out-of-distribution bound at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodEntry {
    pub radius: f64,
    pub s_star: usize,
    pub eps_hi: f64,
    pub bound: f64,
}

/// Out-of-distribution bounds over a grid of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodBound {
    pub mu: f64,
    pub beta: f64,
    pub entries: Vec<OodEntry>,
    pub best_index: usize,
    pub best_bound: f64,
    /// Holds simultaneously for the whole grid: `1 - h beta`.
    pub confidence: f64,
}

/// Combines `(radius, s*, eps_hi)` triples with a transport budget `mu`.
pub fn ood_bound(sweep: &[(f64, usize, f64)], mu: f64, beta: f64) -> Result<OodBound> {
    if sweep.is_empty() {
        return usage("radius grid must not be empty");
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return usage("transport budget must be positive");
    }
    if !(beta > 0.0 && beta < 1.0) {
        return usage("beta must lie in (0, 1)");
    }
    let mut entries = Vec::with_capacity(sweep.len());
    for &(radius, s_star, eps_hi) in sweep {
        if !(radius > 0.0 && radius.is_finite()) {
            return usage("radii must be positive");
        }
        entries.push(OodEntry { radius, s_star, eps_hi, bound: eps_hi + mu / radius });
    }
    let mut best = 0;
    for (i, e) in entries.iter().enumerate().skip(1) {
        let b = &entries[best];
        if e.bound < b.bound || (e.bound == b.bound && e.radius < b.radius) {
            best = i;
        }
    }
    Ok(OodBound {
        mu,
        beta,
        best_bound: entries[best].bound,
        best_index: best,
        confidence: 1.0 - entries.len() as f64 * beta,
        entries,
    })
}

/// Radius sweep for a band predictor: balls of each radius in `(u, y)`
/// space, general-regime certificates, combined into an [`OodBound`].
#[allow(clippy::too_many_arguments)]
pub fn ood_sweep(
    p: &Predictor,
    data: &[DataPoint],
    norm: crate::regions::Norm,
    approxs: &[ApproxSet],
    radii: &[f64],
    mu: f64,
    beta: f64,
    opts: &ComplexityOptions,
) -> Result<OodBound> {
    let mut triples = Vec::with_capacity(radii.len());
    for &r in radii {
        let region = RegionSpec::Ball { norm, radius: crate::regions::RadiusRule::Constant(r), scale: 1.0 };
        let report = crate::complexity::complexity(p, data, &region, approxs, opts)?;
        let cert = certify(&report, beta, Regime::General)?;
        triples.push((r, report.s_star, cert.eps_hi));
    }
    ood_bound(&triples, mu, beta)
}
