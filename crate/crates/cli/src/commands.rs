//! Subcommand implementations. Each returns a JSON document, optional CSV
//! rows and a one-line summary.

use std::path::PathBuf;

use advcert_core::bounds::{certify, lambda_sweep, ood_sweep, Certificate, EpsilonCache, OodBound, Regime};
use advcert_core::complexity::{complexity, ComplexityOptions, ComplexityReport};
use advcert_core::hull::{
    convex_hull, hull_r_sweep, hull_training_points, ood_empirical_risk, HullModel, OodRisk, ShiftKind,
    ShiftSpec, MIN_MC_SAMPLES,
};
use advcert_core::model::{Dataset, Predictor};
use advcert_core::regions::{approx_within_region, make_approx_all, ApproxSet, Norm, RegionSpec};
use advcert_core::rng::{stream, RNG_NAME, RNG_VERSION};
use advcert_core::svr::{train_on_sets, SolveDiagnostics, SvrSolution};
use serde::{Deserialize, Serialize};

use crate::config::{hash_json, DataSource, RunConfig, Task};
use crate::data::read_dataset;
use crate::error::{usage, CliResult};
use crate::output::fmt_f64;
use crate::sinc::{gen_sinc_scaled, sinc_points};
use crate::validate::{validate, ValidationReport};

/// Provenance attached to every output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub rng: String,
    pub rng_version: String,
    pub config_hash: String,
}

impl Metadata {
    fn new(command: &str, seed: u64, config_hash: String) -> Self {
        Self {
            tool: "advcert".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            rng: RNG_NAME.into(),
            rng_version: RNG_VERSION.into(),
            config_hash,
        }
    }
}

/// Result of one subcommand.
pub struct Outcome {
    pub json: String,
    pub csv: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
    pub summary: String,
}

fn outcome<T: Serialize>(doc: &T, summary: String) -> Outcome {
    Outcome { json: crate::output::to_json(doc), csv: None, summary }
}

/// Counts without per-point flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub s_star: usize,
    pub eta: usize,
    pub kappa: usize,
    pub indeterminate: usize,
    pub tol: f64,
}

impl From<&ComplexityReport> for ReportSummary {
    fn from(r: &ComplexityReport) -> Self {
        Self { s_star: r.s_star, eta: r.eta, kappa: r.kappa, indeterminate: r.indeterminate, tol: r.tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub metadata: Metadata,
    pub predictor: Predictor,
    pub objective: f64,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutput {
    #[serde(flatten)]
    pub certificate: Certificate,
    pub gamma: f64,
    pub report: ReportSummary,
    pub predictor: Predictor,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub report: ReportSummary,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub metadata: Metadata,
    pub beta: f64,
    /// Confidence holding simultaneously over the whole grid.
    pub joint_confidence: f64,
    pub entries: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodOutput {
    pub metadata: Metadata,
    pub bound: OodBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateOutput {
    pub metadata: Metadata,
    pub certificate: Certificate,
    pub validation: ValidationReport,
}

/// Prepared training run.
pub struct Run {
    pub cfg: RunConfig,
    pub data: Dataset,
    pub sets: Vec<ApproxSet>,
    pub hash: String,
}

impl Run {
    pub fn new(cfg: RunConfig) -> CliResult<Self> {
        cfg.validate()?;
        let data = match &cfg.data {
            DataSource::Csv { path } => read_dataset(path)?,
            DataSource::Sinc { n, noise_scale } => gen_sinc_scaled(*n, cfg.seed, *noise_scale),
        };
        if data.is_empty() {
            return usage("training needs at least one data point");
        }
        let sets = make_approx_all(&cfg.approx, &cfg.region, data.points())?;
        let hash = cfg.hash();
        Ok(Self { cfg, data, sets, hash })
    }

    fn metadata(&self, task: Task) -> Metadata {
        Metadata::new(task.name(), self.cfg.seed, self.hash.clone())
    }

    fn options(&self) -> ComplexityOptions {
        ComplexityOptions { grid_resolution: self.cfg.grid_resolution, ..Default::default() }
    }

    pub fn train(&self) -> CliResult<SvrSolution> {
        Ok(train_on_sets(&self.data, &self.sets, &self.cfg.train, self.cfg.kernel)?)
    }

    fn regime(&self, region: &RegionSpec) -> Regime {
        if approx_within_region(&self.sets, region, self.data.points()) {
            Regime::Subset
        } else {
            Regime::General
        }
    }

    /// Trains, computes the complexity on the configured region and certifies.
    pub fn certify(&self) -> CliResult<(SvrSolution, ComplexityReport, Certificate)> {
        let sol = self.train()?;
        let report = complexity(&sol.predictor, self.data.points(), &self.cfg.region, &self.sets, &self.options())?;
        let mut cert = certify(&report, self.cfg.beta, self.regime(&self.cfg.region))?;
        cert.config_hash = Some(self.hash.clone());
        Ok((sol, report, cert))
    }
}

fn interval(c: &Certificate) -> String {
    match c.eps_lo {
        Some(lo) => format!("[{lo:.4}, {:.4}]", c.eps_hi),
        None => format!("[-, {:.4}]", c.eps_hi),
    }
}

pub fn run_train(run: &Run) -> CliResult<Outcome> {
    let sol = run.train()?;
    let summary = format!("gamma*={:.6} objective={:.6} N={}", sol.predictor.gamma(), sol.objective, run.data.len());
    let doc = TrainOutput { metadata: run.metadata(Task::Train), predictor: sol.predictor, objective: sol.objective, diagnostics: sol.diagnostics };
    Ok(outcome(&doc, summary))
}

pub fn run_certify(run: &Run) -> CliResult<Outcome> {
    let (sol, report, cert) = run.certify()?;
    let summary =
        format!("gamma*={:.6} s*={} N={} eps={} regime={:?}", sol.predictor.gamma(), report.s_star, cert.n, interval(&cert), cert.regime);
    let doc = CertifyOutput {
        gamma: sol.predictor.gamma(),
        report: (&report).into(),
        predictor: sol.predictor,
        metadata: run.metadata(Task::Certify),
        certificate: cert,
    };
    Ok(outcome(&doc, summary))
}

pub fn default_lambdas() -> Vec<f64> {
    (0..=8).map(|i| 0.25 * i as f64).collect()
}

pub fn run_sweep(run: &Run) -> CliResult<Outcome> {
    let lambdas = run.cfg.lambda_grid.clone().unwrap_or_else(default_lambdas);
    if lambdas.is_empty() {
        return usage("lambda_grid must not be empty");
    }
    if matches!(run.cfg.region, RegionSpec::Singleton) {
        return usage("sweep-lambda needs a ball region");
    }
    let sol = run.train()?;
    let sweep = lambda_sweep(&sol.predictor, run.data.points(), &run.cfg.region, &run.sets, &lambdas, run.cfg.beta, &run.options())?;
    let entries: Vec<SweepRow> = sweep
        .into_iter()
        .map(|e| {
            let mut certificate = e.certificate;
            certificate.config_hash = Some(run.hash.clone());
            SweepRow { lambda: e.lambda, report: (&e.report).into(), certificate }
        })
        .collect();
    let rows = entries
        .iter()
        .map(|e| {
            vec![
                fmt_f64(e.lambda),
                e.report.s_star.to_string(),
                e.certificate.eps_lo.map(fmt_f64).unwrap_or_default(),
                fmt_f64(e.certificate.eps_hi),
                fmt_f64(e.certificate.eps_hi),
            ]
        })
        .collect();
    let last = entries.last().expect("non-empty grid");
    let summary = format!("gamma*={:.6} lambdas={} s*(max)={} eps_hi(max)={:.4}", sol.predictor.gamma(), entries.len(), last.report.s_star, last.certificate.eps_hi);
    let doc = SweepOutput {
        metadata: run.metadata(Task::SweepLambda),
        beta: run.cfg.beta,
        joint_confidence: 1.0 - entries.len() as f64 * run.cfg.beta,
        entries,
    };
    let mut out = outcome(&doc, summary);
    out.csv = Some((vec!["lambda", "s_star", "eps_lo", "eps_hi", "bound"], rows));
    Ok(out)
}

fn bound_rows(b: &OodBound) -> Vec<Vec<String>> {
    b.entries.iter().map(|e| vec![fmt_f64(e.radius), e.s_star.to_string(), String::new(), fmt_f64(e.eps_hi), fmt_f64(e.bound)]).collect()
}

const R_HEADER: [&str; 5] = ["radius", "s_star", "eps_lo", "eps_hi", "bound"];

pub fn run_ood(run: &Run) -> CliResult<Outcome> {
    let Some(ood) = &run.cfg.ood else {
        return usage("ood needs an \"ood\" section with mu and radii");
    };
    let norm = match run.cfg.region {
        RegionSpec::Ball { norm, .. } => norm,
        RegionSpec::Singleton => Norm::L2,
    };
    let sol = run.train()?;
    let bound = ood_sweep(&sol.predictor, run.data.points(), norm, &run.sets, &ood.radii, ood.mu, run.cfg.beta, &run.options())?;
    let best = &bound.entries[bound.best_index];
    let summary = format!("best bound={:.4} at R={} (s*={}) confidence={}", bound.best_bound, best.radius, best.s_star, bound.confidence);
    let rows = bound_rows(&bound);
    let doc = OodOutput { metadata: run.metadata(Task::Ood), bound };
    let mut out = outcome(&doc, summary);
    out.csv = Some((R_HEADER.to_vec(), rows));
    Ok(out)
}

pub fn run_validate(run: &Run) -> CliResult<Outcome> {
    let n_fresh = run.cfg.validation.as_ref().map(|v| v.n_fresh).unwrap_or(10_000);
    let noise = match run.cfg.data {
        DataSource::Sinc { noise_scale, .. } => noise_scale,
        DataSource::Csv { .. } => return usage("validate draws fresh data and needs the sinc generator"),
    };
    let (sol, _, cert) = run.certify()?;
    let sampler = move |n: usize, seed: u64| sinc_points(n, seed, stream::FRESH_DATA, noise);
    let report = validate(&sol.predictor, &run.cfg.region, &sampler, n_fresh, run.cfg.seed, run.cfg.grid_resolution, &cert)?;
    let summary = format!(
        "risk={:.5}±{:.5} eps={} covered={} s*={}",
        report.risk,
        report.std_error,
        interval(&cert),
        report.covered,
        cert.s_star
    );
    let doc = ValidateOutput { metadata: run.metadata(Task::Validate), certificate: cert, validation: report };
    Ok(outcome(&doc, summary))
}

/// Parameters of the convex-hull demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullParams {
    pub n: usize,
    pub mu: f64,
    pub h: usize,
    /// Spacing of the radius grid; the grid is `mu + step * i`.
    pub step: f64,
    /// Total miscoverage over the grid; each radius uses `delta / h`.
    pub delta: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftOutcome {
    pub kind: ShiftKind,
    #[serde(flatten)]
    pub risk: OodRisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullOutput {
    pub metadata: Metadata,
    pub params: HullParams,
    pub beta: f64,
    pub hull: HullModel,
    pub bound: OodBound,
    pub shifts: Vec<ShiftOutcome>,
}

pub fn run_hull(p: &HullParams) -> CliResult<Outcome> {
    if p.n < 3 || p.h == 0 {
        return usage("hull-demo needs n >= 3 and h >= 1");
    }
    if !(p.mu > 0.0 && p.step > 0.0 && p.delta > 0.0 && p.delta < 1.0) {
        return usage("mu and step must be positive, delta in (0, 1)");
    }
    if p.mc_samples < MIN_MC_SAMPLES {
        return usage(format!("mc_samples must be at least {MIN_MC_SAMPLES}"));
    }
    let beta = p.delta / p.h as f64;
    let pts = hull_training_points(p.n, p.seed);
    let hull = convex_hull(&pts)?;
    let radii: Vec<f64> = (0..p.h).map(|i| p.mu + p.step * i as f64).collect();
    let bound = hull_r_sweep(&pts, &hull, &radii, p.mu, beta, &mut EpsilonCache::new())?;
    let mut shifts = Vec::new();
    for kind in [ShiftKind::AnnulusToBoundary, ShiftKind::BoundaryBandRadial] {
        let risk = ood_empirical_risk(&hull, &ShiftSpec { kind, mu: p.mu, mc_samples: p.mc_samples, seed: p.seed })?;
        shifts.push(ShiftOutcome { kind, risk });
    }
    let best = &bound.entries[bound.best_index];
    let summary = format!(
        "vertices={} best bound={:.4} at R={:.4} (s*={}) risks: annulus={:.4} band={:.4}",
        hull.vertices.len(),
        bound.best_bound,
        best.radius,
        best.s_star,
        shifts[0].risk.risk,
        shifts[1].risk.risk
    );
    let rows = bound_rows(&bound);
    let doc = HullOutput { metadata: Metadata::new("hull-demo", p.seed, hash_json(p)), params: p.clone(), beta, hull, bound, shifts };
    let mut out = outcome(&doc, summary);
    out.csv = Some((R_HEADER.to_vec(), rows));
    Ok(out)
}

/// Where outputs go: a JSON path (CSV next to it) or stdout.
pub fn resolve_out(flag: Option<PathBuf>, cfg: Option<&RunConfig>) -> Option<PathBuf> {
    flag.or_else(|| cfg.and_then(|c| c.output.clone()))
}
