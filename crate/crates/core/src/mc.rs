//! Replicated simulation with uncertainty, checked against the closed forms.
//!
//! Every replicate owns the random stream `(master_seed, index)` and yields
//! an immutable [`ReplicateRecord`]; aggregation folds the records in index
//! order, so reports do not depend on the number of workers.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{ClosedForms, IntegralValue};
use crate::classify::{self, Regime, RegimeVerdict};
use crate::dist::MeanValue;
use crate::error::{invalid, Result, TabpError};
use crate::geometry::{self, ComponentKind};
use crate::process::{self, Domain, GermSampler, ModelParams, DEFAULT_BUFFER_EPS};
use crate::stats::{self, ChiSquareTest, KsTest, MeanSe};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone)]
pub struct McConfig {
    pub params: ModelParams,
    pub window: f64,
    pub replicates: u64,
    pub master_seed: u64,
    pub burn_in: f64,
    pub probe_points: Vec<f64>,
    /// Sub-windows for the `N_v(T)` growth curve. Empty means a decade
    /// ladder up to `window` when the model is in regime III.
    pub nested_windows: Vec<f64>,
    /// Worker threads; 0 means available parallelism. Does not affect results.
    pub workers: usize,
    /// Comparisons pass within this many standard errors.
    pub threshold_se: f64,
    /// Goodness-of-fit tests pass above this p-value.
    pub min_p_value: f64,
    /// Goodness-of-fit tests are skipped below this sample size.
    pub min_test_samples: usize,
    pub geometric_bins: usize,
    pub buffer_eps: f64,
}

impl McConfig {
    pub fn new(params: ModelParams, window: f64, replicates: u64, master_seed: u64) -> Self {
        let probe_points = [1.0, 2.0, 5.0, 10.0].into_iter().filter(|&t| t <= window).collect();
        Self {
            params,
            window,
            replicates,
            master_seed,
            burn_in: 0.0,
            probe_points,
            nested_windows: Vec::new(),
            workers: 0,
            threshold_se: 4.0,
            min_p_value: 0.01,
            min_test_samples: 500,
            geometric_bins: 4,
            buffer_eps: DEFAULT_BUFFER_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(invalid(format!(
                "window must be positive and finite, got {}",
                self.window
            )));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.window) {
            return Err(invalid(format!("burn-in must lie in [0, T), got {}", self.burn_in)));
        }
        if let Some(t) = self.probe_points.iter().find(|t| !(0.0..=self.window).contains(*t)) {
            return Err(invalid(format!("probe point {t} outside [0, {}]", self.window)));
        }
        if let Some(w) = self.nested_windows.iter().find(|w| !(**w > 0.0 && **w <= self.window)) {
            return Err(invalid(format!("nested window {w} outside (0, {}]", self.window)));
        }
        if !(self.threshold_se > 0.0) {
            return Err(invalid("threshold must be positive"));
        }
        if self.geometric_bins < 2 {
            return Err(invalid("geometric test needs at least 2 bins"));
        }
        if self.params.domain == Domain::FullLine && !self.params.dist.mean().is_finite() {
            return Err(TabpError::FullLineInfiniteMean);
        }
        Ok(())
    }

    fn nested_ladder(&self, verdict: &RegimeVerdict) -> Vec<f64> {
        if !self.nested_windows.is_empty() {
            let mut w = self.nested_windows.clone();
            w.sort_by(f64::total_cmp);
            w.dedup();
            return w;
        }
        if verdict.regime != Regime::III || self.params.domain != Domain::HalfLine {
            return Vec::new();
        }
        let mut ladder: Vec<f64> = (2..).map(|k| 10f64.powi(k)).take_while(|&w| w < self.window).collect();
        ladder.push(self.window);
        ladder
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedRecord {
    pub window: f64,
    pub n_vacant: usize,
    pub covered_fraction: f64,
}

/// What one replicate contributes to the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub index: u64,
    pub covered_fraction: f64,
    /// Complete vacant components in `[0, T]`.
    pub n_vacant: usize,
    pub vacant_length: f64,
    pub final_kind: ComponentKind,
    pub left_censored: bool,
    pub probe_vacant: Vec<bool>,
    pub gap_lengths: Vec<f64>,
    pub nested: Vec<NestedRecord>,
    pub clamped: u64,
}

/// Simulates and decomposes replicate `index`.
pub fn simulate_replicate(cfg: &McConfig, nested: &[f64], index: u64) -> Result<ReplicateRecord> {
    let params = &cfg.params;
    let rng = process::replicate_rng(cfg.master_seed, index);
    let start = match params.domain {
        Domain::HalfLine => 0.0,
        Domain::FullLine => -process::left_buffer(params, cfg.buffer_eps)?,
    };
    let mut sampler = GermSampler::new(params, start, cfg.window, rng);
    let dec = geometry::decompose_stream(sampler.by_ref(), cfg.window, params.domain)?;
    let probe_vacant = cfg
        .probe_points
        .iter()
        .map(|&t| dec.is_vacant_at(t))
        .collect::<Result<Vec<_>>>()?;
    let nested = nested
        .iter()
        .map(|&w| {
            let sub = dec.restrict(w)?;
            Ok(NestedRecord {
                window: w,
                n_vacant: sub.n_vacant_complete,
                covered_fraction: sub.covered_length / w,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateRecord {
        index,
        covered_fraction: dec.covered_fraction(cfg.burn_in)?,
        n_vacant: dec.n_vacant_complete,
        vacant_length: dec.vacant_length(),
        final_kind: dec.final_kind,
        left_censored: dec.left_censored,
        probe_vacant,
        gap_lengths: dec.vacant_gap_lengths,
        nested,
        clamped: sampler.clamped(),
    })
}

/// Runs all replicates on `cfg.workers` threads; records come back in
/// index order.
pub fn run_replicates(cfg: &McConfig, nested: &[f64]) -> Result<Vec<ReplicateRecord>> {
    cfg.validate()?;
    let workers = match cfg.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|i| simulate_replicate(cfg, nested, i))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Not enough replicates for a standard error.
    Unavailable,
    /// Not applicable to this model, or too few samples.
    Skipped,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Unavailable => "n/a",
            Status::Skipped => "skip",
        }
    }
}

/// An estimate set against a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub estimate: f64,
    pub se: Option<f64>,
    pub n: usize,
    pub predicted: f64,
    pub z: Option<f64>,
    pub status: Status,
}

impl Comparison {
    pub fn new(estimate: f64, se: Option<f64>, n: usize, predicted: f64, threshold: f64) -> Self {
        let diff = estimate - predicted;
        let (z, status) = match se {
            None => (None, Status::Unavailable),
            Some(se) if se > 0.0 => {
                let z = diff / se;
                (
                    Some(z),
                    if z.abs() <= threshold {
                        Status::Pass
                    } else {
                        Status::Fail
                    },
                )
            }
            Some(_) => {
                let exact = diff.abs() <= 1e-12 * predicted.abs().max(1.0);
                (None, if exact { Status::Pass } else { Status::Fail })
            }
        };
        Self {
            estimate,
            se,
            n,
            predicted,
            z,
            status,
        }
    }

    fn from_mean(m: MeanSe, predicted: f64, threshold: f64) -> Self {
        Self::new(m.mean, m.se, m.n, predicted, threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeEstimate {
    pub t: f64,
    /// Binomial SE under the predicted probability.
    #[serde(flatten)]
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveredSection {
    /// Against the exact expectation on the finite window.
    #[serde(flatten)]
    pub comparison: Comparison,
    /// The infinite-window covered volume fraction.
    pub asymptotic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSection {
    pub count: usize,
    /// Mean complete-gap length against `1/λ`.
    pub mean: Comparison,
    pub ks: Option<KsTest>,
    pub status: Status,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NvSection {
    /// Mean complete vacant count on `[0, T]` against `λ ∫_0^T P(t vacant) dt`.
    pub mean: Comparison,
    /// `E N_v` on the whole half-line.
    pub expected_total: IntegralValue,
    pub geometric_p: Option<f64>,
    pub chi_square: Option<ChiSquareTest>,
    pub geometric_status: Status,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthPoint {
    #[serde(rename = "T")]
    pub window: f64,
    pub n_vacant: Comparison,
    pub covered_fraction: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSection {
    pub points: Vec<GrowthPoint>,
    pub n_vacant_strictly_increasing: bool,
    pub covered_fraction_increasing: bool,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McDiagnostics {
    pub clamped_samples: u64,
    pub complete_gaps: usize,
    /// Fraction of replicates whose last component is a cut vacant gap.
    pub final_vacant_rate: f64,
    pub final_occupied_rate: f64,
    pub left_censored_rate: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub lambda: f64,
    pub dist: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    #[serde(rename = "T")]
    pub window: f64,
    pub replicates: u64,
    pub seed: u64,
    pub burn_in: f64,
    pub threshold_se: f64,
    pub min_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub schema: u32,
    pub model: ModelSummary,
    pub run: RunSummary,
    pub verdict: RegimeVerdict,
    pub vacancy: Vec<ProbeEstimate>,
    pub covered_fraction: CoveredSection,
    pub vacant_length: Comparison,
    pub gaps: GapSection,
    pub n_vacant: NvSection,
    pub growth: Option<GrowthSection>,
    pub diagnostics: McDiagnostics,
    pub passed: bool,
}

/// Predictions that depend on the domain.
struct Predictor {
    cf: ClosedForms,
    domain: Domain,
    /// `exp(-λEρ)` on the full line.
    stationary_vacancy: f64,
}

impl Predictor {
    fn new(params: &ModelParams) -> Self {
        let stationary_vacancy = match params.dist.mean() {
            MeanValue::Finite(m) => (-params.lambda * m).exp(),
            MeanValue::Infinite => 0.0,
        };
        Self {
            cf: ClosedForms::new(params.clone()),
            domain: params.domain,
            stationary_vacancy,
        }
    }

    fn vacancy(&self, t: f64) -> Result<f64> {
        match self.domain {
            Domain::HalfLine => self.cf.vacancy_probability(t),
            Domain::FullLine => Ok(self.stationary_vacancy),
        }
    }

    /// Expected vacant length of `[0, w]`.
    fn vacant_length(&self, w: f64) -> Result<f64> {
        match self.domain {
            Domain::HalfLine => self.cf.vacant_length_to(w),
            Domain::FullLine => Ok(w * self.stationary_vacancy),
        }
    }

    /// Expected covered fraction of `[b, w]`.
    fn covered_fraction(&self, b: f64, w: f64) -> Result<f64> {
        let head = if b > 0.0 { self.vacant_length(b)? } else { 0.0 };
        Ok(1.0 - (self.vacant_length(w)? - head) / (w - b))
    }
}

fn rate(records: &[ReplicateRecord], pred: impl Fn(&ReplicateRecord) -> bool) -> f64 {
    records.iter().filter(|r| pred(r)).count() as f64 / records.len() as f64
}

fn vacancy_section(cfg: &McConfig, pred: &Predictor, records: &[ReplicateRecord]) -> Result<Vec<ProbeEstimate>> {
    let n = records.len();
    cfg.probe_points
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let hits = records.iter().filter(|r| r.probe_vacant[k]).count();
            let p = pred.vacancy(t)?;
            let se = (n > 1).then(|| (p * (1.0 - p) / n as f64).sqrt());
            Ok(ProbeEstimate {
                t,
                comparison: Comparison::new(hits as f64 / n as f64, se, n, p, cfg.threshold_se),
            })
        })
        .collect()
}

fn covered_section(cfg: &McConfig, pred: &Predictor, records: &[ReplicateRecord]) -> Result<CoveredSection> {
    let fractions: Vec<f64> = records.iter().map(|r| r.covered_fraction).collect();
    let predicted = pred.covered_fraction(cfg.burn_in, cfg.window)?;
    Ok(CoveredSection {
        comparison: Comparison::from_mean(MeanSe::of(&fractions), predicted, cfg.threshold_se),
        asymptotic: pred.cf.covered_volume_fraction(),
    })
}

fn gap_section(cfg: &McConfig, records: &[ReplicateRecord]) -> GapSection {
    let gaps: Vec<f64> = records.iter().flat_map(|r| r.gap_lengths.iter().copied()).collect();
    let lambda = cfg.params.lambda;
    let mean = Comparison::from_mean(MeanSe::of(&gaps), 1.0 / lambda, cfg.threshold_se);
    if gaps.len() < cfg.min_test_samples {
        return GapSection {
            count: gaps.len(),
            mean: Comparison {
                status: Status::Skipped,
                ..mean
            },
            ks: None,
            status: Status::Skipped,
            note: Some(format!(
                "{} complete gaps, KS test needs at least {}",
                gaps.len(),
                cfg.min_test_samples
            )),
        };
    }
    let ks = stats::ks_exponential(&gaps, lambda);
    let status = if ks.p_value > cfg.min_p_value && mean.status != Status::Fail {
        Status::Pass
    } else {
        Status::Fail
    };
    GapSection {
        count: gaps.len(),
        mean,
        ks: Some(ks),
        status,
        note: None,
    }
}

fn nv_section(
    cfg: &McConfig,
    pred: &Predictor,
    verdict: &RegimeVerdict,
    records: &[ReplicateRecord],
    warnings: &mut Vec<String>,
) -> Result<NvSection> {
    let counts: Vec<f64> = records.iter().map(|r| r.n_vacant as f64).collect();
    let m = MeanSe::of(&counts);
    let expected_total = verdict.integral.scale(cfg.params.lambda);
    let skipped = |mean, note: &str| NvSection {
        mean,
        expected_total,
        geometric_p: None,
        chi_square: None,
        geometric_status: Status::Skipped,
        note: Some(note.to_string()),
    };
    if cfg.params.domain == Domain::FullLine {
        let mean = Comparison {
            status: Status::Skipped,
            ..Comparison::new(m.mean, m.se, m.n, f64::NAN, cfg.threshold_se)
        };
        return Ok(skipped(mean, "vacant-count predictions are for the half-line model"));
    }
    let predicted = cfg.params.lambda * pred.vacant_length(cfg.window)?;
    let mean = Comparison::from_mean(m, predicted, cfg.threshold_se);
    if verdict.regime != Regime::II {
        return Ok(skipped(mean, "N_v is geometric only in regime II (E N_v finite)"));
    }
    let Some(e_total) = expected_total.finite() else {
        return Ok(skipped(mean, "E N_v could not be evaluated"));
    };
    let p = (1.0 / e_total).min(1.0);
    let shortfall = e_total - predicted;
    if shortfall > 1e-3 {
        warnings.push(format!(
            "window too short for the geometric test: E N_v - E N_v(T) = {shortfall:.3e} > 1e-3"
        ));
    }
    if records.len() < cfg.min_test_samples {
        return Ok(NvSection {
            geometric_p: Some(p),
            ..skipped(
                mean,
                &format!("chi-square test needs at least {} replicates", cfg.min_test_samples),
            )
        });
    }
    let observed: Vec<u64> = records.iter().map(|r| r.n_vacant as u64).collect();
    let chi = stats::chi_square_geometric(&observed, p, cfg.geometric_bins);
    let geometric_status = if chi.p_value > cfg.min_p_value {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(NvSection {
        mean,
        expected_total,
        geometric_p: Some(p),
        chi_square: Some(chi),
        geometric_status,
        note: None,
    })
}

fn growth_section(
    cfg: &McConfig,
    pred: &Predictor,
    ladder: &[f64],
    records: &[ReplicateRecord],
) -> Result<Option<GrowthSection>> {
    if ladder.len() < 2 || cfg.params.domain != Domain::HalfLine {
        return Ok(None);
    }
    let points = ladder
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let nv: Vec<f64> = records.iter().map(|r| r.nested[k].n_vacant as f64).collect();
            let cov: Vec<f64> = records.iter().map(|r| r.nested[k].covered_fraction).collect();
            let evl = pred.vacant_length(w)?;
            Ok(GrowthPoint {
                window: w,
                n_vacant: Comparison::from_mean(MeanSe::of(&nv), cfg.params.lambda * evl, cfg.threshold_se),
                covered_fraction: Comparison::from_mean(MeanSe::of(&cov), 1.0 - evl / w, cfg.threshold_se),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let increasing = |f: fn(&GrowthPoint) -> f64| points.windows(2).all(|p| f(&p[1]) > f(&p[0]));
    let n_inc = increasing(|p| p.n_vacant.estimate);
    let c_inc = increasing(|p| p.covered_fraction.estimate);
    let failed = points
        .iter()
        .any(|p| p.n_vacant.status == Status::Fail || p.covered_fraction.status == Status::Fail);
    Ok(Some(GrowthSection {
        status: if failed || !n_inc { Status::Fail } else { Status::Pass },
        points,
        n_vacant_strictly_increasing: n_inc,
        covered_fraction_increasing: c_inc,
    }))
}

/// Assembles the full report from replicate records.
pub fn report_from_records(cfg: &McConfig, records: &[ReplicateRecord]) -> Result<McReport> {
    let verdict = classify::classify(&cfg.params);
    let pred = Predictor::new(&cfg.params);
    let ladder = cfg.nested_ladder(&verdict);
    let mut warnings = Vec::new();
    if cfg.window < 100.0 / cfg.params.lambda {
        warnings.push(format!(
            "window T = {} is below 100/λ; covered-fraction estimates are dominated by the boundary",
            cfg.window
        ));
    }

    let vacancy = vacancy_section(cfg, &pred, records)?;
    let covered_fraction = covered_section(cfg, &pred, records)?;
    let lengths: Vec<f64> = records.iter().map(|r| r.vacant_length).collect();
    let vacant_length = Comparison::from_mean(MeanSe::of(&lengths), pred.vacant_length(cfg.window)?, cfg.threshold_se);
    let gaps = gap_section(cfg, records);
    let n_vacant = nv_section(cfg, &pred, &verdict, records, &mut warnings)?;
    let growth = growth_section(cfg, &pred, &ladder, records)?;

    let complete_gaps: usize = records.iter().map(|r| r.n_vacant).sum();
    debug_assert_eq!(complete_gaps, gaps.count);
    let diagnostics = McDiagnostics {
        clamped_samples: records.iter().map(|r| r.clamped).sum(),
        complete_gaps,
        final_vacant_rate: rate(records, |r| r.final_kind == ComponentKind::Vacant),
        final_occupied_rate: rate(records, |r| r.final_kind == ComponentKind::Occupied),
        left_censored_rate: rate(records, |r| r.left_censored),
        warnings,
    };

    let statuses = vacancy
        .iter()
        .map(|v| v.comparison.status)
        .chain([
            covered_fraction.comparison.status,
            vacant_length.status,
            gaps.mean.status,
            gaps.status,
            n_vacant.mean.status,
            n_vacant.geometric_status,
        ])
        .chain(growth.as_ref().map(|g| g.status));
    let passed = statuses.into_iter().all(|s| s != Status::Fail);

    Ok(McReport {
        schema: REPORT_SCHEMA,
        model: ModelSummary {
            lambda: cfg.params.lambda,
            dist: cfg.params.dist.to_string(),
            domain: cfg.params.domain,
        },
        run: RunSummary {
            window: cfg.window,
            replicates: cfg.replicates,
            seed: cfg.master_seed,
            burn_in: cfg.burn_in,
            threshold_se: cfg.threshold_se,
            min_p_value: cfg.min_p_value,
        },
        verdict,
        vacancy,
        covered_fraction,
        vacant_length,
        gaps,
        n_vacant,
        growth,
        diagnostics,
        passed,
    })
}

/// Runs the simulation and returns the report with the raw records.
pub fn verify_with_records(cfg: &McConfig) -> Result<(McReport, Vec<ReplicateRecord>)> {
    cfg.validate()?;
    let ladder = cfg.nested_ladder(&classify::classify(&cfg.params));
    let records = run_replicates(cfg, &ladder)?;
    let report = report_from_records(cfg, &records)?;
    Ok((report, records))
}

/// Runs every estimator and compares each against its prediction.
pub fn verify(cfg: &McConfig) -> Result<McReport> {
    verify_with_records(cfg).map(|(r, _)| r)
}

pub fn estimate_vacancy(cfg: &McConfig) -> Result<Vec<ProbeEstimate>> {
    if cfg.probe_points.is_empty() {
        return Err(invalid("no probe points"));
    }
    let records = run_replicates(cfg, &[])?;
    vacancy_section(cfg, &Predictor::new(&cfg.params), &records)
}

pub fn estimate_covered_fraction(cfg: &McConfig) -> Result<CoveredSection> {
    let records = run_replicates(cfg, &[])?;
    covered_section(cfg, &Predictor::new(&cfg.params), &records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VacantStats {
    pub vacant_length: Comparison,
    pub gaps: GapSection,
    pub n_vacant: NvSection,
    pub growth: Option<GrowthSection>,
}

pub fn estimate_vacant_stats(cfg: &McConfig) -> Result<VacantStats> {
    let report = verify(cfg)?;
    Ok(VacantStats {
        vacant_length: report.vacant_length,
        gaps: report.gaps,
        n_vacant: report.n_vacant,
        growth: report.growth,
    })
}

/// Writes `replicates.csv` and `gaps.csv` into `dir`.
pub fn write_records_csv(dir: &Path, records: &[ReplicateRecord]) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| TabpError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join("replicates.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io(&path))?);
    let mut body = String::from("replicate,covered_fraction,n_vacant,vacant_length\n");
    for r in records {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            r.index, r.covered_fraction, r.n_vacant, r.vacant_length
        );
    }
    out.write_all(body.as_bytes()).map_err(io(&path))?;
    out.flush().map_err(io(&path))?;

    let path = dir.join("gaps.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io(&path))?);
    let mut body = String::from("gap_length\n");
    for g in records.iter().flat_map(|r| &r.gap_lengths) {
        let _ = writeln!(body, "{g}");
    }
    out.write_all(body.as_bytes()).map_err(io(&path))?;
    out.flush().map_err(io(&path))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

impl McReport {
    /// Aligned human-readable table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<[String; 6]> = Vec::new();
        let mut row = |name: String, c: &Comparison| {
            rows.push([
                name,
                format!("{:.6}", c.estimate),
                fmt_opt(c.se),
                format!("{:.6}", c.predicted),
                c.z.map_or_else(|| "-".into(), |z| format!("{z:+.2}")),
                c.status.label().into(),
            ]);
        };
        for v in &self.vacancy {
            row(format!("vacancy P(t={} vacant)", v.t), &v.comparison);
        }
        row("covered fraction".into(), &self.covered_fraction.comparison);
        row("vacant length".into(), &self.vacant_length);
        row("mean complete gap".into(), &self.gaps.mean);
        row("mean N_v(T)".into(), &self.n_vacant.mean);
        if let Some(g) = &self.growth {
            for p in &g.points {
                row(format!("N_v(T={})", p.window), &p.n_vacant);
                row(format!("covered fraction (T={})", p.window), &p.covered_fraction);
            }
        }

        let header = ["quantity", "estimate", "se", "predicted", "z", "status"];
        let widths: Vec<usize> = (0..6)
            .map(|i| {
                rows.iter()
                    .map(|r| r[i].len())
                    .chain([header[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "model: lambda={} dist={} domain={:?}  regime: {:?} ({:?})",
            self.model.lambda, self.model.dist, self.model.domain, self.verdict.regime, self.verdict.method
        );
        let _ = writeln!(
            out,
            "run: T={} replicates={} seed={}",
            self.run.window, self.run.replicates, self.run.seed
        );
        let line = |cells: &[&str]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(out, "{}", line(&header));
        for r in &rows {
            let cells: Vec<&str> = r.iter().map(String::as_str).collect();
            let _ = writeln!(out, "{}", line(&cells));
        }
        match &self.gaps.ks {
            Some(ks) => {
                let _ = writeln!(
                    out,
                    "gap exponentiality: KS D={:.5} p={:.4} over {} gaps  {}",
                    ks.statistic,
                    ks.p_value,
                    ks.n,
                    self.gaps.status.label()
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "gap exponentiality: skipped ({})",
                    self.gaps.note.as_deref().unwrap_or("")
                );
            }
        }
        match &self.n_vacant.chi_square {
            Some(chi) => {
                let _ = writeln!(
                    out,
                    "geometric N_v: chi2={:.4} df={} p={:.4}  {}",
                    chi.statistic,
                    chi.df,
                    chi.p_value,
                    self.n_vacant.geometric_status.label()
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "geometric N_v: skipped ({})",
                    self.n_vacant.note.as_deref().unwrap_or("")
                );
            }
        }
        for w in &self.diagnostics.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out, "overall: {}", if self.passed { "PASS" } else { "FAIL" });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::GrainDistribution;

    fn cfg(lambda: f64, d: GrainDistribution, window: f64, reps: u64) -> McConfig {
        McConfig::new(ModelParams::half_line(lambda, d).unwrap(), window, reps, 42)
    }

    #[test]
    fn comparison_rules() {
        assert_eq!(Comparison::new(1.0, Some(0.1), 10, 1.3, 4.0).status, Status::Pass);
        assert_eq!(Comparison::new(1.0, Some(0.1), 10, 1.5, 4.0).status, Status::Fail);
        assert_eq!(Comparison::new(1.0, None, 1, 1.5, 4.0).status, Status::Unavailable);
        assert_eq!(Comparison::new(1.0, Some(0.0), 10, 1.0, 4.0).status, Status::Pass);
        assert_eq!(Comparison::new(1.0, Some(0.0), 10, 0.9, 4.0).status, Status::Fail);
    }

    #[test]
    fn vacancy_at_origin_is_certain() {
        let mut c = cfg(1.0, GrainDistribution::pareto(1.0).unwrap(), 10.0, 300);
        c.probe_points = vec![0.0, 1.0];
        let v = estimate_vacancy(&c).unwrap();
        assert_eq!(v[0].comparison.estimate, 1.0);
        assert_eq!(v[0].comparison.status, Status::Pass);
    }

    #[test]
    fn single_replicate_marks_se_unavailable() {
        let c = cfg(1.0, GrainDistribution::pareto(1.0).unwrap(), 50.0, 1);
        let r = verify(&c).unwrap();
        assert_eq!(r.covered_fraction.comparison.se, None);
        assert_eq!(r.covered_fraction.comparison.status, Status::Unavailable);
        assert_eq!(r.gaps.status, Status::Skipped);
        assert!(r.passed, "{}", r.to_table());
    }

    #[test]
    fn report_is_deterministic_and_worker_independent() {
        let mut c = cfg(1.0, GrainDistribution::pareto(1.0).unwrap(), 200.0, 400);
        c.workers = 1;
        let a = serde_json::to_string(&verify(&c).unwrap()).unwrap();
        let b = serde_json::to_string(&verify(&c).unwrap()).unwrap();
        c.workers = 3;
        let d = serde_json::to_string(&verify(&c).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, d);
    }

    #[test]
    fn censoring_reconciles() {
        let c = cfg(1.0, GrainDistribution::exponential(1.0).unwrap(), 100.0, 50);
        let (report, records) = verify_with_records(&c).unwrap();
        let pooled: usize = records.iter().map(|r| r.gap_lengths.len()).sum();
        assert_eq!(pooled, report.diagnostics.complete_gaps);
        assert_eq!(pooled, report.gaps.count);
        let rates = report.diagnostics.final_vacant_rate + report.diagnostics.final_occupied_rate;
        assert!((rates - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let mut c = cfg(1.0, GrainDistribution::pareto(1.0).unwrap(), 10.0, 5);
        c.burn_in = 10.0;
        assert!(c.validate().is_err());
        let mut c = cfg(1.0, GrainDistribution::pareto(1.0).unwrap(), 10.0, 0);
        assert!(c.validate().is_err());
        c.replicates = 3;
        c.probe_points = vec![11.0];
        assert!(c.validate().is_err());
        let params = ModelParams::new(1.0, GrainDistribution::pareto(1.0).unwrap(), Domain::FullLine).unwrap();
        assert!(matches!(
            McConfig::new(params, 10.0, 3, 0).validate(),
            Err(TabpError::FullLineInfiniteMean)
        ));
    }

    #[test]
    fn full_line_covered_fraction() {
        let params = ModelParams::new(1.0, GrainDistribution::exponential(1.0).unwrap(), Domain::FullLine).unwrap();
        let mut c = McConfig::new(params, 500.0, 200, 9);
        c.probe_points = vec![0.0, 250.0];
        let r = verify(&c).unwrap();
        let want = 1.0 - (-1f64).exp();
        assert!((r.covered_fraction.comparison.predicted - want).abs() < 1e-12);
        assert_eq!(r.covered_fraction.comparison.status, Status::Pass, "{r:#?}");
        assert_eq!(r.vacancy[0].comparison.status, Status::Pass);
        assert_eq!(r.gaps.status, Status::Pass);
        assert_eq!(r.n_vacant.mean.status, Status::Skipped);
    }

    #[test]
    fn table_mentions_every_section() {
        let c = cfg(1.0, GrainDistribution::pareto(1.0).unwrap(), 1000.0, 50);
        let t = verify(&c).unwrap().to_table();
        for needle in ["vacancy", "covered fraction", "vacant length", "N_v(T=100)", "overall"] {
            assert!(t.contains(needle), "{needle} missing from\n{t}");
        }
    }

    #[test]
    fn csv_dump() {
        let c = cfg(1.0, GrainDistribution::pareto(1.0).unwrap(), 100.0, 5);
        let (_, records) = verify_with_records(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_records_csv(dir.path(), &records).unwrap();
        let reps = std::fs::read_to_string(dir.path().join("replicates.csv")).unwrap();
        assert!(reps.starts_with("replicate,covered_fraction,n_vacant,vacant_length\n"));
        assert_eq!(reps.lines().count(), 6);
        let gaps = std::fs::read_to_string(dir.path().join("gaps.csv")).unwrap();
        let n: usize = records.iter().map(|r| r.n_vacant).sum();
        assert_eq!(gaps.lines().count(), n + 1);
    }
}
