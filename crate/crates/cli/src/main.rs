use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tabp_core::analytics::ClosedForms;
use tabp_core::classify::{self, Answer, ClassifyOptions, Regime, RegimeVerdict};
use tabp_core::geometry::{self, DecompositionSummary};
use tabp_core::mc::{self, McConfig};
use tabp_core::process::{self, DEFAULT_BUFFER_EPS};
use tabp_core::{ComponentKind, Domain, GrainDistribution, IntegralValue, ModelParams, Realization, TabpError};

const SCHEMA: u32 = 1;

const EXIT_USAGE: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_VERIFY_FAIL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tabp",
    version,
    about = "Poisson coverage on the half-line with heavy-tailed grains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one realization and print its component summary.
    Simulate(SimulateArgs),
    /// Decide the regime of the model.
    Classify(ClassifyArgs),
    /// Print the closed-form predictions.
    Analytics(AnalyticsArgs),
    /// Monte Carlo check of every prediction.
    Verify(VerifyArgs),
    /// Classify over a grid of intensities or Pareto exponents.
    Scan(ScanArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    HalfLine,
    FullLine,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::HalfLine => Domain::HalfLine,
            DomainArg::FullLine => Domain::FullLine,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Germ intensity.
    #[arg(long)]
    lambda: f64,
    /// Grain law, e.g. `pareto:alpha=1` or `table:path=tail.csv`.
    #[arg(long)]
    dist: String,
    #[arg(long, value_enum, default_value = "half-line")]
    domain: DomainArg,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, TabpError> {
        let dist: GrainDistribution = self.dist.parse()?;
        ModelParams::new(self.lambda, dist, self.domain.into())
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "T", default_value_t = 1000.0)]
    window: f64,
    #[arg(long, default_value = "0", value_parser = parse_count)]
    seed: u64,
    /// Replicate index; selects the random stream under `--seed`.
    #[arg(long, default_value = "0", value_parser = parse_count)]
    replicate: u64,
    /// Expected missed crossings for the full-line left buffer.
    #[arg(long, default_value_t = DEFAULT_BUFFER_EPS)]
    eps: f64,
    /// Save the germs as `u,rho` CSV.
    #[arg(long, conflicts_with = "replay")]
    record: Option<PathBuf>,
    /// Decompose germs from a `u,rho` CSV instead of sampling.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Write `germs.csv` and `components.csv` into this directory.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Largest t the tail-asymptotic path inspects.
    #[arg(long, default_value_t = 1e12)]
    horizon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Ignore the analytic shortcuts for built-in families.
    #[arg(long)]
    force_tail_asymptotic: bool,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyticsArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Points at which to report the vacancy probability.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,5,10")]
    probe: Vec<f64>,
    /// Also report finite-window expectations on [0, T].
    #[arg(long = "T")]
    window: Option<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "T", default_value_t = 1000.0)]
    window: f64,
    #[arg(long, default_value = "1000", value_parser = parse_count)]
    reps: u64,
    #[arg(long, default_value = "0", value_parser = parse_count)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    burn_in: f64,
    /// Vacancy probe points; defaults to those of 1, 2, 5, 10 inside [0, T].
    #[arg(long, value_delimiter = ',')]
    probe: Option<Vec<f64>>,
    /// Nested windows for the N_v(T) growth curve.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<f64>>,
    /// Worker threads (default: available parallelism).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Pass threshold in standard errors.
    #[arg(long, default_value_t = 4.0)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_BUFFER_EPS)]
    eps: f64,
    /// Write per-replicate records and pooled gaps into this directory.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the JSON report here and the table to stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Intensities to scan with `--dist` fixed.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "alphas",
        required_unless_present = "alphas"
    )]
    lambdas: Option<Vec<f64>>,
    /// Pareto exponents to scan with `--lambda` fixed.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value = "pareto:alpha=1")]
    dist: String,
}

/// Accepts plain integers and integral decimals such as `2e4`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(64) => Ok(x as u64),
        _ => Err(format!("expected a non-negative integer, got `{s}`")),
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(TabpError),
}

impl From<TabpError> for Failure {
    fn from(e: TabpError) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(e.into())
    }
}

type Outcome = Result<u8, Failure>;

#[derive(Serialize)]
struct ModelJson {
    lambda: f64,
    dist: String,
    domain: Domain,
}

impl ModelJson {
    fn of(p: &ModelParams) -> Self {
        Self {
            lambda: p.lambda,
            dist: p.dist.to_string(),
            domain: p.domain,
        }
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SimulateJson {
    schema: u32,
    model: ModelJson,
    seed: u64,
    replicate: u64,
    left_buffer: f64,
    germs: usize,
    clamped: u64,
    #[serde(flatten)]
    summary: DecompositionSummary,
    vacant_length: f64,
    components: usize,
    final_kind: ComponentKind,
    left_censored: bool,
}

fn simulate(a: SimulateArgs) -> Outcome {
    let params = a.model.params()?;
    let left_buffer = match params.domain {
        Domain::HalfLine => 0.0,
        Domain::FullLine => process::left_buffer(&params, a.eps)?,
    };
    let real = match &a.replay {
        Some(path) => Realization::load_csv(path, a.window, params.domain, left_buffer)?,
        None => {
            let rng = process::replicate_rng(a.seed, a.replicate);
            process::sample(&params, a.window, a.eps, rng)?
        }
    };
    if let Some(path) = &a.record {
        real.save_csv(path)?;
    }
    let dec = geometry::decompose(&real)?;
    if let Some(dir) = &a.csv {
        std::fs::create_dir_all(dir)?;
        real.save_csv(&dir.join("germs.csv"))?;
        let file = std::fs::File::create(dir.join("components.csv"))?;
        dec.write_csv(std::io::BufWriter::new(file))?;
    }
    let out = SimulateJson {
        schema: SCHEMA,
        model: ModelJson::of(&params),
        seed: a.seed,
        replicate: a.replicate,
        left_buffer: real.left_buffer,
        germs: real.germs.len(),
        clamped: real.clamped,
        summary: dec.summary(),
        vacant_length: dec.vacant_length(),
        components: dec.occupied.len() + dec.vacant.len(),
        final_kind: dec.final_kind,
        left_censored: dec.left_censored,
    };
    emit(&out, a.json.as_deref())?;
    Ok(0)
}

#[derive(Serialize)]
struct ClassifyJson {
    schema: u32,
    model: ModelJson,
    #[serde(flatten)]
    verdict: RegimeVerdict,
    unbounded_occupied_component: Answer,
}

fn classify_cmd(a: ClassifyArgs) -> Outcome {
    let params = a.model.params()?;
    if !(a.horizon > 1.0 && a.horizon.is_finite()) {
        return Err(Failure::Usage(format!("--horizon must exceed 1, got {}", a.horizon)));
    }
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(Failure::Usage(format!("--delta must lie in (0, 1), got {}", a.delta)));
    }
    let opts = ClassifyOptions {
        horizon: a.horizon,
        delta: a.delta,
        force_tail_asymptotic: a.force_tail_asymptotic,
        ..ClassifyOptions::default()
    };
    let verdict = classify::classify_with(&params, &opts);
    let out = ClassifyJson {
        schema: SCHEMA,
        model: ModelJson::of(&params),
        unbounded_occupied_component: classify::unbounded_component_exists(&verdict),
        verdict,
    };
    emit(&out, a.json.as_deref())?;
    Ok(if out.verdict.regime == Regime::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        0
    })
}

#[derive(Serialize)]
struct WindowJson {
    #[serde(rename = "T")]
    window: f64,
    expected_vacant_length: f64,
    expected_num_vacant: f64,
}

#[derive(Serialize)]
struct AnalyticsJson {
    schema: u32,
    model: ModelJson,
    regime: Regime,
    cvf: f64,
    expected_vacant_length: IntegralValue,
    #[serde(rename = "E_Nv")]
    e_nv: IntegralValue,
    p_geometric: Option<f64>,
    vacancy: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<WindowJson>,
}

fn analytics(a: AnalyticsArgs) -> Outcome {
    let params = a.model.params()?;
    if params.domain != Domain::HalfLine {
        return Err(Failure::Usage("closed forms are for the half-line model".into()));
    }
    let cf = ClosedForms::new(params);
    let verdict = cf.verdict();
    let vacancy = a
        .probe
        .iter()
        .map(|&t| Ok((t, cf.vacancy_probability(t)?)))
        .collect::<Result<Vec<_>, TabpError>>()?;
    let window = match a.window {
        Some(w) => Some(WindowJson {
            window: w,
            expected_vacant_length: cf.vacant_length_to(w)?,
            expected_num_vacant: cf.expected_num_vacant_to(w)?,
        }),
        None => None,
    };
    let e_nv = verdict.integral.scale(cf.params.lambda);
    let out = AnalyticsJson {
        schema: SCHEMA,
        model: ModelJson::of(&cf.params),
        regime: verdict.regime,
        cvf: cf.covered_volume_fraction(),
        expected_vacant_length: verdict.integral,
        e_nv,
        p_geometric: e_nv.finite().map(|e| (1.0 / e).min(1.0)),
        vacancy,
        window,
    };
    emit(&out, a.json.as_deref())?;
    Ok(0)
}

fn verify(a: VerifyArgs) -> Outcome {
    let params = a.model.params()?;
    let mut cfg = McConfig::new(params, a.window, a.reps, a.seed);
    if let Some(p) = a.probe {
        cfg.probe_points = p;
    }
    if let Some(w) = a.windows {
        cfg.nested_windows = w;
    }
    cfg.burn_in = a.burn_in;
    cfg.workers = a.workers;
    cfg.threshold_se = a.threshold;
    cfg.buffer_eps = a.eps;
    let (report, records) = mc::verify_with_records(&cfg)?;
    if let Some(dir) = &a.csv {
        mc::write_records_csv(dir, &records)?;
    }
    match &a.json {
        Some(path) => {
            emit(&report, Some(path))?;
            print!("{}", report.to_table());
        }
        None => {
            emit(&report, None)?;
            eprint!("{}", report.to_table());
        }
    }
    Ok(if report.passed { 0 } else { EXIT_VERIFY_FAIL })
}

fn scan(a: ScanArgs) -> Outcome {
    let (grid, vary_lambda) = match (a.lambdas, a.alphas) {
        (Some(l), None) => (l, true),
        (None, Some(al)) => (al, false),
        _ => return Err(Failure::Usage("give exactly one of --lambdas or --alphas".into())),
    };
    if grid.is_empty() {
        return Err(Failure::Usage("scan grid is empty".into()));
    }
    let base: GrainDistribution = a.dist.parse()?;
    let mut rows = Vec::with_capacity(grid.len());
    for &x in &grid {
        let params = if vary_lambda {
            ModelParams::half_line(x, base.clone())?
        } else {
            ModelParams::half_line(a.lambda, GrainDistribution::pareto(x)?)?
        };
        let cf = ClosedForms::new(params);
        let v = cf.verdict();
        let regime = serde_json::to_value(v.regime)?;
        rows.push(format!(
            "{x},{},{},{}",
            regime.as_str().unwrap_or_default(),
            v.integral.scale(cf.params.lambda),
            cf.covered_volume_fraction()
        ));
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "param,regime,E_Nv,cvf")?;
    for r in rows {
        writeln!(out, "{r}")?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Analytics(a) => analytics(a),
        Command::Verify(a) => verify(a),
        Command::Scan(a) => scan(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
