//! Grain-length laws.
//!
//! Everything downstream needs three functionals of the law of `ρ`: the tail
//! `P(ρ > y)`, the truncated mean `E(t ∧ ρ) = ∫_0^t P(ρ > s) ds`, and the
//! mean `Eρ` (which may be infinite). The built-in families have closed
//! forms; tabulated tails are integrated numerically.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Result, TabpError};
use crate::quad::{self, Tolerance};

/// Tolerance for the truncated-mean identity on tabulated tails.
/// Fitted continuation exponents this close to 1 are taken as exactly 1.
const UNIT_EXPONENT_SNAP: f64 = 1e-9;

pub const TAIL_QUAD_TOL: Tolerance = Tolerance::new(1e-8, 1e-8);

/// `Eρ`, which is allowed to be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanValue {
    Finite(f64),
    Infinite,
}

impl MeanValue {
    pub fn is_finite(self) -> bool {
        matches!(self, MeanValue::Finite(_))
    }

    pub fn as_f64(self) -> f64 {
        match self {
            MeanValue::Finite(v) => v,
            MeanValue::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for MeanValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            MeanValue::Finite(v) => s.serialize_f64(v),
            MeanValue::Infinite => s.serialize_str("inf"),
        }
    }
}

/// A single draw from a grain law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub value: f64,
    /// The exact draw overflowed `f64` and was replaced by `f64::MAX`.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GrainDistribution {
    /// `ρ = c` almost surely.
    Constant {
        c: f64,
    },
    Exponential {
        mean: f64,
    },
    /// Unit-scale Pareto: `P(ρ > y) = y^{-α}` for `y >= 1`.
    Pareto {
        alpha: f64,
    },
    Tabulated(TabulatedTail),
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(TabpError::InvalidParameter(format!(
            "{name} must be a positive finite number, got {v}"
        )))
    }
}

impl GrainDistribution {
    pub fn constant(c: f64) -> Result<Self> {
        Ok(Self::Constant { c: positive("c", c)? })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        Ok(Self::Exponential {
            mean: positive("mean", mean)?,
        })
    }

    pub fn pareto(alpha: f64) -> Result<Self> {
        Ok(Self::Pareto {
            alpha: positive("alpha", alpha)?,
        })
    }

    /// Re-checks parameters; needed because enum fields are public.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { c } => positive("c", c).map(drop),
            Self::Exponential { mean } => positive("mean", mean).map(drop),
            Self::Pareto { alpha } => positive("alpha", alpha).map(drop),
            Self::Tabulated(_) => Ok(()),
        }
    }

    /// `P(ρ > y)`.
    pub fn tail(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Constant { c } => {
                if y < c {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Exponential { mean } => (-y / mean).exp(),
            Self::Pareto { alpha } => {
                if y <= 1.0 {
                    1.0
                } else {
                    y.powf(-alpha)
                }
            }
            Self::Tabulated(ref t) => t.tail(y),
        }
    }

    /// `E(t ∧ ρ)`; negative `t` is rejected.
    pub fn truncated_mean(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(TabpError::InvalidParameter(format!(
                "truncated mean needs t >= 0, got {t}"
            )));
        }
        Ok(self.truncated_mean_unchecked(t))
    }

    pub(crate) fn truncated_mean_unchecked(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { c } => t.min(c),
            Self::Exponential { mean } => -mean * (-t / mean).exp_m1(),
            Self::Pareto { alpha } => {
                if t <= 1.0 {
                    t
                } else {
                    // (t^{1-α} - α)/(1-α) = 1 + (t^{1-α} - 1)/(1-α); α = 1 gives 1 + ln t.
                    1.0 + power_log_integral(t.ln(), 1.0 - alpha)
                }
            }
            Self::Tabulated(ref tab) => tab.truncated_mean(t),
        }
    }

    pub fn mean(&self) -> MeanValue {
        match *self {
            Self::Constant { c } => MeanValue::Finite(c),
            Self::Exponential { mean } => MeanValue::Finite(mean),
            Self::Pareto { alpha } if alpha > 1.0 => MeanValue::Finite(alpha / (alpha - 1.0)),
            Self::Pareto { .. } => MeanValue::Infinite,
            Self::Tabulated(ref t) => t.mean(),
        }
    }

    /// `E(ρ - x)_+`, the mean overshoot past `x >= 0`.
    pub fn excess_mean(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            Self::Constant { c } => (c - x).max(0.0),
            Self::Exponential { mean } => mean * (-x / mean).exp(),
            Self::Pareto { alpha } if alpha > 1.0 => {
                if x < 1.0 {
                    alpha / (alpha - 1.0) - x
                } else {
                    x.powf(1.0 - alpha) / (alpha - 1.0)
                }
            }
            Self::Pareto { .. } => f64::INFINITY,
            Self::Tabulated(ref t) => t.excess_mean(x),
        }
    }

    /// Least upper bound of the support, `+∞` when unbounded.
    pub fn support_max(&self) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::Tabulated(ref t) => t.support_max(),
            _ => f64::INFINITY,
        }
    }

    /// Points where the tail is not smooth; quadrature splits there.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Self::Constant { c } => vec![c],
            Self::Exponential { .. } => Vec::new(),
            Self::Pareto { .. } => vec![1.0],
            Self::Tabulated(ref t) => t.nodes.iter().map(|n| n.0).filter(|&y| y > 0.0).collect(),
        }
    }

    /// Inverse of the tail: the `y` with `P(ρ > y) = u`, for `u ∈ (0, 1)`.
    /// May return `+∞` for extreme `u` on heavy tails.
    pub fn inverse_tail(&self, u: f64) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::Exponential { mean } => -mean * u.ln(),
            Self::Pareto { alpha } => u.powf(-1.0 / alpha),
            Self::Tabulated(ref t) => t.inverse_tail(u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        let u: f64 = rng.sample(Open01);
        let value = self.inverse_tail(u);
        if value.is_finite() {
            Draw { value, clamped: false }
        } else {
            Draw {
                value: f64::MAX,
                clamped: true,
            }
        }
    }

    /// Tabulates this law's tail at the given grid (`y > 0`, increasing).
    pub fn tabulate(&self, ys: &[f64]) -> Result<GrainDistribution> {
        let points = ys.iter().map(|&y| (y, self.tail(y))).collect();
        Ok(Self::Tabulated(TabulatedTail::new(points)?))
    }
}

/// `∫_0^L e^{q s} ds = (e^{qL} - 1)/q`, continuous through `q = 0`.
pub(crate) fn power_log_integral(log_t: f64, q: f64) -> f64 {
    let x = q * log_t;
    if x.abs() < 1e-300 {
        log_t
    } else {
        x.exp_m1() / q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    /// Tail linear in `y` across the segment.
    Linear,
    /// Tail of the form `s_i (y / y_i)^{-β}`.
    Power { beta: f64 },
}

/// A tail given on a grid of `(y, P(ρ > y))` points.
///
/// Between points the tail is interpolated log-log when both values are
/// positive (linearly otherwise, including from the implicit anchor
/// `(0, 1)`). Past the last point it continues as the power law through
/// the last two points, or as zero when the last value is zero.
#[derive(Debug, Clone)]
pub struct TabulatedTail {
    points: Vec<(f64, f64)>,
    source: Option<PathBuf>,
    nodes: Vec<(f64, f64)>,
    segments: Vec<Segment>,
    /// `∫_0^{y_i} tail` at every node.
    cumulative: Vec<f64>,
    /// Exponent of the power-law continuation; 0 when the last value is 0.
    tail_exponent: f64,
}

impl PartialEq for TabulatedTail {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
    }
}

impl TabulatedTail {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |m: String| Err(TabpError::InvalidTable(m));
        if points.len() < 2 {
            return bad(format!("need at least 2 grid points, got {}", points.len()));
        }
        for (i, &(y, s)) in points.iter().enumerate() {
            if !(y.is_finite() && y >= 0.0) {
                return bad(format!("row {i}: y must be finite and >= 0, got {y}"));
            }
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("row {i}: tail must lie in [0, 1], got {s}"));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return bad(format!("row {}: y values must be strictly increasing", i + 1));
            }
            if w[1].1 > w[0].1 {
                return bad(format!("row {}: tail values must be non-increasing", i + 1));
            }
        }
        let mut nodes = Vec::with_capacity(points.len() + 1);
        if points[0].0 > 0.0 {
            nodes.push((0.0, 1.0));
        } else if points[0].1 != 1.0 {
            return bad("tail at y = 0 must be 1 (support is (0, ∞))".into());
        }
        nodes.extend_from_slice(&points);

        let n = nodes.len() - 1;
        let (y_prev, s_prev) = nodes[n - 1];
        let (y_last, s_last) = nodes[n];
        let tail_exponent = if s_last > 0.0 {
            if y_prev <= 0.0 || s_prev <= s_last {
                return bad(
                    "the last two grid points must have y > 0 and strictly decreasing positive tail \
                     so that a power-law continuation exists"
                        .into(),
                );
            }
            let beta = (s_prev / s_last).ln() / (y_last / y_prev).ln();
            // A tabulated 1/y tail must not acquire a finite mean from rounding.
            if (beta - 1.0).abs() < UNIT_EXPONENT_SNAP {
                1.0
            } else {
                beta
            }
        } else {
            0.0
        };

        let segments: Vec<Segment> = nodes
            .windows(2)
            .map(|w| {
                let ((y0, s0), (y1, s1)) = (w[0], w[1]);
                if y0 > 0.0 && s0 > 0.0 && s1 > 0.0 {
                    Segment::Power {
                        beta: (s0 / s1).ln() / (y1 / y0).ln(),
                    }
                } else {
                    Segment::Linear
                }
            })
            .collect();

        let mut tab = TabulatedTail {
            points,
            source: None,
            nodes,
            segments,
            cumulative: Vec::new(),
            tail_exponent,
        };
        let mut cumulative = vec![0.0];
        let mut acc = 0.0;
        for i in 0..n {
            let (a, b) = (tab.nodes[i].0, tab.nodes[i + 1].0);
            acc += quad::adaptive_simpson(&|y| tab.segment_tail(i, y), a, b, TAIL_QUAD_TOL).value;
            cumulative.push(acc);
        }
        tab.cumulative = cumulative;
        Ok(tab)
    }

    /// Reads a CSV file with header `y,tail`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let csv_err = |source| TabpError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let headers = rdr.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["y", "tail"] {
            return Err(TabpError::InvalidTable(format!(
                "{}: expected header `y,tail`, got `{}`",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for row in rdr.deserialize::<(f64, f64)>() {
            points.push(row.map_err(csv_err)?);
        }
        let mut tab = Self::new(points)?;
        tab.source = Some(path.to_path_buf());
        Ok(tab)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Exponent `β` of the power-law continuation past the grid.
    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    fn last(&self) -> (f64, f64) {
        *self.nodes.last().expect("at least two nodes")
    }

    fn segment_tail(&self, i: usize, y: f64) -> f64 {
        let (y0, s0) = self.nodes[i];
        let (y1, s1) = self.nodes[i + 1];
        match self.segments[i] {
            Segment::Linear => s0 + (s1 - s0) * (y - y0) / (y1 - y0),
            Segment::Power { beta } => s0 * (y / y0).powf(-beta),
        }
    }

    /// Index of the segment containing `y` (`y` below the last node).
    fn segment_of(&self, y: f64) -> usize {
        self.nodes.partition_point(|n| n.0 <= y).saturating_sub(1)
    }

    fn tail(&self, y: f64) -> f64 {
        let (y_last, s_last) = self.last();
        if y >= y_last {
            if s_last == 0.0 {
                0.0
            } else {
                s_last * (y / y_last).powf(-self.tail_exponent)
            }
        } else {
            self.segment_tail(self.segment_of(y), y)
        }
    }

    /// `∫_{y_n}^t tail` past the grid.
    fn continuation_integral(&self, t: f64) -> f64 {
        let (y_last, s_last) = self.last();
        if s_last == 0.0 {
            return 0.0;
        }
        s_last * y_last * power_log_integral((t / y_last).ln(), 1.0 - self.tail_exponent)
    }

    fn truncated_mean(&self, t: f64) -> f64 {
        let (y_last, _) = self.last();
        let n = self.nodes.len() - 1;
        if t >= y_last {
            return self.cumulative[n] + self.continuation_integral(t);
        }
        let i = self.segment_of(t);
        let a = self.nodes[i].0;
        self.cumulative[i] + quad::adaptive_simpson(&|y| self.segment_tail(i, y), a, t, TAIL_QUAD_TOL).value
    }

    fn mean(&self) -> MeanValue {
        let (y_last, s_last) = self.last();
        let head = self.cumulative[self.nodes.len() - 1];
        if s_last == 0.0 {
            MeanValue::Finite(head)
        } else if self.tail_exponent > 1.0 {
            MeanValue::Finite(head + s_last * y_last / (self.tail_exponent - 1.0))
        } else {
            MeanValue::Infinite
        }
    }

    fn excess_mean(&self, x: f64) -> f64 {
        let (y_last, s_last) = self.last();
        match self.mean() {
            MeanValue::Infinite => f64::INFINITY,
            MeanValue::Finite(_) if x >= y_last => {
                if s_last == 0.0 {
                    0.0
                } else {
                    s_last * y_last * (x / y_last).powf(1.0 - self.tail_exponent) / (self.tail_exponent - 1.0)
                }
            }
            MeanValue::Finite(m) => (m - self.truncated_mean(x)).max(0.0),
        }
    }

    fn support_max(&self) -> f64 {
        match self.nodes.iter().find(|n| n.1 == 0.0) {
            Some(&(y, _)) => y,
            None => f64::INFINITY,
        }
    }

    fn inverse_tail(&self, u: f64) -> f64 {
        let (y_last, s_last) = self.last();
        if u < s_last {
            return y_last * (s_last / u).powf(1.0 / self.tail_exponent);
        }
        // First node whose tail drops below u; the node before it has tail >= u.
        let j = self.nodes.partition_point(|n| n.1 >= u);
        if j >= self.nodes.len() {
            return y_last;
        }
        let (y0, s0) = self.nodes[j - 1];
        let (y1, s1) = self.nodes[j];
        match self.segments[j - 1] {
            Segment::Linear => y0 + (s0 - u) / (s0 - s1) * (y1 - y0),
            Segment::Power { beta } => y0 * (s0 / u).powf(1.0 / beta),
        }
    }
}

impl fmt::Display for GrainDistribution {
    /// Prints the textual spec accepted by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { c } => write!(f, "constant:c={c}"),
            Self::Exponential { mean } => write!(f, "exponential:mean={mean}"),
            Self::Pareto { alpha } => write!(f, "pareto:alpha={alpha}"),
            Self::Tabulated(t) => match t.source() {
                Some(p) => write!(f, "table:path={}", p.display()),
                None => {
                    f.write_str("table:grid=")?;
                    for (i, (y, s)) in t.points().iter().enumerate() {
                        if i > 0 {
                            f.write_str(";")?;
                        }
                        write!(f, "{y}/{s}")?;
                    }
                    Ok(())
                }
            },
        }
    }
}

impl Serialize for GrainDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn spec_err(token: &str, reason: impl Into<String>) -> TabpError {
    TabpError::DistSpec {
        token: token.to_string(),
        reason: reason.into(),
    }
}

fn spec_number(token: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| spec_err(token, "not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(spec_err(token, "must be a positive finite number"))
    }
}

fn parse_grid(token: &str, raw: &str) -> Result<Vec<(f64, f64)>> {
    raw.split(';')
        .map(|pair| {
            let (y, s) = pair
                .split_once('/')
                .ok_or_else(|| spec_err(pair, "grid entries are `y/tail`"))?;
            let y: f64 = y.trim().parse().map_err(|_| spec_err(pair, "not a number"))?;
            let s: f64 = s.trim().parse().map_err(|_| spec_err(pair, "not a number"))?;
            Ok((y, s))
        })
        .collect::<Result<_>>()
        .map_err(|e| match e {
            TabpError::DistSpec { .. } => e,
            _ => spec_err(token, e.to_string()),
        })
}

impl FromStr for GrainDistribution {
    type Err = TabpError;

    /// Grammar: `name(:key=value)*`, names `constant`, `exponential`,
    /// `pareto`, `table`. A table is given as `path=<csv file>` (rest of the
    /// string is the path) or inline as `grid=y/tail;y/tail;...`.
    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, rest) = match spec.split_once(':') {
            Some((n, r)) => (n, r),
            None => (spec, ""),
        };
        let mut pairs: Vec<(&str, &str, &str)> = Vec::new();
        let mut remaining = rest;
        while !remaining.is_empty() {
            let (token, tail) = if remaining.starts_with("path=") {
                (remaining, "")
            } else {
                remaining.split_once(':').unwrap_or((remaining, ""))
            };
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| spec_err(token, "expected key=value"))?;
            if pairs.iter().any(|p| p.0 == k) {
                return Err(spec_err(token, "duplicate key"));
            }
            pairs.push((k, v, token));
            remaining = tail;
        }

        let allowed: &[&str] = match name {
            "constant" => &["c"],
            "exponential" => &["mean"],
            "pareto" => &["alpha"],
            "table" => &["path", "grid"],
            _ => {
                return Err(spec_err(
                    name,
                    "unknown distribution (constant, exponential, pareto, table)",
                ))
            }
        };
        if let Some(p) = pairs.iter().find(|p| !allowed.contains(&p.0)) {
            return Err(spec_err(p.2, format!("unknown key for `{name}`")));
        }
        let get = |key: &str| pairs.iter().find(|p| p.0 == key).map(|p| (p.1, p.2));
        let required = |key: &str| get(key).ok_or_else(|| spec_err(name, format!("missing `{key}=`")));

        match name {
            "constant" => {
                let (v, tok) = required("c")?;
                GrainDistribution::constant(spec_number(tok, v)?)
            }
            "exponential" => {
                let (v, tok) = required("mean")?;
                GrainDistribution::exponential(spec_number(tok, v)?)
            }
            "pareto" => {
                let (v, tok) = required("alpha")?;
                GrainDistribution::pareto(spec_number(tok, v)?)
            }
            _ => match (get("path"), get("grid")) {
                (Some((p, _)), None) => Ok(Self::Tabulated(TabulatedTail::from_csv(Path::new(p))?)),
                (None, Some((g, tok))) => {
                    let points = parse_grid(tok, g)?;
                    let tab = TabulatedTail::new(points).map_err(|e| spec_err(tok, e.to_string()))?;
                    Ok(Self::Tabulated(tab))
                }
                _ => Err(spec_err(name, "table needs exactly one of `path=` or `grid=`")),
            },
        }
    }
}
