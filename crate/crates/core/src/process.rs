//! Poisson germ-grain sampling on a finite window.

use std::io::Write;
use std::path::Path;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::GrainDistribution;
use crate::error::{invalid, Result, TabpError};

/// Default bound on the expected number of grains from beyond the left
/// buffer that still reach the window.
pub const DEFAULT_BUFFER_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Germs restricted to `u >= 0`.
    HalfLine,
    /// Germs on the whole line.
    FullLine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub dist: GrainDistribution,
    pub domain: Domain,
}

impl ModelParams {
    pub fn new(lambda: f64, dist: GrainDistribution, domain: Domain) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid(format!(
                "lambda must be a positive finite number, got {lambda}"
            )));
        }
        dist.validate()?;
        Ok(Self { lambda, dist, domain })
    }

    pub fn half_line(lambda: f64, dist: GrainDistribution) -> Result<Self> {
        Self::new(lambda, dist, Domain::HalfLine)
    }
}

/// A germ at `u` carrying the grain `[u, u + rho]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Germ {
    pub u: f64,
    pub rho: f64,
}

impl Germ {
    pub fn reach(&self) -> f64 {
        self.u + self.rho
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub window: f64,
    pub domain: Domain,
    /// Germs may sit in `[-left_buffer, 0)` on the full line; zero otherwise.
    pub left_buffer: f64,
    /// Sorted by `u`.
    pub germs: Vec<Germ>,
    /// Marks that overflowed `f64` and were clamped.
    pub clamped: u64,
}

impl Realization {
    /// Builds a realization from explicit germs, checking the invariants.
    pub fn from_germs(window: f64, domain: Domain, left_buffer: f64, germs: Vec<Germ>) -> Result<Self> {
        check_window(window)?;
        let lo = match domain {
            Domain::HalfLine => 0.0,
            Domain::FullLine => -left_buffer,
        };
        for (i, g) in germs.iter().enumerate() {
            if !(g.u >= lo && g.u <= window) || !(g.rho > 0.0) {
                return Err(invalid(format!(
                    "germ {i} (u={}, rho={}) outside [{lo}, {window}] or with non-positive grain",
                    g.u, g.rho
                )));
            }
        }
        if let Some(i) = germs.windows(2).position(|w| w[1].u < w[0].u) {
            return Err(TabpError::UnsortedGerms { index: i + 1 });
        }
        Ok(Self {
            window,
            domain,
            left_buffer,
            germs,
            clamped: 0,
        })
    }

    /// Writes the germs as CSV with header `u,rho`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |source| TabpError::Csv {
            path: "<realization>".into(),
            source,
        };
        for g in &self.germs {
            w.serialize(g).map_err(wrap)?;
        }
        w.flush().map_err(|source| TabpError::Io {
            path: "<realization>".into(),
            source,
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| TabpError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if self.germs.is_empty() {
            let mut file = file;
            return writeln!(file, "u,rho").map_err(|source| TabpError::Io {
                path: path.to_path_buf(),
                source,
            });
        }
        self.write_csv(file)
    }

    /// Reads germs written by [`Realization::save_csv`]. The window and
    /// domain are not part of the file and must be supplied.
    pub fn load_csv(path: &Path, window: f64, domain: Domain, left_buffer: f64) -> Result<Self> {
        let wrap = |source| TabpError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(wrap)?;
        let germs = rdr
            .deserialize::<Germ>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(wrap)?;
        Self::from_germs(window, domain, left_buffer, germs)
    }
}

fn check_window(window: f64) -> Result<()> {
    if window.is_finite() && window > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "window length must be positive and finite, got {window}"
        )))
    }
}

/// The random stream of replicate `index` under `master_seed`.
///
/// Streams are ChaCha8 streams of one key, so they are independent and do
/// not depend on which worker runs which replicate.
pub fn replicate_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Lazily generates germs left to right: an exponential gap, then that
/// germ's mark, from one stream. Extending the window keeps the prefix.
pub struct GermSampler<'a, R> {
    rate: f64,
    dist: &'a GrainDistribution,
    rng: R,
    position: f64,
    end: f64,
    clamped: u64,
}

impl<'a, R: Rng> GermSampler<'a, R> {
    /// Germs on `(start, end]`.
    pub fn new(params: &'a ModelParams, start: f64, end: f64, rng: R) -> Self {
        Self {
            rate: params.lambda,
            dist: &params.dist,
            rng,
            position: start,
            end,
            clamped: 0,
        }
    }

    pub fn clamped(&self) -> u64 {
        self.clamped
    }
}

impl<R: Rng> Iterator for GermSampler<'_, R> {
    type Item = Germ;

    fn next(&mut self) -> Option<Germ> {
        if self.position > self.end {
            return None;
        }
        let u: f64 = self.rng.sample(Open01);
        self.position += -u.ln() / self.rate;
        if self.position > self.end {
            return None;
        }
        let draw = self.dist.sample(&mut self.rng);
        self.clamped += u64::from(draw.clamped);
        Some(Germ {
            u: self.position,
            rho: draw.value,
        })
    }
}

/// Germs of the half-line model on `[0, window]`.
pub fn sample_halfline<R: Rng>(params: &ModelParams, window: f64, rng: R) -> Result<Realization> {
    if params.domain != Domain::HalfLine {
        return Err(invalid("sample_halfline needs a half-line model"));
    }
    check_window(window)?;
    let mut sampler = GermSampler::new(params, 0.0, window, rng);
    let germs: Vec<Germ> = sampler.by_ref().collect();
    Ok(Realization {
        window,
        domain: Domain::HalfLine,
        left_buffer: 0.0,
        germs,
        clamped: sampler.clamped(),
    })
}

/// Smallest buffer `L` with `λ E(ρ - L)_+ <= eps`, by bisection.
pub fn left_buffer(params: &ModelParams, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid(format!("buffer tolerance must be positive, got {eps}")));
    }
    if !params.dist.mean().is_finite() {
        return Err(TabpError::FullLineInfiniteMean);
    }
    let missed = |l: f64| params.lambda * params.dist.excess_mean(l);
    if missed(0.0) <= eps {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while missed(hi) > eps {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(invalid("left buffer search did not terminate"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if missed(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.min(params.dist.support_max()))
}

/// Germs of the full-line model on `[-L, window]` with `L` from [`left_buffer`].
pub fn sample_fullline<R: Rng>(params: &ModelParams, window: f64, eps: f64, rng: R) -> Result<Realization> {
    if params.domain != Domain::FullLine {
        return Err(invalid("sample_fullline needs a full-line model"));
    }
    check_window(window)?;
    let buffer = left_buffer(params, eps)?;
    let mut sampler = GermSampler::new(params, -buffer, window, rng);
    let germs: Vec<Germ> = sampler.by_ref().collect();
    Ok(Realization {
        window,
        domain: Domain::FullLine,
        left_buffer: buffer,
        germs,
        clamped: sampler.clamped(),
    })
}

/// Dispatches on the model's domain.
pub fn sample<R: Rng>(params: &ModelParams, window: f64, eps: f64, rng: R) -> Result<Realization> {
    match params.domain {
        Domain::HalfLine => sample_halfline(params, window, rng),
        Domain::FullLine => sample_fullline(params, window, eps, rng),
    }
}
