//! Adaptive Simpson quadrature, with improper integrals handled as a proper
//! integral plus an analytic tail bound supplied by the caller.
//!
//! Long ranges are split at powers of two (and at any caller-supplied kinks)
//! before the adaptive rule runs, so the initial sampling cannot step over
//! features of the integrand.

/// Stopping rule for [`adaptive_simpson`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_depth: 48,
        }
    }

    fn target(&self, magnitude: f64) -> f64 {
        self.abs.max(self.rel * magnitude.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-9, 1e-7)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Accumulated Richardson error estimate.
    pub error: f64,
    pub evaluations: usize,
    /// False when some subinterval hit `max_depth` before meeting tolerance.
    pub converged: bool,
}

impl Estimate {
    const ZERO: Estimate = Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
        converged: true,
    };

    fn add(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            error: self.error + other.error,
            evaluations: self.evaluations + other.evaluations,
            converged: self.converged && other.converged,
        }
    }
}

struct Simpson<'f, F> {
    f: &'f F,
    evaluations: usize,
    converged: bool,
    error: f64,
    max_depth: u32,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    fn eval(&mut self, x: f64) -> f64 {
        self.evaluations += 1;
        (self.f)(x)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: f64, fa: f64, m: f64, fm: f64, b: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm);
        let frm = self.eval(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol || depth >= self.max_depth || lm <= a || rm >= b {
            if delta.abs() > 15.0 * tol {
                self.converged = false;
            }
            self.error += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        self.recurse(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1)
            + self.recurse(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1)
    }
}

/// Integrates `f` over `[a, b]` with a single adaptive Simpson tree.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    if !(b > a) {
        return Estimate::ZERO;
    }
    let mut s = Simpson {
        f,
        evaluations: 0,
        converged: true,
        error: 0.0,
        max_depth: tol.max_depth,
    };
    let m = 0.5 * (a + b);
    let fa = s.eval(a);
    let fm = s.eval(m);
    let fb = s.eval(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let target = tol.target(whole);
    let value = s.recurse(a, fa, m, fm, b, fb, whole, target, 0);
    Estimate {
        value,
        error: s.error,
        evaluations: s.evaluations,
        converged: s.converged,
    }
}

/// Breakpoints for `[a, b]`: both ends, every power of two strictly inside,
/// and every caller-supplied kink strictly inside. Sorted, deduplicated.
pub fn geometric_breaks(a: f64, b: f64, kinks: &[f64]) -> Vec<f64> {
    let mut pts = vec![a, b];
    if b > a {
        let lo = if a > 0.0 { a.log2().floor() as i32 } else { -12 };
        let hi = b.log2().ceil().min(1023.0) as i32;
        for k in lo..=hi {
            let p = 2f64.powi(k);
            if p > a && p < b {
                pts.push(p);
            }
        }
        pts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Integrates over `[a, b]` piece by piece between [`geometric_breaks`].
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, kinks: &[f64], tol: Tolerance) -> Estimate {
    if !(b > a) {
        return Estimate::ZERO;
    }
    let pts = geometric_breaks(a, b, kinks);
    pts.windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol))
        .fold(Estimate::ZERO, Estimate::add)
}

/// Decay bound on an integrand beyond `from`, in log-coefficient form so
/// that huge constants do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    /// `|f(t)| <= exp(log_coeff) * t^(-exponent)` for `t >= from`, `exponent > 1`.
    PowerLaw { log_coeff: f64, exponent: f64, from: f64 },
    /// `|f(t)| <= exp(log_coeff) * exp(-rate * t)` for `t >= from`, `rate > 0`.
    Exponential { log_coeff: f64, rate: f64, from: f64 },
}

/// A tail bound, and whether it holds with equality (in which case the tail
/// integral is added analytically rather than bounded away).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCertificate {
    pub bound: TailBound,
    pub exact: bool,
}

impl TailBound {
    pub fn from(&self) -> f64 {
        match *self {
            TailBound::PowerLaw { from, .. } | TailBound::Exponential { from, .. } => from,
        }
    }

    /// Upper bound on `∫_x^∞ |f|` for `x >= from`.
    pub fn tail_integral(&self, x: f64) -> f64 {
        match *self {
            TailBound::PowerLaw {
                log_coeff, exponent, ..
            } => (log_coeff + (1.0 - exponent) * x.ln()).exp() / (exponent - 1.0),
            TailBound::Exponential { log_coeff, rate, .. } => (log_coeff - rate * x).exp() / rate,
        }
    }

    /// Smallest `x >= from` whose tail integral is at most `target`.
    pub fn cutoff(&self, target: f64) -> f64 {
        let x = match *self {
            TailBound::PowerLaw {
                log_coeff, exponent, ..
            } => ((log_coeff - (target * (exponent - 1.0)).ln()) / (exponent - 1.0)).exp(),
            TailBound::Exponential { log_coeff, rate, .. } => (log_coeff - (target * rate).ln()) / rate,
        };
        x.max(self.from())
    }

    /// Converts `|f(t)| <= A exp(-B t^q)` (`0 < q <= 1`) into a power-law bound
    /// with the requested exponent, using `e^{-x} <= (k/(e x))^k` with `k q = exponent`.
    pub fn from_stretched_exponential(log_a: f64, b: f64, q: f64, from: f64, exponent: f64) -> TailBound {
        let k = exponent / q;
        let log_coeff = log_a + k * (k.ln() - 1.0 - b.ln());
        TailBound::PowerLaw {
            log_coeff,
            exponent,
            from: from.max(f64::MIN_POSITIVE),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImproperEstimate {
    pub value: f64,
    /// Quadrature error plus the discarded (bounded) tail mass.
    pub error: f64,
    /// Upper limit of the proper part.
    pub cutoff: f64,
    pub converged: bool,
}

/// `∫_a^∞ f` given a tail certificate for `f`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    kinks: &[f64],
    cert: TailCertificate,
    tol: Tolerance,
) -> ImproperEstimate {
    let from = cert.bound.from().max(a);
    let head = integrate(f, a, from, kinks, tol);
    if cert.exact {
        let tail = cert.bound.tail_integral(from);
        return ImproperEstimate {
            value: head.value + tail,
            error: head.error,
            cutoff: from,
            converged: head.converged,
        };
    }
    let target = 0.5 * tol.target(head.value);
    let cutoff = cert.bound.cutoff(target);
    let body = integrate(f, from, cutoff, kinks, tol);
    ImproperEstimate {
        value: head.value + body.value,
        error: head.error + body.error + cert.bound.tail_integral(cutoff),
        cutoff,
        converged: head.converged && body.converged,
    }
}
