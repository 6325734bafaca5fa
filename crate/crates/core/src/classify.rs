//! Which of the three half-line regimes a model is in.
//!
//! With `I = ∫_0^∞ exp(-λ E(t ∧ ρ)) dt`:
//!
//! * regime I: `Eρ < ∞` (then `I = ∞`); no unbounded component, covered
//!   fraction `1 - exp(-λ Eρ)`;
//! * regime II: `I < ∞` (which forces `Eρ = ∞`); an unbounded occupied
//!   component exists;
//! * regime III: `Eρ = ∞` and `I = ∞`; no unbounded component although the
//!   covered fraction is 1.
//!
//! Built-in families are decided analytically. Tabulated tails go through a
//! growth test of `λ E(t ∧ ρ)` against `ln t`, which may honestly answer
//! [`Regime::Inconclusive`].

use serde::Serialize;

use crate::analytics::{self, IntegralValue};
use crate::dist::{GrainDistribution, MeanValue, TabulatedTail};
use crate::process::ModelParams;
use crate::quad::{TailBound, TailCertificate, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    I,
    II,
    III,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed-form reasoning on a built-in family.
    Analytic,
    /// Growth test, with the integral value backed by a tail certificate.
    TailAsymptotic,
    /// Growth test only; no certificate was available for the value.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Local decay exponent of the integrand, `λ t P(ρ > t)`, at
    /// `reference_point`: the integrand behaves like `t^{-exponent}` there.
    pub tail_exponent: f64,
    pub reference_point: f64,
    /// Upper limit of the proper part of the quadrature, when one was run.
    pub truncation_point: Option<f64>,
    /// Error bound on a finite integral value.
    pub integral_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub mean_rho: MeanValue,
    pub integral: IntegralValue,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Largest `t` examined by the growth test.
    pub horizon: f64,
    /// Margin around the critical slope `ln t`.
    pub delta: f64,
    /// Run the growth test even on built-in families.
    pub force_tail_asymptotic: bool,
    pub tol: Tolerance,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            horizon: 1e12,
            delta: 0.05,
            force_tail_asymptotic: false,
            tol: analytics::ANALYTICS_TOL,
        }
    }
}

pub fn classify(params: &ModelParams) -> RegimeVerdict {
    classify_with(params, &ClassifyOptions::default())
}

pub fn classify_with(params: &ModelParams, opts: &ClassifyOptions) -> RegimeVerdict {
    match params.dist {
        GrainDistribution::Tabulated(_) => tail_asymptotic(params, opts),
        _ if opts.force_tail_asymptotic => tail_asymptotic(params, opts),
        _ => analytic(params, opts),
    }
}

/// Whether an unbounded occupied component exists a.s.: exactly in regime II.
pub fn unbounded_component_exists(verdict: &RegimeVerdict) -> Answer {
    match verdict.regime {
        Regime::II => Answer::Yes,
        Regime::I | Regime::III => Answer::No,
        Regime::Inconclusive => Answer::Unknown,
    }
}

fn local_exponent(params: &ModelParams, t: f64) -> f64 {
    params.lambda * t * params.dist.tail(t)
}

fn divergent(params: &ModelParams, regime: Regime, method: Method, reference: f64) -> RegimeVerdict {
    RegimeVerdict {
        regime,
        mean_rho: params.dist.mean(),
        integral: IntegralValue::Infinite,
        method,
        diagnostics: Diagnostics {
            tail_exponent: local_exponent(params, reference),
            reference_point: reference,
            truncation_point: None,
            integral_error: None,
        },
    }
}

fn convergent(params: &ModelParams, cert: TailCertificate, method: Method, tol: Tolerance) -> RegimeVerdict {
    let est = analytics::vacancy_integral(params, cert, tol);
    RegimeVerdict {
        regime: Regime::II,
        mean_rho: params.dist.mean(),
        integral: IntegralValue::Finite(est.value),
        method,
        diagnostics: Diagnostics {
            tail_exponent: local_exponent(params, est.cutoff),
            reference_point: est.cutoff,
            truncation_point: Some(est.cutoff),
            integral_error: Some(est.error),
        },
    }
}

/// Power-law bound exponent used when converting stretched exponentials.
const CERT_EXPONENT: f64 = 3.0;

fn analytic(params: &ModelParams, opts: &ClassifyOptions) -> RegimeVerdict {
    let lambda = params.lambda;
    match params.dist {
        GrainDistribution::Pareto { alpha } if alpha < 1.0 => {
            // For t >= 1, λE(t∧ρ) = λ(1 - 1/q) + (λ/q) t^q with q = 1 - α: the
            // integrand decays like exp(-c t^q), faster than any power.
            let q = 1.0 - alpha;
            let bound = TailBound::from_stretched_exponential(lambda / q - lambda, lambda / q, q, 1.0, CERT_EXPONENT);
            convergent(
                params,
                TailCertificate { bound, exact: false },
                Method::Analytic,
                opts.tol,
            )
        }
        GrainDistribution::Pareto { alpha: 1.0 } => {
            // Derived from the α = 1 computation E(t∧ρ) = 1 + ln t (t >= 1):
            // the integrand is e^{-λ} t^{-λ}, integrable at infinity iff λ > 1.
            if lambda > 1.0 {
                let bound = TailBound::PowerLaw {
                    log_coeff: -lambda,
                    exponent: lambda,
                    from: 1.0,
                };
                convergent(
                    params,
                    TailCertificate { bound, exact: true },
                    Method::Analytic,
                    opts.tol,
                )
            } else {
                divergent(params, Regime::III, Method::Analytic, opts.horizon)
            }
        }
        // Finite mean: the integrand tends to exp(-λEρ) > 0.
        _ => divergent(params, Regime::I, Method::Analytic, opts.horizon),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Growth {
    Convergent,
    Divergent,
    Undecided,
}

/// Looks at `h±(t) = λE(t∧ρ) - (1 ± δ) ln t` over the last decade below the
/// horizon. `h+` strictly increasing there means the integrand decays faster
/// than `t^{-(1+δ)}`; `h-` not increasing means it decays no faster than
/// `t^{-(1-δ)}`.
fn growth_test(params: &ModelParams, opts: &ClassifyOptions) -> Growth {
    const STEPS: usize = 10;
    let ts: Vec<f64> = (0..=STEPS)
        .map(|j| opts.horizon * 10f64.powf(-((STEPS - j) as f64) / STEPS as f64))
        .collect();
    let h = |t: f64, slope: f64| params.lambda * params.dist.truncated_mean_unchecked(t) - slope * t.ln();
    let plus: Vec<f64> = ts.iter().map(|&t| h(t, 1.0 + opts.delta)).collect();
    let minus: Vec<f64> = ts.iter().map(|&t| h(t, 1.0 - opts.delta)).collect();
    let slack = |v: f64| 1e-12 * (1.0 + v.abs());
    if plus.windows(2).all(|w| w[1] > w[0] + slack(w[0])) {
        Growth::Convergent
    } else if minus.windows(2).all(|w| w[1] <= w[0] + slack(w[0])) {
        Growth::Divergent
    } else {
        Growth::Undecided
    }
}

/// Tail certificate for a tabulated law whose continuation makes the
/// integral converge.
fn tabulated_certificate(params: &ModelParams, tab: &TabulatedTail) -> Option<TailCertificate> {
    let &(y_n, s_n) = tab.points().last()?;
    if s_n == 0.0 {
        return None;
    }
    let lambda = params.lambda;
    let beta = tab.tail_exponent();
    let m_n = params.dist.truncated_mean_unchecked(y_n);
    if (beta - 1.0).abs() < 1e-9 {
        // λE(t∧ρ) = λ m_n + κ ln(t / y_n): a pure power law t^{-κ}.
        let kappa = lambda * s_n * y_n;
        (kappa > 1.0).then_some(TailCertificate {
            bound: TailBound::PowerLaw {
                log_coeff: -lambda * m_n + kappa * y_n.ln(),
                exponent: kappa,
                from: y_n,
            },
            exact: beta == 1.0,
        })
    } else if beta < 1.0 {
        // λE(t∧ρ) = λ m_n - λ s_n y_n / q + (λ s_n y_n^β / q) t^q, q = 1 - β.
        let q = 1.0 - beta;
        let log_a = -lambda * m_n + lambda * s_n * y_n / q;
        let b = lambda * s_n * y_n.powf(beta) / q;
        Some(TailCertificate {
            bound: TailBound::from_stretched_exponential(log_a, b, q, y_n, CERT_EXPONENT),
            exact: false,
        })
    } else {
        None
    }
}

fn tail_asymptotic(params: &ModelParams, opts: &ClassifyOptions) -> RegimeVerdict {
    let mean = params.dist.mean();
    let inconclusive = || RegimeVerdict {
        regime: Regime::Inconclusive,
        mean_rho: mean,
        integral: IntegralValue::Undetermined,
        method: Method::TailAsymptotic,
        diagnostics: Diagnostics {
            tail_exponent: local_exponent(params, opts.horizon),
            reference_point: opts.horizon,
            truncation_point: None,
            integral_error: None,
        },
    };
    match (growth_test(params, opts), mean) {
        (Growth::Divergent, MeanValue::Finite(_)) => divergent(params, Regime::I, Method::TailAsymptotic, opts.horizon),
        (Growth::Divergent, MeanValue::Infinite) => {
            divergent(params, Regime::III, Method::TailAsymptotic, opts.horizon)
        }
        (Growth::Convergent, MeanValue::Infinite) => match params.dist {
            GrainDistribution::Tabulated(ref tab) => match tabulated_certificate(params, tab) {
                Some(cert) => convergent(params, cert, Method::TailAsymptotic, opts.tol),
                None => RegimeVerdict {
                    regime: Regime::II,
                    integral: IntegralValue::Undetermined,
                    method: Method::Heuristic,
                    ..inconclusive()
                },
            },
            // Built-in family forced through the growth test: the value
            // comes from the family's own certificate.
            _ => {
                let v = analytic(params, opts);
                if v.regime == Regime::II {
                    RegimeVerdict {
                        method: Method::TailAsymptotic,
                        ..v
                    }
                } else {
                    inconclusive()
                }
            }
        },
        // Finite mean with a convergent-looking integral is contradictory.
        (Growth::Convergent, MeanValue::Finite(_)) | (Growth::Undecided, _) => inconclusive(),
    }
}
