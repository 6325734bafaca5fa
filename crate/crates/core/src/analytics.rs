//! Closed-form predictions for the half-line model.
//!
//! The central quantity is the vacancy probability
//! `P(t ∉ U₊) = exp(-λ E(t ∧ ρ))`; its integral over `[0, T]` is the
//! expected vacant length, and `λ` times the integral over `[0, ∞)` is the
//! expected number of vacant components.

use serde::{Serialize, Serializer};

use crate::classify::{self, RegimeVerdict};
use crate::error::{invalid, Result};
use crate::process::ModelParams;
use crate::quad::{self, ImproperEstimate, TailCertificate, Tolerance};

/// Quadrature tolerance for every integral here.
pub const ANALYTICS_TOL: Tolerance = Tolerance::new(1e-9, 1e-7);

/// Value of a possibly divergent integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegralValue {
    Finite(f64),
    Infinite,
    /// Convergence could not be decided.
    Undetermined,
}

impl IntegralValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            IntegralValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        match self {
            IntegralValue::Finite(v) => IntegralValue::Finite(k * v),
            other => other,
        }
    }
}

impl Serialize for IntegralValue {
    /// A number, `"inf"`, or `null` when undetermined.
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            IntegralValue::Finite(v) => s.serialize_f64(v),
            IntegralValue::Infinite => s.serialize_str("inf"),
            IntegralValue::Undetermined => s.serialize_none(),
        }
    }
}

impl std::fmt::Display for IntegralValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegralValue::Finite(v) => write!(f, "{v}"),
            IntegralValue::Infinite => f.write_str("inf"),
            IntegralValue::Undetermined => f.write_str("undetermined"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

/// `exp(-λ E(t ∧ ρ))` without argument checks.
pub(crate) fn vacancy_integrand(params: &ModelParams, t: f64) -> f64 {
    (-params.lambda * params.dist.truncated_mean_unchecked(t.max(0.0))).exp()
}

/// `∫_0^∞ exp(-λ E(t ∧ ρ)) dt` given a tail certificate for the integrand.
pub(crate) fn vacancy_integral(params: &ModelParams, cert: TailCertificate, tol: Tolerance) -> ImproperEstimate {
    let f = |t: f64| vacancy_integrand(params, t);
    quad::integrate_to_infinity(&f, 0.0, &params.dist.kinks(), cert, tol)
}

#[derive(Debug, Clone)]
pub struct ClosedForms {
    pub params: ModelParams,
    pub tol: Tolerance,
}

impl ClosedForms {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            tol: ANALYTICS_TOL,
        }
    }

    /// `P(t ∉ U₊)`.
    pub fn vacancy_probability(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("vacancy probability needs t >= 0, got {t}")));
        }
        Ok(vacancy_integrand(&self.params, t))
    }

    /// `1 - exp(-λ Eρ)`, or 1 when `Eρ = ∞`.
    pub fn covered_volume_fraction(&self) -> f64 {
        let m = self.params.dist.mean().as_f64();
        if m.is_finite() {
            -(-self.params.lambda * m).exp_m1()
        } else {
            1.0
        }
    }

    /// `∫_0^T exp(-λ E(t ∧ ρ)) dt`, the expected vacant length of `[0, T]`.
    pub fn vacant_length_to(&self, window: f64) -> Result<f64> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(invalid(format!("window must be positive and finite, got {window}")));
        }
        let f = |t: f64| vacancy_integrand(&self.params, t);
        Ok(quad::integrate(&f, 0.0, window, &self.params.dist.kinks(), self.tol).value)
    }

    /// Expected vacant length of `[0, T]` or of the whole half-line; the
    /// latter defers the convergence question to the classifier.
    pub fn expected_vacant_length(&self, horizon: Horizon) -> Result<IntegralValue> {
        match horizon {
            Horizon::Finite(window) => self.vacant_length_to(window).map(IntegralValue::Finite),
            Horizon::Infinite => Ok(self.verdict().integral),
        }
    }

    /// `E N_v = λ ∫_0^∞ exp(-λ E(t ∧ ρ)) dt`.
    pub fn expected_num_vacant(&self) -> IntegralValue {
        self.verdict().integral.scale(self.params.lambda)
    }

    /// Expected number of complete vacant components in `[0, T]`, which is
    /// `λ` times the expected vacant length of `[0, T]`.
    pub fn expected_num_vacant_to(&self, window: f64) -> Result<f64> {
        Ok(self.params.lambda * self.vacant_length_to(window)?)
    }

    /// Success probability `p = 1 / E N_v` of the geometric law of `N_v`;
    /// `None` when `E N_v = ∞` (then `N_v = ∞` a.s.) or undetermined.
    pub fn nv_geometric_parameter(&self) -> Option<f64> {
        self.expected_num_vacant().finite().map(|e| (1.0 / e).min(1.0))
    }

    pub fn verdict(&self) -> RegimeVerdict {
        classify::classify(&self.params)
    }
}
