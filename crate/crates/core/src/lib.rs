//! Coverage processes on the half-line with heavy-tailed grains: sampling,
//! component decomposition, closed-form predictions, regime classification
//! and a Monte Carlo harness that checks the predictions.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod classify;
pub mod dist;
pub mod error;
pub mod geometry;
pub mod mc;
pub mod process;
pub mod quad;
pub mod stats;

pub use analytics::{ClosedForms, Horizon, IntegralValue};
pub use classify::{classify, classify_with, Answer, ClassifyOptions, Method, Regime, RegimeVerdict};
pub use dist::{GrainDistribution, MeanValue, TabulatedTail};
pub use error::{Result, TabpError};
pub use geometry::{decompose, ComponentDecomposition, ComponentKind, Interval};
pub use mc::{verify, McConfig, McReport, Status};
pub use process::{replicate_rng, sample, Domain, Germ, ModelParams, Realization};
