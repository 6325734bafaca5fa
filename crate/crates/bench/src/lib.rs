//! Fixtures shared by the criterion benches.

use tabp_core::process::{self, GermSampler};
use tabp_core::{Domain, GrainDistribution, ModelParams, Realization};

/// λ = 1 with Pareto(α) grains on the half-line.
pub fn pareto_model(alpha: f64) -> ModelParams {
    ModelParams::half_line(1.0, GrainDistribution::pareto(alpha).unwrap()).unwrap()
}

/// A full half-line realization on `[0, window]`, without early stopping.
pub fn realization(params: &ModelParams, window: f64, seed: u64) -> Realization {
    let germs = GermSampler::new(params, 0.0, window, process::replicate_rng(seed, 0)).collect();
    Realization::from_germs(window, Domain::HalfLine, 0.0, germs).unwrap()
}
