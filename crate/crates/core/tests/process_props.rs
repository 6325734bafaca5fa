use proptest::prelude::*;

use tabp_core::process::{self, GermSampler};
use tabp_core::{Domain, GrainDistribution, ModelParams};

fn half(lambda: f64, d: GrainDistribution) -> ModelParams {
    ModelParams::half_line(lambda, d).unwrap()
}

#[test]
fn germ_counts_are_poisson() {
    let params = half(2.5, GrainDistribution::pareto(1.0).unwrap());
    let window = 20.0;
    let n = 4000u64;
    let counts: Vec<f64> = (0..n)
        .map(|i| {
            let real = process::sample_halfline(&params, window, process::replicate_rng(17, i)).unwrap();
            real.germs.len() as f64
        })
        .collect();
    let nf = n as f64;
    let mean = counts.iter().sum::<f64>() / nf;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    // Var of the sample variance for a Poisson(m) law: (μ4 - σ⁴)/n with μ4 = m + 3m².
    let se_var = ((mean + 2.0 * mean * mean) / nf).sqrt();
    assert!((var - mean).abs() <= 5.0 * se_var, "mean {mean} var {var} se {se_var}");
    let expected = 2.5 * window;
    assert!((mean - expected).abs() <= 5.0 * (expected / nf).sqrt());
}

#[test]
fn full_line_germs_start_at_buffer() {
    let params = ModelParams::new(1.0, GrainDistribution::exponential(2.0).unwrap(), Domain::FullLine).unwrap();
    let real = process::sample_fullline(&params, 50.0, 1e-4, process::replicate_rng(3, 0)).unwrap();
    assert!(real.left_buffer > 0.0);
    assert!(real.germs.iter().all(|g| g.u >= -real.left_buffer && g.u <= 50.0));
    assert!(real.germs.iter().any(|g| g.u < 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn half_line_germs_are_nonnegative_and_sorted(
        lambda in 0.1f64..5.0,
        alpha in 0.2f64..3.0,
        window in 0.0f64..200.0,
        seed in any::<u64>(),
        index in 0u64..1000,
    ) {
        let params = half(lambda, GrainDistribution::pareto(alpha).unwrap());
        let real = process::sample_halfline(&params, window, process::replicate_rng(seed, index)).unwrap();
        prop_assert!(real.germs.iter().all(|g| g.u >= 0.0 && g.u <= window && g.rho >= 1.0));
        prop_assert!(real.germs.windows(2).all(|w| w[0].u <= w[1].u));
    }

    #[test]
    fn longer_windows_extend_the_prefix(seed in any::<u64>(), window in 1.0f64..100.0) {
        let params = half(1.3, GrainDistribution::exponential(1.0).unwrap());
        let short = process::sample_halfline(&params, window, process::replicate_rng(seed, 0)).unwrap();
        let long = process::sample_halfline(&params, 3.0 * window, process::replicate_rng(seed, 0)).unwrap();
        prop_assert!(long.germs.len() >= short.germs.len());
        prop_assert_eq!(&long.germs[..short.germs.len()], &short.germs[..]);
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), index in any::<u64>()) {
        let params = half(1.0, GrainDistribution::pareto(1.0).unwrap());
        let a: Vec<_> = GermSampler::new(&params, 0.0, 30.0, process::replicate_rng(seed, index)).collect();
        let b: Vec<_> = GermSampler::new(&params, 0.0, 30.0, process::replicate_rng(seed, index)).collect();
        prop_assert_eq!(&a, &b);
        let c: Vec<_> = GermSampler::new(&params, 0.0, 30.0, process::replicate_rng(seed, index ^ 1)).collect();
        prop_assert_ne!(a, c);
    }
}
