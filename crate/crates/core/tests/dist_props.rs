use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tabp_core::quad::{self, Tolerance};
use tabp_core::{GrainDistribution, MeanValue};

fn builtin() -> impl Strategy<Value = GrainDistribution> {
    prop_oneof![
        (0.05f64..20.0).prop_map(|c| GrainDistribution::constant(c).unwrap()),
        (0.05f64..20.0).prop_map(|m| GrainDistribution::exponential(m).unwrap()),
        (0.1f64..4.0).prop_map(|a| GrainDistribution::pareto(a).unwrap()),
        Just(GrainDistribution::pareto(1.0).unwrap()),
    ]
}

/// Log-uniform over roughly [1e-3, 1e5] plus exact zero.
fn time() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 9 => (-3.0f64..5.0).prop_map(|e| 10f64.powf(e))]
}

fn tail_integral(d: &GrainDistribution, t: f64) -> f64 {
    let f = |s: f64| d.tail(s);
    quad::integrate(&f, 0.0, t, &d.kinks(), Tolerance::new(1e-11, 1e-11)).value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn truncated_mean_matches_quadrature(d in builtin(), t in time()) {
        let got = d.truncated_mean(t).unwrap();
        let want = tail_integral(&d, t);
        prop_assert!((got - want).abs() <= 1e-6 * (1.0 + t), "{d} t={t}: {got} vs {want}");
    }

    #[test]
    fn truncated_mean_monotone_concave(d in builtin(), t0 in 0.0f64..50.0, h in 1e-3f64..5.0) {
        let m: Vec<f64> = (0..4).map(|k| d.truncated_mean(t0 + k as f64 * h).unwrap()).collect();
        let slack = 1e-12 * (1.0 + m[3].abs());
        for w in m.windows(2) {
            prop_assert!(w[1] >= w[0] - slack);
        }
        for w in m.windows(3) {
            prop_assert!(w[2] - 2.0 * w[1] + w[0] <= slack, "{d}: {m:?}");
        }
        prop_assert!(m[0] <= t0 + slack);
    }

    #[test]
    fn truncated_mean_below_mean(d in builtin(), t in time()) {
        let m = d.truncated_mean(t).unwrap();
        prop_assert!(m <= t * (1.0 + 1e-12));
        if let MeanValue::Finite(mean) = d.mean() {
            prop_assert!(m <= mean * (1.0 + 1e-12));
        }
    }

    #[test]
    fn excess_mean_complements_truncated_mean(d in builtin(), t in time()) {
        if let MeanValue::Finite(mean) = d.mean() {
            let sum = d.truncated_mean(t).unwrap() + d.excess_mean(t);
            prop_assert!((sum - mean).abs() <= 1e-9 * (1.0 + mean));
        }
    }

    #[test]
    fn inverse_tail_inverts_tail(d in builtin(), u in 1e-9f64..1.0) {
        let y = d.inverse_tail(u);
        prop_assert!(y >= 0.0);
        // P(ρ > y) <= u <= P(ρ >= y)
        prop_assert!(d.tail(y) <= u * (1.0 + 1e-9));
        prop_assert!(d.tail(y * (1.0 - 1e-9)) >= u * (1.0 - 1e-9) || y == 0.0);
    }

    #[test]
    fn spec_round_trip(d in builtin()) {
        let text = d.to_string();
        let back: GrainDistribution = text.parse().unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn tabulated_grid_round_trip(vals in proptest::collection::vec(0.01f64..1.0, 2..8)) {
        let mut tails = vals;
        tails.sort_by(|a, b| b.total_cmp(a));
        tails.dedup();
        // the power-law continuation is fitted to the last two points
        prop_assume!(tails.len() >= 2);
        let grid: Vec<String> = tails.iter().enumerate().map(|(i, s)| format!("{}/{s}", i + 1)).collect();
        let spec = format!("table:grid={}", grid.join(";"));
        let d: GrainDistribution = spec.parse().unwrap();
        let back: GrainDistribution = d.to_string().parse().unwrap();
        prop_assert_eq!(&back, &d);
        for (i, s) in tails.iter().enumerate() {
            prop_assert!((d.tail((i + 1) as f64) - s).abs() < 1e-12);
        }
    }
}

#[test]
fn truncated_mean_reaches_mean() {
    for d in [
        GrainDistribution::constant(3.0).unwrap(),
        GrainDistribution::exponential(0.5).unwrap(),
        GrainDistribution::pareto(1.5).unwrap(),
        GrainDistribution::pareto(3.0).unwrap(),
    ] {
        let mean = d.mean().as_f64();
        let m = d.truncated_mean(1e3 * mean).unwrap();
        // Pareto(1.5) still misses E(ρ - t)+ = 2 t^{-1/2} at t = 3e3.
        assert!(mean - m <= d.excess_mean(1e3 * mean) + 1e-9, "{d}");
        assert!(d.excess_mean(1e3 * mean) < 0.04, "{d}");
    }
}

#[test]
fn empirical_tail_within_binomial_error() {
    const N: usize = 1_000_000;
    let cases = [
        GrainDistribution::pareto(1.0).unwrap(),
        GrainDistribution::pareto(0.5).unwrap(),
        GrainDistribution::exponential(2.0).unwrap(),
        GrainDistribution::constant(1.5).unwrap(),
    ];
    for (k, d) in cases.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        let draws: Vec<f64> = (0..N).map(|_| d.sample(&mut rng).value).collect();
        for y in [1.0, 2.0, 5.0, 10.0, 100.0] {
            let p = d.tail(y);
            let hits = draws.iter().filter(|&&x| x > y).count() as f64 / N as f64;
            let se = (p * (1.0 - p) / N as f64).sqrt();
            if se == 0.0 {
                assert_eq!(hits, p, "{d} at y={y}");
            } else {
                assert!((hits - p).abs() <= 4.0 * se, "{d} at y={y}: {hits} vs {p}");
            }
        }
    }
}

#[test]
fn tabulated_law_samples_its_own_tail() {
    let ys: Vec<f64> = (0..=40).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
    let d = GrainDistribution::pareto(0.7).unwrap().tabulate(&ys).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    const N: usize = 200_000;
    let draws: Vec<f64> = (0..N).map(|_| d.sample(&mut rng).value).collect();
    for y in [0.5, 3.0, 50.0, 1e5] {
        let p = d.tail(y);
        let hits = draws.iter().filter(|&&x| x > y).count() as f64 / N as f64;
        let se = (p * (1.0 - p) / N as f64).sqrt();
        assert!((hits - p).abs() <= 4.0 * se, "y={y}: {hits} vs {p}");
    }
}
