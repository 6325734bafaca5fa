use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tabp_core::geometry::{self, decompose_stream};
use tabp_core::{decompose, Domain, Germ, Realization};

/// Covered cells of `[0, window]` at resolution `window / cells`, sampling
/// each cell at its midpoint.
fn rasterize(germs: &[Germ], window: f64, cells: usize) -> Vec<bool> {
    let h = window / cells as f64;
    let mut diff = vec![0i32; cells + 1];
    for g in germs {
        let lo = ((g.u / h - 0.5).ceil().max(0.0)) as usize;
        let hi = (g.reach() / h - 0.5).floor();
        if hi < 0.0 || lo >= cells {
            continue;
        }
        let hi = (hi as usize).min(cells - 1);
        if lo <= hi {
            diff[lo] += 1;
            diff[hi + 1] -= 1;
        }
    }
    let mut acc = 0;
    diff[..cells]
        .iter()
        .map(|d| {
            acc += d;
            acc > 0
        })
        .collect()
}

/// (occupied runs, vacant runs, covered length)
fn oracle(germs: &[Germ], window: f64, cells: usize) -> (usize, usize, f64) {
    let raster = rasterize(germs, window, cells);
    let mut runs = (0, 0);
    for (i, &c) in raster.iter().enumerate() {
        if i == 0 || raster[i - 1] != c {
            if c {
                runs.0 += 1;
            } else {
                runs.1 += 1;
            }
        }
    }
    let covered = raster.iter().filter(|&&c| c).count() as f64 * window / cells as f64;
    (runs.0, runs.1, covered)
}

fn random_realization(rng: &mut ChaCha8Rng, domain: Domain) -> Realization {
    let window = rng.random_range(0.5..10.0);
    let n = rng.random_range(0..=20);
    let scale = rng.random_range(0.01..2.0);
    let buffer = if domain == Domain::FullLine { 2.0 } else { 0.0 };
    let mut germs: Vec<Germ> = (0..n)
        .map(|_| Germ {
            u: rng.random_range(-buffer..window),
            rho: -scale * rng.random::<f64>().ln(),
        })
        .collect();
    germs.sort_by(|a, b| a.u.total_cmp(&b.u));
    Realization::from_germs(window, domain, buffer, germs).unwrap()
}

#[test]
fn decomposition_matches_rasterization() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..1000 {
        let domain = if k % 4 == 3 { Domain::FullLine } else { Domain::HalfLine };
        let real = random_realization(&mut rng, domain);
        let dec = decompose(&real).unwrap();
        let t = real.window;
        let mut cells = 100_000;
        let mut got = oracle(&real.germs, t, cells);
        // refine when a feature is thinner than a cell
        while (got.0, got.1) != (dec.occupied.len(), dec.vacant.len()) && cells < 100_000_000 {
            cells *= 10;
            got = oracle(&real.germs, t, cells);
        }
        assert_eq!(got.0, dec.occupied.len(), "case {k}: {real:?}");
        assert_eq!(got.1, dec.vacant.len(), "case {k}: {real:?}");
        assert!((got.2 - dec.covered_length).abs() <= 1e-3 * t, "case {k}");
    }
}

#[test]
fn streaming_and_batch_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let real = random_realization(&mut rng, Domain::HalfLine);
        let a = decompose(&real).unwrap();
        let b = decompose_stream(real.germs.iter().copied(), real.window, Domain::HalfLine).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn point_queries_agree_with_intervals() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let real = random_realization(&mut rng, Domain::HalfLine);
        let dec = decompose(&real).unwrap();
        for _ in 0..10_000 {
            let t = rng.random_range(0.0..=real.window);
            let direct = geometry::point_vacant(&real, t).unwrap();
            let in_vacant =
                dec.vacant.iter().any(|v| v.a <= t && t < v.b) && !dec.occupied.iter().any(|o| o.a <= t && t <= o.b);
            assert_eq!(direct, in_vacant, "t={t}");
            assert_eq!(direct, dec.is_vacant_at(t).unwrap(), "t={t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lengths_account_for_the_window(seed in any::<u64>(), full in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let domain = if full { Domain::FullLine } else { Domain::HalfLine };
        let real = random_realization(&mut rng, domain);
        let dec = decompose(&real).unwrap();
        let complete: f64 = dec.vacant_gap_lengths.iter().sum();
        let censored: f64 = dec.vacant_lengths(true).iter().sum::<f64>() - dec.vacant_lengths(false).iter().sum::<f64>();
        let total = complete + censored + dec.covered_length;
        prop_assert!((total - real.window).abs() <= 1e-9 * real.window);
        prop_assert_eq!(dec.n_vacant_complete, dec.vacant_gap_lengths.len());
    }

    #[test]
    fn restriction_equals_prefix_decomposition(seed in any::<u64>(), frac in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real = random_realization(&mut rng, Domain::HalfLine);
        let w = frac * real.window;
        let prefix: Vec<Germ> = real.germs.iter().copied().filter(|g| g.u <= w).collect();
        let direct = decompose(&Realization::from_germs(w, Domain::HalfLine, 0.0, prefix).unwrap()).unwrap();
        let restricted = decompose(&real).unwrap().restrict(w).unwrap();
        prop_assert_eq!(direct.occupied.len(), restricted.occupied.len());
        prop_assert_eq!(direct.vacant.len(), restricted.vacant.len());
        prop_assert_eq!(direct.n_vacant_complete, restricted.n_vacant_complete);
        prop_assert!((direct.covered_length - restricted.covered_length).abs() <= 1e-12 * real.window);
    }
}
