//! Summary statistics and the two goodness-of-fit tests the harness needs,
//! with asymptotic p-values.

use serde::Serialize;

/// Sample mean with its standard error (`None` below two observations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: Option<f64>,
    pub n: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: None,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = (n > 1).then(|| {
            let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        });
        Self { mean, se, n }
    }
}

/// Kolmogorov-Smirnov one-sample test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// KS test of `samples` against the CDF `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsTest {
    let n = samples.len();
    if n == 0 {
        return KsTest {
            n,
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / nf) - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let sqrt_n = nf.sqrt();
    let p_value = kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic);
    KsTest { n, statistic, p_value }
}

/// KS test against the exponential law with the given rate.
pub fn ks_exponential(samples: &[f64], rate: f64) -> KsTest {
    ks_test(samples, |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() })
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-transformed series converges fast for small x.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let mut sum = 0.0;
        let mut k = 1i32;
        loop {
            let term = y.powi((2 * k - 1).pow(2));
            sum += term;
            if term < 1e-17 * sum || k > 100 {
                break;
            }
            k += 1;
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Pearson chi-square test result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson test with `df = bins - 1` (no fitted parameters).
pub fn chi_square(observed: &[u64], probabilities: &[f64]) -> ChiSquareTest {
    assert_eq!(observed.len(), probabilities.len());
    let total: u64 = observed.iter().sum();
    let expected: Vec<f64> = probabilities.iter().map(|p| p * total as f64).collect();
    let statistic = observed
        .iter()
        .zip(&expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = observed.len().saturating_sub(1);
    ChiSquareTest {
        observed: observed.to_vec(),
        expected,
        statistic,
        df,
        p_value: chi_square_survival(statistic, df),
    }
}

/// Tests counts `m >= 1` against `P(N = m) = p (1-p)^{m-1}`, pooling
/// `m >= bins` into the last bin. Zeros are pooled into the first bin.
pub fn chi_square_geometric(counts: &[u64], p: f64, bins: usize) -> ChiSquareTest {
    assert!(bins >= 2);
    let mut observed = vec![0u64; bins];
    for &c in counts {
        let idx = (c.max(1) as usize).min(bins) - 1;
        observed[idx] += 1;
    }
    let mut probs: Vec<f64> = (0..bins - 1).map(|k| p * (1.0 - p).powi(k as i32)).collect();
    probs.push((1.0 - p).powi(bins as i32 - 1));
    chi_square(&observed, &probs)
}

/// `P(X > x)` for a chi-square variable with `df` degrees of freedom.
pub fn chi_square_survival(x: f64, df: usize) -> f64 {
    if df == 0 {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + G + 0.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + (i + 1) as f64));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..1000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se.unwrap() - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanSe::of(&[3.0]).se, None);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(1.5) - (std::f64::consts::PI.sqrt() / 2.0).ln()).abs() < 1e-13);
    }

    #[test]
    fn chi_square_critical_values() {
        // Tabulated 5% and 1% critical values.
        assert!((chi_square_survival(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
        assert!((chi_square_survival(7.814_727_903_251_178, 3) - 0.05).abs() < 1e-9);
        assert!((chi_square_survival(11.344_866_730_144_37, 3) - 0.01).abs() < 1e-9);
        assert!((chi_square_survival(18.307_038_053_275_146, 10) - 0.05).abs() < 1e-9);
        // df = 2 is exactly exp(-x/2)
        for x in [0.1, 1.0, 5.0, 30.0] {
            assert!((chi_square_survival(x, 2) - (-x / 2.0).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn kolmogorov_known_values() {
        // Critical values 1.3581 (5%) and 1.6276 (1%).
        assert!((kolmogorov_survival(1.358_099) - 0.05).abs() < 1e-5);
        assert!((kolmogorov_survival(1.627_624) - 0.01).abs() < 1e-5);
        assert!((kolmogorov_survival(0.5) - 0.963_945_243_664_141).abs() < 1e-9);
        // both branches agree at the switch point
        let lo = kolmogorov_survival(1.18 - 1e-12);
        let hi = kolmogorov_survival(1.18);
        assert!((lo - hi).abs() < 1e-10);
    }

    #[test]
    fn ks_statistic_by_hand() {
        // Against U(0,1): samples {0.1, 0.4, 0.9}: D = max(1/3-0.1, 2/3-0.4, 1-0.9, 0.4-1/3, ...) = 0.2667
        let t = ks_test(&[0.9, 0.1, 0.4], |x| x.clamp(0.0, 1.0));
        assert!((t.statistic - (2.0 / 3.0 - 0.4)).abs() < 1e-15);
    }

    #[test]
    fn ks_exponential_accepts_and_rejects() {
        let n = 5000;
        // deterministic quantiles of Exp(2)
        let xs: Vec<f64> = (0..n).map(|i| -((i as f64 + 0.5) / n as f64).ln() / 2.0).collect();
        assert!(ks_exponential(&xs, 2.0).p_value > 0.99);
        assert!(ks_exponential(&xs, 1.5).p_value < 1e-6);
    }

    #[test]
    fn geometric_binning() {
        let counts = [1, 1, 2, 3, 4, 9, 0];
        let t = chi_square_geometric(&counts, 0.5, 4);
        assert_eq!(t.observed, vec![3, 1, 1, 2]);
        let e: f64 = t.expected.iter().sum();
        assert!((e - 7.0).abs() < 1e-12);
        assert_eq!(t.df, 3);
        assert!((t.expected[3] - 7.0 * 0.125).abs() < 1e-12);
    }
}
