//! Small statistical helpers: goodness of fit, binomial intervals, order statistics.

use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

/// Upper-tail p-value of Pearson's statistic against a uniform law over the cells.
pub fn chi_square_uniform_pvalue(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let expected = vec![n as f64 / counts.len() as f64; counts.len()];
    chi_square_pvalue(counts, &expected, 0)
}

/// Upper-tail p-value of Pearson's statistic, `extra_dof` fitted parameters removed.
///
/// Cells with expectation below 5 are pooled into their right neighbor first.
pub fn chi_square_pvalue(counts: &[u64], expected: &[f64], extra_dof: usize) -> f64 {
    assert_eq!(counts.len(), expected.len());
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut co, mut ce) = (0.0, 0.0);
    for (&c, &e) in counts.iter().zip(expected) {
        co += c as f64;
        ce += e;
        if ce >= 5.0 {
            obs.push(co);
            exp.push(ce);
            co = 0.0;
            ce = 0.0;
        }
    }
    if ce > 0.0 || co > 0.0 {
        if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
            *o += co;
            *e += ce;
        } else {
            obs.push(co);
            exp.push(ce);
        }
    }
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = obs.len().saturating_sub(1 + extra_dof);
    if dof == 0 {
        return 1.0;
    }
    let chi = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    1.0 - chi.cdf(stat)
}

/// Two-sample chi-square homogeneity test on paired histograms.
pub fn chi_square_two_sample_pvalue(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pa, mut pb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        pa += x as f64;
        pb += y as f64;
        let tot = pa + pb;
        if tot * na.min(nb) / (na + nb) >= 5.0 {
            stat += cell(pa, pb, na, nb);
            cells += 1;
            pa = 0.0;
            pb = 0.0;
        }
    }
    if pa + pb > 0.0 {
        stat += cell(pa, pb, na, nb);
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    let chi = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    1.0 - chi.cdf(stat)
}

fn cell(x: f64, y: f64, na: f64, nb: f64) -> f64 {
    let tot = x + y;
    let ea = tot * na / (na + nb);
    let eb = tot * nb / (na + nb);
    (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
}

/// Clopper-Pearson interval for a binomial proportion at confidence `level`.
pub fn binomial_ci(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - level;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).expect("valid beta").inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).expect("valid beta").inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Standard error of a proportion, `sqrt(p(1-p)/n)`.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Sample median (mean of the two middle values for even lengths); `+inf` entries allowed.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    assert!(n > 0, "median of empty sample");
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            if a == b { a } else { b }
        } else {
            0.5 * (a + b)
        }
    }
}

/// Distribution-free interval for the median from order statistics, coverage >= `level`.
pub fn median_ci(values: &[f64], level: f64) -> (f64, f64) {
    quantile_ci(values, 0.5, level)
}

/// Empirical `q`-quantile, the order statistic `v_(ceil(q n))` (1-based), clamped to the sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    assert!(!v.is_empty(), "quantile of empty sample");
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

/// Distribution-free interval for the `q`-quantile from order statistics, coverage >= `level`
/// when the sample is large enough (otherwise the sample range).
pub fn quantile_ci(values: &[f64], q: f64, level: f64) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    // [v_(j), v_(k)] covers with probability P[j <= Bin(n,q) < k]
    let alpha = 1.0 - level;
    let pmf = binomial_pmf(n, q);
    let mut lower_tail = 0.0;
    let mut j = 0usize;
    while j < n && lower_tail + pmf[j] <= alpha / 2.0 {
        lower_tail += pmf[j];
        j += 1;
    }
    let mut upper_tail = 0.0;
    let mut k = n;
    while k > 0 && upper_tail + pmf[k] <= alpha / 2.0 {
        upper_tail += pmf[k];
        k -= 1;
    }
    let lo = j.saturating_sub(1);
    let hi = k.min(n - 1).max(lo);
    (v[lo], v[hi])
}

fn binomial_pmf(n: usize, q: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let lc = statrs::function::factorial::ln_binomial(n as u64, k as u64);
            let (a, b) = (k as f64, (n - k) as f64);
            let lp = if a == 0.0 { 0.0 } else { a * q.ln() } + if b == 0.0 { 0.0 } else { b * (1.0 - q).ln() };
            (lc + lp).exp()
        })
        .collect()
}

/// Mean and unbiased variance.
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 {
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts_pass() {
        assert!(chi_square_uniform_pvalue(&[1000, 1010, 990, 1005]) > 0.5);
        assert!(chi_square_uniform_pvalue(&[2000, 1000, 1000, 1000]) < 1e-6);
    }

    #[test]
    fn clopper_pearson_known_values() {
        // 0 out of 10 at 95%: upper = 1 - 0.025^{1/10}
        let (lo, hi) = binomial_ci(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-10);
        let (lo, hi) = binomial_ci(50, 100, 0.95);
        assert!(lo < 0.5 && hi > 0.5 && lo > 0.39 && hi < 0.61);
    }

    #[test]
    fn median_and_interval() {
        let v: Vec<f64> = (1..=101).map(|i| i as f64).collect();
        assert_eq!(median(&v), 51.0);
        let (lo, hi) = median_ci(&v, 0.95);
        assert!(lo < 51.0 && hi > 51.0);
        assert!(lo >= 40.0 && hi <= 62.0, "{lo} {hi}");
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
    }

    #[test]
    fn quantile_interval_covers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(quantile(&v, 0.9), 900.0);
        let (lo, hi) = quantile_ci(&v, 0.9, 0.95);
        assert!(lo < 900.0 && hi > 900.0 && lo > 870.0 && hi < 930.0, "{lo} {hi}");
        // coverage check against the uniform law
        let mut rng = crate::seed::stream(9, 0, "quantile");
        let mut covered = 0;
        for _ in 0..400 {
            let s: Vec<f64> = (0..200).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let (lo, hi) = quantile_ci(&s, 0.9, 0.95);
            covered += (lo <= 0.9 && 0.9 <= hi) as usize;
        }
        assert!(covered >= 370, "{covered}");
    }

    #[test]
    fn two_sample_identical_histograms() {
        assert!(chi_square_two_sample_pvalue(&[100, 200, 300], &[100, 200, 300]) > 0.99);
        assert!(chi_square_two_sample_pvalue(&[300, 200, 100], &[100, 200, 300]) < 1e-6);
    }
}
