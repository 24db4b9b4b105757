use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` trials.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (x, n) = (successes, n as f64);
    let p = x as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // the endpoints are exactly 0 and 1 at x = 0 and x = n
    let lo = if x == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if x as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Kolmogorov–Smirnov statistic of a sample against Exp(1).
pub fn ks_statistic_exp1(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-x).exp();
            let above = (i + 1) as f64 / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_pvalue(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Five-number-style summary of a censored sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSummary {
    pub replicas: usize,
    /// Replicas still alive at the cap.
    pub censored: usize,
    /// Mean of `min(time, cap)`.
    pub mean: f64,
    pub std_err: f64,
    pub median: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
}

impl TimeSummary {
    pub fn from_times(times: &[f64], censored: usize) -> TimeSummary {
        let n = times.len();
        if n == 0 {
            return TimeSummary {
                replicas: 0,
                censored,
                mean: 0.0,
                std_err: 0.0,
                median: 0.0,
                q10: 0.0,
                q25: 0.0,
                q75: 0.0,
                q90: 0.0,
            };
        }
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            sorted.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let q = |p| quantile_sorted(&sorted, p);
        TimeSummary {
            replicas: n,
            censored,
            mean,
            std_err: (var / n as f64).sqrt(),
            median: q(0.5),
            q10: q(0.1),
            q25: q(0.25),
            q75: q(0.75),
            q90: q(0.9),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_reference_values() {
        // reference values from statsmodels proportion_confint(method="wilson")
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert_abs_diff_eq!(lo, 0.218_948_9, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 0.395_848_5, epsilon = 1e-6);
        let (lo, hi) = wilson_interval(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi < 0.004 && hi > 0.0038);
        assert_eq!(wilson_interval(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn wilson_width_scales_like_inverse_root() {
        let w = |s, n| {
            let (lo, hi) = wilson_interval(s, n, Z95);
            hi - lo
        };
        let ratio = w(300, 1000) / w(1200, 4000);
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        let s = TimeSummary::from_times(&[0.0, 0.0, 0.0], 0);
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.median, 0.0);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln()).collect();
        assert!(ks_statistic_exp1(&xs) <= 0.5 / n as f64 + 1e-12);
        assert_abs_diff_eq!(kolmogorov_pvalue(1.628), 0.01, epsilon = 2e-4);
        assert_abs_diff_eq!(kolmogorov_pvalue(1.358), 0.05, epsilon = 2e-4);
    }
}
