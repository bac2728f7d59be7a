//! Small estimators for Monte-Carlo verification: `Eᵖ` averages, error
//! bars, rank correlation, log-log slope fits and the two-sample
//! Kolmogorov-Smirnov test.

use alloc::vec::Vec;

use crate::error::CoreError;

fn check_p(p: f64) -> Result<(), CoreError> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(CoreError::BadExponent(p))
    }
}

/// `Eᵖ[Z] = (mean |Z|ᵖ)^{1/p}` with uniform weights.
pub fn expectation(values: &[f64], p: f64) -> Result<f64, CoreError> {
    check_p(p)?;
    if values.is_empty() {
        return Err(CoreError::EmptySample);
    }
    let s: f64 = values.iter().map(|v| libm::pow(libm::fabs(*v), p)).sum();
    Ok(libm::pow(s / values.len() as f64, 1.0 / p))
}

/// `Eᵖ[Z] = (Σ wᵢ|Zᵢ|ᵖ / Σ wᵢ)^{1/p}`.
pub fn weighted_expectation(values: &[f64], weights: &[f64], p: f64) -> Result<f64, CoreError> {
    check_p(p)?;
    if values.is_empty() || values.len() != weights.len() {
        return Err(CoreError::EmptySample);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, w) in values.iter().zip(weights) {
        num += w * libm::pow(libm::fabs(*v), p);
        den += w;
    }
    if !(den > 0.0) {
        return Err(CoreError::EmptySample);
    }
    Ok(libm::pow(num / den, 1.0 / p))
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> Result<(f64, f64), CoreError> {
    let n = values.len();
    if n == 0 {
        return Err(CoreError::EmptySample);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, libm::sqrt(var / n as f64)))
}

pub fn median(values: &[f64]) -> Result<f64, CoreError> {
    if values.is_empty() {
        return Err(CoreError::EmptySample);
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Ranks starting at 1, ties receiving their average rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / libm::sqrt(sxx * syy)
    }
}

/// Spearman rank correlation; 0 when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, CoreError> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(CoreError::EmptySample);
    }
    Ok(pearson(&ranks(x), &ranks(y)))
}

/// Least-squares slope of `ln y` against `ln x`. Non-positive pairs are
/// skipped; at least two usable points are required.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64, CoreError> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (libm::log(*a), libm::log(*b)))
        .collect();
    if pts.len() < 2 {
        return Err(CoreError::EmptySample);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(CoreError::EmptySample);
    }
    Ok(sxy / sxx)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = libm::exp(-2.0 * jf * jf * lambda * lambda);
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic `D` and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64), CoreError> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::EmptySample);
    }
    let mut x: Vec<f64> = a.to_vec();
    let mut y: Vec<f64> = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max(libm::fabs(i as f64 / n as f64 - j as f64 / m as f64));
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sq = libm::sqrt(ne);
    Ok((d, kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn expectation_of_constant_is_constant() {
        let v = vec![2.5; 9];
        for p in [1.0, 2.0, 3.0, 7.5] {
            assert!((expectation(&v, p).unwrap() - 2.5).abs() < 1e-14);
        }
        let w = vec![0.1, 3.0, 0.7, 2.0, 1.0, 1.0, 5.0, 0.2, 0.3];
        assert!((weighted_expectation(&v, &w, 3.0).unwrap() - 2.5).abs() < 1e-14);
        assert!(matches!(expectation(&[], 2.0), Err(CoreError::EmptySample)));
        assert!(matches!(expectation(&v, 0.5), Err(CoreError::BadExponent(_))));
    }

    #[test]
    fn expectation_p2_is_rms() {
        let v = [1.0, -2.0, 3.0, 4.0];
        let rms = libm::sqrt((1.0 + 4.0 + 9.0 + 16.0) / 4.0);
        assert!((expectation(&v, 2.0).unwrap() - rms).abs() < 1e-15);
    }

    #[test]
    fn spearman_sign_and_ties() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[9.0, 7.0, 5.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0, 25.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(spearman(&x, &[3.0; 5]).unwrap(), 0.0);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [16.0, 32.0, 64.0, 128.0];
        let y: Vec<f64> = x.iter().map(|t| 3.0 * libm::pow(*t, -0.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Tabulated: Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098.
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 5e-4);
    }

    #[test]
    fn ks_separates_shifted_samples() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.3).collect();
        let (d, p) = ks_two_sample(&a, &b).unwrap();
        assert!((d - 0.3).abs() < 0.01);
        assert!(p < 1e-6);
        let (d0, p0) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d0, 0.0);
        assert_eq!(p0, 1.0);
    }

    proptest! {
        #[test]
        fn expectation_is_homogeneous(v in proptest::collection::vec(-10.0f64..10.0, 1..40), c in 0.1f64..10.0, p in 1.0f64..6.0) {
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let lhs = expectation(&scaled, p).unwrap();
            let rhs = c * expectation(&v, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn expectation_monotone_in_p(v in proptest::collection::vec(-10.0f64..10.0, 1..40), p in 1.0f64..4.0) {
            prop_assert!(expectation(&v, p).unwrap() <= expectation(&v, p + 1.0).unwrap() * (1.0 + 1e-12) + 1e-300);
        }
    }
}
