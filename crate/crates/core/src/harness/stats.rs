//! Goodness-of-fit statistics used by the experiments and tests.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS statistic of `samples` against `cdf`.
pub fn ks_statistic_one(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// One-sample KS p-value.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    ks_p_value(ks_statistic_one(samples, cdf), samples.len() as f64)
}

/// Two-sample KS statistic `sup |F_a - F_b|`.
pub fn ks_statistic_two(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample KS p-value (asymptotic).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    ks_p_value(ks_statistic_two(a, b), na * nb / (na + nb))
}

/// Result of a chi-square homogeneity test between two categorical samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Categories after pooling sparse ones.
    pub categories: usize,
}

/// Two-sample chi-square homogeneity test over category counts. Categories
/// whose pooled expected count falls below 5 in either sample are merged
/// into one bin.
pub fn chi_square_homogeneity(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> ChiSquareResult {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    let total = (na + nb) as f64;
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for k in keys {
        let ca = *a.get(k).unwrap_or(&0) as f64;
        let cb = *b.get(k).unwrap_or(&0) as f64;
        let row = ca + cb;
        let (ea, eb) = (row * na as f64 / total, row * nb as f64 / total);
        if ea < 5.0 || eb < 5.0 {
            pooled.0 += ca;
            pooled.1 += cb;
        } else {
            bins.push((ca, cb));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        bins.push(pooled);
    }
    if bins.len() < 2 {
        return ChiSquareResult {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
            categories: bins.len(),
        };
    }
    let mut stat = 0.0;
    for &(ca, cb) in &bins {
        let row = ca + cb;
        let ea = row * na as f64 / total;
        let eb = row * nb as f64 / total;
        if ea > 0.0 {
            stat += (ca - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            stat += (cb - eb).powi(2) / eb;
        }
    }
    let dof = bins.len() - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("dof >= 1").cdf(stat);
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value,
        categories: bins.len(),
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1.36) ~ 0.05, Q(1.63) ~ 0.01
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_detects_shift() {
        let mut r = RngHandle::new(1);
        let a: Vec<f64> = (0..2000).map(|_| r.uniform()).collect();
        let b: Vec<f64> = (0..2000).map(|_| r.uniform()).collect();
        let c: Vec<f64> = (0..2000).map(|_| r.uniform() + 0.1).collect();
        assert!(ks_two_sample(&a, &b) > 0.01);
        assert!(ks_two_sample(&a, &c) < 1e-6);
        assert!(ks_one_sample(&a, |x| x.clamp(0.0, 1.0)) > 0.01);
    }

    #[test]
    fn chi_square_identical_and_different() {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        a.insert("x".to_string(), 500);
        a.insert("y".to_string(), 500);
        b.insert("x".to_string(), 505);
        b.insert("y".to_string(), 495);
        assert!(chi_square_homogeneity(&a, &b).p_value > 0.5);
        b.insert("x".to_string(), 700);
        b.insert("y".to_string(), 300);
        assert!(chi_square_homogeneity(&a, &b).p_value < 1e-6);

        let mut single = BTreeMap::new();
        single.insert("only".to_string(), 10);
        assert_eq!(chi_square_homogeneity(&single, &single).p_value, 1.0);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
