//! Sample statistics and goodness-of-fit tests used by the experiments.

use rand::Rng;
use rand_distr::Exp1;

use crate::numeric::NeumaierSum;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().copied().collect::<NeumaierSum>().value() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).collect::<NeumaierSum>().value() / (xs.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn std_err(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the sample variance, assuming finite fourth moments.
pub fn variance_std_err(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let s2 = variance(xs);
    ((m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).sqrt()
}

/// Jackknife estimate and standard error of `g(mean(xs))`.
pub fn jackknife_mean<G: Fn(f64) -> f64>(xs: &[f64], g: G) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (xs.first().map_or(f64::NAN, |&x| g(x)), f64::NAN);
    }
    let total = xs.iter().copied().collect::<NeumaierSum>().value();
    let loo: Vec<f64> = xs.iter().map(|x| g((total - x) / (n - 1) as f64)).collect();
    let loo_mean = mean(&loo);
    let full = g(total / n as f64);
    let nf = n as f64;
    let estimate = nf * full - (nf - 1.0) * loo_mean;
    let var = (nf - 1.0) / nf * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>();
    (estimate, var.sqrt())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let statistic = ks_statistic(a, b);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let root = ne.sqrt();
    let p_value = kolmogorov_tail((root + 0.12 + 0.11 / root) * statistic);
    KsResult { statistic, p_value }
}

/// KS distance between the sample and the exponential law with its own
/// fitted mean.
pub fn exponential_ks_distance(xs: &[f64]) -> f64 {
    let v = sorted(xs);
    let n = v.len() as f64;
    let rate = 1.0 / mean(&v);
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = -(-rate * x).exp_m1();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Lilliefors test of exponentiality: the null distribution of the fitted
/// KS distance is obtained from `sims` simulated exponential samples of the
/// same size.
pub fn lilliefors_exponential<R: Rng>(xs: &[f64], sims: usize, rng: &mut R) -> KsResult {
    let statistic = exponential_ks_distance(xs);
    let mut buf = vec![0.0; xs.len()];
    let mut exceed = 0usize;
    for _ in 0..sims {
        for b in buf.iter_mut() {
            *b = rng.sample(Exp1);
        }
        if exponential_ks_distance(&buf) >= statistic {
            exceed += 1;
        }
    }
    KsResult { statistic, p_value: (exceed + 1) as f64 / (sims + 1) as f64 }
}

/// Empirical survival function `P(X > s)` and its binomial standard error.
pub fn survival(xs: &[f64], s: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let p = xs.iter().filter(|&&x| x > s).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}
