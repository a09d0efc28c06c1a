//! Sample statistics for Monte-Carlo summaries.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample standard deviation; 0 for fewer than two samples.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// Half-width of the two-sided 95% confidence interval of the mean; 0 for
/// fewer than two samples.
pub fn ci95(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let n = x.len() as f64;
    t_quantile(0.975, n - 1.0) * std_dev(x) / n.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t: f64,
    /// p-value of `H1: mean(a − b) > 0`.
    pub p_greater: f64,
    /// p-value of `H1: mean(a − b) < 0`.
    pub p_less: f64,
}

/// One-sided paired t-tests on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    let s = std_dev(&d);
    let n = d.len() as f64;
    if d.len() < 2 || s == 0.0 {
        let (p_greater, p_less) = if m > 0.0 {
            (0.0, 1.0)
        } else if m < 0.0 {
            (1.0, 0.0)
        } else {
            (0.5, 0.5)
        };
        let t = if m == 0.0 { 0.0 } else { m.signum() * f64::INFINITY };
        return PairedTest { mean_diff: m, t, p_greater, p_less };
    }
    let t = m / (s / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("positive degrees of freedom");
    PairedTest {
        mean_diff: m,
        t,
        p_greater: 1.0 - dist.cdf(t),
        p_less: dist.cdf(t),
    }
}
