//! Whitened test statistic, reference distributions, Q-Q summaries and
//! Kolmogorov-Smirnov distances.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::moments::{MomentSet, Psi2};

/// Default number of probability points on a Q-Q grid (steps of 0.005).
pub const DEFAULT_GRID: usize = 199;

/// Minimum sample size for [`marginal_normal_check`].
pub const MIN_NORMALITY_SAMPLES: usize = 100;

/// CDF of the chi-square law with two degrees of freedom.
pub fn chi2_df2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x / 2.0).exp_m1()
    }
}

/// Quantile of the chi-square law with two degrees of freedom,
/// `-2 ln(1 - q)`.
pub fn chi2_df2_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("quantile level {q} outside (0, 1)")));
    }
    Ok(-2.0 * (-q).ln_1p())
}

/// Reference law for Q-Q and KS comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Chi2Df2,
    StandardNormal,
}

impl Reference {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Reference::Chi2Df2 => chi2_df2_cdf(x),
            Reference::StandardNormal => standard_normal().cdf(x),
        }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        match self {
            Reference::Chi2Df2 => chi2_df2_quantile(q),
            Reference::StandardNormal => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(domain(format!("quantile level {q} outside (0, 1)")));
                }
                Ok(standard_normal().inverse_cdf(q))
            }
        }
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Value of the whitened statistic for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TSValue {
    pub ts: f64,
    pub t1_raw: f64,
    pub t2_raw: f64,
}

/// `d' Ψ2⁻¹ d` with `d = (t1 − m1, t2 − m2)`.
pub fn whiten_with(t1: f64, t2: f64, means: (f64, f64), psi: &Psi2) -> Result<TSValue> {
    let (a, b, c) = psi.inverse()?;
    let d1 = t1 - means.0;
    let d2 = t2 - means.1;
    let ts = a * d1 * d1 + 2.0 * b * d1 * d2 + c * d2 * d2;
    Ok(TSValue {
        // rounding can push a quadratic form of a PD matrix a hair below zero
        ts: ts.max(0.0),
        t1_raw: t1,
        t2_raw: t2,
    })
}

/// Whitens `(T1, T2)` against the uncentered means of `ms`.
pub fn whiten(t1: f64, t2: f64, ms: &MomentSet) -> Result<TSValue> {
    whiten_with(t1, t2, (ms.e_t1, ms.e_t2), &ms.psi())
}

/// Whitens the centered pair `(T1⁰, T2⁰)` against the centered means of `ms`.
pub fn whiten_centered(t1: f64, t2: f64, ms: &MomentSet) -> Result<TSValue> {
    match (ms.e_t1_centered, ms.e_t2_centered) {
        (Some(a), Some(b)) => whiten_with(t1, t2, (a, b), &ms.psi()),
        _ => Err(domain("moment set has no centered means")),
    }
}

/// Paired theoretical and empirical quantiles plus the KS distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQReport {
    pub probs: Vec<f64>,
    pub q_theoretical: Vec<f64>,
    pub q_empirical: Vec<f64>,
    pub ks: f64,
    pub reps: usize,
    pub config_digest: String,
}

impl QQReport {
    /// CSV with header `prob,q_theoretical,q_empirical`, 17 significant
    /// digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("prob,q_theoretical,q_empirical\n");
        for ((p, t), e) in self
            .probs
            .iter()
            .zip(&self.q_theoretical)
            .zip(&self.q_empirical)
        {
            out.push_str(&format!("{p:.16e},{t:.16e},{e:.16e}\n"));
        }
        out
    }
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(domain("sample is empty"));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(domain(format!("sample contains non-finite value {bad}")));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// `sup_x |F_n(x) − F(x)|` over a sorted sample, checking both one-sided
/// gaps at every order statistic.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .fold(0.0f64, |acc, (i, &x)| {
            let f = cdf(x);
            let upper = (i as f64 + 1.0) / n - f;
            let lower = f - i as f64 / n;
            acc.max(upper).max(lower)
        })
        .clamp(0.0, 1.0)
}

/// Empirical quantile of a sorted sample with the midpoint rule: order
/// statistic `k` (1-based) sits at probability `(k − 0.5)/N`, linear in
/// between, clamped at the ends.
pub fn empirical_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    let h = n as f64 * prob + 0.5;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor();
    let frac = h - lo;
    let i = lo as usize - 1;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Q-Q grid at `probs = (i − 0.5)/grid_size` and KS distance of the full
/// sample against `reference`.
pub fn qq_report(samples: &[f64], reference: Reference, grid_size: usize) -> Result<QQReport> {
    if grid_size < 2 {
        return Err(domain(format!("grid size {grid_size} must be at least 2")));
    }
    let sorted = sorted_finite(samples)?;
    let probs: Vec<f64> = (1..=grid_size)
        .map(|i| (i as f64 - 0.5) / grid_size as f64)
        .collect();
    let q_theoretical = probs
        .iter()
        .map(|&p| reference.quantile(p))
        .collect::<Result<Vec<_>>>()?;
    let q_empirical = probs
        .iter()
        .map(|&p| empirical_quantile(&sorted, p))
        .collect();
    Ok(QQReport {
        probs,
        q_theoretical,
        q_empirical,
        ks: ks_statistic(&sorted, |x| reference.cdf(x)),
        reps: samples.len(),
        config_digest: String::new(),
    })
}

/// Standardizes by the sample mean and standard deviation, then compares to
/// the standard normal. Probe for marginal normality of `T_k`.
pub fn marginal_normal_check(tk_samples: &[f64]) -> Result<QQReport> {
    if tk_samples.len() < MIN_NORMALITY_SAMPLES {
        return Err(domain(format!(
            "normality check needs at least {MIN_NORMALITY_SAMPLES} samples, got {}",
            tk_samples.len()
        )));
    }
    let n = tk_samples.len() as f64;
    let mean = tk_samples.iter().sum::<f64>() / n;
    let var = tk_samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if sd.is_nan() || sd <= 0.0 || sd <= 1e-12 * mean.abs() {
        return Err(Error::Domain("degenerate sample: zero variance".into()));
    }
    let z: Vec<f64> = tk_samples.iter().map(|x| (x - mean) / sd).collect();
    qq_report(&z, Reference::StandardNormal, DEFAULT_GRID)
}
