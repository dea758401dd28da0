//! Closed-form means and covariance of `(T_1, T_2)`.
//!
//! `E T_1`, `E T_2` and `Var T_1 = ψ11` are exact at finite `n`. `ψ12` and
//! `ψ22` are leading-order expressions. All formulas take the population
//! only through its [`TraceSet`] and the innovation fourth cumulant `ν4`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::symmat::TraceSet;

/// Means and the 2x2 covariance `Ψ2` of `(T_1, T_2)` for one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub e_t1: f64,
    pub e_t2: f64,
    pub psi11: f64,
    pub psi12: f64,
    pub psi22: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e_t1_centered: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e_t2_centered: Option<f64>,
    pub n: usize,
    pub nu4: f64,
}

/// The three distinct entries of `Ψ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psi2 {
    pub psi11: f64,
    pub psi12: f64,
    pub psi22: f64,
}

impl Psi2 {
    pub fn det(&self) -> f64 {
        self.psi11 * self.psi22 - self.psi12 * self.psi12
    }

    /// Closed-form inverse `(a, b, c)` of `[[psi11, psi12], [psi12, psi22]]`,
    /// returned as `[[a, b], [b, c]]`. Fails unless `Ψ2` is positive definite.
    pub fn inverse(&self) -> Result<(f64, f64, f64)> {
        let det = self.det();
        if !(det > 0.0 && self.psi11 > 0.0) || !det.is_finite() {
            return Err(Error::DegenerateCovariance {
                psi11: self.psi11,
                psi12: self.psi12,
                psi22: self.psi22,
                det,
                context: None,
            });
        }
        Ok((self.psi22 / det, -self.psi12 / det, self.psi11 / det))
    }
}

impl MomentSet {
    pub fn psi(&self) -> Psi2 {
        Psi2 {
            psi11: self.psi11,
            psi12: self.psi12,
            psi22: self.psi22,
        }
    }
}

/// `(E T_1, E T_2)`:
///
/// * `E T_1 = tr Σ`
/// * `E T_2 = n⁻¹ [ν4 tr(Σ∘Σ) + tr²Σ + (n+1) tr Σ²]`
pub fn expected_values(traces: &TraceSet, n: usize, nu4: f64) -> (f64, f64) {
    let nf = n as f64;
    let e_t1 = traces.tr1;
    let e_t2 = (nu4 * traces.tr_h11 + traces.tr1 * traces.tr1 + (nf + 1.0) * traces.tr2) / nf;
    (e_t1, e_t2)
}

/// Entries of `Ψ2`. `ψ11` is exact; `ψ12`, `ψ22` are leading order.
pub fn psi_matrix(traces: &TraceSet, n: usize, nu4: f64) -> Psi2 {
    let nf = n as f64;
    let TraceSet {
        tr1,
        tr2,
        tr3,
        tr4,
        tr_h11,
        tr_h12,
        tr_h22,
    } = *traces;

    let psi11 = (nu4 * tr_h11 + 2.0 * tr2) / nf;
    let psi12 =
        (4.0 * tr2 * tr1 + 2.0 * nu4 * tr_h11 * tr1 + 2.0 * nu4 * nf * tr_h12 + 4.0 * nf * tr3)
            / (nf * nf);
    let psi22 = (8.0 * tr2 * tr1 * tr1
        + 4.0 * nu4 * tr1 * tr1 * tr_h11
        + 16.0 * nf * tr1 * tr3
        + 4.0 * nf * tr2 * tr2
        + 8.0 * nu4 * nf * tr_h12 * tr1
        + 4.0 * nu4 * nf * nf * tr_h22
        + 8.0 * nf * nf * tr4)
        / (nf * nf * nf);
    Psi2 {
        psi11,
        psi12,
        psi22,
    }
}

/// `(E T_1⁰, E T_2⁰)` for `B⁰ = B_n − ȳȳ'` (divisor `n`):
///
/// * `E T_1⁰ = (1 − 1/n) tr Σ` (exact)
/// * `E T_2⁰ = E T_2 − n⁻² (tr²Σ + 2n tr Σ²)` (leading order)
pub fn centered_expected_values(traces: &TraceSet, n: usize, nu4: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(domain("centered moments need n >= 2"));
    }
    let nf = n as f64;
    let (_, e_t2) = expected_values(traces, n, nu4);
    let e_t1c = traces.tr1 * (1.0 - 1.0 / nf);
    let e_t2c = e_t2 - (traces.tr1 * traces.tr1 + 2.0 * nf * traces.tr2) / (nf * nf);
    Ok((e_t1c, e_t2c))
}

/// Assembles the full [`MomentSet`]; centered means are filled in when
/// `centered` is set.
pub fn moment_set(traces: &TraceSet, n: usize, nu4: f64, centered: bool) -> Result<MomentSet> {
    if n == 0 {
        return Err(domain("n must be positive"));
    }
    let (e_t1, e_t2) = expected_values(traces, n, nu4);
    let psi = psi_matrix(traces, n, nu4);
    let (e_t1_centered, e_t2_centered) = if centered {
        let (a, b) = centered_expected_values(traces, n, nu4)?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(MomentSet {
        e_t1,
        e_t2,
        psi11: psi.psi11,
        psi12: psi.psi12,
        psi22: psi.psi22,
        e_t1_centered,
        e_t2_centered,
        n,
        nu4,
    })
}

/// Normalization applied to `T_2 − E T_2` before comparing to the limiting
/// variance of a single-spike case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeScaling {
    /// No rescaling.
    Identity,
    /// Multiply by `√n / τ1²`.
    SqrtNOverTauSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeCaseResult {
    pub case_id: u8,
    pub variance: f64,
    pub scaling: SpikeScaling,
}

/// Limiting variance of `T_2` for `Σ = diag(τ1, 1, ..., 1)` with `p/n → c`.
///
/// * case 1 (`τ1 = O(1)`): `4c(2+5c+2c²) + 4c(1+2c+c²)ν4`
/// * case 2 (`τ1 ~ δ p^{1/4}`): case 1 plus `δ⁴c(8+4ν4)`
/// * case 3 (`τ1⁴/p → ∞`): `8 + 4ν4` after scaling by `√n/τ1²`
pub fn single_spike_variance(case_id: u8, c: f64, nu4: f64, delta: f64) -> Result<SpikeCaseResult> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(domain(format!("dimension ratio c = {c} must be positive")));
    }
    let weak = 4.0 * c * (2.0 + 5.0 * c + 2.0 * c * c) + 4.0 * c * (1.0 + 2.0 * c + c * c) * nu4;
    let (variance, scaling) = match case_id {
        1 => (weak, SpikeScaling::Identity),
        2 => (
            weak + delta.powi(4) * c * (8.0 + 4.0 * nu4),
            SpikeScaling::Identity,
        ),
        3 => (8.0 + 4.0 * nu4, SpikeScaling::SqrtNOverTauSquared),
        other => return Err(domain(format!("spike case {other} is not one of 1, 2, 3"))),
    };
    Ok(SpikeCaseResult {
        case_id,
        variance,
        scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rel_err;
    use crate::symmat::{trace_set, SymMatrix};

    fn identity_traces(p: usize) -> TraceSet {
        trace_set(&SymMatrix::identity(p))
    }

    #[test]
    fn expected_values_identity() {
        let (p, n) = (7usize, 11usize);
        let (e1, e2) = expected_values(&identity_traces(p), n, 0.0);
        let (pf, nf) = (p as f64, n as f64);
        assert_eq!(e1, pf);
        assert!(rel_err(e2, (pf * pf + (nf + 1.0) * pf) / nf) <= 1e-15);
    }

    #[test]
    fn expected_values_single_spike_substitution() {
        let ts = TraceSet::of_diagonal(&[4.0, 1.0]);
        let (e1, e2) = expected_values(&ts, 2, 0.0);
        assert_eq!(e1, 5.0);
        assert_eq!(e2, 38.0);
    }

    #[test]
    fn single_spike_mean_uses_squared_spike() {
        // E T2 for diag(τ, 1, ..., 1): (n+1+ν4)(τ²+p−1) + (τ+p−1)², all over n.
        let (tau, p, n, nu4) = (7.0, 5usize, 9usize, 0.4);
        let mut d = vec![1.0; p];
        d[0] = tau;
        let (_, e2) = expected_values(&TraceSet::of_diagonal(&d), n, nu4);
        let pm1 = p as f64 - 1.0;
        let nf = n as f64;
        let want = ((nf + 1.0 + nu4) * (tau * tau + pm1) + (tau + pm1).powi(2)) / nf;
        assert!(rel_err(e2, want) <= 1e-14);
    }

    #[test]
    fn psi_identity_population() {
        let (p, n) = (6usize, 10usize);
        let (pf, nf) = (p as f64, n as f64);
        let psi = psi_matrix(&identity_traces(p), n, 0.0);
        assert!(rel_err(psi.psi11, 2.0 * pf / nf) <= 1e-15);
        assert!(rel_err(psi.psi12, (4.0 * pf * pf + 4.0 * nf * pf) / (nf * nf)) <= 1e-15);
        let want22 =
            (8.0 * pf.powi(3) + 4.0 * nf * pf * pf + 16.0 * nf * pf * pf + 8.0 * nf * nf * pf)
                / nf.powi(3);
        assert!(rel_err(psi.psi22, want22) <= 1e-15);

        let rad = psi_matrix(&identity_traces(p), n, -2.0);
        assert_eq!(rad.psi11, 0.0);
        assert!(rad.inverse().is_err());
    }

    #[test]
    fn centered_identity_and_scalar() {
        let (p, n) = (4usize, 5usize);
        let ts = identity_traces(p);
        let (c1, c2) = centered_expected_values(&ts, n, 0.0).unwrap();
        let (_, e2) = expected_values(&ts, n, 0.0);
        let (pf, nf) = (p as f64, n as f64);
        assert!(rel_err(c1, pf * (1.0 - 1.0 / nf)) <= 1e-15);
        assert!(rel_err(c2, e2 - (pf * pf + 2.0 * nf * pf) / (nf * nf)) <= 1e-15);

        let (c1, _) = centered_expected_values(&TraceSet::of_diagonal(&[1.0]), 2, 0.0).unwrap();
        assert_eq!(c1, 0.5);
        assert!(centered_expected_values(&ts, 1, 0.0).is_err());
    }

    #[test]
    fn spike_cases() {
        assert_eq!(
            single_spike_variance(1, 1.0, 0.0, 0.0).unwrap().variance,
            36.0
        );
        let c3 = single_spike_variance(3, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(c3.variance, 8.0);
        assert_eq!(c3.scaling, SpikeScaling::SqrtNOverTauSquared);
        for (c, nu4) in [(0.3, 0.0), (1.0, 1.5), (2.0, -1.0)] {
            assert_eq!(
                single_spike_variance(2, c, nu4, 0.0).unwrap().variance,
                single_spike_variance(1, c, nu4, 0.0).unwrap().variance
            );
        }
        assert!(single_spike_variance(4, 1.0, 0.0, 0.0).is_err());
        assert!(single_spike_variance(1, 0.0, 0.0, 0.0).is_err());
        for nu4 in [-1.9, 0.0, 3.0] {
            for id in 1..=3 {
                assert!(single_spike_variance(id, 0.7, nu4, 1.2).unwrap().variance > 0.0);
            }
        }
    }

    #[test]
    fn identity_psi22_matches_case1_at_c() {
        // Σ = I with p = c n: ψ22 → 4c(2 + 5c + 2c²) exactly for ν4 = 0.
        for (p, n) in [(100usize, 100usize), (50, 200), (300, 100)] {
            let c = p as f64 / n as f64;
            let psi = psi_matrix(&identity_traces(p), n, 0.0);
            let case1 = single_spike_variance(1, c, 0.0, 0.0).unwrap().variance;
            assert!(rel_err(psi.psi22, case1) <= 1e-12);
        }
    }

    #[test]
    fn psi22_approaches_case3_for_large_spike() {
        // n ψ22 / τ⁴ → 8 + 4ν4 + (20 + 8ν4)/n + (8 + 4ν4)/n² as τ → ∞, so the
        // case-3 constant needs n → ∞ alongside τ.
        let p = 20usize;
        for (tau, n, tol) in [(1e3, 100_000usize, 1e-2), (1e4, 1_000_000, 1e-4)] {
            for nu4 in [0.0, 1.5] {
                let mut d = vec![1.0; p];
                d[0] = tau;
                let psi = psi_matrix(&TraceSet::of_diagonal(&d), n, nu4);
                let ratio = n as f64 * psi.psi22 / f64::powi(tau, 4);
                assert!(
                    rel_err(ratio, 8.0 + 4.0 * nu4) <= tol,
                    "tau={tau} ratio={ratio}"
                );
            }
        }
        let (n, nu4) = (30usize, 1.5);
        let nf = n as f64;
        let mut d = vec![1.0; p];
        d[0] = 1e7;
        let psi = psi_matrix(&TraceSet::of_diagonal(&d), n, nu4);
        let ratio = nf * psi.psi22 / 1e28;
        let limit = 8.0 + 4.0 * nu4 + (20.0 + 8.0 * nu4) / nf + (8.0 + 4.0 * nu4) / (nf * nf);
        assert!(rel_err(ratio, limit) <= 1e-5);
    }

    #[test]
    fn moments_scale_homogeneously() {
        let base_d = [5.0, 2.0, 1.0, 0.3];
        let base = moment_set(&TraceSet::of_diagonal(&base_d), 8, 0.7, false).unwrap();
        for c in [0.5, 3.0] {
            let d: Vec<f64> = base_d.iter().map(|v| c * v).collect();
            let s = moment_set(&TraceSet::of_diagonal(&d), 8, 0.7, false).unwrap();
            for (got, want) in [
                (s.e_t1, c * base.e_t1),
                (s.e_t2, c * c * base.e_t2),
                (s.psi11, c * c * base.psi11),
                (s.psi12, c.powi(3) * base.psi12),
                (s.psi22, c.powi(4) * base.psi22),
            ] {
                assert!(rel_err(got, want) <= 1e-10);
            }
        }
    }

    #[test]
    fn psi11_is_linear_in_nu4() {
        let ts = TraceSet::of_diagonal(&[3.0, 1.0, 0.5]);
        let n = 4;
        let slope = (psi_matrix(&ts, n, 1.0).psi11 - psi_matrix(&ts, n, 0.0).psi11) / 1.0;
        assert!(rel_err(slope, ts.tr_h11 / n as f64) <= 1e-14);
        let d2 = psi_matrix(&ts, n, 2.0).psi11 - 2.0 * psi_matrix(&ts, n, 1.0).psi11
            + psi_matrix(&ts, n, 0.0).psi11;
        assert!(d2.abs() <= 1e-14);
    }

    #[test]
    fn psi11_positive_when_nu4_above_minus_two() {
        let ts = TraceSet::of_diagonal(&[2.0, 1.0]);
        assert!(psi_matrix(&ts, 3, -1.99).psi11 > 0.0);
    }

    #[test]
    fn inverse_closed_form() {
        let psi = Psi2 {
            psi11: 2.0,
            psi12: 1.0,
            psi22: 2.0,
        };
        let (a, b, c) = psi.inverse().unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert!((b + 1.0 / 3.0).abs() < 1e-15);
        assert!((c - 2.0 / 3.0).abs() < 1e-15);
    }
}
