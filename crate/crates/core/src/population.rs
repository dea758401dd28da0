//! Population covariance models with a divergent spiked group.
//!
//! The spectrum splits into `k = floor(beta * p)` spikes `(2 + r_i) n^alpha`
//! and a bulk `2 r_i` bounded in `(0, 2)`. `Σ = U Λ U'` with `U` Haar
//! distributed, or `Σ = Λ` when `diagonal_only` is set.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::innovations::stream_rng;
use crate::numeric::{compensated_sum, rel_err};
use crate::symmat::{trace_set, SymMatrix, TraceSet};

/// Declarative description of a spiked population spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub p: usize,
    /// Sample size, used only for the `n^alpha` spike scale.
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub r_values: Vec<f64>,
    pub diagonal_only: bool,
}

impl SpectrumSpec {
    pub fn new(
        p: usize,
        n: usize,
        alpha: f64,
        beta: f64,
        r_values: Vec<f64>,
        diagonal_only: bool,
    ) -> Result<Self> {
        let spec = Self {
            p,
            n,
            alpha,
            beta,
            r_values,
            diagonal_only,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Draws `r_1..r_p` i.i.d. uniform on `(0, 1)` from `seed`.
    pub fn with_uniform_r(
        p: usize,
        n: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
        diagonal_only: bool,
    ) -> Result<Self> {
        let mut rng = stream_rng(seed);
        let r_values = (0..p).map(|_| rng.sample(Open01)).collect();
        Self::new(p, n, alpha, beta, r_values, diagonal_only)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(domain("p and n must be positive"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(domain(format!(
                "alpha = {} must be finite and >= 0",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(domain(format!("beta = {} outside [0, 1]", self.beta)));
        }
        if self.r_values.len() != self.p {
            return Err(domain(format!(
                "expected {} r values, got {}",
                self.p,
                self.r_values.len()
            )));
        }
        if let Some((i, r)) = self
            .r_values
            .iter()
            .enumerate()
            .find(|(_, r)| !(**r > 0.0 && **r < 1.0))
        {
            return Err(domain(format!("r[{i}] = {r} outside (0, 1)")));
        }
        Ok(())
    }

    /// Number of spiked eigenvalues, `floor(beta * p)`.
    pub fn spike_count(&self) -> usize {
        // tolerate representation error in products like 0.29 * 100
        ((self.beta * self.p as f64) + 1e-9).floor() as usize
    }
}

/// Descending eigenvalue list for `spec`.
pub fn build_spectrum(spec: &SpectrumSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let k = spec.spike_count().min(spec.p);
    let scale = (spec.n as f64).powf(spec.alpha);
    let mut eigs: Vec<f64> = spec
        .r_values
        .iter()
        .enumerate()
        .map(|(i, r)| if i < k { (2.0 + r) * scale } else { 2.0 * r })
        .collect();
    eigs.sort_by(|a, b| b.total_cmp(a));
    Ok(eigs)
}

/// A `p x p` orthogonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Orthogonal(DMatrix<f64>);

impl Orthogonal {
    /// Wraps `m` after checking `m m' = I` to `1e-8` relative Frobenius error.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let p = m.nrows();
        if p == 0 || m.ncols() != p {
            return Err(domain("orthogonal matrix must be square and non-empty"));
        }
        let err = orthogonality_error(&m);
        if err > 1e-8 {
            return Err(domain(format!(
                "matrix is not orthogonal: |UU' - I|_F / sqrt(p) = {err:e}"
            )));
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `‖UU' − I‖_F / ‖I‖_F`.
pub fn orthogonality_error(u: &DMatrix<f64>) -> f64 {
    let p = u.nrows();
    let gram = u * u.transpose();
    (gram - DMatrix::<f64>::identity(p, p)).norm() / (p as f64).sqrt()
}

/// Haar-distributed orthogonal matrix: QR of an i.i.d. standard normal
/// matrix, columns flipped so that `diag(R) > 0`.
pub fn haar_orthogonal(p: usize, seed: u64) -> Orthogonal {
    assert!(p >= 1, "dimension must be at least 1");
    let mut rng = stream_rng(seed);
    let z = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let qr = z.qr();
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, r) in r_diag.iter().enumerate() {
        if *r < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Orthogonal(q)
}

/// Assembled population covariance with its square root and traces.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    pub sigma: SymMatrix,
    pub sigma_half: SymMatrix,
    pub eigenvalues: Vec<f64>,
    pub traces: TraceSet,
}

/// Relative tolerance for the trace / eigenvalue cross-check.
const TRACE_CHECK_TOL: f64 = 1e-8;

/// `Σ = U Λ U'` and `Σ^{1/2} = U Λ^{1/2} U'` (or the diagonal forms when `u`
/// is `None`).
pub fn assemble_model(eigs: &[f64], u: Option<&Orthogonal>) -> Result<PopulationModel> {
    if eigs.is_empty() {
        return Err(domain("eigenvalue list is empty"));
    }
    if let Some((i, l)) = eigs
        .iter()
        .enumerate()
        .find(|(_, l)| !(**l > 0.0 && l.is_finite()))
    {
        return Err(domain(format!("eigenvalue {i} = {l} is not positive")));
    }
    let roots: Vec<f64> = eigs.iter().map(|l| l.sqrt()).collect();
    let (sigma, sigma_half) = match u {
        None => (
            SymMatrix::from_diagonal(eigs)?,
            SymMatrix::from_diagonal(&roots)?,
        ),
        Some(u) => {
            if u.dim() != eigs.len() {
                return Err(domain(format!(
                    "rotation dimension {} does not match {} eigenvalues",
                    u.dim(),
                    eigs.len()
                )));
            }
            (conjugate(u, eigs), conjugate(u, &roots))
        }
    };
    let traces = trace_set(&sigma);
    let from_eigs = TraceSet::of_diagonal(eigs);
    for (name, got, want) in [
        ("tr1", traces.tr1, from_eigs.tr1),
        ("tr2", traces.tr2, from_eigs.tr2),
        ("tr3", traces.tr3, from_eigs.tr3),
        ("tr4", traces.tr4, from_eigs.tr4),
    ] {
        if rel_err(got, want) > TRACE_CHECK_TOL {
            return Err(Error::Numerical(format!(
                "{name} of Σ = {got} but eigenvalue sum = {want}"
            )));
        }
    }
    Ok(PopulationModel {
        sigma,
        sigma_half,
        eigenvalues: eigs.to_vec(),
        traces,
    })
}

fn conjugate(u: &Orthogonal, diag: &[f64]) -> SymMatrix {
    let u = u.as_matrix();
    let scaled = u * DMatrix::from_diagonal(&DVector::from_column_slice(diag));
    SymMatrix::from_symmetric_product(scaled * u.transpose())
}

impl PopulationModel {
    /// Builds the spectrum from `spec` and, unless `spec.diagonal_only`,
    /// conjugates it by a Haar rotation drawn from `rotation_seed`.
    pub fn from_spec(spec: &SpectrumSpec, rotation_seed: u64) -> Result<Self> {
        let eigs = build_spectrum(spec)?;
        if spec.diagonal_only {
            assemble_model(&eigs, None)
        } else {
            let u = haar_orthogonal(spec.p, rotation_seed);
            assemble_model(&eigs, Some(&u))
        }
    }

    /// `Σ = diag(values)`.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        assemble_model(values, None)
    }

    pub fn p(&self) -> usize {
        self.sigma.dim()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.sigma.is_diagonal()
    }

    /// `Σ_i λ_i`, recomputed from the stored eigenvalues.
    pub fn eigenvalue_sum(&self) -> f64 {
        compensated_sum(self.eigenvalues.iter().copied())
    }
}
