//! Data generation, sample covariance formation, and the linear spectral
//! statistics `T_k = tr(B_n^k)` with `B_n = n⁻¹ Σ^{1/2} X X' Σ^{1/2}`.
//!
//! Traces are computed from whichever Gram matrix is smaller: `Y'Y`
//! (`n x n`) or `YY'` (`p x p`), with `Y = Σ^{1/2} X`. Both share the nonzero
//! spectrum.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::innovations::{stream_rng, stream_seed, InnovationDist};
use crate::numeric::compensated_sum;
use crate::population::PopulationModel;
use crate::symmat::{trace_power, SymMatrix};

/// Largest power with a closed trace kernel.
pub const MAX_POWER: usize = 4;

/// Everything needed to draw one replication.
#[derive(Debug, Clone, Copy)]
pub struct SampleConfig<'a> {
    pub model: &'a PopulationModel,
    pub dist: &'a InnovationDist,
    pub n: usize,
    pub replication_index: u64,
    pub master_seed: u64,
    /// Highest power `m` of `T_1..T_m`.
    pub max_power: usize,
    pub centered: bool,
}

impl SampleConfig<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(domain("sample size n must be positive"));
        }
        if self.centered && self.n < 2 {
            return Err(domain("centered statistics need n >= 2"));
        }
        if self.max_power == 0 {
            return Err(domain("max_power must be at least 1"));
        }
        if self.max_power > MAX_POWER {
            return Err(Error::Unsupported(format!(
                "max_power {} exceeds {MAX_POWER}",
                self.max_power
            )));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.model.p()
    }
}

/// Statistics of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    /// `T_1..T_m`.
    pub t: Vec<f64>,
    /// `(T_1⁰, T_2⁰)` of the mean-centered matrix, when requested.
    pub t_centered: Option<(f64, f64)>,
    pub replication_index: u64,
}

/// The `p x n` innovation matrix of one replication. Column `j` is drawn
/// from its own stream keyed by `(master_seed, replication_index, j)`.
pub fn draw_data(cfg: &SampleConfig) -> DMatrix<f64> {
    let p = cfg.p();
    let mut x = DMatrix::<f64>::zeros(p, cfg.n);
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let seed = stream_seed(cfg.master_seed, &[cfg.replication_index, j as u64]);
        let mut rng = stream_rng(seed);
        cfg.dist.fill(&mut rng, col.as_mut_slice());
    }
    x
}

/// `Y = Σ^{1/2} X`.
pub fn scale_data(model: &PopulationModel, x: &DMatrix<f64>) -> DMatrix<f64> {
    if model.is_diagonal() {
        let mut y = x.clone();
        for (i, mut row) in y.row_iter_mut().enumerate() {
            row *= model.sigma_half.get(i, i);
        }
        y
    } else {
        model.sigma_half.as_matrix() * x
    }
}

/// `Y'Y` (`n x n`).
fn gram_columns(y: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_symmetric_product(y.transpose() * y)
}

/// `YY'` (`p x p`).
fn gram_rows(y: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_symmetric_product(y * y.transpose())
}

/// `A = X' Σ X` for a given data matrix.
pub fn gram_from_data(model: &PopulationModel, x: &DMatrix<f64>) -> SymMatrix {
    gram_columns(&scale_data(model, x))
}

/// Draws `X` for `cfg` and returns the `n x n` Gram matrix `X' Σ X`.
pub fn generate_gram(cfg: &SampleConfig) -> Result<SymMatrix> {
    cfg.validate()?;
    Ok(gram_from_data(cfg.model, &draw_data(cfg)))
}

/// `T_k = tr(A^k) / n^k` for `k = 1..=m`, where `A` is either Gram matrix of
/// `Y` and `n` the sample size.
pub fn lss_traces(gram: &SymMatrix, n: usize, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(domain("m must be at least 1"));
    }
    if m > MAX_POWER {
        return Err(Error::Unsupported(format!(
            "closed trace kernels cover powers up to {MAX_POWER}, requested {m}"
        )));
    }
    if n == 0 {
        return Err(domain("n must be positive"));
    }
    let nf = n as f64;
    (1..=m as u32)
        .map(|k| Ok(trace_power(gram, k)? / nf.powi(k as i32)))
        .collect()
}

/// `(tr B⁰, tr (B⁰)²)` with `B⁰ = B_n − ȳȳ'`, computed from the `n x n`
/// Gram matrix `A = X'ΣX`:
///
/// * `tr B⁰ = tr A / n − 1'A1 / n²`
/// * `tr (B⁰)² = ‖A‖²_F / n² − 2 ‖A1‖² / n³ + (1'A1)² / n⁴`
pub fn centered_lss(cfg: &SampleConfig, x: &DMatrix<f64>) -> Result<(f64, f64)> {
    if cfg.n < 2 {
        return Err(domain("centered statistics need n >= 2"));
    }
    if x.nrows() != cfg.p() || x.ncols() != cfg.n {
        return Err(domain(format!(
            "data matrix is {}x{}, expected {}x{}",
            x.nrows(),
            x.ncols(),
            cfg.p(),
            cfg.n
        )));
    }
    Ok(centered_from_column_gram(&gram_from_data(cfg.model, x)))
}

fn centered_from_column_gram(a: &SymMatrix) -> (f64, f64) {
    let n = a.dim() as f64;
    let row_sums: Vec<f64> = a
        .as_matrix()
        .column_iter()
        .map(|c| compensated_sum(c.iter().copied()))
        .collect();
    let total = compensated_sum(row_sums.iter().copied());
    let row_sums_sq = compensated_sum(row_sums.iter().map(|s| s * s));
    let t1 = a.trace() / n - total / (n * n);
    let t2 =
        a.frobenius_sq() / (n * n) - 2.0 * row_sums_sq / n.powi(3) + (total * total) / n.powi(4);
    (t1, t2)
}

/// Same quantities from the `p x p` side: `B = YY'/n`, `ȳ = Y1/n`.
fn centered_from_row_gram(y: &DMatrix<f64>, b: &SymMatrix) -> (f64, f64) {
    let n = y.ncols() as f64;
    let ybar = DVector::from_iterator(
        y.nrows(),
        y.row_iter().map(|r| compensated_sum(r.iter().copied()) / n),
    );
    let ybar_sq = compensated_sum(ybar.iter().map(|v| v * v));
    let by = b.as_matrix() * &ybar;
    let quad = compensated_sum(ybar.iter().zip(by.iter()).map(|(a, b)| a * b));
    let t1 = b.trace() - ybar_sq;
    let t2 = b.frobenius_sq() - 2.0 * quad + ybar_sq * ybar_sq;
    (t1, t2)
}

/// Draws one replication and computes `T_1..T_m` (and the centered pair when
/// requested).
pub fn replicate(cfg: &SampleConfig) -> Result<ReplicationResult> {
    cfg.validate()?;
    let x = draw_data(cfg);
    let y = scale_data(cfg.model, &x);
    let n = cfg.n;
    let (t, t_centered) = if cfg.p() < n {
        let g = gram_rows(&y);
        let b = g.scaled(1.0 / n as f64);
        let t = lss_traces(&b, 1, cfg.max_power)?;
        let c = cfg.centered.then(|| centered_from_row_gram(&y, &b));
        (t, c)
    } else {
        let a = gram_columns(&y);
        let t = lss_traces(&a, n, cfg.max_power)?;
        let c = cfg.centered.then(|| centered_from_column_gram(&a));
        (t, c)
    };
    Ok(ReplicationResult {
        t,
        t_centered,
        replication_index: cfg.replication_index,
    })
}
