//! Dense symmetric matrices and the trace / Hadamard functionals used by the
//! moment formulas.
//!
//! Every reduction over matrix entries goes through [`CompensatedSum`]: the
//! spiked populations mix eigenvalues of order `n^alpha` with O(1) bulk
//! values, and naive summation of their powers loses the small end.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numeric::{compensated_sum, CompensatedSum};

/// Relative tolerance for the symmetry check at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense real symmetric matrix.
///
/// Symmetry is validated once on construction and the stored entries are
/// exactly symmetric afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds a matrix from `dim * dim` row-major entries.
    pub fn new(dim: usize, row_major: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(domain("symmetric matrix dimension must be at least 1"));
        }
        if row_major.len() != dim * dim {
            return Err(domain(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                row_major.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, &row_major))
    }

    /// Wraps a square matrix after checking symmetry.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        if dim == 0 || m.ncols() != dim {
            return Err(domain(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !scale.is_finite() {
            return Err(domain("matrix has non-finite entries"));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(domain(format!(
                        "matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {gap:e}"
                    )));
                }
            }
        }
        Ok(Self {
            inner: symmetrize(m),
        })
    }

    /// Symmetrizes `m` as `(m + m') / 2` without a tolerance check. Used for
    /// products that are symmetric in exact arithmetic.
    pub(crate) fn from_symmetric_product(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self {
            inner: symmetrize(m),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(domain("diagonal must be non-empty"));
        }
        Ok(Self {
            inner: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.inner.diagonal().iter().copied().collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let p = self.dim();
        (0..p).all(|j| (0..p).all(|i| i == j || self.inner[(i, j)] == 0.0))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            inner: &self.inner * c,
        }
    }

    /// `m * m`.
    pub fn square(&self) -> Self {
        Self::from_symmetric_product(&self.inner * &self.inner)
    }

    /// Entrywise product `a ∘ b`.
    pub fn hadamard(&self, other: &SymMatrix) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            inner: self.inner.component_mul(&other.inner),
        })
    }

    /// Squared Frobenius norm, `Σ_ij m_ij²`.
    pub fn frobenius_sq(&self) -> f64 {
        compensated_sum(self.inner.iter().map(|v| v * v))
    }

    pub fn trace(&self) -> f64 {
        compensated_sum(self.inner.diagonal().iter().copied())
    }

    /// `1' m 1`, the sum of all entries.
    pub fn total_sum(&self) -> f64 {
        compensated_sum(self.inner.iter().copied())
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let mut m = m;
    let dim = m.nrows();
    for j in 0..dim {
        for i in (j + 1)..dim {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `Σ_ij a_ij b_ij`, which is `tr(a b)` for symmetric operands.
fn entrywise_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    compensated_sum(a.iter().zip(b.iter()).map(|(x, y)| x * y))
}

/// `tr(m^k)` for `k` in `1..=4`.
///
/// Powers above two are never formed: `tr m³ = Σ_ij (m²)_ij m_ij` and
/// `tr m⁴ = ‖m²‖²_F`.
pub fn trace_power(m: &SymMatrix, k: u32) -> Result<f64> {
    match k {
        1 => Ok(m.trace()),
        2 => Ok(m.frobenius_sq()),
        3 => Ok(entrywise_dot(m.square().as_matrix(), m.as_matrix())),
        4 => Ok(m.square().frobenius_sq()),
        _ => Err(domain(format!("trace power k={k} outside 1..=4"))),
    }
}

/// `tr(a ∘ b) = Σ_i a_ii b_ii`.
pub fn trace_hadamard(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok(compensated_sum(
        (0..a.dim()).map(|i| a.get(i, i) * b.get(i, i)),
    ))
}

/// `tr(a b)` for symmetric `a`, `b`.
pub fn trace_product(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok(entrywise_dot(a.as_matrix(), b.as_matrix()))
}

/// The six auxiliary scalars of the third-order quadratic-form moment
/// `E[(x'Tx)² x'Wx]`. `d_M` is the diagonal of `M` as a vector and `D_M` the
/// diagonal matrix built from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Auxiliaries {
    /// `d_T' T d_W`
    pub d_t_t_d_w: f64,
    /// `d_T' W d_T`
    pub d_t_w_d_t: f64,
    /// `1' (T ∘ T ∘ W) 1`
    pub ones_ttw_ones: f64,
    /// `tr(T D_W T)`
    pub tr_t_dw_t: f64,
    /// `tr(W D_T T)`
    pub tr_w_dt_t: f64,
    /// `tr(T ∘ T ∘ W)`
    pub tr_ttw_hadamard: f64,
}

pub fn lemma3_auxiliaries(t: &SymMatrix, w: &SymMatrix) -> Result<Lemma3Auxiliaries> {
    check_dims(t, w)?;
    let p = t.dim();
    let dt = t.diagonal();
    let dw = w.diagonal();

    let mut d_t_t_d_w = CompensatedSum::new();
    let mut d_t_w_d_t = CompensatedSum::new();
    let mut ones_ttw = CompensatedSum::new();
    let mut tr_t_dw_t = CompensatedSum::new();
    let mut tr_w_dt_t = CompensatedSum::new();
    for i in 0..p {
        for j in 0..p {
            let tij = t.get(i, j);
            let wij = w.get(i, j);
            d_t_t_d_w.add(dt[i] * tij * dw[j]);
            d_t_w_d_t.add(dt[i] * wij * dt[j]);
            ones_ttw.add(tij * tij * wij);
            // tr(T D_W T) = Σ_ij t_ij w_jj t_ji
            tr_t_dw_t.add(tij * tij * dw[j]);
            // tr(W D_T T) = Σ_ij w_ij t_jj t_ji
            tr_w_dt_t.add(wij * dt[j] * tij);
        }
    }
    let tr_ttw_hadamard = compensated_sum((0..p).map(|i| dt[i] * dt[i] * dw[i]));

    Ok(Lemma3Auxiliaries {
        d_t_t_d_w: d_t_t_d_w.value(),
        d_t_w_d_t: d_t_w_d_t.value(),
        ones_ttw_ones: ones_ttw.value(),
        tr_t_dw_t: tr_t_dw_t.value(),
        tr_w_dt_t: tr_w_dt_t.value(),
        tr_ttw_hadamard,
    })
}

/// Trace functionals of a symmetric matrix consumed by the moment formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub tr1: f64,
    pub tr2: f64,
    pub tr3: f64,
    pub tr4: f64,
    /// `tr(Σ∘Σ)`
    pub tr_h11: f64,
    /// `tr(Σ∘Σ²)`
    pub tr_h12: f64,
    /// `tr(Σ²∘Σ²)`
    pub tr_h22: f64,
}

/// All seven functionals from one matrix square.
pub fn trace_set(m: &SymMatrix) -> TraceSet {
    let m2 = m.square();
    let p = m.dim();
    TraceSet {
        tr1: m.trace(),
        tr2: m.frobenius_sq(),
        tr3: entrywise_dot(m2.as_matrix(), m.as_matrix()),
        tr4: m2.frobenius_sq(),
        tr_h11: compensated_sum((0..p).map(|i| m.get(i, i) * m.get(i, i))),
        tr_h12: compensated_sum((0..p).map(|i| m.get(i, i) * m2.get(i, i))),
        tr_h22: compensated_sum((0..p).map(|i| m2.get(i, i) * m2.get(i, i))),
    }
}

impl TraceSet {
    /// Trace set of a diagonal matrix with the given entries, computed
    /// directly from the entries.
    pub fn of_diagonal(values: &[f64]) -> TraceSet {
        let pow = |k: i32| compensated_sum(values.iter().map(|v| v.powi(k)));
        TraceSet {
            tr1: pow(1),
            tr2: pow(2),
            tr3: pow(3),
            tr4: pow(4),
            tr_h11: pow(2),
            tr_h12: pow(3),
            tr_h22: pow(4),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rel_err;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(p: usize, rng: &mut impl Rng) -> SymMatrix {
        let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::from_matrix(&a + a.transpose()).unwrap()
    }

    #[test]
    fn trace_power_small_cases() {
        assert_eq!(trace_power(&SymMatrix::identity(3), 2).unwrap(), 3.0);
        let d = SymMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        assert_eq!(trace_power(&d, 3).unwrap(), 9.0);
        assert!(trace_power(&d, 0).is_err());
        assert!(trace_power(&d, 5).is_err());
    }

    #[test]
    fn trace_power_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_sym(4, &mut rng);
        let eig = m.as_matrix().clone().symmetric_eigen().eigenvalues;
        for k in 1..=4 {
            let expected: f64 = eig.iter().map(|l| l.powi(k as i32)).sum();
            assert!(
                rel_err(trace_power(&m, k).unwrap(), expected) <= 1e-10,
                "k={k}"
            );
        }
    }

    #[test]
    fn trace_hadamard_cases() {
        let i5 = SymMatrix::identity(5);
        assert_eq!(trace_hadamard(&i5, &i5).unwrap(), 5.0);
        let a = SymMatrix::from_diagonal(&[2.0, 3.0]).unwrap();
        let b = SymMatrix::from_diagonal(&[4.0, 5.0]).unwrap();
        assert_eq!(trace_hadamard(&a, &b).unwrap(), 23.0);
        assert!(trace_hadamard(&a, &i5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sym(6, &mut rng);
        let b = random_sym(6, &mut rng);
        let h = a.hadamard(&b).unwrap();
        assert!(rel_err(trace_hadamard(&a, &b).unwrap(), h.trace()) <= 1e-12);
        assert_eq!(
            trace_hadamard(&a, &b).unwrap(),
            trace_hadamard(&b, &a).unwrap()
        );
    }

    #[test]
    fn lemma3_auxiliaries_identity_and_diagonal() {
        let i2 = SymMatrix::identity(2);
        let aux = lemma3_auxiliaries(&i2, &i2).unwrap();
        for v in [
            aux.d_t_t_d_w,
            aux.d_t_w_d_t,
            aux.ones_ttw_ones,
            aux.tr_t_dw_t,
            aux.tr_w_dt_t,
            aux.tr_ttw_hadamard,
        ] {
            assert_eq!(v, 2.0);
        }

        let t = SymMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let w = SymMatrix::from_diagonal(&[3.0, 4.0]).unwrap();
        let aux = lemma3_auxiliaries(&t, &w).unwrap();
        for v in [
            aux.d_t_t_d_w,
            aux.d_t_w_d_t,
            aux.ones_ttw_ones,
            aux.tr_t_dw_t,
            aux.tr_w_dt_t,
            aux.tr_ttw_hadamard,
        ] {
            assert_eq!(v, 19.0);
        }
        assert!(lemma3_auxiliaries(&t, &SymMatrix::identity(3)).is_err());
    }

    #[test]
    fn lemma3_auxiliaries_match_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_sym(3, &mut rng);
        let w = random_sym(3, &mut rng);
        let aux = lemma3_auxiliaries(&t, &w).unwrap();
        let tm = t.as_matrix();
        let wm = w.as_matrix();
        let dt = DMatrix::from_diagonal(&tm.diagonal());
        let dw = DMatrix::from_diagonal(&wm.diagonal());
        let dtv = tm.diagonal();
        let dwv = wm.diagonal();
        let ones = nalgebra::DVector::from_element(3, 1.0);
        let ttw = tm.component_mul(tm).component_mul(wm);
        let checks = [
            (aux.d_t_t_d_w, (dtv.transpose() * tm * &dwv)[0]),
            (aux.d_t_w_d_t, (dtv.transpose() * wm * &dtv)[0]),
            (aux.ones_ttw_ones, (ones.transpose() * &ttw * &ones)[0]),
            (aux.tr_t_dw_t, (tm * &dw * tm).trace()),
            (aux.tr_w_dt_t, (wm * &dt * tm).trace()),
            (aux.tr_ttw_hadamard, ttw.trace()),
        ];
        for (got, want) in checks {
            assert!(rel_err(got, want) <= 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn trace_set_cases() {
        let ts = trace_set(&SymMatrix::identity(4));
        assert_eq!(ts, TraceSet::of_diagonal(&[1.0; 4]));
        assert_eq!(ts.tr_h22, 4.0);

        let ts = trace_set(&SymMatrix::from_diagonal(&[2.0, 0.0]).unwrap());
        assert_eq!(
            [ts.tr1, ts.tr2, ts.tr3, ts.tr4, ts.tr_h11, ts.tr_h12, ts.tr_h22],
            [2.0, 4.0, 8.0, 16.0, 4.0, 8.0, 16.0]
        );
    }

    #[test]
    fn trace_set_matches_componentwise_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_sym(5, &mut rng);
        let m2 = SymMatrix::from_symmetric_product(m.as_matrix() * m.as_matrix());
        let ts = trace_set(&m);
        let checks = [
            (ts.tr1, trace_power(&m, 1).unwrap()),
            (ts.tr2, trace_power(&m, 2).unwrap()),
            (ts.tr3, trace_power(&m, 3).unwrap()),
            (ts.tr4, trace_power(&m, 4).unwrap()),
            (ts.tr_h11, trace_hadamard(&m, &m).unwrap()),
            (ts.tr_h12, trace_hadamard(&m, &m2).unwrap()),
            (ts.tr_h22, trace_hadamard(&m2, &m2).unwrap()),
        ];
        for (got, want) in checks {
            assert!(rel_err(got, want) <= 1e-12);
        }
    }

    #[test]
    fn construction_rejects_asymmetry() {
        assert!(SymMatrix::new(2, vec![1.0, 2.0, 2.5, 1.0]).is_err());
        assert!(SymMatrix::new(2, vec![1.0, 2.0, 2.0]).is_err());
        assert!(SymMatrix::new(0, vec![]).is_err());
        let m = SymMatrix::new(2, vec![1.0, 2.0, 2.0 + 1e-15, 1.0]).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn frobenius_identity_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let p = rng.random_range(1..8);
            let m = random_sym(p, &mut rng);
            let fro = m.as_matrix().norm_squared();
            assert!(rel_err(trace_power(&m, 2).unwrap(), fro) <= 1e-12);
        }
    }

    #[test]
    fn diagonal_powers_are_sums_of_powers() {
        let vals = [0.3, 1.7, 2.5, 9.0];
        let m = SymMatrix::from_diagonal(&vals).unwrap();
        for k in 1..=4u32 {
            let want: f64 = vals.iter().map(|v| v.powi(k as i32)).sum();
            assert!(rel_err(trace_power(&m, k).unwrap(), want) <= 1e-12);
        }
    }

    #[test]
    fn trace_set_scales_homogeneously() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = random_sym(6, &mut rng);
        let base = trace_set(&m);
        for c in [0.5, 2.0, 10.0] {
            let s = trace_set(&m.scaled(c));
            let pairs = [
                (s.tr1, c * base.tr1),
                (s.tr2, c.powi(2) * base.tr2),
                (s.tr3, c.powi(3) * base.tr3),
                (s.tr4, c.powi(4) * base.tr4),
                (s.tr_h11, c.powi(2) * base.tr_h11),
                (s.tr_h12, c.powi(3) * base.tr_h12),
                (s.tr_h22, c.powi(4) * base.tr_h22),
            ];
            for (got, want) in pairs {
                assert!(rel_err(got, want) <= 1e-10);
            }
        }
    }

    #[test]
    fn sum_of_squares_functionals_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let ts = trace_set(&random_sym(4, &mut rng));
            assert!(ts.tr2 >= 0.0 && ts.tr4 >= 0.0 && ts.tr_h11 >= 0.0 && ts.tr_h22 >= 0.0);
        }
    }
}
