//! Dense symmetric-matrix numerics shared by every other module.
//!
//! All spectral work goes through [`eig_sym`], which relies on nalgebra's
//! symmetric eigensolver (Householder tridiagonalisation followed by
//! implicit QR sweeps). Square roots, inverse square roots and the
//! two-sided linear solve used by the ADMM subproblems are built on top of
//! the resulting orthonormal eigenbasis.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute asymmetry tolerated by [`SymmetricMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense real symmetric `p × p` matrix.
///
/// The wrapped storage is always exactly symmetric: constructors store
/// `(A + Aᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Validating constructor: the input must be square, finite and
    /// symmetric within [`SYMMETRY_TOL`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let p = m.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}"
                    )));
                }
            }
        }
        Ok(Self::symmetrize_unchecked(m))
    }

    /// Projects an arbitrary square matrix onto the symmetric matrices.
    /// Used for computed quantities that are symmetric only up to rounding.
    pub fn symmetrize(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        Ok(Self::symmetrize_unchecked(m))
    }

    fn symmetrize_unchecked(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymmetricMatrix((m + t) * 0.5)
    }

    pub fn from_row_slice(p: usize, data: &[f64]) -> Result<Self> {
        if p == 0 || data.len() != p * p {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {p}x{p} matrix, got {}",
                p * p,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(p, p, data))
    }

    pub fn identity(p: usize) -> Self {
        SymmetricMatrix(DMatrix::identity(p, p))
    }

    pub fn zeros(p: usize) -> Self {
        SymmetricMatrix(DMatrix::zeros(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymmetricMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, factor: f64) -> Self {
        SymmetricMatrix(&self.0 * factor)
    }

    /// `self + other`; dimensions must agree.
    pub fn add(&self, other: &SymmetricMatrix) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(SymmetricMatrix(&self.0 + &other.0))
    }

    /// `self - other`; dimensions must agree.
    pub fn sub(&self, other: &SymmetricMatrix) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(SymmetricMatrix(&self.0 - &other.0))
    }

    /// Congruence `a · self · a` for symmetric `a`.
    pub fn congruence(&self, a: &SymmetricMatrix) -> Result<Self> {
        check_same_dim(self, a)?;
        Self::symmetrize(&a.0 * &self.0 * &a.0)
    }
}

impl Deref for SymmetricMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_same_dim(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Orthonormal eigenbasis `vectors` and eigenvalues `values`, ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl EigenDecomposition {
    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `U · diag(f(D)) · Uᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        SymmetricMatrix::symmetrize_unchecked(scaled * self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.map_spectrum(|d| d)
    }
}

pub fn eig_sym(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailed)?;
    let p = a.dim();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition { vectors, values })
}

/// Tolerance scale `max(1, λ_max)` used by the clipping and definiteness rules.
fn spectral_scale(eig: &EigenDecomposition) -> f64 {
    eig.max_value().max(1.0)
}

/// Unique PSD square root. Eigenvalues in `[-1e-10·scale, 0)` are clipped to zero.
pub fn sqrt_psd(c: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = eig_sym(c)?;
    sqrt_psd_from(&eig)
}

pub fn sqrt_psd_from(eig: &EigenDecomposition) -> Result<SymmetricMatrix> {
    let clip = 1e-10 * spectral_scale(eig);
    let lowest = eig.min_value();
    if lowest < -clip {
        return Err(Error::NotPsd { eigenvalue: lowest });
    }
    // eigenvalues at rounding level carry no information; keep them from
    // turning into O(sqrt(eps)) noise in the root
    let noise = eig.values.len() as f64 * f64::EPSILON * eig.max_value().max(0.0);
    Ok(eig.map_spectrum(|d| if d <= noise { 0.0 } else { d.sqrt() }))
}

/// `C^{-1/2}` for symmetric positive definite `C`.
pub fn inv_sqrt_pd(c: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = eig_sym(c)?;
    check_pd(&eig).map_err(|min_eigenvalue| Error::Singular { min_eigenvalue })?;
    Ok(eig.map_spectrum(|d| 1.0 / d.sqrt()))
}

/// `C^{-1}` for symmetric positive definite `C`.
pub fn inv_pd(c: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = eig_sym(c)?;
    check_pd(&eig).map_err(|min_eigenvalue| Error::NotPd { min_eigenvalue })?;
    Ok(eig.map_spectrum(|d| 1.0 / d))
}

/// Inverse of a (possibly indefinite) symmetric matrix.
pub fn inv_sym(c: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = eig_sym(c)?;
    let smallest = eig.values.iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
    let largest = eig.values.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if smallest <= 1e-12 * largest.max(1.0) {
        return Err(Error::Singular {
            min_eigenvalue: smallest,
        });
    }
    Ok(eig.map_spectrum(|d| 1.0 / d))
}

/// Positive definiteness rule: `λ_min > 1e-10·max(1, λ_max)`. Returns the
/// offending minimum eigenvalue on failure.
pub fn check_pd(eig: &EigenDecomposition) -> std::result::Result<(), f64> {
    let floor = 1e-10 * spectral_scale(eig);
    if eig.min_value() > floor {
        Ok(())
    } else {
        Err(eig.min_value())
    }
}

pub fn is_pd(c: &SymmetricMatrix) -> Result<bool> {
    Ok(check_pd(&eig_sym(c)?).is_ok())
}

/// Solver for `P·X·Q + γ·X = R` with fixed symmetric `P`, `Q` and `γ > 0`.
///
/// Writing `P = U_P D_P U_Pᵀ` and `Q = U_Q D_Q U_Qᵀ`, the transformed unknown
/// `Y = U_Pᵀ X U_Q` satisfies `D_P Y D_Q + γY = U_Pᵀ R U_Q`, which decouples
/// entrywise: `Y_ij = (U_Pᵀ R U_Q)_ij · O_ij` with
/// `O_ij = 1 / (D_P[i]·D_Q[j] + γ)`. Note the row index goes with `P` and
/// the column index with `Q`; indexing the weights the other way round
/// (`D_P[j]·D_Q[i]`) does not satisfy the equation unless `P` and `Q` share
/// their spectrum.
#[derive(Debug, Clone)]
pub struct GSolver {
    u_left: DMatrix<f64>,
    u_left_t: DMatrix<f64>,
    u_right_t: DMatrix<f64>,
    u_right: DMatrix<f64>,
    weights: DMatrix<f64>,
    scratch_a: DMatrix<f64>,
    scratch_b: DMatrix<f64>,
}

impl GSolver {
    pub fn new(p_eig: &EigenDecomposition, q_eig: &EigenDecomposition, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be positive and finite, got {gamma}")));
        }
        let n = p_eig.values.len();
        if q_eig.values.len() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: P is {n}x{n}, Q is {m}x{m}",
                m = q_eig.values.len()
            )));
        }
        let weights =
            DMatrix::from_fn(n, n, |i, j| 1.0 / (p_eig.values[i] * q_eig.values[j] + gamma));
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidInput(
                "P and Q must be positive semidefinite".to_string(),
            ));
        }
        Ok(GSolver {
            u_left: p_eig.vectors.clone(),
            // explicit transposes: gemm_tr is several times slower than gemm
            u_left_t: p_eig.vectors.transpose(),
            u_right_t: q_eig.vectors.transpose(),
            u_right: q_eig.vectors.clone(),
            weights,
            scratch_a: DMatrix::zeros(n, n),
            scratch_b: DMatrix::zeros(n, n),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Writes the solution for right-hand side `r` into `out`.
    pub fn solve_into(&mut self, r: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        // scratch_a = U_Pᵀ R
        self.scratch_a.gemm(1.0, &self.u_left_t, r, 0.0);
        // scratch_b = (U_Pᵀ R U_Q) ∘ O
        self.scratch_b.gemm(1.0, &self.scratch_a, &self.u_right, 0.0);
        self.scratch_b.component_mul_assign(&self.weights);
        // out = U_P (·) U_Qᵀ
        self.scratch_a.gemm(1.0, &self.u_left, &self.scratch_b, 0.0);
        out.gemm(1.0, &self.scratch_a, &self.u_right_t, 0.0);
    }

    pub fn solve(&mut self, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if r.shape() != (n, n) {
            return Err(Error::InvalidInput(format!(
                "right-hand side is {:?}, expected ({n}, {n})",
                r.shape()
            )));
        }
        let mut out = DMatrix::zeros(n, n);
        self.solve_into(r, &mut out);
        Ok(out)
    }
}

/// One-shot `G(P, Q, R, γ)`: the `X` solving `P·X·Q + γ·X = R`.
pub fn solve_g(
    p: &SymmetricMatrix,
    q: &SymmetricMatrix,
    r: &DMatrix<f64>,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: P is {0}x{0}, Q is {1}x{1}",
            p.dim(),
            q.dim()
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
    }
    let mut solver = GSolver::new(&eig_sym(p)?, &eig_sym(q)?, gamma)?;
    solver.solve(r)
}

/// Element-wise shrinkage `S(a, λ) = sign(a)·max(|a| − λ, 0)`.
pub fn soft_threshold(a: &DMatrix<f64>, lam: f64, off_diagonal_only: bool) -> Result<DMatrix<f64>> {
    if !(lam >= 0.0) {
        return Err(Error::param("lambda", format!("must be nonnegative, got {lam}")));
    }
    let mut out = a.clone();
    soft_threshold_in_place(&mut out, lam, off_diagonal_only);
    Ok(out)
}

pub(crate) fn soft_threshold_in_place(a: &mut DMatrix<f64>, lam: f64, off_diagonal_only: bool) {
    let (rows, cols) = a.shape();
    for j in 0..cols {
        for i in 0..rows {
            if off_diagonal_only && i == j {
                continue;
            }
            let v = a[(i, j)];
            a[(i, j)] = if v.abs() <= lam { 0.0 } else { v - v.signum() * lam };
        }
    }
}

/// Column-stacking vectorisation.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra storage is column-major
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(z: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if z.len() != rows * cols {
        return Err(Error::InvalidInput(format!(
            "cannot reshape length {} into {rows}x{cols}",
            z.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, z))
}

/// `max |a_ij|`.
pub fn sup_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `Σ_{i≠j} |a_ij|`.
pub fn off_diag_l1(a: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (j, col) in a.column_iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            if i != j {
                total += v.abs();
            }
        }
    }
    total
}

/// `⟨A, B⟩ = tr(A Bᵀ)`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}
