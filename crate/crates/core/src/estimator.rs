//! Square-root D-trace estimator of the difference `B₂ − B₁`.
//!
//! The estimate minimises
//!
//! ```text
//! L(Δ) + λ‖Δ‖₁,off,   L(Δ) = ¼(⟨Ψ₁Δ, ΔΨ₂⟩ + ⟨Ψ₂Δ, ΔΨ₁⟩) − ⟨Δ, Ψ₁ − Ψ₂⟩
//! ```
//!
//! with `⟨A, B⟩ = tr(ABᵀ)`. The problem is split over three copies
//! `Δ₁ = Δ₂ = Δ₃` carrying the two halves of the loss and the penalty, and
//! solved by ADMM with multipliers `Λ₁, Λ₂, Λ₃` on the three pairwise
//! consensus constraints.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    eig_sym, inner, inv_sqrt_pd, off_diag_l1, soft_threshold_in_place, sqrt_psd, unvec, vec,
    GSolver, SymmetricMatrix,
};
use crate::sampling::{psi_hat, sample_covariance, whiten, PotentialSamples, PsiEstimate};

/// Largest dimension accepted by [`uniqueness_check`]; the Hessian is `p² × p²`.
pub const UNIQUENESS_MAX_DIM: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// ℓ1 weight λ.
    pub lambda: f64,
    /// ADMM penalty ρ.
    pub rho: f64,
    pub max_iter: usize,
    /// Bound on the pairwise consensus gap and on the per-iteration change of Δ₃.
    pub tol_consensus: f64,
    /// Relative objective tolerance used by [`SolverConfig::converged_objective`].
    pub tol_objective: f64,
    /// Shrink the diagonal of Δ₃ too (full ℓ1 instead of off-diagonal ℓ1).
    pub penalize_diagonal: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.0,
            rho: 1e-3,
            max_iter: 20_000,
            tol_consensus: 1e-6,
            tol_objective: 1e-9,
            penalize_diagonal: false,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::param("rho", format!("must be positive, got {}", self.rho)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if !(self.tol_consensus > 0.0) {
            return Err(Error::param("tol_consensus", "must be positive"));
        }
        if !(self.tol_objective >= 0.0) {
            return Err(Error::param("tol_objective", "must be nonnegative"));
        }
        Ok(())
    }

    /// Whether two successive objective values agree to `tol_objective`.
    pub fn converged_objective(&self, previous: f64, current: f64) -> bool {
        (previous - current).abs() <= self.tol_objective * previous.abs().max(1.0)
    }
}

/// Full ADMM iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub d3: DMatrix<f64>,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub l3: DMatrix<f64>,
    pub iter: usize,
}

impl AdmmState {
    pub fn zeros(p: usize) -> Self {
        let z = DMatrix::zeros(p, p);
        AdmmState {
            d1: z.clone(),
            d2: z.clone(),
            d3: z.clone(),
            l1: z.clone(),
            l2: z.clone(),
            l3: z,
            iter: 0,
        }
    }

    /// `max(‖Δ₁−Δ₂‖∞, ‖Δ₁−Δ₃‖∞, ‖Δ₂−Δ₃‖∞)`.
    pub fn consensus_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for ((a, b), c) in self.d1.iter().zip(self.d2.iter()).zip(self.d3.iter()) {
            worst = worst.max((a - b).abs()).max((a - c).abs()).max((b - c).abs());
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct DeltaEstimate {
    pub delta: SymmetricMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Penalised objective at `delta`.
    pub objective: f64,
}

/// D-trace loss `¼(⟨Ψ₁Δ, ΔΨ₂⟩ + ⟨Ψ₂Δ, ΔΨ₁⟩) − ⟨Δ, Ψ₁ − Ψ₂⟩`.
pub fn dtrace_loss(delta: &DMatrix<f64>, psi1: &SymmetricMatrix, psi2: &SymmetricMatrix) -> Result<f64> {
    let p = psi1.dim();
    if psi2.dim() != p || delta.shape() != (p, p) {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: delta {:?}, psi1 {p}x{p}, psi2 {1}x{1}",
            delta.shape(),
            psi2.dim()
        )));
    }
    let (psi1, psi2) = (psi1.as_matrix(), psi2.as_matrix());
    let quad = inner(&(psi1 * delta), &(delta * psi2)) + inner(&(psi2 * delta), &(delta * psi1));
    Ok(0.25 * quad - inner(delta, &(psi1 - psi2)))
}

/// Loss plus `λ‖Δ‖₁,off` (or the full ℓ1 norm when `penalize_diagonal`).
pub fn penalized_objective(
    delta: &DMatrix<f64>,
    psi1: &SymmetricMatrix,
    psi2: &SymmetricMatrix,
    lambda: f64,
    penalize_diagonal: bool,
) -> Result<f64> {
    let penalty = if penalize_diagonal {
        delta.iter().map(|v| v.abs()).sum()
    } else {
        off_diag_l1(delta)
    };
    Ok(dtrace_loss(delta, psi1, psi2)? + lambda * penalty)
}

/// Population identity `B₂ − B₁ = M₂(Θ̃₂)^{1/2}M₂ − M₁(Θ̃₁)^{1/2}M₁`, where
/// `Θ̃ᵢ` is the precision of the whitened potentials `M_Xᵢ Yᵢ`.
///
/// Each term is computed the long way round (population covariance of the
/// whitened potentials, then its inverse square root) so the result checks
/// the square-root construction rather than restating `b2 - b1`.
pub fn exact_delta(
    b1: &SymmetricMatrix,
    b2: &SymmetricMatrix,
    sigma_x1: &SymmetricMatrix,
    sigma_x2: &SymmetricMatrix,
) -> Result<SymmetricMatrix> {
    let term = |b: &SymmetricMatrix, sigma: &SymmetricMatrix| -> Result<SymmetricMatrix> {
        if b.dim() != sigma.dim() {
            return Err(Error::InvalidInput("B and sigma dimensions differ".into()));
        }
        let b_eig = eig_sym(b)?;
        crate::linalg::check_pd(&b_eig).map_err(|min_eigenvalue| Error::NotPd { min_eigenvalue })?;
        let b_inv = b_eig.map_spectrum(|d| 1.0 / d);
        let m = sqrt_psd(sigma)?;
        // Cov[M Y] = M B⁻¹ Σ B⁻¹ M
        let cov_tilde = sigma.congruence(&b_inv)?.congruence(&m)?;
        let theta_tilde_sqrt = inv_sqrt_pd(&cov_tilde)?;
        theta_tilde_sqrt.congruence(&m)
    };
    let t2 = term(b2, sigma_x2)?;
    let t1 = term(b1, sigma_x1)?;
    t2.sub(&t1)
}

/// Precomputed ADMM machinery for one `(Ψ₁, Ψ₂)` pair.
///
/// Both Δ-subproblems are two-sided linear solves with fixed coefficient
/// matrices, so the eigendecompositions of `Ψ₁` and `Ψ₂` are computed once
/// and every iteration costs eight dense matrix products.
pub struct AdmmSolver {
    psi1: SymmetricMatrix,
    psi2: SymmetricMatrix,
    diff: DMatrix<f64>,
    solve_12: GSolver,
    solve_21: GSolver,
    config: SolverConfig,
    rhs: DMatrix<f64>,
    prev_d3: DMatrix<f64>,
}

impl AdmmSolver {
    pub fn new(psi1: &SymmetricMatrix, psi2: &SymmetricMatrix, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let p = psi1.dim();
        if psi2.dim() != p {
            return Err(Error::InvalidInput(format!(
                "psi1 is {p}x{p} but psi2 is {0}x{0}",
                psi2.dim()
            )));
        }
        let e1 = eig_sym(psi1)?;
        let e2 = eig_sym(psi2)?;
        let gamma = 4.0 * config.rho;
        Ok(AdmmSolver {
            psi1: psi1.clone(),
            psi2: psi2.clone(),
            diff: psi1.as_matrix() - psi2.as_matrix(),
            solve_12: GSolver::new(&e1, &e2, gamma)?,
            solve_21: GSolver::new(&e2, &e1, gamma)?,
            config: config.clone(),
            rhs: DMatrix::zeros(p, p),
            prev_d3: DMatrix::zeros(p, p),
        })
    }

    pub fn dim(&self) -> usize {
        self.psi1.dim()
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// One sweep of the six updates. Returns `‖Δ₃^{k+1} − Δ₃^k‖∞`.
    pub fn step(&mut self, s: &mut AdmmState) -> f64 {
        let rho = self.config.rho;

        // Δ₁ ← G(Ψ₁, Ψ₂, 2ρΔ₃ + 2ρΔ₂ + Ψ₁ − Ψ₂ + 2Λ₁ − 2Λ₃, 4ρ)
        self.rhs.copy_from(&self.diff);
        self.rhs.zip_zip_apply(&s.d3, &s.d2, |r, d3, d2| *r += 2.0 * rho * (d3 + d2));
        self.rhs.zip_zip_apply(&s.l1, &s.l3, |r, l1, l3| *r += 2.0 * (l1 - l3));
        self.solve_12.solve_into(&self.rhs, &mut s.d1);

        // Δ₂ ← G(Ψ₂, Ψ₁, 2ρΔ₃ + 2ρΔ₁ + Ψ₁ − Ψ₂ + 2Λ₃ − 2Λ₂, 4ρ)
        self.rhs.copy_from(&self.diff);
        self.rhs.zip_zip_apply(&s.d3, &s.d1, |r, d3, d1| *r += 2.0 * rho * (d3 + d1));
        self.rhs.zip_zip_apply(&s.l3, &s.l2, |r, l3, l2| *r += 2.0 * (l3 - l2));
        self.solve_21.solve_into(&self.rhs, &mut s.d2);

        // Δ₃ ← S((ρΔ₁ + ρΔ₂ − Λ₁ + Λ₂)/(2ρ), λ/(2ρ))
        self.prev_d3.copy_from(&s.d3);
        s.d3.copy_from(&s.d1);
        s.d3.zip_apply(&s.d2, |d3, d2| *d3 = 0.5 * (*d3 + d2));
        s.d3.zip_zip_apply(&s.l1, &s.l2, |d3, l1, l2| *d3 += (l2 - l1) / (2.0 * rho));
        soft_threshold_in_place(&mut s.d3, self.config.lambda / (2.0 * rho), !self.config.penalize_diagonal);

        // multiplier updates
        s.l1.zip_zip_apply(&s.d3, &s.d1, |l, d3, d1| *l += rho * (d3 - d1));
        s.l2.zip_zip_apply(&s.d2, &s.d3, |l, d2, d3| *l += rho * (d2 - d3));
        s.l3.zip_zip_apply(&s.d1, &s.d2, |l, d1, d2| *l += rho * (d1 - d2));
        s.iter += 1;

        s.d3.iter()
            .zip(self.prev_d3.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Runs from the zero iterate.
    pub fn solve(&mut self) -> Result<DeltaEstimate> {
        let state = AdmmState::zeros(self.dim());
        self.solve_from(state).map(|(est, _)| est)
    }

    /// Runs from `state` until both the consensus gap and the change in Δ₃
    /// drop below `tol_consensus`, or `max_iter` total iterations.
    pub fn solve_from(&mut self, mut state: AdmmState) -> Result<(DeltaEstimate, AdmmState)> {
        let tol = self.config.tol_consensus;
        let mut converged = false;
        while state.iter < self.config.max_iter {
            let change = self.step(&mut state);
            if !change.is_finite() || state.d3.iter().any(|v| !v.is_finite()) {
                return Err(Error::SolverDiverged { iteration: state.iter });
            }
            if change <= tol && state.consensus_residual() <= tol {
                converged = true;
                break;
            }
        }
        let delta = SymmetricMatrix::symmetrize(state.d3.clone())?;
        let objective = penalized_objective(
            &delta,
            &self.psi1,
            &self.psi2,
            self.config.lambda,
            self.config.penalize_diagonal,
        )?;
        Ok((
            DeltaEstimate {
                delta,
                iterations: state.iter,
                converged,
                objective,
            },
            state,
        ))
    }
}

/// Solves the ℓ1-penalised D-trace problem for two precision-factor estimates.
pub fn estimate_delta(psi1: &PsiEstimate, psi2: &PsiEstimate, config: &SolverConfig) -> Result<DeltaEstimate> {
    solve_dtrace(&psi1.psi, &psi2.psi, config)
}

/// [`estimate_delta`] on bare `Ψ` matrices.
pub fn solve_dtrace(psi1: &SymmetricMatrix, psi2: &SymmetricMatrix, config: &SolverConfig) -> Result<DeltaEstimate> {
    AdmmSolver::new(psi1, psi2, config)?.solve()
}

/// Plug-in baseline: the population identity with each `(Θ̃ᵢ)^{1/2}`
/// replaced by `S̃ᵢ^{-1/2}`. Undefined unless both sample covariances are
/// nonsingular, which needs `n > p`.
pub fn plugin_delta(
    samples1: &PotentialSamples,
    samples2: &PotentialSamples,
    sigma_x1: &SymmetricMatrix,
    sigma_x2: &SymmetricMatrix,
) -> Result<SymmetricMatrix> {
    let term = |samples: &PotentialSamples, sigma: &SymmetricMatrix| -> Result<SymmetricMatrix> {
        let (n, p) = (samples.n(), samples.p());
        if n <= p {
            return Err(Error::PluginUndefined { n, p });
        }
        let m = sqrt_psd(sigma)?;
        let s_tilde = sample_covariance(&whiten(samples, &m)?, false)?;
        match inv_sqrt_pd(&s_tilde) {
            Ok(root) => root.congruence(&m),
            Err(Error::Singular { .. }) => Err(Error::PluginUndefined { n, p }),
            Err(e) => Err(e),
        }
    };
    if samples1.p() != samples2.p() {
        return Err(Error::InvalidInput("sample batches have different p".into()));
    }
    let t2 = term(samples2, sigma_x2)?;
    let t1 = term(samples1, sigma_x1)?;
    t2.sub(&t1)
}

/// Plug-in baseline from covariances of the whitened potentials.
pub fn plugin_delta_from_covariances(
    cov_tilde1: &SymmetricMatrix,
    cov_tilde2: &SymmetricMatrix,
    sigma_x1: &SymmetricMatrix,
    sigma_x2: &SymmetricMatrix,
) -> Result<SymmetricMatrix> {
    let t2 = inv_sqrt_pd(cov_tilde2)?.congruence(&sqrt_psd(sigma_x2)?)?;
    let t1 = inv_sqrt_pd(cov_tilde1)?.congruence(&sqrt_psd(sigma_x1)?)?;
    t2.sub(&t1)
}

/// Variant for unknown injection covariances: whitening is skipped, so the
/// estimate targets the difference of the square roots of the potential
/// precision matrices, `Θ₂^{1/2} − Θ₁^{1/2}`.
pub fn estimate_sqrt_delta(
    samples1: &PotentialSamples,
    samples2: &PotentialSamples,
    config: &SolverConfig,
) -> Result<DeltaEstimate> {
    let identity = SymmetricMatrix::identity(samples1.p());
    let psi1 = psi_hat(samples1, &identity)?;
    let psi2 = psi_hat(samples2, &identity)?;
    estimate_delta(&psi1, &psi2, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Unique,
    NotUnique,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Unique => "unique",
            Verdict::NotUnique => "not-unique",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Kernel diagnostic for the Hessian `H = (Ψ₁⊗Ψ₂ + Ψ₂⊗Ψ₁)/2` of the loss.
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub kernel_dim: usize,
    /// `max_{d ∈ basis, ±} dᵀvec(Ψ₁ − Ψ₂)`; zero when the kernel is trivial.
    pub condition_inner: f64,
    /// `max_{d ∈ basis} ‖vec⁻¹(d)‖₁,off`; zero when the kernel is trivial.
    pub condition_norm: f64,
    pub tau: f64,
    pub verdict: Verdict,
}

/// Loss Hessian `(Ψ₁⊗Ψ₂ + Ψ₂⊗Ψ₁)/2` acting on column-stacked `vec(Δ)`.
pub fn loss_hessian(psi1: &SymmetricMatrix, psi2: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if psi1.dim() != psi2.dim() {
        return Err(Error::InvalidInput("psi1 and psi2 dimensions differ".into()));
    }
    let h = (psi1.kronecker(psi2.as_matrix()) + psi2.kronecker(psi1.as_matrix())) * 0.5;
    SymmetricMatrix::symmetrize(h)
}

/// Evaluates the kernel conditions on an orthonormal basis of `Ker(H)`.
///
/// Kernel directions are eigenvectors of `H` with eigenvalue at most
/// `tol_kernel · λ_max(H)`. A trivial kernel gives [`Verdict::Unique`]; a
/// basis direction (or its negation) violating either condition gives
/// [`Verdict::NotUnique`]; otherwise the check over the basis cannot speak
/// for every kernel combination and the verdict is
/// [`Verdict::Inconclusive`].
pub fn uniqueness_check(
    psi1: &SymmetricMatrix,
    psi2: &SymmetricMatrix,
    tau: f64,
    tol_kernel: f64,
) -> Result<UniquenessReport> {
    let p = psi1.dim();
    if p > UNIQUENESS_MAX_DIM {
        return Err(Error::SizeLimit {
            p,
            max: UNIQUENESS_MAX_DIM,
        });
    }
    if !(tau > 0.0) {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    if !(tol_kernel >= 0.0) {
        return Err(Error::param("tol_kernel", "must be nonnegative"));
    }
    let h = loss_hessian(psi1, psi2)?;
    let eig = eig_sym(&h)?;
    let cutoff = tol_kernel * eig.max_value().max(0.0);
    let target = vec(&(psi1.as_matrix() - psi2.as_matrix()));
    let inner_tol = 1e-10 * target.norm().max(1.0);

    let mut kernel_dim = 0;
    let mut worst_inner = 0.0f64;
    let mut worst_norm = 0.0f64;
    for (k, &value) in eig.values.iter().enumerate() {
        if value > cutoff {
            continue;
        }
        kernel_dim += 1;
        let d = eig.vectors.column(k);
        // max over d and -d
        worst_inner = worst_inner.max(d.dot(&target).abs());
        worst_norm = worst_norm.max(off_diag_l1(&unvec(d.as_slice(), p, p)?));
    }
    let verdict = if kernel_dim == 0 {
        Verdict::Unique
    } else if worst_inner > inner_tol || worst_norm > tau {
        Verdict::NotUnique
    } else {
        Verdict::Inconclusive
    };
    Ok(UniquenessReport {
        kernel_dim,
        condition_inner: worst_inner,
        condition_norm: worst_norm,
        tau,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sup_norm;
    use crate::network::random_pd_matrix;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0))
    }

    /// tr-based loss, written with explicit index loops.
    fn loss_by_loops(delta: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let p = delta.nrows();
        let prod = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
            let mut out = DMatrix::zeros(p, p);
            for i in 0..p {
                for j in 0..p {
                    for k in 0..p {
                        out[(i, j)] += x[(i, k)] * y[(k, j)];
                    }
                }
            }
            out
        };
        let trace_abt = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
            let mut t = 0.0;
            for i in 0..p {
                for k in 0..p {
                    t += x[(i, k)] * y[(i, k)];
                }
            }
            t
        };
        let q1 = trace_abt(&prod(a, delta), &prod(delta, b));
        let q2 = trace_abt(&prod(b, delta), &prod(delta, a));
        let mut lin = 0.0;
        for i in 0..p {
            for j in 0..p {
                lin += delta[(i, j)] * (a[(i, j)] - b[(i, j)]);
            }
        }
        0.25 * (q1 + q2) - lin
    }

    #[test]
    fn loss_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let i3 = SymmetricMatrix::identity(3);
        assert_eq!(dtrace_loss(&DMatrix::zeros(3, 3), &i3, &i3).unwrap(), 0.0);
        let d = random_matrix(3, &mut rng);
        assert_relative_eq!(dtrace_loss(&d, &i3, &i3).unwrap(), 0.5 * d.norm_squared(), epsilon = 1e-12);

        let psi1 = random_pd_matrix(5, 4.0, 2).unwrap();
        let psi2 = random_pd_matrix(5, 9.0, 3).unwrap();
        let d = random_matrix(5, &mut rng);
        assert_relative_eq!(
            dtrace_loss(&d, &psi1, &psi2).unwrap(),
            loss_by_loops(&d, &psi1, &psi2),
            epsilon = 1e-12
        );
        assert!(dtrace_loss(&DMatrix::zeros(4, 4), &i3, &i3).is_err());
    }

    #[test]
    fn exact_delta_with_identity_covariances() {
        let b1 = random_pd_matrix(4, 5.0, 1).unwrap();
        let b2 = random_pd_matrix(4, 3.0, 2).unwrap();
        let i4 = SymmetricMatrix::identity(4);
        let d = exact_delta(&b1, &b2, &i4, &i4).unwrap();
        assert_relative_eq!(d.as_matrix(), &(b2.as_matrix() - b1.as_matrix()), epsilon = 1e-10);
        let zero = exact_delta(&b1, &b1, &i4, &i4).unwrap();
        assert!(sup_norm(&zero) <= 1e-12);
    }

    #[test]
    fn exact_delta_rejects_indefinite_laplacian() {
        let b = SymmetricMatrix::from_diagonal(&[1.0, -1.0]);
        let i2 = SymmetricMatrix::identity(2);
        assert!(matches!(exact_delta(&b, &i2, &i2, &i2), Err(Error::NotPd { .. })));
    }

    #[test]
    fn equal_factors_give_zero_estimate() {
        let psi = random_pd_matrix(5, 3.0, 6).unwrap();
        for lambda in [0.0, 0.1] {
            let cfg = SolverConfig {
                lambda,
                rho: 0.5,
                ..Default::default()
            };
            let est = solve_dtrace(&psi, &psi, &cfg).unwrap();
            assert!(est.converged);
            assert_eq!(sup_norm(&est.delta), 0.0);
        }
    }

    #[test]
    fn unpenalised_solution_solves_stationarity() {
        let psi1 = random_pd_matrix(4, 3.0, 10).unwrap();
        let psi2 = random_pd_matrix(4, 2.0, 11).unwrap();
        let cfg = SolverConfig {
            lambda: 0.0,
            rho: 0.5,
            tol_consensus: 1e-10,
            ..Default::default()
        };
        let est = solve_dtrace(&psi1, &psi2, &cfg).unwrap();
        assert!(est.converged);
        let d = est.delta.as_matrix();
        let lhs = psi1.as_matrix() * d * psi2.as_matrix() + psi2.as_matrix() * d * psi1.as_matrix();
        let rhs = (psi1.as_matrix() - psi2.as_matrix()) * 2.0;
        assert!(sup_norm(&(lhs - rhs)) <= 1e-7);
    }

    #[test]
    fn huge_lambda_zeroes_off_diagonal() {
        let psi1 = random_pd_matrix(4, 3.0, 20).unwrap();
        let psi2 = random_pd_matrix(4, 2.0, 21).unwrap();
        let cfg = SolverConfig {
            lambda: 1e9,
            rho: 0.5,
            ..Default::default()
        };
        let est = solve_dtrace(&psi1, &psi2, &cfg).unwrap();
        assert_eq!(off_diag_l1(&est.delta), 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let psi1 = random_pd_matrix(3, 2.0, 30).unwrap();
        let psi2 = random_pd_matrix(3, 2.0, 31).unwrap();
        let mut solver = AdmmSolver::new(&psi1, &psi2, &SolverConfig::with_lambda(0.1)).unwrap();
        let mut state = AdmmState::zeros(3);
        state.l1[(0, 1)] = f64::INFINITY;
        let r = solver.solve_from(state);
        assert!(matches!(r, Err(Error::SolverDiverged { iteration: 1 })), "{r:?}");
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { rho: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { lambda: -1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_iter: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn uniqueness_on_pd_pair() {
        let psi1 = random_pd_matrix(4, 3.0, 1).unwrap();
        let psi2 = random_pd_matrix(4, 3.0, 2).unwrap();
        let r = uniqueness_check(&psi1, &psi2, 1.0, 1e-10).unwrap();
        assert_eq!(r.kernel_dim, 0);
        assert_eq!(r.verdict, Verdict::Unique);
    }

    #[test]
    fn uniqueness_on_equal_projectors() {
        let proj = SymmetricMatrix::from_diagonal(&[1.0, 1.0, 0.0]);
        let r = uniqueness_check(&proj, &proj, 10.0, 1e-10).unwrap();
        // H = P⊗P has rank 4 out of 9
        assert_eq!(r.kernel_dim, 5);
        assert!(r.condition_inner <= 1e-12);
        assert_ne!(r.verdict, Verdict::Unique);
    }

    #[test]
    fn uniqueness_size_limit() {
        let big = SymmetricMatrix::identity(41);
        assert!(matches!(uniqueness_check(&big, &big, 1.0, 1e-10), Err(Error::SizeLimit { .. })));
    }
}
