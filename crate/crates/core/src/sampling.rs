//! Node-potential samples, whitening and the precision-factor estimates
//! `Ψ̂ = M⁻¹ · S̃^{1/2} · M⁻¹` consumed by the estimators.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_pd, inv_sym, sqrt_psd, SymmetricMatrix};
use crate::rng::rng_from_seed;

/// `n × p` batch of node potentials, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSamples {
    data: DMatrix<f64>,
}

impl PotentialSamples {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput("sample batch must be non-empty".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample batch has non-finite entries".into()));
        }
        Ok(PotentialSamples { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }
}

/// Draws `n` i.i.d. potentials `Y = B⁻¹ · M_X · Z` with `Z ~ N(0, I)` and
/// `M_X = Σ_X^{1/2}`.
pub fn sample_potentials(
    b: &SymmetricMatrix,
    sigma_x: &SymmetricMatrix,
    n: usize,
    seed: u64,
) -> Result<PotentialSamples> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if b.dim() != sigma_x.dim() {
        return Err(Error::InvalidInput(format!(
            "B is {0}x{0} but sigma_x is {1}x{1}",
            b.dim(),
            sigma_x.dim()
        )));
    }
    let p = b.dim();
    let b_inv = inv_sym(b)?;
    let m_x = sqrt_psd(sigma_x)?;
    let transform = b_inv.as_matrix() * m_x.as_matrix();

    let mut rng = rng_from_seed(seed);
    let z: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let z = DMatrix::from_row_slice(n, p, &z);
    PotentialSamples::new(z * transform.transpose())
}

/// Maps every observation `y ↦ M_X · y`.
pub fn whiten(samples: &PotentialSamples, m_x: &SymmetricMatrix) -> Result<PotentialSamples> {
    if m_x.dim() != samples.p() {
        return Err(Error::InvalidInput(format!(
            "whitening matrix is {0}x{0} but samples have p = {1}",
            m_x.dim(),
            samples.p()
        )));
    }
    // rows are observations, so Y·M_Xᵀ = Y·M_X
    PotentialSamples::new(samples.data() * m_x.as_matrix())
}

/// `(1/n)·Σ y yᵀ`, optionally after subtracting the empirical mean.
pub fn sample_covariance(samples: &PotentialSamples, center: bool) -> Result<SymmetricMatrix> {
    let n = samples.n();
    if center && n < 2 {
        return Err(Error::InvalidInput("centered covariance needs n >= 2".into()));
    }
    let gram = if center {
        let mean = samples.data().row_mean();
        let mut centered = samples.data().clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        centered.transpose() * &centered
    } else {
        samples.data().transpose() * samples.data()
    };
    SymmetricMatrix::symmetrize(gram / n as f64)
}

/// `Ψ̂ = M_X⁻¹ · S̃^{1/2} · M_X⁻¹` together with the sample size and cached
/// `M_X⁻¹`.
#[derive(Debug, Clone)]
pub struct PsiEstimate {
    pub psi: SymmetricMatrix,
    pub n_used: usize,
    pub m_inv: SymmetricMatrix,
}

/// Builds `Ψ̂` from raw potential samples and the known injection covariance.
pub fn psi_hat(samples: &PotentialSamples, sigma_x: &SymmetricMatrix) -> Result<PsiEstimate> {
    psi_hat_with(samples, sigma_x, false)
}

pub fn psi_hat_with(samples: &PotentialSamples, sigma_x: &SymmetricMatrix, center: bool) -> Result<PsiEstimate> {
    let m_x = sqrt_psd(sigma_x)?;
    let whitened = whiten(samples, &m_x)?;
    let s_tilde = sample_covariance(&whitened, center)?;
    let m_inv = inv_sqrt_pd(sigma_x)?;
    let psi = sqrt_psd(&s_tilde)?.congruence(&m_inv)?;
    Ok(PsiEstimate {
        psi,
        n_used: samples.n(),
        m_inv,
    })
}

/// Same as [`psi_hat`] but starting from a covariance of the raw potentials
/// `Y` (for instance a population covariance, or a covariance file).
pub fn psi_from_covariance(cov_y: &SymmetricMatrix, sigma_x: &SymmetricMatrix, n_used: usize) -> Result<PsiEstimate> {
    if cov_y.dim() != sigma_x.dim() {
        return Err(Error::InvalidInput(format!(
            "covariance is {0}x{0} but sigma_x is {1}x{1}",
            cov_y.dim(),
            sigma_x.dim()
        )));
    }
    let m_x = sqrt_psd(sigma_x)?;
    let s_tilde = cov_y.congruence(&m_x)?;
    let m_inv = inv_sqrt_pd(sigma_x)?;
    let psi = sqrt_psd(&s_tilde)?.congruence(&m_inv)?;
    Ok(PsiEstimate { psi, n_used, m_inv })
}

/// Population covariance of `Y = B⁻¹X`: `B⁻¹ Σ_X B⁻¹`.
pub fn population_covariance(b: &SymmetricMatrix, sigma_x: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let b_inv = inv_sym(b)?;
    sigma_x.congruence(&b_inv)
}
