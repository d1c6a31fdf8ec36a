//! Univariate and multivariate q-Gaussian distributions.
//!
//! The multivariate `q > 1` case is the exploration-policy noise model:
//! it maps exactly onto a Student's t distribution, which is how sampling
//! is done (normal draw plus chi-square scale). The escort transform maps
//! a q-Gaussian to the q-Gaussian its q-th power normalizes to, which is
//! the distribution control perturbations are actually drawn from.

use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::special::{ln_beta, ln_gamma};
use crate::tsallis::EntropicIndex;

/// Univariate q-Gaussian with entropic index `q < 3`, q-mean and q-variance.
#[derive(Debug, Clone)]
pub struct QGaussian1D {
    q: EntropicIndex,
    mu_q: f64,
    sigma2_q: f64,
    ln_z: f64,
}

impl QGaussian1D {
    pub fn new(q: EntropicIndex, mu_q: f64, sigma2_q: f64) -> Result<Self> {
        if !(q.get() < 3.0) {
            return Err(Error::EntropicIndexRange {
                q: q.get(),
                lo: f64::NEG_INFINITY,
                hi: 3.0,
            });
        }
        if !(sigma2_q > 0.0 && sigma2_q.is_finite()) {
            return Err(Error::Domain("q-variance must be positive and finite"));
        }
        let qv = q.get();
        let ln_z = if q.is_shannon() {
            0.5 * libm::log(2.0 * core::f64::consts::PI * sigma2_q)
        } else if qv > 1.0 {
            0.5 * libm::log(sigma2_q * (3.0 - qv) / (qv - 1.0))
                + ln_beta(0.5, (3.0 - qv) / (2.0 * (qv - 1.0)))?
        } else {
            0.5 * libm::log(sigma2_q * (3.0 - qv) / (1.0 - qv))
                + ln_beta(0.5, (2.0 - qv) / (1.0 - qv))?
        };
        Ok(Self { q, mu_q, sigma2_q, ln_z })
    }

    pub fn q(&self) -> EntropicIndex {
        self.q
    }

    pub fn mu_q(&self) -> f64 {
        self.mu_q
    }

    pub fn sigma2_q(&self) -> f64 {
        self.sigma2_q
    }

    /// Half-width of the compact support for `q < 1`, in units of the
    /// q-standard deviation: `a_q = sqrt((3-q)/(1-q))`.
    pub fn support_half_width(&self) -> Option<f64> {
        let qv = self.q.get();
        if qv < 1.0 && !self.q.is_shannon() {
            Some(libm::sqrt((3.0 - qv) / (1.0 - qv) * self.sigma2_q))
        } else {
            None
        }
    }

    /// Density at `x`. Exactly 0 outside the compact support when `q < 1`.
    pub fn pdf(&self, x: f64) -> f64 {
        let qv = self.q.get();
        let d2 = (x - self.mu_q) * (x - self.mu_q) / self.sigma2_q;
        if self.q.is_shannon() {
            return libm::exp(-0.5 * d2 - self.ln_z);
        }
        let base = 1.0 - (1.0 - qv) / (3.0 - qv) * d2;
        if base <= 0.0 {
            return 0.0;
        }
        libm::exp(libm::log(base) / (1.0 - qv) - self.ln_z)
    }

    /// Partition function `Z_q`.
    pub fn partition(&self) -> f64 {
        libm::exp(self.ln_z)
    }
}

/// Multivariate q-Gaussian for `1 < q < 1 + 2/n` with SPD q-covariance.
#[derive(Debug, Clone)]
pub struct QGaussianND {
    q: EntropicIndex,
    mu_q: DVector<f64>,
    sigma_q: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    ln_z: f64,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl QGaussianND {
    pub fn new(q: EntropicIndex, mu_q: DVector<f64>, sigma_q: DMatrix<f64>) -> Result<Self> {
        let n = mu_q.len();
        if sigma_q.nrows() != n || sigma_q.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sigma_q.nrows(),
            });
        }
        let q = q.require_in(1.0, 1.0 + 2.0 / n as f64)?;
        let scale = sigma_q.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (sigma_q[(i, j)] - sigma_q[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Domain("q-covariance must be symmetric"));
                }
            }
        }
        let chol = Cholesky::new(sigma_q.clone()).ok_or(Error::NotPositiveDefinite)?;
        let ln_det: f64 = chol
            .l()
            .diagonal()
            .iter()
            .map(|d| 2.0 * libm::log(*d))
            .sum();
        let sigma_inv = chol.inverse();

        let qv = q.get();
        let nf = n as f64;
        let inv_qm1 = 1.0 / (qv - 1.0);
        let ln_z = 0.5 * nf * libm::log((nf + 2.0 - nf * qv) / (qv - 1.0))
            + 0.5 * ln_det
            + 0.5 * nf * libm::log(core::f64::consts::PI)
            + ln_gamma(inv_qm1 - 0.5 * nf)?
            - ln_gamma(inv_qm1)?;

        Ok(Self { q, mu_q, sigma_q, sigma_inv, ln_z })
    }

    pub fn dim(&self) -> usize {
        self.mu_q.len()
    }

    pub fn q(&self) -> EntropicIndex {
        self.q
    }

    pub fn mu_q(&self) -> &DVector<f64> {
        &self.mu_q
    }

    pub fn sigma_q(&self) -> &DMatrix<f64> {
        &self.sigma_q
    }

    /// Log of the partition function `Z_q`.
    pub fn ln_partition(&self) -> f64 {
        self.ln_z
    }

    /// Density at `x`.
    pub fn pdf(&self, x: &DVector<f64>) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let qv = self.q.get();
        let nf = n as f64;
        let d = x - &self.mu_q;
        let maha = (&self.sigma_inv * &d).dot(&d);
        let base = 1.0 + (qv - 1.0) / (nf + 2.0 - nf * qv) * maha;
        Ok(libm::exp(-libm::log(base) / (qv - 1.0) - self.ln_z))
    }

    /// Student's t parameters reproducing this distribution:
    /// `ν = (n + 2 - nq)/(q - 1)` and `Σ_t = ν(q-1)/(n+2-nq) · Σ_q`.
    ///
    /// The two relations make `Σ_t = Σ_q` identically; the general formula
    /// is kept so the correspondence stays visible.
    pub fn to_student_t(&self) -> (f64, DVector<f64>, DMatrix<f64>) {
        let qv = self.q.get();
        let nf = self.dim() as f64;
        let nu = (nf + 2.0 - nf * qv) / (qv - 1.0);
        let sigma_t = &self.sigma_q * (nu * (qv - 1.0) / (nf + 2.0 - nf * qv));
        (nu, self.mu_q.clone(), sigma_t)
    }

    /// The q-escort distribution `p^q / C`, itself a q-Gaussian with
    /// `q' = 2 - 1/q`, the same mean, and
    /// `Σ_q' = (n + 2 - nq)/(n + (2-n)q) · Σ_q`.
    pub fn escort_transform(&self) -> Result<QGaussianND> {
        let qv = self.q.get();
        let nf = self.dim() as f64;
        let q_prime = EntropicIndex::new(2.0 - 1.0 / qv)?;
        let coeff = (nf + 2.0 - nf * qv) / (nf + (2.0 - nf) * qv);
        QGaussianND::new(q_prime, self.mu_q.clone(), &self.sigma_q * coeff)
    }

    /// Draw `count` i.i.d. samples via the Student's t correspondence:
    /// `x = μ + L z sqrt(ν/w)` with `z ~ N(0, I)`, `w ~ χ²(ν)`, `LLᵀ = Σ_t`.
    /// Returns a `count × n` matrix, one sample per row.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<DMatrix<f64>> {
        if count == 0 {
            return Err(Error::Domain("sample count must be >= 1"));
        }
        let (nu, mu, sigma_t) = self.to_student_t();
        if !(nu > 0.0) {
            return Err(Error::Domain("degrees of freedom must be positive"));
        }
        let n = self.dim();
        let chol = Cholesky::new(sigma_t).ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let chi2 = ChiSquared::new(nu).map_err(|_| Error::Domain("invalid chi-square"))?;
        let mut out = DMatrix::zeros(count, n);
        let mut z = DVector::zeros(n);
        for i in 0..count {
            for j in 0..n {
                z[j] = rng.sample::<f64, _>(StandardNormal);
            }
            let w: f64 = chi2.sample(rng);
            let x = &mu + &l * &z * libm::sqrt(nu / w);
            out.set_row(i, &x.transpose());
        }
        Ok(out)
    }

    /// Classifies the ordinary (non-escort) mean and covariance.
    pub fn moments(&self) -> MomentReport {
        let qv = self.q.get();
        let nf = self.dim() as f64;
        let mean_bound = 1.0 + 2.0 / (nf + 1.0);
        let cov_bound = 1.0 + 2.0 / (nf + 2.0);
        let mean = if qv < mean_bound {
            MeanReport::Defined(self.mu_q.clone())
        } else {
            MeanReport::Undefined
        };
        let covariance = if qv < cov_bound {
            let coeff = (nf + 2.0 - nf * qv) / (nf + 4.0 - (nf + 2.0) * qv);
            CovarianceReport::Finite(&self.sigma_q * coeff)
        } else if qv < mean_bound {
            CovarianceReport::Infinite
        } else {
            CovarianceReport::Undefined
        };
        MomentReport { mean, covariance }
    }
}

#[derive(Debug, Clone)]
pub enum MeanReport {
    Defined(DVector<f64>),
    Undefined,
}

#[derive(Debug, Clone)]
pub enum CovarianceReport {
    Finite(DMatrix<f64>),
    Infinite,
    Undefined,
}

/// Existence classification of ordinary mean and covariance.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub mean: MeanReport,
    pub covariance: CovarianceReport,
}

impl MomentReport {
    pub fn mean_defined(&self) -> bool {
        matches!(self.mean, MeanReport::Defined(_))
    }

    pub fn covariance_finite(&self) -> bool {
        matches!(self.covariance, CovarianceReport::Finite(_))
    }

    pub fn finite_covariance(&self) -> Option<&DMatrix<f64>> {
        match &self.covariance {
            CovarianceReport::Finite(m) => Some(m),
            _ => None,
        }
    }
}

/// Convenience: collect sample rows into vectors.
pub fn rows_to_vectors(samples: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..samples.nrows())
        .map(|i| samples.row(i).transpose())
        .collect()
}
