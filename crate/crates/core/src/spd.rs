//! Covariance estimation and the geometry of symmetric positive-definite
//! matrices: matrix functions, distances and the Karcher mean.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative eigenvalue floor used by [`Regularization::Floor`].
pub const RELATIVE_FLOOR: f64 = 1e-10;
/// Absolute eigenvalue floor used by [`Regularization::Floor`].
pub const ABSOLUTE_FLOOR: f64 = 1e-12;

/// Karcher mean stopping rule.
pub const KARCHER_TOL: f64 = 1e-7;
pub const KARCHER_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Riemannian,
    Euclidean,
    DiagEuclidean,
}

/// How [`covariance`] treats near-singular estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularization {
    /// Floor eigenvalues at `max(λ_max · rel, 1e-12)`.
    #[default]
    Floor,
    /// Fail with [`Error::RankDeficient`] instead.
    None,
}

fn relative_floor<T: Scalar>() -> f64 {
    RELATIVE_FLOOR.max(10.0 * T::epsilon_f64())
}

fn eigen_floor<T: Scalar>(lambda_max: T) -> T {
    (lambda_max * T::lit(relative_floor::<T>())).max(T::lit(ABSOLUTE_FLOOR))
}

/// A symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix<T: Scalar> {
    values: DMatrix<T>,
}

fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

fn reconstruct<T: Scalar>(vectors: &DMatrix<T>, values: &DVector<T>) -> DMatrix<T> {
    let mut scaled = vectors.clone();
    for (mut col, &v) in scaled.column_iter_mut().zip(values.iter()) {
        col *= v;
    }
    symmetrize(&(scaled * vectors.transpose()))
}

impl<T: Scalar> SpdMatrix<T> {
    /// Symmetrizes `m` and checks that every eigenvalue is positive.
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let values = symmetrize(&m);
        let eig = SymmetricEigen::new(values.clone());
        if eig.eigenvalues.iter().any(|&l| !(l > T::zero())) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { values })
    }

    /// Symmetrizes `m` and raises eigenvalues to the regularization floor.
    pub fn regularized(m: DMatrix<T>) -> Result<Self> {
        Self::with_regularization(m, Regularization::Floor)
    }

    pub fn with_regularization(m: DMatrix<T>, reg: Regularization) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let values = symmetrize(&m);
        let eig = SymmetricEigen::new(values.clone());
        let lambda_max = eig.eigenvalues.max();
        let lambda_min = eig.eigenvalues.min();
        let floor = eigen_floor(lambda_max);
        if lambda_min >= floor && lambda_min.is_finite() {
            return Ok(Self { values });
        }
        match reg {
            Regularization::None => Err(Error::RankDeficient {
                min_eigenvalue: lambda_min.as_f64(),
            }),
            Regularization::Floor => {
                let floored = eig.eigenvalues.map(|l| l.max(floor));
                Ok(Self {
                    values: reconstruct(&eig.eigenvectors, &floored),
                })
            }
        }
    }

    /// Wraps a matrix already known to be SPD. Only symmetrizes.
    pub(crate) fn from_trusted(m: DMatrix<T>) -> Self {
        Self { values: symmetrize(&m) }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            values: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &[T]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn eigenvalues(&self) -> DVector<T> {
        SymmetricEigen::new(self.values.clone()).eigenvalues
    }

    fn map_eigen(&self, f: impl Fn(T) -> T) -> DMatrix<T> {
        let eig = SymmetricEigen::new(self.values.clone());
        reconstruct(&eig.eigenvectors, &eig.eigenvalues.map(f))
    }

    pub fn sqrt(&self) -> SpdMatrix<T> {
        Self::from_trusted(self.map_eigen(|l| l.sqrt()))
    }

    /// The unique symmetric `M` with `M Σ M = I`.
    pub fn inv_sqrt(&self) -> SpdMatrix<T> {
        Self::from_trusted(self.map_eigen(|l| T::one() / l.sqrt()))
    }

    pub fn inverse(&self) -> SpdMatrix<T> {
        Self::from_trusted(self.map_eigen(|l| T::one() / l))
    }

    /// Matrix logarithm; the result is symmetric but not SPD in general.
    pub fn log(&self) -> DMatrix<T> {
        self.map_eigen(|l| l.ln())
    }

    /// Matrix exponential of a symmetric matrix.
    pub fn exp_sym(m: &DMatrix<T>) -> SpdMatrix<T> {
        let eig = SymmetricEigen::new(symmetrize(m));
        Self::from_trusted(reconstruct(&eig.eigenvectors, &eig.eigenvalues.map(|l| l.exp())))
    }

    pub fn scale(&self, c: T) -> SpdMatrix<T> {
        Self::from_trusted(&self.values * c)
    }

    /// `Wᵀ Σ W`.
    pub fn congruence(&self, w: &DMatrix<T>) -> SpdMatrix<T> {
        Self::from_trusted(w.transpose() * &self.values * w)
    }

    /// `W Σ W` for symmetric `W` (whitening by a symmetric factor).
    pub fn whiten(&self, w: &SpdMatrix<T>) -> SpdMatrix<T> {
        Self::from_trusted(&w.values * &self.values * &w.values)
    }
}

/// Sample covariance `X Xᵀ / (T − 1)` of an `N × T` epoch.
pub fn covariance<T: Scalar>(epoch: &DMatrix<T>) -> Result<SpdMatrix<T>> {
    covariance_with(epoch, Regularization::Floor)
}

pub fn covariance_with<T: Scalar>(epoch: &DMatrix<T>, reg: Regularization) -> Result<SpdMatrix<T>> {
    let samples = epoch.ncols();
    if samples < 2 {
        return Err(Error::TooShort { len: samples, min: 1 });
    }
    let c = epoch * epoch.transpose() / T::from_usize_lossy(samples - 1);
    SpdMatrix::with_regularization(c, reg)
}

fn check_dims<T: Scalar>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// `sqrt(Σ log² λ)` over eigenvalues of a symmetric positive matrix.
fn log_eigen_norm<T: Scalar>(m: DMatrix<T>) -> T {
    let tiny = T::lit(T::tiny());
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|&l| {
            let v = l.max(tiny).ln();
            v * v
        })
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

/// Affine-invariant distance with a precomputed `a^{-1/2}`.
pub fn riemannian_from_isqrt<T: Scalar>(a_isqrt: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<T> {
    check_dims(a_isqrt, b)?;
    Ok(log_eigen_norm(b.whiten(a_isqrt).into_inner()))
}

pub fn distance<T: Scalar>(a: &SpdMatrix<T>, b: &SpdMatrix<T>, kind: DistanceKind) -> Result<T> {
    check_dims(a, b)?;
    Ok(match kind {
        DistanceKind::Riemannian => log_eigen_norm(b.whiten(&a.inv_sqrt()).into_inner()),
        DistanceKind::Euclidean => (a.values() - b.values()).norm(),
        DistanceKind::DiagEuclidean => (a.values().diagonal() - b.values().diagonal()).norm(),
    })
}

/// Outcome of the Karcher-mean iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct KarcherMean<T: Scalar> {
    pub mean: SpdMatrix<T>,
    pub iterations: usize,
    pub gradient_norm: T,
    pub converged: bool,
}

impl<T: Scalar> KarcherMean<T> {
    /// The mean, or [`Error::NoConvergence`] when the iteration cap was hit.
    pub fn into_result(self) -> Result<SpdMatrix<T>> {
        if self.converged {
            Ok(self.mean)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                gradient_norm: self.gradient_norm.as_f64(),
            })
        }
    }
}

pub fn karcher_tolerance<T: Scalar>() -> T {
    T::lit(KARCHER_TOL.max(100.0 * T::epsilon_f64()))
}

fn check_all_dims<T: Scalar>(sigmas: &[SpdMatrix<T>]) -> Result<usize> {
    let first = sigmas.first().ok_or(Error::EmptyInput)?;
    for s in sigmas {
        check_dims(first, s)?;
    }
    Ok(first.dim())
}

pub fn arithmetic_mean<T: Scalar>(sigmas: &[SpdMatrix<T>]) -> Result<SpdMatrix<T>> {
    let n = check_all_dims(sigmas)?;
    let sum = sigmas
        .iter()
        .fold(DMatrix::<T>::zeros(n, n), |acc, s| acc + s.values());
    Ok(SpdMatrix::from_trusted(sum / T::from_usize_lossy(sigmas.len())))
}

/// Mean of `Log(G^{-1/2} Σ_i G^{-1/2})`: the negative Riemannian gradient of
/// the dispersion at `G`, in whitened coordinates.
fn tangent_mean<T: Scalar>(g_isqrt: &SpdMatrix<T>, sigmas: &[SpdMatrix<T>]) -> DMatrix<T> {
    let n = g_isqrt.dim();
    let sum = sigmas
        .iter()
        .fold(DMatrix::<T>::zeros(n, n), |acc, s| acc + s.whiten(g_isqrt).log());
    sum / T::from_usize_lossy(sigmas.len())
}

/// Karcher (geometric) mean under the affine-invariant metric.
///
/// Starts at the arithmetic mean and iterates
/// `G ← G^{1/2} exp(τ M) G^{1/2}`. When the gradient norm grows, the step is
/// undone and `τ` halved.
pub fn geometric_mean<T: Scalar>(sigmas: &[SpdMatrix<T>]) -> Result<KarcherMean<T>> {
    geometric_mean_with(sigmas, karcher_tolerance::<T>(), KARCHER_MAX_ITER)
}

pub fn geometric_mean_with<T: Scalar>(
    sigmas: &[SpdMatrix<T>],
    tol: T,
    max_iter: usize,
) -> Result<KarcherMean<T>> {
    check_all_dims(sigmas)?;
    let mut g = arithmetic_mean(sigmas)?;
    let mut g_sqrt = g.sqrt();
    let mut m = tangent_mean(&g.inv_sqrt(), sigmas);
    let mut norm = m.norm();
    let mut tau = T::one();
    let mut iterations = 0;
    while norm >= tol && iterations < max_iter {
        iterations += 1;
        let step = SpdMatrix::exp_sym(&(&m * tau));
        let candidate = step.whiten(&g_sqrt);
        let c_isqrt = candidate.inv_sqrt();
        let c_m = tangent_mean(&c_isqrt, sigmas);
        let c_norm = c_m.norm();
        if c_norm > norm {
            tau *= T::lit(0.5);
            continue;
        }
        g = candidate;
        g_sqrt = g.sqrt();
        m = c_m;
        norm = c_norm;
    }
    Ok(KarcherMean {
        mean: g,
        iterations,
        gradient_norm: norm,
        converged: norm < tol,
    })
}

/// Center of a set under `kind`: the Karcher mean for the Riemannian metric,
/// the arithmetic mean otherwise (the Fréchet mean of both Euclidean kinds).
pub fn barycenter<T: Scalar>(sigmas: &[SpdMatrix<T>], kind: DistanceKind) -> Result<KarcherMean<T>> {
    match kind {
        DistanceKind::Riemannian => geometric_mean(sigmas),
        DistanceKind::Euclidean | DistanceKind::DiagEuclidean => Ok(KarcherMean {
            mean: arithmetic_mean(sigmas)?,
            iterations: 0,
            gradient_norm: T::zero(),
            converged: true,
        }),
    }
}
