//! Small fixed-size linear algebra helpers: covariance repair and guarded
//! inversion with a condition-number policy.

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen};

/// Inverses whose 1-norm condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Symmetric-PSD repair and guarded inversion for the matrix sizes the
/// filters use.
pub trait SquareMatrix: Sized + Copy {
    const DIM: usize;
    /// `(M + Mᵀ) / 2` with negative eigenvalues floored at zero.
    fn symmetrize_psd(&self) -> Self;
    /// The inverse, or the 1-norm condition number (possibly infinite) when
    /// it exceeds [`MAX_CONDITION`].
    fn guarded_inverse(&self) -> Result<Self, f64>;
    /// Smallest eigenvalue of the symmetric part; NaN when it cannot be computed.
    fn min_eigenvalue(&self) -> f64;
}

macro_rules! impl_square_matrix {
    ($ty:ty, $dim:expr) => {
        impl SquareMatrix for $ty {
            const DIM: usize = $dim;

            fn symmetrize_psd(&self) -> Self {
                let sym = (self + self.transpose()) * 0.5;
                if sym.cholesky().is_some() || !sym.iter().all(|v| v.is_finite()) {
                    return sym;
                }
                let eig = SymmetricEigen::new(sym);
                if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
                    return sym;
                }
                let floored = eig.eigenvalues.map(|v| v.max(0.0));
                let rebuilt = eig.eigenvectors
                    * <$ty>::from_diagonal(&floored)
                    * eig.eigenvectors.transpose();
                (rebuilt + rebuilt.transpose()) * 0.5
            }

            fn guarded_inverse(&self) -> Result<Self, f64> {
                let inv = self.try_inverse().ok_or(f64::INFINITY)?;
                let cond = one_norm(self) * one_norm(&inv);
                if !cond.is_finite() || cond > MAX_CONDITION {
                    return Err(cond);
                }
                Ok(inv)
            }

            fn min_eigenvalue(&self) -> f64 {
                let sym = (self + self.transpose()) * 0.5;
                // Bounded iterations: non-finite input yields NaN rather than a hang.
                SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
                    .map_or(f64::NAN, |e| e.eigenvalues.min())
            }
        }
    };
}

impl_square_matrix!(Matrix2<f64>, 2);
impl_square_matrix!(Matrix3<f64>, 3);
impl_square_matrix!(Matrix4<f64>, 4);

fn one_norm<const D: usize>(m: &nalgebra::SMatrix<f64, D, D>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Symmetrize a square matrix and floor its negative eigenvalues at zero.
///
/// Idempotent (up to rounding) on symmetric PSD input.
pub fn symmetrize_psd<M: SquareMatrix>(m: &M) -> M {
    m.symmetrize_psd()
}

/// Symmetric within `sym_tol` and no eigenvalue below `-eig_tol`.
pub fn is_symmetric_psd<M>(m: &M, sym_tol: f64, eig_tol: f64) -> bool
where
    M: SquareMatrix + std::ops::Index<(usize, usize), Output = f64>,
{
    for i in 0..M::DIM {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > sym_tol {
                return false;
            }
        }
    }
    m.min_eigenvalue() >= -eig_tol
}

/// Symmetric square root of a 4x4 PSD matrix; negative eigenvalues count as zero.
pub(crate) fn psd_sqrt4(m: &Matrix4<f64>) -> Matrix4<f64> {
    let sym = (m + m.transpose()) * 0.5;
    if !sym.iter().all(|v| v.is_finite()) {
        return Matrix4::from_element(f64::NAN);
    }
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix4::from_diagonal(&roots) * eig.eigenvectors.transpose()
}
