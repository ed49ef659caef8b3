//! Dense complex Hermitian kernels.
//!
//! Everything downstream works with small (at most a few dozen rows) dense
//! complex matrices, so these wrap `nalgebra` and add the conventions the
//! solver relies on: inputs are Hermitian-symmetrized before every
//! decomposition, eigenvalues come back sorted in descending order, and
//! log-determinants are in bits (base 2).

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used for channels and covariances.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Eigenvalues below this fraction of the largest one count as zero when
/// determining the rank of a PSD matrix.
pub const RANK_RELATIVE_CUTOFF: f64 = 1e-12;

const EIG_MAX_ITERATIONS: usize = 10_000;

/// Eigendecomposition `A = U diag(d) U^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Real eigenvalues, descending.
    pub eigenvalues: DVector<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.eigenvalues.map(|x| Complex64::new(x, 0.0));
        &self.eigenvectors * ComplexMatrix::from_diagonal(&d) * self.eigenvectors.adjoint()
    }

    /// Number of eigenvalues above `RANK_RELATIVE_CUTOFF` times the largest.
    pub fn significant_rank(&self) -> usize {
        significant_rank(self.eigenvalues.as_slice())
    }
}

/// Counts entries of a descending eigenvalue list that are strictly above the
/// relative rank cutoff. An all-zero (or empty) list has rank 0.
pub fn significant_rank(descending: &[f64]) -> usize {
    let Some(&largest) = descending.first() else {
        return 0;
    };
    if largest <= 0.0 {
        return 0;
    }
    let floor = RANK_RELATIVE_CUTOFF * largest;
    descending.iter().take_while(|&&x| x > floor).count()
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Builds a real diagonal matrix as a complex one.
pub fn real_diagonal(values: &[f64]) -> ComplexMatrix {
    let d = DVector::from_iterator(values.len(), values.iter().map(|&x| Complex64::new(x, 0.0)));
    ComplexMatrix::from_diagonal(&d)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Real part of the trace.
pub fn trace_re(a: &ComplexMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_square_finite(a: &ComplexMatrix, what: &'static str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
///
/// The input is symmetrized first, so small round-off asymmetry is ignored.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<HermitianEig> {
    check_square_finite(a, "eig_hermitian input")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEig {
            eigenvalues: DVector::zeros(0),
            eigenvectors: zeros(0, 0),
        });
    }
    let sym = hermitian_part(a);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITERATIONS)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// `log2 det(A)` for Hermitian positive definite `A`, via Cholesky.
pub fn logdet_pd(a: &ComplexMatrix) -> Result<f64> {
    check_square_finite(a, "logdet_pd input")?;
    let sym = hermitian_part(a);
    match Cholesky::new(sym.clone()) {
        Some(chol)
            if chol
                .l_dirty()
                .diagonal()
                .iter()
                .all(|z| z.re > 0.0 && z.re.is_finite() && z.im.abs() <= 1e-12 * z.re) =>
        {
            let l = chol.l_dirty();
            // det(A) = prod |L_kk|^2
            Ok(2.0 * (0..l.nrows()).map(|k| l[(k, k)].re.log2()).sum::<f64>())
        }
        _ => {
            let min_eigenvalue = eig_hermitian(&sym)?
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            Err(Error::NotPositiveDefinite { min_eigenvalue })
        }
    }
}

/// `A^{-1/2}` for Hermitian positive definite `A`.
pub fn inv_sqrt_pd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(a)?;
    let n = eig.eigenvalues.len();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let min_eigenvalue = eig.eigenvalues[n - 1];
    if !(min_eigenvalue > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    let scaled: Vec<f64> = eig.eigenvalues.iter().map(|&d| 1.0 / d.sqrt()).collect();
    Ok(hermitian_part(
        &(&eig.eigenvectors * real_diagonal(&scaled) * eig.eigenvectors.adjoint()),
    ))
}

/// `A^{1/2}` for Hermitian positive semidefinite `A` (negative round-off
/// eigenvalues are clamped to zero).
pub fn sqrt_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(a)?;
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&d| d.max(0.0).sqrt()).collect();
    Ok(hermitian_part(
        &(&eig.eigenvectors * real_diagonal(&roots) * eig.eigenvectors.adjoint()),
    ))
}

/// True iff the smallest eigenvalue of the symmetrized input is `>= -tol`.
pub fn is_psd(a: &ComplexMatrix, tol: f64) -> Result<bool> {
    let eig = eig_hermitian(a)?;
    Ok(eig.eigenvalues.iter().all(|&d| d >= -tol))
}
