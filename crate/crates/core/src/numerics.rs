//! Dense complex linear algebra: Kronecker products, unitaries generated by
//! Hermitian matrices, and linear solves with a conditioning guard.
//!
//! Matrices are plain `nalgebra` dynamic matrices. Tensor products follow a
//! single ordering convention throughout the crate: the first factor of a
//! [`kron`] is the most significant subsystem.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Largest accepted entrywise deviation `|h - h†|`, relative to `max(1, max|h|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Unitarity and residual tolerance for double-precision work at dimension ≲ 200.
pub const UNITARY_TOL: f64 = 1e-10;
/// Condition-number estimate above which a system is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Builds a matrix from row-major entries.
pub fn from_rows(rows: usize, cols: usize, entries: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(rows, cols, entries)
}

/// Kronecker product `a ⊗ b`; `a` indexes the most significant subsystem.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a sequence of factors, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(identity(1), |acc, f| kron(&acc, f))
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `max |h - h†|` entrywise.
pub fn hermiticity_deviation(h: &ComplexMatrix) -> f64 {
    max_abs_diff(h, &h.adjoint())
}

/// `max |U†U - I|` entrywise.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.ncols()))
}

/// Commutator `[a, b] = ab - ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn check_hermitian(h: &ComplexMatrix) -> Result<()> {
    check_square(h)?;
    if !is_finite(h) {
        return Err(Error::NonFinite);
    }
    let deviation = hermiticity_deviation(h);
    if deviation > HERMITIAN_TOL * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        check_hermitian(h)?;
        let sym = (h + h.adjoint()).scale(0.5);
        let eig = sym.symmetric_eigen();
        let n = h.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = ComplexMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
        Ok(Self { values, vectors })
    }

    /// `V f(Λ) V†` for a scalar function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let weights: Vec<Complex64> = self.values.iter().map(|&lambda| f(lambda)).collect();
        let n = weights.len();
        let scaled = ComplexMatrix::from_fn(n, n, |r, k| self.vectors[(r, k)] * weights[k]);
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i h t)`.
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        self.apply_fn(|lambda| Complex64::from_polar(1.0, -lambda * t))
    }
}

/// `exp(-i h t)` for Hermitian `h`, via eigendecomposition.
pub fn unitary_from_hermitian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("duration {t} is not finite")));
    }
    Ok(HermitianEigen::new(h)?.propagator(t))
}

fn one_norm(m: &ComplexMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a·x = b` by LU with partial pivoting.
///
/// Rejects systems whose 1-norm condition estimate exceeds [`MAX_CONDITION`]
/// and verifies the residual `max|a·x − b| ≤ 1e-10·max(1, max|b|)`.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    let n = check_square(a)?;
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    if !is_finite(a) || b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }

    let lu = a.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(a) * one_norm(&inverse);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular { condition });
    }

    let mut x = lu.solve(b).ok_or(Error::Singular { condition })?;
    // one step of iterative refinement
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }

    let residual = (a * &x - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let bound = UNITARY_TOL * scale;
    if residual > bound {
        return Err(Error::ResidualTooLarge { residual, bound });
    }
    Ok(x)
}
