//! Dense complex linear algebra on gate-local Hilbert spaces: exponential,
//! principal logarithm, spectral norm, commutators and Pauli expansions.

mod eigen;
mod matrix;
mod pauli;

pub use eigen::{hermitian_eigen, reassemble, unitary_eigen, HermitianEigen, UnitaryEigen};
pub use matrix::{ComplexMatrix, C64, I, ONE, ZERO};
pub use pauli::{all_strings, pauli_decompose, pauli_sum, Pauli, PauliString, COEFF_CUTOFF};

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest matrix dimension handled by the gate-local routines (two qubits
/// need 4; the headroom covers four-qubit operators).
pub const MAX_LOCAL_DIM: usize = 16;

/// Default distance (radians) an eigenphase must keep from the branch cut at ±π.
pub const DEFAULT_BRANCH_TOL: f64 = 1e-6;

fn check_local(a: &ComplexMatrix) -> Result<usize> {
    let n = a.ensure_square()?;
    if n > MAX_LOCAL_DIM {
        return Err(Error::DimensionTooLarge {
            dim: n,
            max: MAX_LOCAL_DIM,
        });
    }
    Ok(n)
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn mat_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = check_local(a)?;
    let norm = a.norm_one();
    if !norm.is_finite() {
        return Err(Error::NonFinite("matrix exponential argument".into()));
    }
    let mut squarings = 0u32;
    let mut s = norm;
    while s > 0.25 {
        s *= 0.5;
        squarings += 1;
    }
    let scaled = a.scale_real(0.5f64.powi(squarings as i32));

    // 0.25^20 / 20! is far below double precision
    let mut result = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=20 {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        result = &result + &term;
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// Principal logarithm of a unitary: the anti-Hermitian `X` with eigenphases
/// in `(-π, π]` and `exp(X) = U`. Uses [`DEFAULT_BRANCH_TOL`].
pub fn principal_log(u: &ComplexMatrix) -> Result<ComplexMatrix> {
    principal_log_with_tol(u, DEFAULT_BRANCH_TOL)
}

/// [`principal_log`] with an explicit branch-cut guard. Any eigenphase within
/// `branch_tol` of ±π is rejected, since the branch choice there is decided by
/// round-off.
pub fn principal_log_with_tol(u: &ComplexMatrix, branch_tol: f64) -> Result<ComplexMatrix> {
    check_local(u)?;
    let deviation = u.unitarity_deviation();
    if deviation > 1e-8 {
        return Err(Error::NotUnitary { deviation });
    }
    let eig = unitary_eigen(u)?;
    let mut logs = Vec::with_capacity(eig.values.len());
    for z in &eig.values {
        let phase = z.arg();
        if PI - phase.abs() < branch_tol {
            return Err(Error::BranchAmbiguity {
                phase,
                tol: branch_tol,
            });
        }
        logs.push(C64::new(0.0, phase));
    }
    let x = reassemble(&eig.vectors, &logs);
    // restore exact anti-Hermitian symmetry
    Ok((&x - &x.adjoint()).scale_real(0.5))
}

/// Logarithm in the special unitary group: `U` is first rescaled by the
/// principal root `det(U)^{-1/d}`, then the principal logarithm is taken.
/// Returns `(X, phi)` with `U = e^{i phi} exp(X)` and `Tr X = 0` up to a multiple of 2πi/d.
pub fn su_log(u: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    su_log_with_tol(u, DEFAULT_BRANCH_TOL)
}

pub fn su_log_with_tol(u: &ComplexMatrix, branch_tol: f64) -> Result<(ComplexMatrix, f64)> {
    let n = check_local(u)?;
    let phi = u.determinant()?.arg() / n as f64;
    let normalized = u.scale(C64::from_polar(1.0, -phi));
    let x = principal_log_with_tol(&normalized, branch_tol)?;
    Ok((x, phi))
}

/// Spectral norm (largest singular value), from the eigenvalues of `A†A`.
pub fn op_norm(a: &ComplexMatrix) -> Result<f64> {
    check_local(a)?;
    let gram = &a.adjoint() * a;
    let eig = hermitian_eigen(&gram)?;
    Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// `AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.ensure_square()?;
    let m = b.ensure_square()?;
    if n != m {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m,
        });
    }
    Ok(&(a * b) - &(b * a))
}
