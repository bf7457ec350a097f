//! Dense complex linear algebra helpers shared across the crate.
//!
//! Inversion and solving go through LU with partial pivoting. A cheap
//! 1-norm condition estimate is attached to failures so callers can report
//! which factor went singular (or effectively singular) and how badly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Inversions with an estimated condition number above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix `{context}` is singular (estimated 1-norm condition {condition:.3e})")]
    Singular { context: String, condition: f64 },
    #[error(
        "dimension mismatch in `{context}`: {rows}x{cols} against {expected_rows}x{expected_cols}"
    )]
    DimensionMismatch {
        context: String,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
}

/// 1-norm (maximum absolute column sum) of a complex matrix.
pub fn norm_1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm of a complex matrix.
pub fn norm_fro(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖` (plain `‖a − b‖` if `b = 0`).
pub fn rel_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let denom = norm_fro(b);
    let diff = norm_fro(&(a - b));
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

/// Inverts `m`, failing with a condition estimate when the factorization
/// breaks down or the 1-norm condition estimate exceeds [`MAX_CONDITION`].
///
/// `context` names the matrix in error messages, e.g. `"U - Γ_S S_SS"`.
pub fn invert(context: &str, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::DimensionMismatch {
            context: context.to_string(),
            rows: m.nrows(),
            cols: m.ncols(),
            expected_rows: m.nrows(),
            expected_cols: m.nrows(),
        });
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| LinalgError::Singular {
            context: context.to_string(),
            condition: f64::INFINITY,
        })?;
    let condition = norm_1(m) * norm_1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(LinalgError::Singular {
            context: context.to_string(),
            condition,
        });
    }
    Ok(inv)
}

/// Complex identity matrix of size `n`.
pub fn identity(n: usize) -> DMatrix<Complex64> {
    DMatrix::identity(n, n)
}

/// Diagonal complex matrix from a slice.
pub fn diag(entries: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invert_roundtrips_well_conditioned_matrix() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 1.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(-0.3, 0.2),
                Complex64::new(1.5, -0.4),
            ],
        );
        let inv = invert("m", &m).unwrap();
        let id = &m * &inv;
        assert!(rel_diff(&id, &identity(2)) < 1e-14);
    }

    #[test]
    fn invert_reports_condition_for_singular_input() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        let err = invert("degenerate", &m).unwrap_err();
        match err {
            LinalgError::Singular { context, .. } => assert_eq!(context, "degenerate"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_size_matrices_pass_through() {
        let m = DMatrix::<Complex64>::zeros(0, 0);
        let inv = invert("empty", &m).unwrap();
        assert_eq!(inv.nrows(), 0);
    }
}
