//! Dense matrix kernel: rank decisions, kernel projectors, inverses and the
//! matrix exponential. Every rank decision goes through [`numerical_rank`] so the
//! whole pipeline shares one cutoff.

use nalgebra::SVD;

use crate::error::{DaeError, Result};
use crate::tolerance::TolerancePolicy;
use crate::{RealMatrix, RealVector};

/// Singular values sorted in descending order.
pub fn singular_values(z: &RealMatrix) -> RealVector {
    if z.is_empty() {
        return RealVector::zeros(0);
    }
    SVD::new(z.clone(), false, false).singular_values
}

fn rank_from_singular_values(sv: &RealVector, tol: &TolerancePolicy) -> usize {
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    let cutoff = tol.rank_rel_tol * sigma_max;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Number of singular values strictly above `rank_rel_tol * sigma_max`.
pub fn numerical_rank(z: &RealMatrix, tol: &TolerancePolicy) -> usize {
    rank_from_singular_values(&singular_values(z), tol)
}

/// Orthogonal projector `K2 K2^T` onto the right null space of a square `z`,
/// where `K2` holds the right singular vectors of the numerically zero
/// singular values. Returns the zero matrix when `z` has full numerical rank.
pub fn orthogonal_null_projector(z: &RealMatrix, tol: &TolerancePolicy) -> Result<RealMatrix> {
    if !z.is_square() {
        return Err(DaeError::dims(
            "orthogonal_null_projector",
            "square matrix",
            format!("{}x{}", z.nrows(), z.ncols()),
        ));
    }
    null_space_projector(z, tol)
}

/// Orthogonal projector onto `Ker(z)` for a matrix of any shape.
pub fn null_space_projector(z: &RealMatrix, tol: &TolerancePolicy) -> Result<RealMatrix> {
    let n = z.ncols();
    if z.nrows() == 0 {
        return Ok(RealMatrix::identity(n, n));
    }
    let svd = SVD::new(z.clone(), false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| DaeError::numerical("SVD did not return right singular vectors"))?;
    let rank = rank_from_singular_values(&svd.singular_values, tol);
    if rank == 0 {
        return Ok(RealMatrix::identity(n, n));
    }
    if rank == n {
        return Ok(RealMatrix::zeros(n, n));
    }
    // `SVD::new` sorts singular values in descending order, so the trailing
    // rows of V^T span the kernel whenever V is complete.
    if v_t.nrows() == n {
        let k2_t = v_t.rows(rank, n - rank);
        Ok(k2_t.transpose() * k2_t)
    } else {
        // Wide matrix: thin SVD only returns the row space.
        let k1_t = v_t.rows(0, rank);
        Ok(RealMatrix::identity(n, n) - k1_t.transpose() * k1_t)
    }
}

/// `e^{M t}` by scaling and squaring with Pade approximants of degree
/// 3 to 13 (Al-Mohy and Higham, 2009). The backward error of the rational
/// approximant is bounded by the unit roundoff. `t == 0` yields the identity exactly.
pub fn matrix_exponential(m: &RealMatrix, t: f64) -> Result<RealMatrix> {
    if !m.is_square() {
        return Err(DaeError::dims(
            "matrix_exponential",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if !t.is_finite() {
        return Err(DaeError::InvalidArgument(format!("time {t} is not finite")));
    }
    let n = m.nrows();
    if t == 0.0 || n == 0 {
        return Ok(RealMatrix::identity(n, n));
    }
    let scaled = m * t;
    if scaled.iter().all(|v| *v == 0.0) {
        return Ok(RealMatrix::identity(n, n));
    }
    let result = scaled.exp();
    ensure_finite(&result, "exp(Mt)")?;
    Ok(result)
}

/// Inverse of a square matrix with full numerical rank.
///
/// Fails with [`DaeError::SingularMatrix`] when the rank test fails or when the
/// residual `||M M^-1 - I||_F` exceeds `zero_abs_tol` scaled by the condition number.
pub fn solve_inverse(m: &RealMatrix, name: &'static str, tol: &TolerancePolicy) -> Result<RealMatrix> {
    if !m.is_square() {
        return Err(DaeError::dims(
            "solve_inverse",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let n = m.nrows();
    let sv = singular_values(m);
    if rank_from_singular_values(&sv, tol) < n {
        return Err(DaeError::SingularMatrix { name });
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or(DaeError::SingularMatrix { name })?;
    let sigma_max = sv.max();
    let sigma_min = sv.min();
    let cond = sigma_max / sigma_min;
    let residual = (m * &inv - RealMatrix::identity(n, n)).norm();
    if !residual.is_finite() || residual > tol.zero_abs_tol * cond.max(1.0) * n as f64 {
        return Err(DaeError::SingularMatrix { name });
    }
    Ok(inv)
}

pub fn is_nonsingular(m: &RealMatrix, tol: &TolerancePolicy) -> bool {
    m.is_square() && numerical_rank(m, tol) == m.nrows()
}

pub(crate) fn ensure_finite(m: &RealMatrix, name: &'static str) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(DaeError::NonFinite { name, row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Largest absolute entry; zero for empty matrices.
pub fn max_abs(m: &RealMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Block-diagonal assembly `[[a, 0], [0, b]]`.
pub fn block_diag(a: &RealMatrix, b: &RealMatrix) -> RealMatrix {
    let mut out = RealMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Vertical stack of equally wide blocks.
pub fn vstack(blocks: &[&RealMatrix]) -> RealMatrix {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = RealMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: column counts differ");
        out.view_mut((offset, 0), b.shape()).copy_from(*b);
        offset += b.nrows();
    }
    out
}
