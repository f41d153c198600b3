//! The consistent matrix `Gamma` whose kernel is the space of consistent
//! initial states, and the initial-star check against it.

use crate::decoupling::DecoupledSystem;
use crate::error::{DaeError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{null_space_projector, vstack};
use crate::starset::StarSet;
use crate::tolerance::TolerancePolicy;
use crate::RealMatrix;

/// Result of checking `Gamma V(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyCertificate {
    pub gamma: RealMatrix,
    /// `|Gamma V(0)|_max`.
    pub max_residual: f64,
    pub consistent: bool,
    /// Basis column attaining `max_residual`.
    pub worst_column: usize,
    /// Row block of `Gamma` (one per constraint subsystem) attaining it.
    pub worst_block: usize,
}

/// Stacks one `n x n` block per algebraic-constraint subsystem:
///
/// * index 1: `Q0 - N2 P0`
/// * index 2: `P0 Q1 - N2 P0 P1`, `Q0 - (N3 + L3 N2 N1) P0 P1`
/// * index 3: `P0 P1 Q2 - N2 P0 P1 P2`, `P0 Q1 - (N3 + L3 N2 N1) P0 P1 P2`,
///   `Q0 - (N4 + L4 (N3 N1 + L3 N2 N1^2) + Z4 N2 N1) P0 P1 P2`
///
/// Each block says "subsystem `i` equals the value dictated by `x1`".
pub fn build_consistent_matrix(dec: &DecoupledSystem) -> RealMatrix {
    let sp = &dec.subsystem_projectors;
    let x1 = &sp[0];
    let n1 = &dec.n[0];
    let blocks: Vec<RealMatrix> = match dec.mu {
        1 => vec![&sp[1] - &dec.n[1] * x1],
        2 => {
            let l3 = dec.l3.as_ref().expect("index 2 has L3");
            let n2n1 = &dec.n[1] * n1;
            vec![
                &sp[1] - &dec.n[1] * x1,
                &sp[2] - (&dec.n[2] + l3 * &n2n1) * x1,
            ]
        }
        _ => {
            let (l3, l4, z4) = (
                dec.l3.as_ref().expect("index 3 has L3"),
                dec.l4.as_ref().expect("index 3 has L4"),
                dec.z4.as_ref().expect("index 3 has Z4"),
            );
            let n2n1 = &dec.n[1] * n1;
            let x3_coeff = &dec.n[2] + l3 * &n2n1;
            let x4_coeff = &dec.n[3] + l4 * (&dec.n[2] * n1 + l3 * &n2n1 * n1) + z4 * &n2n1;
            vec![
                &sp[1] - &dec.n[1] * x1,
                &sp[2] - x3_coeff * x1,
                &sp[3] - x4_coeff * x1,
            ]
        }
    };
    let refs: Vec<&RealMatrix> = blocks.iter().collect();
    vstack(&refs)
}

/// Checks `|Gamma V(0)|_max <= consistency_tol`. Inconsistency is reported in
/// the certificate, not as an error.
pub fn check_initial_star(gamma: &RealMatrix, theta0: &StarSet, tol: &TolerancePolicy) -> Result<ConsistencyCertificate> {
    check_basis(gamma, theta0.basis(), tol)
}

/// [`check_initial_star`] on a bare basis matrix.
pub fn check_basis(gamma: &RealMatrix, basis: &RealMatrix, tol: &TolerancePolicy) -> Result<ConsistencyCertificate> {
    let n = basis.nrows();
    if gamma.ncols() != n {
        return Err(DaeError::dims("consistent matrix columns", n, gamma.ncols()));
    }
    let residual = gamma * basis;
    let mut max_residual = 0.0_f64;
    let (mut worst_row, mut worst_column) = (0, 0);
    for c in 0..residual.ncols() {
        for r in 0..residual.nrows() {
            let v = residual[(r, c)].abs();
            if v > max_residual {
                max_residual = v;
                worst_row = r;
                worst_column = c;
            }
        }
    }
    Ok(ConsistencyCertificate {
        gamma: gamma.clone(),
        max_residual,
        consistent: max_residual <= tol.consistency_tol,
        worst_column,
        worst_block: worst_row.checked_div(n).unwrap_or(0),
    })
}

/// `k` seeded random columns projected into `Ker(Gamma)`, a consistent
/// starting basis for benchmarks without a reference initial set.
pub fn random_consistent_basis(gamma: &RealMatrix, k: usize, seed: u64, tol: &TolerancePolicy) -> Result<RealMatrix> {
    if k == 0 {
        return Err(DaeError::InvalidArgument("generated basis needs at least one column".into()));
    }
    let proj = null_space_projector(gamma, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = RealMatrix::from_fn(gamma.ncols(), k, |_, _| rng.random_range(-1.0..1.0));
    Ok(proj * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoupling::Decomposition;
    use crate::linalg::max_abs;
    use crate::model::{build_rotating_masses, rotating_masses_initial_star, to_autonomous, AutonomousDae};
    use nalgebra::dmatrix;

    fn rotating_masses() -> Decomposition {
        let (sys, inputs) = build_rotating_masses();
        Decomposition::compute(&to_autonomous(&sys, &inputs).unwrap(), &TolerancePolicy::default()).unwrap()
    }

    #[test]
    fn index_one_uncoupled_is_q0() {
        // E = diag(1, 0), A = diag(-1, 1): the constraint x2 = 0 ignores x1, so N2 P0 = 0.
        let sys = AutonomousDae::from_pencil(dmatrix![1.0, 0.0; 0.0, 0.0], dmatrix![-1.0, 0.0; 0.0, 1.0]).unwrap();
        let dec = Decomposition::compute(&sys, &TolerancePolicy::default()).unwrap();
        assert!(max_abs(&(dec.decoupled.n_coeff(2) * &dec.chain.p[0])) < 1e-15);
        assert!(max_abs(&(&dec.gamma - &dec.chain.q[0])) < 1e-15);
    }

    #[test]
    fn rotating_masses_gamma_shape_and_formula() {
        let dec = rotating_masses();
        let d = &dec.decoupled;
        let (p, q) = (&dec.chain.p, &dec.chain.q);
        let expected = vstack(&[&(&p[0] * &q[1]), &(&q[0] - d.n_coeff(3) * &p[0] * &p[1])]);
        assert_eq!(dec.gamma.shape(), (12, 6));
        assert!(max_abs(&(&dec.gamma - expected)) < 1e-12);
    }

    #[test]
    fn builtin_initial_star_is_consistent() {
        let dec = rotating_masses();
        let tol = TolerancePolicy::default();
        let cert = check_initial_star(&dec.gamma, &rotating_masses_initial_star(), &tol).unwrap();
        assert!(cert.consistent, "residual {}", cert.max_residual);
    }

    #[test]
    fn perturbed_initial_star_is_inconsistent() {
        let dec = rotating_masses();
        let tol = TolerancePolicy::default();
        let star = rotating_masses_initial_star();
        let mut v = star.basis().clone();
        v[(2, 0)] += 1.0;
        let cert = check_basis(&dec.gamma, &v, &tol).unwrap();
        assert!(!cert.consistent);
        assert!(cert.max_residual > 0.1);
        assert_eq!(cert.worst_column, 0);
    }

    #[test]
    fn zero_basis_is_consistent() {
        let dec = rotating_masses();
        let cert = check_basis(&dec.gamma, &RealMatrix::zeros(6, 2), &TolerancePolicy::default()).unwrap();
        assert!(cert.consistent);
        assert_eq!(cert.max_residual, 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let dec = rotating_masses();
        assert!(check_basis(&dec.gamma, &RealMatrix::zeros(4, 2), &TolerancePolicy::default()).is_err());
    }
}
