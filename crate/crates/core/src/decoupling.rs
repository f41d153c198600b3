//! Matrix chain, admissible projectors and the decoupled form of an
//! index-1, -2 or -3 pencil.
//!
//! The chain is `E_{j+1} = E_j - A_j Q_j`, `A_{j+1} = A_j P_j` with
//! `Q_j` a projector onto `Ker E_j` and `P_j = I - Q_j`. The index `mu` is the
//! first `j` with `E_j` nonsingular. The raw chain uses orthogonal projectors;
//! [`make_admissible`] replaces them by projectors with `Q_j Q_i = 0` for
//! `j > i`, which is what the decoupling formulas need.

use std::time::{Duration, Instant};

use crate::consistency::build_consistent_matrix;
use crate::error::{DaeError, Result};
use crate::linalg::{is_nonsingular, max_abs, orthogonal_null_projector, solve_inverse};
use crate::model::{is_regular, AutonomousDae};
use crate::tolerance::TolerancePolicy;
use crate::RealMatrix;

/// Largest index handled by the decoupling formulas.
pub const MAX_INDEX: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixChain {
    /// `E_0 ... E_mu`.
    pub e: Vec<RealMatrix>,
    /// `A_0 ... A_mu`.
    pub a: Vec<RealMatrix>,
    /// `Q_0 ... Q_{mu-1}`.
    pub q: Vec<RealMatrix>,
    /// `P_j = I - Q_j`.
    pub p: Vec<RealMatrix>,
    pub mu: usize,
}

impl MatrixChain {
    pub fn dim(&self) -> usize {
        self.e[0].nrows()
    }

    /// `max_{j > i} |Q_j Q_i|_max`, zero for index 1.
    pub fn admissibility_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.q.len() {
            for i in 0..j {
                worst = worst.max(max_abs(&(&self.q[j] * &self.q[i])));
            }
        }
        worst
    }

    /// `max_j |E_j Q_j|_max`.
    pub fn kernel_residual(&self) -> f64 {
        self.q
            .iter()
            .zip(&self.e)
            .fold(0.0_f64, |acc, (q, e)| acc.max(max_abs(&(e * q))))
    }

    /// `max_j |Q_j^2 - Q_j|_max`.
    pub fn idempotence_residual(&self) -> f64 {
        self.q
            .iter()
            .fold(0.0_f64, |acc, q| acc.max(max_abs(&(q * q - q))))
    }

    /// `E_mu^{-1}`.
    pub fn final_inverse(&self, tol: &TolerancePolicy) -> Result<RealMatrix> {
        solve_inverse(&self.e[self.mu], final_name(self.mu), tol)
    }
}

fn final_name(mu: usize) -> &'static str {
    match mu {
        1 => "E1",
        2 => "E2",
        _ => "E3",
    }
}

/// Builds the chain with orthogonal kernel projectors until `E_j` is
/// nonsingular.
///
/// Errors: `IrregularPencil` when the regularity pre-check fails,
/// `NonsingularE` when `E_0` is already invertible, `IndexTooHigh` when
/// `E_3` is still singular.
pub fn compute_index_and_chain(sys: &AutonomousDae, tol: &TolerancePolicy) -> Result<MatrixChain> {
    if !is_regular(sys, tol) {
        return Err(DaeError::IrregularPencil);
    }
    if is_nonsingular(sys.e(), tol) {
        return Err(DaeError::NonsingularE);
    }
    let n = sys.dim();
    let mut e = vec![sys.e().clone()];
    let mut a = vec![sys.a().clone()];
    let mut q = Vec::new();
    let mut p = Vec::new();
    for j in 0..MAX_INDEX {
        let qj = orthogonal_null_projector(&e[j], tol)?;
        let pj = RealMatrix::identity(n, n) - &qj;
        let e_next = &e[j] - &a[j] * &qj;
        let a_next = &a[j] * &pj;
        q.push(qj);
        p.push(pj);
        let done = is_nonsingular(&e_next, tol);
        e.push(e_next);
        a.push(a_next);
        if done {
            return Ok(MatrixChain { e, a, q, p, mu: j + 1 });
        }
    }
    Err(DaeError::IndexTooHigh)
}

/// Rebuilds `E_j`, `A_j` from `(E_0, A_0)` and a given projector sequence.
pub fn rebuild_chain(e0: &RealMatrix, a0: &RealMatrix, q: Vec<RealMatrix>, tol: &TolerancePolicy) -> Result<MatrixChain> {
    let n = e0.nrows();
    let mu = q.len();
    let mut e = vec![e0.clone()];
    let mut a = vec![a0.clone()];
    let mut p = Vec::with_capacity(mu);
    for (j, qj) in q.iter().enumerate() {
        let pj = RealMatrix::identity(n, n) - qj;
        e.push(&e[j] - &a[j] * qj);
        a.push(&a[j] * &pj);
        p.push(pj);
    }
    if !is_nonsingular(&e[mu], tol) {
        return Err(DaeError::SingularMatrix { name: final_name(mu) });
    }
    Ok(MatrixChain { e, a, q, p, mu })
}

/// Replaces the orthogonal projectors of a raw chain by admissible ones.
///
/// Index 2: `Q1* = -Q1 E2^{-1} A1`.
/// Index 3: `Q2' = -Q2 E3^{-1} A2`, `Q1' = -Q1 P2' E3^{-1} A1`, then on the
/// chain rebuilt with `Q1'` a fresh orthogonal `Q2''` and
/// `Q2* = -Q2'' (E3'')^{-1} A2'`. The result is the chain of `(Q0, Q1', Q2*)`.
pub fn make_admissible(chain: &MatrixChain, tol: &TolerancePolicy) -> Result<MatrixChain> {
    let n = chain.dim();
    let id = RealMatrix::identity(n, n);
    match chain.mu {
        1 => Ok(chain.clone()),
        2 => {
            let e2_inv = solve_inverse(&chain.e[2], "E2", tol)?;
            let q1 = -(&chain.q[1] * &e2_inv * &chain.a[1]);
            rebuild_chain(&chain.e[0], &chain.a[0], vec![chain.q[0].clone(), q1], tol)
        }
        3 => {
            let e3_inv = solve_inverse(&chain.e[3], "E3", tol)?;
            let q2_prime = -(&chain.q[2] * &e3_inv * &chain.a[2]);
            let p2_prime = &id - &q2_prime;
            let q1_prime = -(&chain.q[1] * &p2_prime * &e3_inv * &chain.a[1]);
            let p1_prime = &id - &q1_prime;
            let e2_prime = &chain.e[1] - &chain.a[1] * &q1_prime;
            let a2_prime = &chain.a[1] * &p1_prime;
            let q2_dd = orthogonal_null_projector(&e2_prime, tol)?;
            let e3_dd = &e2_prime - &a2_prime * &q2_dd;
            let e3_dd_inv = solve_inverse(&e3_dd, "E3''", tol)?;
            let q2_star = -(&q2_dd * &e3_dd_inv * &a2_prime);
            rebuild_chain(&chain.e[0], &chain.a[0], vec![chain.q[0].clone(), q1_prime, q2_star], tol)
        }
        mu => Err(DaeError::InvalidArgument(format!("cannot make index-{mu} chain admissible"))),
    }
}

/// Coefficients of the decoupled system.
///
/// `n[0]` is `N1`, the ODE matrix; `n[1..]` are `N2 ... N_{mu+1}` of the
/// algebraic-constraint subsystems. `m` holds the matching input matrices
/// (zero columns for an autonomous pencil). `subsystem_projectors[i]` extracts
/// `x_{i+1}` from the full state.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledSystem {
    pub mu: usize,
    pub n: Vec<RealMatrix>,
    pub m: Vec<RealMatrix>,
    pub l3: Option<RealMatrix>,
    pub l4: Option<RealMatrix>,
    pub z4: Option<RealMatrix>,
    pub subsystem_projectors: Vec<RealMatrix>,
}

impl DecoupledSystem {
    pub fn dim(&self) -> usize {
        self.n[0].nrows()
    }

    /// `N_i` with the one-based subsystem numbering.
    pub fn n_coeff(&self, i: usize) -> &RealMatrix {
        &self.n[i - 1]
    }

    /// Projector onto the ODE subsystem, `P_0 ... P_{mu-1}`.
    pub fn ode_projector(&self) -> &RealMatrix {
        &self.subsystem_projectors[0]
    }

    /// `|sum of subsystem projectors - I|_max`.
    pub fn partition_residual(&self) -> f64 {
        let n = self.dim();
        let sum = self
            .subsystem_projectors
            .iter()
            .fold(RealMatrix::zeros(n, n), |acc, p| acc + p);
        max_abs(&(sum - RealMatrix::identity(n, n)))
    }
}

/// Decouples an admissible autonomous chain.
pub fn decouple(chain: &MatrixChain, tol: &TolerancePolicy) -> Result<DecoupledSystem> {
    decouple_with_input(chain, &RealMatrix::zeros(chain.dim(), 0), tol)
}

/// Decouples `E x' = A x + B u` given the admissible chain of `(E, A)`.
pub fn decouple_with_input(chain: &MatrixChain, b: &RealMatrix, tol: &TolerancePolicy) -> Result<DecoupledSystem> {
    if b.nrows() != chain.dim() {
        return Err(DaeError::dims("B rows", chain.dim(), b.nrows()));
    }
    let inv = chain.final_inverse(tol)?;
    // Index 1 uses A_0; on range(P_0) it agrees with A_1 = A_0 P_0.
    let a_last = if chain.mu == 1 { &chain.a[0] } else { &chain.a[chain.mu] };
    let k = &inv * a_last;
    let kb = &inv * b;
    let (q, p) = (&chain.q, &chain.p);
    // Projector multiplying E_mu^{-1} A_mu for each N_i, the extra
    // constraint couplings, and the subsystem extraction projectors.
    let (coeff_proj, l3, l4, z4, subsystems) = match chain.mu {
        1 => (
            vec![p[0].clone(), q[0].clone()],
            None,
            None,
            None,
            vec![p[0].clone(), q[0].clone()],
        ),
        2 => {
            let p0p1 = &p[0] * &p[1];
            let p0q1 = &p[0] * &q[1];
            (
                vec![p0p1.clone(), p0q1.clone(), &q[0] * &p[1]],
                Some(&q[0] * &q[1]),
                None,
                None,
                vec![p0p1, p0q1, q[0].clone()],
            )
        }
        3 => {
            let p0p1 = &p[0] * &p[1];
            let p0p1p2 = &p0p1 * &p[2];
            let p0p1q2 = &p0p1 * &q[2];
            let p0q1 = &p[0] * &q[1];
            (
                vec![p0p1p2.clone(), p0p1q2.clone(), &p0q1 * &p[2], &q[0] * &p[1] * &p[2]],
                Some(&p0q1 * &q[2]),
                Some(&q[0] * &q[1]),
                Some(&q[0] * &p[1] * &q[2]),
                vec![p0p1p2, p0p1q2, p0q1, q[0].clone()],
            )
        }
        mu => return Err(DaeError::InvalidArgument(format!("cannot decouple index {mu}"))),
    };
    Ok(DecoupledSystem {
        mu: chain.mu,
        n: coeff_proj.iter().map(|pr| pr * &k).collect(),
        m: coeff_proj.iter().map(|pr| pr * &kb).collect(),
        l3,
        l4,
        z4,
        subsystem_projectors: subsystems,
    })
}

/// Everything the reachability pipeline needs from one system.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub raw_chain: MatrixChain,
    pub chain: MatrixChain,
    pub decoupled: DecoupledSystem,
    pub gamma: RealMatrix,
    pub elapsed: Duration,
}

impl Decomposition {
    pub fn compute(sys: &AutonomousDae, tol: &TolerancePolicy) -> Result<Self> {
        let start = Instant::now();
        let raw_chain = compute_index_and_chain(sys, tol)?;
        let chain = make_admissible(&raw_chain, tol)?;
        let decoupled = decouple(&chain, tol)?;
        let gamma = build_consistent_matrix(&decoupled);
        Ok(Decomposition { raw_chain, chain, decoupled, gamma, elapsed: start.elapsed() })
    }

    pub fn mu(&self) -> usize {
        self.chain.mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_rotating_masses, to_autonomous};
    use nalgebra::dmatrix;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn rotating_masses() -> AutonomousDae {
        let (sys, inputs) = build_rotating_masses();
        to_autonomous(&sys, &inputs).unwrap()
    }

    #[test]
    fn index_one_hand_example() {
        let sys = AutonomousDae::from_pencil(dmatrix![1.0, 0.0; 0.0, 0.0], RealMatrix::identity(2, 2)).unwrap();
        let chain = compute_index_and_chain(&sys, &tol()).unwrap();
        assert_eq!(chain.mu, 1);
        assert!(max_abs(&(&chain.q[0] - dmatrix![0.0, 0.0; 0.0, 1.0])) < 1e-15);
        assert!(max_abs(&(&chain.e[1] - dmatrix![1.0, 0.0; 0.0, -1.0])) < 1e-15);

        let adm = make_admissible(&chain, &tol()).unwrap();
        assert_eq!(adm, chain);

        // E1^{-1} = diag(1, -1): N1 = P0 E1^{-1} A0 = diag(1, 0), N2 = Q0 E1^{-1} A0 = diag(0, -1).
        let dec = decouple(&adm, &tol()).unwrap();
        assert!(max_abs(&(&dec.n[0] - dmatrix![1.0, 0.0; 0.0, 0.0])) < 1e-14);
        assert!(max_abs(&(&dec.n[1] - dmatrix![0.0, 0.0; 0.0, -1.0])) < 1e-14);
        assert_eq!(dec.m[0].ncols(), 0);
    }

    #[test]
    fn nonsingular_e_is_rejected() {
        let sys = AutonomousDae::from_pencil(RealMatrix::identity(2, 2), dmatrix![0.0, 1.0; 2.0, 3.0]).unwrap();
        assert!(matches!(compute_index_and_chain(&sys, &tol()), Err(DaeError::NonsingularE)));
    }

    #[test]
    fn irregular_pencil_is_rejected() {
        let sys = AutonomousDae::from_pencil(RealMatrix::zeros(2, 2), RealMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(compute_index_and_chain(&sys, &tol()), Err(DaeError::IrregularPencil)));
    }

    #[test]
    fn nilpotent_block_of_size_four_is_too_high() {
        // E = shift matrix, A = I: index 4.
        let mut e = RealMatrix::zeros(4, 4);
        for i in 0..3 {
            e[(i, i + 1)] = 1.0;
        }
        let sys = AutonomousDae::from_pencil(e, RealMatrix::identity(4, 4)).unwrap();
        assert!(matches!(compute_index_and_chain(&sys, &tol()), Err(DaeError::IndexTooHigh)));
    }

    #[test]
    fn rotating_masses_projectors() {
        let sys = rotating_masses();
        let chain = compute_index_and_chain(&sys, &tol()).unwrap();
        assert_eq!(chain.mu, 2);
        let adm = make_admissible(&chain, &tol()).unwrap();
        let mut q0 = RealMatrix::zeros(6, 6);
        q0[(2, 2)] = 1.0;
        q0[(3, 3)] = 1.0;
        assert!(max_abs(&(&adm.q[0] - q0)) < 1e-12);
        let expected = [2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0, -2.0 / 3.0, 0.0, 0.0];
        for (r, v) in expected.iter().enumerate() {
            assert!((adm.q[1][(r, 0)] - v).abs() < 1e-12, "Q1[{r},0]");
        }
        assert!(adm.admissibility_residual() < 1e-12);
        assert!(adm.kernel_residual() < 1e-12);
        assert!(adm.idempotence_residual() < 1e-12);
    }

    #[test]
    fn rotating_masses_coefficients() {
        let dec = Decomposition::compute(&rotating_masses(), &tol()).unwrap();
        let d = &dec.decoupled;
        assert!(max_abs(d.n_coeff(2)) < 1e-12);
        let l3 = d.l3.as_ref().unwrap();
        let expected = [[0.0, 0.0], [0.0, 0.0], [2.0 / 3.0, -2.0 / 3.0], [-2.0 / 3.0, 2.0 / 3.0]];
        for (r, row) in expected.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((l3[(r, c)] - v).abs() < 1e-12);
            }
        }
        for r in 0..2 {
            assert!((d.n_coeff(1)[(r, 4)] - 1.0 / 3.0).abs() < 1e-12);
            assert!((d.n_coeff(1)[(r, 5)] - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(d.partition_residual() < 1e-12);
        assert_eq!(dec.gamma.shape(), (12, 6));
    }
}
