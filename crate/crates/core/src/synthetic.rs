//! Seeded random regular pencils with known index and known solutions.
//!
//! Each pencil is built from its Weierstrass form
//! `E = S diag(I_d, N) T`, `A = S diag(J, I) T` with `N` nilpotent. The
//! tractability index equals the nilpotency index of `N`, consistent states
//! are exactly `T^{-1} [z; 0]`, and the solution from such a state is
//! `T^{-1} [e^{J t} z; 0]`.

use nalgebra::linalg::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DaeError, Result};
use crate::linalg::{block_diag, matrix_exponential, solve_inverse};
use crate::model::AutonomousDae;
use crate::tolerance::TolerancePolicy;
use crate::{RealMatrix, RealVector};

/// Shape of a generated pencil.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    /// Size of the differential (ODE) block.
    pub dynamic_dim: usize,
    /// Sizes of the nilpotent Jordan blocks; the index is the largest.
    pub nilpotent_blocks: Vec<usize>,
}

impl SyntheticSpec {
    pub fn index(&self) -> usize {
        self.nilpotent_blocks.iter().copied().max().unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.dynamic_dim + self.nilpotent_blocks.iter().sum::<usize>()
    }

    /// A random shape of the given index with total dimension at most `max_dim`.
    pub fn random(index: usize, max_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if index == 0 || index + 1 > max_dim {
            return Err(DaeError::InvalidArgument(format!(
                "cannot fit an index-{index} pencil with a dynamic part into dimension {max_dim}"
            )));
        }
        let mut blocks = vec![index];
        let mut used = index;
        let dynamic_dim = rng.random_range(1..=(max_dim - used).min(3));
        used += dynamic_dim;
        while used < max_dim && rng.random_bool(0.5) {
            let size = rng.random_range(1..=index.min(max_dim - used));
            blocks.push(size);
            used += size;
        }
        Ok(SyntheticSpec { dynamic_dim, nilpotent_blocks: blocks })
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDae {
    pub spec: SyntheticSpec,
    pub system: AutonomousDae,
    pub s: RealMatrix,
    pub t: RealMatrix,
    pub t_inv: RealMatrix,
    /// Dynamics of the differential block.
    pub j: RealMatrix,
}

impl SyntheticDae {
    pub fn generate(spec: SyntheticSpec, seed: u64) -> Result<Self> {
        if spec.dynamic_dim == 0 && spec.nilpotent_blocks.is_empty() {
            return Err(DaeError::InvalidArgument("empty synthetic pencil".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = spec.dynamic_dim;
        let r: usize = spec.nilpotent_blocks.iter().sum();
        let n = d + r;

        let mut j = gaussian(d, d, &mut rng) * (1.0 / (d.max(1) as f64).sqrt());
        for i in 0..d {
            j[(i, i)] -= 0.5;
        }
        let mut nil = RealMatrix::zeros(r, r);
        let mut offset = 0;
        for &size in &spec.nilpotent_blocks {
            for i in 0..size.saturating_sub(1) {
                nil[(offset + i, offset + i + 1)] = 1.0;
            }
            offset += size;
        }

        let s = well_conditioned(n, &mut rng);
        let t = well_conditioned(n, &mut rng);
        let t_inv = solve_inverse(&t, "T", &TolerancePolicy::default())?;
        let e = &s * block_diag(&RealMatrix::identity(d, d), &nil) * &t;
        let a = &s * block_diag(&j, &RealMatrix::identity(r, r)) * &t;
        let system = AutonomousDae::from_pencil(e, a)?;
        Ok(SyntheticDae { spec, system, s, t, t_inv, j })
    }

    /// Random shape of the given index (dimension at most `max_dim`) and random matrices.
    pub fn random(index: usize, max_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        let spec = SyntheticSpec::random(index, max_dim, &mut rng)?;
        Self::generate(spec, seed)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// `T^{-1} [I_d; 0]`: a basis of the consistent space.
    pub fn consistent_basis(&self) -> RealMatrix {
        self.t_inv.columns(0, self.spec.dynamic_dim).into_owned()
    }

    /// `x(t) = T^{-1} diag(e^{J t}, 0) T x0` for consistent `x0`.
    pub fn flow(&self, time: f64) -> Result<RealMatrix> {
        let d = self.spec.dynamic_dim;
        let r = self.dim() - d;
        let ej = matrix_exponential(&self.j, time)?;
        Ok(&self.t_inv * block_diag(&ej, &RealMatrix::zeros(r, r)) * &self.t)
    }

    pub fn solution(&self, x0: &RealVector, time: f64) -> Result<RealVector> {
        Ok(self.flow(time)? * x0)
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthogonal factor times a diagonal scaling in `[0.5, 2]`; condition number at most 4.
fn well_conditioned(n: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
    let q = QR::new(gaussian(n, n, rng)).q();
    let scale = RealMatrix::from_diagonal(&RealVector::from_fn(n, |_, _| rng.random_range(0.5..=2.0)));
    q * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoupling::compute_index_and_chain;
    use crate::linalg::max_abs;

    #[test]
    fn generated_index_matches_nilpotency() {
        let tol = TolerancePolicy::default();
        for index in 1..=3 {
            for seed in 0..10 {
                let dae = SyntheticDae::random(index, 7, seed).unwrap();
                let chain = compute_index_and_chain(&dae.system, &tol).unwrap();
                assert_eq!(chain.mu, index, "seed {seed}");
            }
        }
    }

    #[test]
    fn analytic_solution_satisfies_the_pencil() {
        let dae = SyntheticDae::random(2, 6, 5).unwrap();
        let basis = dae.consistent_basis();
        // d/dt x(t) at t = 0 is T^{-1} [J z; 0]; check E x' = A x.
        let d = dae.spec.dynamic_dim;
        let r = dae.dim() - d;
        let deriv = &dae.t_inv * block_diag(&dae.j, &RealMatrix::zeros(r, r)) * &dae.t * &basis;
        let residual = dae.system.e() * deriv - dae.system.a() * &basis;
        assert!(max_abs(&residual) < 1e-10);
        assert!(max_abs(&(dae.flow(0.0).unwrap() * &basis - &basis)) < 1e-12);
    }

    #[test]
    fn random_shape_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let s = SyntheticSpec::random(3, 6, &mut rng).unwrap();
            assert_eq!(s.index(), 3);
            assert!(s.dim() <= 6 && s.dynamic_dim >= 1);
        }
        assert!(SyntheticSpec::random(3, 3, &mut rng).is_err());
    }
}
