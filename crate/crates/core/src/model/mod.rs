//! Linear DAE models and their autonomous lift.

mod rotating_masses;
mod stokes;

pub use rotating_masses::{
    build_rotating_masses, rotating_masses_initial_star, rotating_masses_unsafe_m2,
    rotating_masses_unsafe_x4, ROTATING_MASSES_V0_ROUNDED,
};
pub use stokes::{build_stokes, stokes_input_model, StokesLayout};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DaeError, Result};
use crate::linalg::{self, block_diag, ensure_finite};
use crate::tolerance::TolerancePolicy;
use crate::RealMatrix;

/// Number of sample points used by the default regularity check.
pub const REGULARITY_TRIALS: usize = 5;
/// Seed of the default regularity check.
pub const REGULARITY_SEED: u64 = 0x5EED;
/// Sample points are drawn uniformly from `[-REGULARITY_RANGE, REGULARITY_RANGE]`.
pub const REGULARITY_RANGE: f64 = 10.0;

/// `E x' = A x + B u` with singular `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeSystem {
    e: RealMatrix,
    a: RealMatrix,
    b: RealMatrix,
}

impl DaeSystem {
    /// Validates shapes and finiteness, and rejects nonsingular `E` under the
    /// default tolerance policy.
    pub fn new(e: RealMatrix, a: RealMatrix, b: RealMatrix) -> Result<Self> {
        Self::with_tolerance(e, a, b, &TolerancePolicy::default())
    }

    pub fn with_tolerance(
        e: RealMatrix,
        a: RealMatrix,
        b: RealMatrix,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        let n = e.nrows();
        if n == 0 {
            return Err(DaeError::EmptyMatrix { name: "E", rows: e.nrows(), cols: e.ncols() });
        }
        if !e.is_square() {
            return Err(DaeError::dims("E", format!("{n}x{n}"), shape(&e)));
        }
        if a.shape() != (n, n) {
            return Err(DaeError::dims("A", format!("{n}x{n}"), shape(&a)));
        }
        if b.nrows() != n {
            return Err(DaeError::dims("B rows", n, b.nrows()));
        }
        ensure_finite(&e, "E")?;
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        if linalg::is_nonsingular(&e, tol) {
            return Err(DaeError::NonsingularE);
        }
        Ok(DaeSystem { e, a, b })
    }

    pub fn e(&self) -> &RealMatrix {
        &self.e
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a
    }

    pub fn b(&self) -> &RealMatrix {
        &self.b
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
}

/// Input class `u' = A_u u`. `Zero` means `u(t) = 0` and drops the input channel.
#[derive(Debug, Clone, PartialEq)]
pub enum InputModel {
    Zero,
    Smooth { a_u: RealMatrix },
}

impl InputModel {
    pub fn smooth(a_u: RealMatrix) -> Self {
        InputModel::Smooth { a_u }
    }

    /// Constant inputs, `A_u = 0`.
    pub fn constant(m: usize) -> Self {
        InputModel::Smooth { a_u: RealMatrix::zeros(m, m) }
    }
}

/// Autonomous pencil `E_bar x_bar' = A_bar x_bar` with `x_bar = [x; u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutonomousDae {
    e_bar: RealMatrix,
    a_bar: RealMatrix,
    n_orig: usize,
    m_orig: usize,
}

impl AutonomousDae {
    /// Wraps a bare pencil `(E, A)` without inputs. Unlike [`DaeSystem::new`],
    /// a nonsingular `E` is accepted here and reported later by the chain.
    pub fn from_pencil(e: RealMatrix, a: RealMatrix) -> Result<Self> {
        let n = e.nrows();
        if n == 0 {
            return Err(DaeError::EmptyMatrix { name: "E", rows: e.nrows(), cols: e.ncols() });
        }
        if !e.is_square() {
            return Err(DaeError::dims("E", format!("{n}x{n}"), shape(&e)));
        }
        if a.shape() != (n, n) {
            return Err(DaeError::dims("A", format!("{n}x{n}"), shape(&a)));
        }
        ensure_finite(&e, "E")?;
        ensure_finite(&a, "A")?;
        Ok(AutonomousDae { e_bar: e, a_bar: a, n_orig: n, m_orig: 0 })
    }

    pub fn e(&self) -> &RealMatrix {
        &self.e_bar
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a_bar
    }

    /// Dimension of the lifted state, `n + m`.
    pub fn dim(&self) -> usize {
        self.e_bar.nrows()
    }

    pub fn n_orig(&self) -> usize {
        self.n_orig
    }

    pub fn m_orig(&self) -> usize {
        self.m_orig
    }

    /// `[I_n 0]`, recovering the original state from the lifted one.
    pub fn state_selector(&self) -> RealMatrix {
        let mut s = RealMatrix::zeros(self.n_orig, self.dim());
        s.view_mut((0, 0), (self.n_orig, self.n_orig))
            .fill_with_identity();
        s
    }

    /// Extends a matrix acting on original coordinates with zero columns over the inputs.
    pub fn lift_columns(&self, g: &RealMatrix) -> Result<RealMatrix> {
        if g.ncols() != self.n_orig {
            return Err(DaeError::dims("original-state columns", self.n_orig, g.ncols()));
        }
        let mut out = RealMatrix::zeros(g.nrows(), self.dim());
        out.view_mut((0, 0), g.shape()).copy_from(g);
        Ok(out)
    }
}

/// Lifts `E x' = A x + B u`, `u' = A_u u` to `E_bar x_bar' = A_bar x_bar` with
/// `E_bar = [[E, 0], [0, I_m]]` and `A_bar = [[A, B], [0, A_u]]`.
pub fn to_autonomous(sys: &DaeSystem, inputs: &InputModel) -> Result<AutonomousDae> {
    match inputs {
        InputModel::Zero => Ok(AutonomousDae {
            e_bar: sys.e.clone(),
            a_bar: sys.a.clone(),
            n_orig: sys.n(),
            m_orig: 0,
        }),
        InputModel::Smooth { a_u } => {
            let (n, m) = (sys.n(), sys.m());
            if a_u.shape() != (m, m) {
                return Err(DaeError::dims("A_u", format!("{m}x{m}"), shape(a_u)));
            }
            ensure_finite(a_u, "A_u")?;
            let e_bar = block_diag(&sys.e, &RealMatrix::identity(m, m));
            let mut a_bar = block_diag(&sys.a, a_u);
            a_bar.view_mut((0, n), (n, m)).copy_from(&sys.b);
            Ok(AutonomousDae { e_bar, a_bar, n_orig: n, m_orig: m })
        }
    }
}

/// Probabilistic regularity test of the pencil: `det(s E_bar - A_bar)` is
/// declared nonzero at a sample `s` when `s E_bar - A_bar` has full numerical
/// rank. Returns true as soon as one of `trials` seeded samples passes.
pub fn check_regularity(sys: &AutonomousDae, trials: usize, seed: u64, tol: &TolerancePolicy) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials.max(1)).any(|_| {
        let s: f64 = rng.random_range(-REGULARITY_RANGE..=REGULARITY_RANGE);
        let pencil = sys.e() * s - sys.a();
        linalg::is_nonsingular(&pencil, tol)
    })
}

/// [`check_regularity`] with the default trial count and seed.
pub fn is_regular(sys: &AutonomousDae, tol: &TolerancePolicy) -> bool {
    check_regularity(sys, REGULARITY_TRIALS, REGULARITY_SEED, tol)
}

fn shape(m: &RealMatrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn lift_small_system() {
        let sys = DaeSystem::new(
            dmatrix![1.0, 0.0; 0.0, 0.0],
            RealMatrix::identity(2, 2),
            dmatrix![1.0; 1.0],
        )
        .unwrap();
        let auto = to_autonomous(&sys, &InputModel::smooth(dmatrix![0.0])).unwrap();
        assert_eq!(auto.e(), &dmatrix![1.0, 0.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 1.0]);
        assert_eq!(auto.a(), &dmatrix![1.0, 0.0, 1.0; 0.0, 1.0, 1.0; 0.0, 0.0, 0.0]);
        assert_eq!((auto.n_orig(), auto.m_orig(), auto.dim()), (2, 1, 3));
    }

    #[test]
    fn zero_inputs_keep_the_pencil() {
        let sys = DaeSystem::new(
            dmatrix![1.0, 0.0; 0.0, 0.0],
            dmatrix![1.0, 2.0; 3.0, 4.0],
            dmatrix![1.0; 0.0],
        )
        .unwrap();
        let auto = to_autonomous(&sys, &InputModel::Zero).unwrap();
        assert_eq!(auto.e(), sys.e());
        assert_eq!(auto.a(), sys.a());
        assert_eq!(auto.m_orig(), 0);
    }

    #[test]
    fn input_dimension_mismatch() {
        let sys = DaeSystem::new(
            dmatrix![1.0, 0.0; 0.0, 0.0],
            RealMatrix::identity(2, 2),
            dmatrix![1.0; 1.0],
        )
        .unwrap();
        let err = to_autonomous(&sys, &InputModel::constant(2)).unwrap_err();
        assert!(matches!(err, DaeError::DimensionMismatch { context: "A_u", .. }));
    }

    #[test]
    fn constructor_errors() {
        let i2 = RealMatrix::identity(2, 2);
        assert!(matches!(
            DaeSystem::new(i2.clone(), i2.clone(), RealMatrix::zeros(2, 0)),
            Err(DaeError::NonsingularE)
        ));
        assert!(matches!(
            DaeSystem::new(RealMatrix::zeros(2, 3), i2.clone(), RealMatrix::zeros(2, 0)),
            Err(DaeError::DimensionMismatch { context: "E", .. })
        ));
        let mut bad = RealMatrix::zeros(2, 2);
        bad[(1, 0)] = f64::NAN;
        assert!(matches!(
            DaeSystem::new(RealMatrix::zeros(2, 2), bad, RealMatrix::zeros(2, 0)),
            Err(DaeError::NonFinite { name: "A", row: 1, col: 0 })
        ));
        assert!(matches!(
            DaeSystem::new(RealMatrix::zeros(0, 0), RealMatrix::zeros(0, 0), RealMatrix::zeros(0, 0)),
            Err(DaeError::EmptyMatrix { .. })
        ));
    }

    #[test]
    fn regularity_examples() {
        let tol = TolerancePolicy::default();
        let ode_like = AutonomousDae::from_pencil(RealMatrix::identity(3, 3), RealMatrix::zeros(3, 3)).unwrap();
        assert!(is_regular(&ode_like, &tol));
        let null = AutonomousDae::from_pencil(RealMatrix::zeros(3, 3), RealMatrix::zeros(3, 3)).unwrap();
        assert!(!is_regular(&null, &tol));
        // Common kernel vector e_2: det(sE - A) == 0 for every s.
        let irregular = AutonomousDae::from_pencil(
            dmatrix![1.0, 0.0; 0.0, 0.0],
            dmatrix![1.0, 0.0; 0.0, 0.0],
        )
        .unwrap();
        assert!(!check_regularity(&irregular, 20, 7, &tol));
    }

    #[test]
    fn selector_and_lift() {
        let (sys, inputs) = build_rotating_masses();
        let auto = to_autonomous(&sys, &inputs).unwrap();
        let s = auto.state_selector();
        assert_eq!(s.shape(), (4, 6));
        assert_eq!(s.view((0, 0), (4, 4)).into_owned(), RealMatrix::identity(4, 4));
        let g = auto.lift_columns(&dmatrix![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(g, dmatrix![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(auto.lift_columns(&dmatrix![1.0, 0.0]).is_err());
    }
}
