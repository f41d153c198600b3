//! Two rotating masses joined by a rigid shaft.
//!
//! State `x = [z1, z2, M2, M3]` (angular velocities and connection torques),
//! inputs `u = [M1, M4]` (external torques), `J1 = 1`, `J2 = 2`. The inputs
//! follow the sine generator `u' = [[0, 1], [-1, 0]] u`.

use nalgebra::dmatrix;

use super::{DaeSystem, InputModel};
use crate::safety::UnsafeSpec;
use crate::starset::StarSet;
use crate::{RealMatrix, RealVector};

const J1: f64 = 1.0;
const J2: f64 = 2.0;

/// Basis of the reference initial star, rounded to three decimals.
/// It lies about `3.3e-4` away from the consistent space; see
/// [`rotating_masses_initial_star`] for the unrounded basis.
pub const ROTATING_MASSES_V0_ROUNDED: [[f64; 2]; 6] = [
    [0.0, 0.0],
    [0.0, 0.0],
    [0.513, 0.0],
    [-0.513, 0.0],
    [-0.616, 0.447],
    [0.308, 0.894],
];

pub fn build_rotating_masses() -> (DaeSystem, InputModel) {
    let e = dmatrix![
        J1, 0.0, 0.0, 0.0;
        0.0, J2, 0.0, 0.0;
        0.0, 0.0, 0.0, 0.0;
        0.0, 0.0, 0.0, 0.0
    ];
    let a = dmatrix![
        0.0, 0.0, 1.0, 0.0;
        0.0, 0.0, 0.0, 1.0;
        0.0, 0.0, -1.0, -1.0;
        -1.0, 1.0, 0.0, 0.0
    ];
    let b = dmatrix![
        1.0, 0.0;
        0.0, 1.0;
        0.0, 0.0;
        0.0, 0.0
    ];
    let sys = DaeSystem::new(e, a, b).expect("rotating-masses matrices are valid");
    let inputs = InputModel::smooth(dmatrix![0.0, 1.0; -1.0, 0.0]);
    (sys, inputs)
}

/// Initial star over the lifted state `[z1, z2, M2, M3, M1, M4]` with
/// `alpha_1 in [0.1, 0.2]` and `alpha_2 in [1.0, 1.2]`.
///
/// The columns are the unit vectors `(0, 0, 5, -5, -6, 3) / sqrt(95)` and
/// `(0, 0, 0, 0, 1, 2) / sqrt(5)`, which round to
/// [`ROTATING_MASSES_V0_ROUNDED`] and lie exactly in the consistent space.
pub fn rotating_masses_initial_star() -> StarSet {
    let s95 = 95.0_f64.sqrt();
    let s5 = 5.0_f64.sqrt();
    let v = dmatrix![
        0.0, 0.0;
        0.0, 0.0;
        5.0 / s95, 0.0;
        -5.0 / s95, 0.0;
        -6.0 / s95, 1.0 / s5;
        3.0 / s95, 2.0 / s5
    ];
    StarSet::new(v, initial_predicate_matrix(), initial_predicate_bound()).expect("reference predicate is nonempty")
}

fn initial_predicate_matrix() -> RealMatrix {
    dmatrix![
        1.0, 0.0;
        -1.0, 0.0;
        0.0, 1.0;
        0.0, -1.0
    ]
}

fn initial_predicate_bound() -> RealVector {
    RealVector::from_vec(vec![0.2, -0.1, 1.2, -1.0])
}

/// `M2 <= -0.9` over the original four states.
pub fn rotating_masses_unsafe_m2() -> UnsafeSpec {
    UnsafeSpec::on_original_state(dmatrix![0.0, 0.0, 1.0, 0.0], RealVector::from_vec(vec![-0.9]))
        .expect("valid unsafe set")
}

/// `x4 = M3 <= -1.0` over the original four states.
pub fn rotating_masses_unsafe_x4() -> UnsafeSpec {
    UnsafeSpec::on_original_state(dmatrix![0.0, 0.0, 0.0, 1.0], RealVector::from_vec(vec![-1.0]))
        .expect("valid unsafe set")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_matrices() {
        let (sys, inputs) = build_rotating_masses();
        assert_eq!(sys.e()[(0, 0)], 1.0);
        assert_eq!(sys.e()[(1, 1)], 2.0);
        assert!(sys.e().rows(2, 2).iter().all(|v| *v == 0.0));
        assert_eq!(sys.a().row(3).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0, 0.0, 0.0]);
        assert_eq!(sys.m(), 2);
        match inputs {
            InputModel::Smooth { a_u } => assert_eq!(a_u, dmatrix![0.0, 1.0; -1.0, 0.0]),
            InputModel::Zero => panic!("expected sine inputs"),
        }
    }

    #[test]
    fn unrounded_basis_rounds_to_three_decimals() {
        let star = rotating_masses_initial_star();
        for (r, row) in ROTATING_MASSES_V0_ROUNDED.iter().enumerate() {
            for (c, shown) in row.iter().enumerate() {
                let rounded = (star.basis()[(r, c)] * 1000.0).round() / 1000.0;
                assert_eq!(rounded, *shown, "entry ({r}, {c})");
            }
        }
    }
}
