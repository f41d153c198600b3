#![allow(dead_code)]

use daereach::linalg::max_abs;
use daereach::model::{build_rotating_masses, build_stokes, stokes_input_model, to_autonomous};
use daereach::{AutonomousDae, RealMatrix};

pub fn rotating_masses() -> AutonomousDae {
    let (sys, inputs) = build_rotating_masses();
    to_autonomous(&sys, &inputs).unwrap()
}

pub fn stokes(k: usize) -> AutonomousDae {
    to_autonomous(&build_stokes(k).unwrap(), &stokes_input_model()).unwrap()
}

/// `|lhs - rhs|_max / (1 + scale)`.
pub fn scaled_gap(lhs: &RealMatrix, rhs: &RealMatrix, scale: f64) -> f64 {
    max_abs(&(lhs - rhs)) / (1.0 + scale)
}

/// Max-abs norm product used to scale residuals of matrix products.
pub fn norm_product(ms: &[&RealMatrix]) -> f64 {
    ms.iter().map(|m| max_abs(m) * m.ncols() as f64).product()
}
