//! Bounded-time safety: one linear feasibility problem per reachable star.
//!
//! The star `<V_j, C, d>` meets the unsafe polyhedron `G x <= f` iff some
//! `alpha` satisfies `[G V_j; C] alpha <= [f; d]`. The first such `alpha`
//! is a concrete initial state `V_0 alpha` whose simulation is the unsafe trace.

use std::time::{Duration, Instant};

use crate::error::{DaeError, Result};
use crate::linalg::{ensure_finite, vstack};
use crate::lp::{DenseSimplex, LpSolver};
use crate::reachability::ReachResult;
use crate::tolerance::TolerancePolicy;
use crate::{RealMatrix, RealVector};

/// Multiple of `feasibility_tol` (per unit row scale) accepted when
/// re-checking a feasible point outside the solver.
const RECHECK_SLACK: f64 = 10.0;

/// Unsafe polyhedron `G x <= f`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnsafeSpec {
    g: RealMatrix,
    f: RealVector,
    on_original_state: bool,
}

impl UnsafeSpec {
    /// `G` acts on the original state; input coordinates are padded with zeros.
    pub fn on_original_state(g: RealMatrix, f: RealVector) -> Result<Self> {
        Self::build(g, f, true)
    }

    /// `G` acts on the full lifted state `[x; u]`.
    pub fn on_full_state(g: RealMatrix, f: RealVector) -> Result<Self> {
        Self::build(g, f, false)
    }

    fn build(g: RealMatrix, f: RealVector, on_original_state: bool) -> Result<Self> {
        if g.nrows() == 0 || g.ncols() == 0 {
            return Err(DaeError::EmptyMatrix { name: "G", rows: g.nrows(), cols: g.ncols() });
        }
        if f.len() != g.nrows() {
            return Err(DaeError::dims("unsafe vector", g.nrows(), f.len()));
        }
        ensure_finite(&g, "G")?;
        if f.iter().any(|v| !v.is_finite()) {
            return Err(DaeError::NonFinite { name: "f", row: 0, col: 0 });
        }
        Ok(UnsafeSpec { g, f, on_original_state })
    }

    pub fn g(&self) -> &RealMatrix {
        &self.g
    }

    pub fn f(&self) -> &RealVector {
        &self.f
    }

    pub fn is_on_original_state(&self) -> bool {
        self.on_original_state
    }

    /// `G` over the lifted state of dimension `dim` whose first `n_orig`
    /// coordinates are the original state.
    pub fn lifted_matrix(&self, n_orig: usize, dim: usize) -> Result<RealMatrix> {
        let expected = if self.on_original_state { n_orig } else { dim };
        if self.g.ncols() != expected {
            return Err(DaeError::dims("unsafe matrix columns", expected, self.g.ncols()));
        }
        let mut out = RealMatrix::zeros(self.g.nrows(), dim);
        out.view_mut((0, 0), self.g.shape()).copy_from(&self.g);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyStatus {
    Safe,
    Unsafe,
}

impl VerifyStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerifyStatus::Safe => "safe",
            VerifyStatus::Unsafe => "unsafe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationOutcome {
    pub status: VerifyStatus,
    pub first_unsafe_step: Option<usize>,
    pub alpha_feasible: Option<RealVector>,
    /// `x_j = V_j alpha_feasible` over the lifted state, `j = 0 ... N`.
    pub unsafe_trace: Option<Vec<RealVector>>,
    /// Every step whose star meets the unsafe set; filled only when
    /// [`VerifyOptions::report_all_unsafe_steps`] is set.
    pub unsafe_steps: Vec<usize>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Keep checking after the first unsafe step.
    pub report_all_unsafe_steps: bool,
}

/// Some `alpha` with `G_bar alpha <= f_bar + feasibility_tol`, or `None`.
pub fn feasibility_check(g_bar: &RealMatrix, f_bar: &RealVector, tol: &TolerancePolicy) -> Result<Option<RealVector>> {
    if g_bar.nrows() != f_bar.len() {
        return Err(DaeError::dims("feasibility right-hand side", g_bar.nrows(), f_bar.len()));
    }
    DenseSimplex::default().find_feasible(g_bar, f_bar, tol)
}

/// First-hit verification with the default solver.
pub fn verify(reach: &ReachResult, unsafe_spec: &UnsafeSpec, tol: &TolerancePolicy) -> Result<VerificationOutcome> {
    verify_with(reach, unsafe_spec, tol, VerifyOptions::default(), &DenseSimplex::default())
}

pub fn verify_with(
    reach: &ReachResult,
    unsafe_spec: &UnsafeSpec,
    tol: &TolerancePolicy,
    options: VerifyOptions,
    solver: &dyn LpSolver,
) -> Result<VerificationOutcome> {
    let start = Instant::now();
    let g = unsafe_spec.lifted_matrix(reach.n_orig, reach.dim())?;
    let mut first: Option<(usize, RealVector)> = None;
    let mut unsafe_steps = Vec::new();
    for (j, star) in reach.stars.iter().enumerate() {
        let g_bar = vstack(&[&(&g * star.basis()), star.predicate_matrix()]);
        let f_bar = stack_vectors(unsafe_spec.f(), star.predicate_bound());
        let hit = solver.find_feasible(&g_bar, &f_bar, tol).map_err(|e| match e {
            DaeError::NumericalFailure { reason, .. } => DaeError::NumericalFailure { step: Some(j), reason },
            other => other,
        })?;
        if let Some(alpha) = hit {
            recheck(&g_bar, &f_bar, &alpha, tol, j)?;
            if first.is_none() {
                first = Some((j, alpha));
            }
            if !options.report_all_unsafe_steps {
                break;
            }
            unsafe_steps.push(j);
        }
    }
    let outcome = match first {
        None => VerificationOutcome {
            status: VerifyStatus::Safe,
            first_unsafe_step: None,
            alpha_feasible: None,
            unsafe_trace: None,
            unsafe_steps,
            elapsed: start.elapsed(),
        },
        Some((j, alpha)) => {
            let trace = reach.stars.iter().map(|s| s.point(&alpha)).collect();
            VerificationOutcome {
                status: VerifyStatus::Unsafe,
                first_unsafe_step: Some(j),
                alpha_feasible: Some(alpha),
                unsafe_trace: Some(trace),
                unsafe_steps,
                elapsed: start.elapsed(),
            }
        }
    };
    Ok(outcome)
}

/// Independent check of a solver-provided point, row by row with a slack
/// proportional to the row scale.
fn recheck(g: &RealMatrix, f: &RealVector, alpha: &RealVector, tol: &TolerancePolicy, step: usize) -> Result<()> {
    let lhs = g * alpha;
    for i in 0..g.nrows() {
        let scale = g.row(i).iter().fold(f[i].abs().max(1.0), |acc, v| acc.max(v.abs()));
        if lhs[i] - f[i] > RECHECK_SLACK * tol.feasibility_tol * scale {
            return Err(DaeError::NumericalFailure {
                step: Some(step),
                reason: format!("feasible point violates row {i} by {:e}", lhs[i] - f[i]),
            });
        }
    }
    Ok(())
}

fn stack_vectors(a: &RealVector, b: &RealVector) -> RealVector {
    RealVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        build_rotating_masses, rotating_masses_initial_star, rotating_masses_unsafe_m2,
        rotating_masses_unsafe_x4, to_autonomous,
    };
    use crate::reachability::{compute_reach, ReachSettings};
    use nalgebra::{dmatrix, dvector};

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn rotating_masses_reach() -> ReachResult {
        let (sys, inputs) = build_rotating_masses();
        let auto = to_autonomous(&sys, &inputs).unwrap();
        let settings = ReachSettings::from_horizon(0.01, 10.0).unwrap();
        compute_reach(&auto, &rotating_masses_initial_star(), &settings, &tol()).unwrap()
    }

    #[test]
    fn interval_examples() {
        let g = dmatrix![1.0; -1.0];
        let a = feasibility_check(&g, &dvector![1.0, 0.0], &tol()).unwrap().unwrap();
        assert!(a[0] > -1e-9 && a[0] < 1.0 + 1e-9);
        assert!(feasibility_check(&g, &dvector![-1.0, 0.0], &tol()).unwrap().is_none());
        assert!(feasibility_check(&g, &dvector![1.0], &tol()).is_err());
    }

    #[test]
    fn unsafe_spec_validation() {
        assert!(UnsafeSpec::on_original_state(RealMatrix::zeros(0, 3), dvector![]).is_err());
        assert!(UnsafeSpec::on_original_state(dmatrix![1.0, 0.0], dvector![1.0, 2.0]).is_err());
        let spec = UnsafeSpec::on_original_state(dmatrix![1.0, 2.0], dvector![1.0]).unwrap();
        assert_eq!(spec.lifted_matrix(2, 4).unwrap(), dmatrix![1.0, 2.0, 0.0, 0.0]);
        assert!(spec.lifted_matrix(3, 4).is_err());
        let full = UnsafeSpec::on_full_state(dmatrix![1.0, 2.0], dvector![1.0]).unwrap();
        assert!(full.lifted_matrix(1, 4).is_err());
    }

    #[test]
    fn rotating_masses_torque_is_unsafe_with_valid_trace() {
        let reach = rotating_masses_reach();
        let spec = rotating_masses_unsafe_m2();
        let out = verify(&reach, &spec, &tol()).unwrap();
        assert_eq!(out.status, VerifyStatus::Unsafe);
        let j = out.first_unsafe_step.unwrap();
        let alpha = out.alpha_feasible.as_ref().unwrap();
        let trace = out.unsafe_trace.as_ref().unwrap();
        assert_eq!(trace.len(), 1001);
        assert!(reach.stars[0].contains_alpha(alpha, &tol()));
        assert!(trace[j][2] <= -0.9 + 1e-8);
    }

    #[test]
    fn rotating_masses_x4_is_safe() {
        let reach = rotating_masses_reach();
        let out = verify(&reach, &rotating_masses_unsafe_x4(), &tol()).unwrap();
        assert_eq!(out.status, VerifyStatus::Safe);
        assert!(out.unsafe_trace.is_none() && out.alpha_feasible.is_none());
    }

    #[test]
    fn unsatisfiable_spec_is_safe() {
        let reach = rotating_masses_reach();
        let spec = UnsafeSpec::on_original_state(RealMatrix::zeros(1, 4), dvector![-1.0]).unwrap();
        assert_eq!(verify(&reach, &spec, &tol()).unwrap().status, VerifyStatus::Safe);
    }

    #[test]
    fn report_all_steps_starts_at_first_hit() {
        let reach = rotating_masses_reach();
        let spec = rotating_masses_unsafe_m2();
        let first = verify(&reach, &spec, &tol()).unwrap();
        let all = verify_with(
            &reach,
            &spec,
            &tol(),
            VerifyOptions { report_all_unsafe_steps: true },
            &DenseSimplex::default(),
        )
        .unwrap();
        assert_eq!(all.first_unsafe_step, first.first_unsafe_step);
        assert_eq!(all.unsafe_steps.first().copied(), first.first_unsafe_step);
        assert!(first.unsafe_steps.is_empty());
    }
}
