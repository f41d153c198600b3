//! Star-set reachability for the autonomous pencil.
//!
//! The ODE part `x1 = P_0 ... P_{mu-1} x` is propagated by `e^{N1 t}`
//! and every algebraic part is a fixed linear function of `x1`, so the full
//! state is `Psi x1(t)`. Starting from `V1(0) = P_0 ... P_{mu-1} V(0)` the
//! reachable set at `t = jh` is the star `<Psi V1(jh), C, d>`.

use std::time::{Duration, Instant};

use crate::consistency::{check_initial_star, ConsistencyCertificate};
use crate::decoupling::{DecoupledSystem, Decomposition};
use crate::error::{DaeError, Result};
use crate::integrate::Dopri5;
use crate::linalg::{ensure_finite, matrix_exponential};
use crate::model::AutonomousDae;
use crate::starset::StarSet;
use crate::tolerance::TolerancePolicy;
use crate::{RealMatrix, RealVector};

/// Default absolute tolerance of the adaptive integrator.
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
/// Default relative tolerance of the adaptive integrator.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMode {
    /// One `e^{N1 h}` reused at every step.
    TransitionMatrix,
    /// Each basis column integrated with an adaptive Runge-Kutta scheme.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachSettings {
    pub time_step: f64,
    pub num_steps: usize,
    pub mode: PropagationMode,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl ReachSettings {
    pub fn new(time_step: f64, num_steps: usize) -> Result<Self> {
        let s = ReachSettings {
            time_step,
            num_steps,
            mode: PropagationMode::TransitionMatrix,
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
        };
        s.validate()?;
        Ok(s)
    }

    /// `N = round(T / h)`.
    pub fn from_horizon(time_step: f64, time_bound: f64) -> Result<Self> {
        if !(time_step > 0.0 && time_step.is_finite()) {
            return Err(DaeError::InvalidArgument(format!("time step must be positive, got {time_step}")));
        }
        if !(time_bound > 0.0 && time_bound.is_finite()) {
            return Err(DaeError::InvalidArgument(format!("time bound must be positive, got {time_bound}")));
        }
        let ratio = time_bound / time_step;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 0.5 {
            return Err(DaeError::InvalidArgument(format!(
                "time bound {time_bound} is not a positive multiple of step {time_step}"
            )));
        }
        Self::new(time_step, steps as usize)
    }

    pub fn with_mode(mut self, mode: PropagationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_integrator_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Result<Self> {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(DaeError::InvalidArgument(format!("time step must be positive, got {}", self.time_step)));
        }
        if self.num_steps == 0 {
            return Err(DaeError::InvalidArgument("at least one time step is required".into()));
        }
        for (name, v) in [("absolute", self.abs_tol), ("relative", self.rel_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DaeError::InvalidArgument(format!("{name} integrator tolerance must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `t_j = j h` for `j = 0 ... N`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.num_steps).map(|j| j as f64 * self.time_step).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ReachResult {
    /// `Theta(0), Theta(h), ..., Theta(Nh)` over the lifted state.
    pub stars: Vec<StarSet>,
    pub psi: RealMatrix,
    /// `V1(jh)`.
    pub ode_basis: Vec<RealMatrix>,
    pub decomposition: Decomposition,
    pub certificate: ConsistencyCertificate,
    pub settings: ReachSettings,
    /// Number of original (non-input) state coordinates.
    pub n_orig: usize,
    /// Wall-clock time of the propagation phase.
    pub elapsed: Duration,
}

impl ReachResult {
    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }

    pub fn times(&self) -> Vec<f64> {
        self.settings.times()
    }
}

/// Reachable-set projector:
///
/// * index 1: `I + N2`
/// * index 2: `I + N2 + N3 + L3 N2 N1`
/// * index 3: `I + N2 + N3 + N4 + L3 N2 N1 + L4 N3 N1 + L4 L3 N2 N1^2 + Z4 N2 N1`
pub fn build_psi(dec: &DecoupledSystem) -> RealMatrix {
    let n = dec.dim();
    let id = RealMatrix::identity(n, n);
    let n1 = &dec.n[0];
    match dec.mu {
        1 => id + &dec.n[1],
        2 => {
            let l3 = dec.l3.as_ref().expect("index 2 has L3");
            id + &dec.n[1] + &dec.n[2] + l3 * &dec.n[1] * n1
        }
        _ => {
            let (l3, l4, z4) = (
                dec.l3.as_ref().expect("index 3 has L3"),
                dec.l4.as_ref().expect("index 3 has L4"),
                dec.z4.as_ref().expect("index 3 has Z4"),
            );
            let n2n1 = &dec.n[1] * n1;
            id + &dec.n[1] + &dec.n[2] + &dec.n[3]
                + l3 * &n2n1
                + l4 * &dec.n[2] * n1
                + l4 * l3 * &n2n1 * n1
                + z4 * &n2n1
        }
    }
}

/// `V1(jh)` for `j = 0 ... N`.
pub fn propagate_basis(dec: &DecoupledSystem, v1_0: &RealMatrix, settings: &ReachSettings) -> Result<Vec<RealMatrix>> {
    settings.validate()?;
    if v1_0.nrows() != dec.dim() {
        return Err(DaeError::dims("ODE basis rows", dec.dim(), v1_0.nrows()));
    }
    let n1 = &dec.n[0];
    match settings.mode {
        PropagationMode::TransitionMatrix => {
            let phi = matrix_exponential(n1, settings.time_step)?;
            let mut out = Vec::with_capacity(settings.num_steps + 1);
            out.push(v1_0.clone());
            for j in 0..settings.num_steps {
                let next = &phi * &out[j];
                out.push(next);
            }
            if let Some(last) = out.last() {
                ensure_finite(last, "V1").map_err(|_| DaeError::NumericalFailure {
                    step: Some(settings.num_steps),
                    reason: "reachable basis overflowed".into(),
                })?;
            }
            Ok(out)
        }
        PropagationMode::Adaptive => {
            let solver = Dopri5::new(settings.abs_tol, settings.rel_tol);
            let times = settings.times();
            let mut out = vec![RealMatrix::zeros(v1_0.nrows(), v1_0.ncols()); times.len()];
            for c in 0..v1_0.ncols() {
                let x0: RealVector = v1_0.column(c).into_owned();
                let traj = solver.solve_on_grid(|_, x| n1 * x, &x0, &times)?;
                for (j, x) in traj.iter().enumerate() {
                    out[j].set_column(c, x);
                }
            }
            Ok(out)
        }
    }
}

/// Decouples `sys` and computes the reachable stars from `theta0`.
pub fn compute_reach(sys: &AutonomousDae, theta0: &StarSet, settings: &ReachSettings, tol: &TolerancePolicy) -> Result<ReachResult> {
    let decomposition = Decomposition::compute(sys, tol)?;
    reach_with_decomposition(decomposition, sys.n_orig(), theta0, settings, tol)
}

/// [`compute_reach`] for an already decoupled system.
pub fn reach_with_decomposition(
    decomposition: Decomposition,
    n_orig: usize,
    theta0: &StarSet,
    settings: &ReachSettings,
    tol: &TolerancePolicy,
) -> Result<ReachResult> {
    let start = Instant::now();
    settings.validate()?;
    let dec = &decomposition.decoupled;
    if theta0.dim() != dec.dim() {
        return Err(DaeError::dims("initial star dimension", dec.dim(), theta0.dim()));
    }
    let certificate = check_initial_star(&decomposition.gamma, theta0, tol)?;
    if !certificate.consistent {
        return Err(DaeError::InconsistentInitialSet(Box::new(certificate)));
    }
    let v1_0 = dec.ode_projector() * theta0.basis();
    let ode_basis = propagate_basis(dec, &v1_0, settings)?;
    let psi = build_psi(dec);
    let stars = ode_basis
        .iter()
        .map(|v1| theta0.with_basis(&psi * v1))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReachResult {
        stars,
        psi,
        ode_basis,
        decomposition,
        certificate,
        settings: *settings,
        n_orig,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::model::{build_rotating_masses, rotating_masses_initial_star, to_autonomous};
    use nalgebra::dmatrix;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn settings_validation() {
        assert!(ReachSettings::new(0.0, 10).is_err());
        assert!(ReachSettings::new(0.1, 0).is_err());
        assert_eq!(ReachSettings::from_horizon(0.01, 10.0).unwrap().num_steps, 1000);
        assert!(ReachSettings::from_horizon(1.0, 0.2).is_err());
        assert!(ReachSettings::new(0.1, 1).unwrap().with_integrator_tolerances(0.0, 1e-8).is_err());
    }

    #[test]
    fn scalar_exponential_step() {
        let sys = AutonomousDae::from_pencil(dmatrix![1.0, 0.0; 0.0, 0.0], dmatrix![-1.0, 0.0; 0.0, 1.0]).unwrap();
        let dec = Decomposition::compute(&sys, &tol()).unwrap();
        let settings = ReachSettings::new(0.1, 1).unwrap();
        let v = propagate_basis(&dec.decoupled, &dmatrix![1.0; 0.0], &settings).unwrap();
        assert!((v[1][(0, 0)] - (-0.1_f64).exp()).abs() < 1e-15);
        let adaptive = propagate_basis(&dec.decoupled, &dmatrix![1.0; 0.0], &settings.with_mode(PropagationMode::Adaptive)).unwrap();
        assert!((adaptive[1][(0, 0)] - (-0.1_f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rotating_masses_run() {
        let (sys, inputs) = build_rotating_masses();
        let auto = to_autonomous(&sys, &inputs).unwrap();
        let theta0 = rotating_masses_initial_star();
        let settings = ReachSettings::from_horizon(0.01, 10.0).unwrap();
        let reach = compute_reach(&auto, &theta0, &settings, &tol()).unwrap();
        assert_eq!(reach.stars.len(), 1001);
        for s in &reach.stars {
            assert_eq!(s.predicate_matrix(), theta0.predicate_matrix());
            assert_eq!(s.predicate_bound(), theta0.predicate_bound());
        }
        // Psi = I + N3 because N2 = 0.
        let d = &reach.decomposition.decoupled;
        let expected = RealMatrix::identity(6, 6) + d.n_coeff(3);
        assert!(max_abs(&(&reach.psi - expected)) < 1e-12);
        // The initial star is reproduced at t = 0.
        assert!(max_abs(&(reach.stars[0].basis() - theta0.basis())) < 1e-12);
    }

    #[test]
    fn inconsistent_start_is_an_error() {
        let (sys, inputs) = build_rotating_masses();
        let auto = to_autonomous(&sys, &inputs).unwrap();
        let theta0 = rotating_masses_initial_star();
        let mut v = theta0.basis().clone();
        v[(2, 0)] += 1.0;
        let bad = theta0.with_basis(v).unwrap();
        let err = compute_reach(&auto, &bad, &ReachSettings::new(0.01, 5).unwrap(), &tol()).unwrap_err();
        assert!(matches!(err, DaeError::InconsistentInitialSet(_)));
    }

    #[test]
    fn zero_basis_stays_zero() {
        let (sys, inputs) = build_rotating_masses();
        let auto = to_autonomous(&sys, &inputs).unwrap();
        let theta0 = rotating_masses_initial_star().with_basis(RealMatrix::zeros(6, 2)).unwrap();
        let reach = compute_reach(&auto, &theta0, &ReachSettings::new(0.1, 20).unwrap(), &tol()).unwrap();
        assert!(reach.stars.iter().all(|s| s.basis().iter().all(|v| *v == 0.0)));
    }
}
