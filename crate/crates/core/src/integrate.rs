//! Adaptive explicit Runge-Kutta (Dormand-Prince 5(4)) for the ODE subsystem.

use crate::error::{DaeError, Result};
use crate::RealVector;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (also the last stage row, FSAL).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Step budget per output interval.
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Dopri5 { abs_tol, rel_tol, max_steps: 100_000 }
    }

    /// Integrates `x' = f(t, x)` from `times[0]` and returns the state at
    /// every entry of `times` (which must be increasing).
    pub fn solve_on_grid<F>(&self, f: F, x0: &RealVector, times: &[f64]) -> Result<Vec<RealVector>>
    where
        F: Fn(f64, &RealVector) -> RealVector,
    {
        if times.is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(times.len());
        let mut x = x0.clone();
        let mut t = times[0];
        out.push(x.clone());
        let mut k1 = f(t, &x);
        let mut h = self.initial_step(&f, t, &x, &k1);
        for (idx, &target) in times.iter().enumerate().skip(1) {
            if target < t {
                return Err(DaeError::InvalidArgument("output times must be increasing".into()));
            }
            let mut steps = 0;
            while t < target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(DaeError::NumericalFailure {
                        step: Some(idx),
                        reason: "adaptive integrator exceeded its step budget".into(),
                    });
                }
                let remaining = target - t;
                let last = h >= remaining * (1.0 - 1e-12);
                let step = if last { remaining } else { h };
                let (x_new, k7, err) = self.attempt(&f, t, &x, &k1, step);
                if !err.is_finite() {
                    return Err(DaeError::NumericalFailure {
                        step: Some(idx),
                        reason: "non-finite value in adaptive integrator".into(),
                    });
                }
                if err <= 1.0 {
                    t = if last { target } else { t + step };
                    x = x_new;
                    k1 = k7;
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Do not let a short final hop shrink the carried step size.
                if !(last && err <= 1.0) || factor < 1.0 {
                    h = step * factor;
                }
                if h < f64::EPSILON * t.abs().max(1.0) {
                    return Err(DaeError::NumericalFailure {
                        step: Some(idx),
                        reason: "adaptive step size underflow".into(),
                    });
                }
            }
            out.push(x.clone());
        }
        Ok(out)
    }

    fn attempt<F>(&self, f: &F, t: f64, x: &RealVector, k1: &RealVector, h: f64) -> (RealVector, RealVector, f64)
    where
        F: Fn(f64, &RealVector) -> RealVector,
    {
        let mut k: Vec<RealVector> = Vec::with_capacity(7);
        k.push(k1.clone());
        for s in 1..7 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    xs.axpy(h * A[s][j], kj, 1.0);
                }
            }
            k.push(f(t + C[s] * h, &xs));
        }
        let mut x5 = x.clone();
        let mut e = RealVector::zeros(x.len());
        for s in 0..7 {
            if B5[s] != 0.0 {
                x5.axpy(h * B5[s], &k[s], 1.0);
            }
            e.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
        }
        let err = self.error_norm(&e, x, &x5);
        let k7 = k.pop().expect("seven stages");
        (x5, k7, err)
    }

    fn error_norm(&self, e: &RealVector, x: &RealVector, x_new: &RealVector) -> f64 {
        if e.is_empty() {
            return 0.0;
        }
        let sum: f64 = (0..e.len())
            .map(|i| {
                let sc = self.abs_tol + self.rel_tol * x[i].abs().max(x_new[i].abs());
                (e[i] / sc).powi(2)
            })
            .sum();
        (sum / e.len() as f64).sqrt()
    }

    fn initial_step<F>(&self, f: &F, t: f64, x: &RealVector, k1: &RealVector) -> f64
    where
        F: Fn(f64, &RealVector) -> RealVector,
    {
        let scale = |v: &RealVector| {
            if v.is_empty() {
                return 0.0;
            }
            let s: f64 = (0..v.len())
                .map(|i| (v[i] / (self.abs_tol + self.rel_tol * x[i].abs())).powi(2))
                .sum();
            (s / v.len() as f64).sqrt()
        };
        let d0 = scale(x);
        let d1 = scale(k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let x1 = x + k1 * h0;
        let k2 = f(t + h0, &x1);
        let d2 = scale(&(k2 - k1)) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }
}
