//! Small dense linear programs over free variables:
//! `min c^T x  s.t.  G x <= f`.
//!
//! The kernel is a two-phase tableau simplex with Bland's anti-cycling rule.
//! Free variables are split as `x = x+ - x-`, each inequality gets a slack,
//! and rows with a negative right-hand side get an artificial variable for
//! phase one. Rows are scaled to unit max-norm before solving. The problems
//! solved here have a handful of columns (the star's generator count), so a
//! dense tableau is the right tool.

use crate::error::{DaeError, Result};
use crate::tolerance::TolerancePolicy;
use crate::{RealMatrix, RealVector};

/// Result of an optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: RealVector, value: f64 },
    Infeasible,
    Unbounded,
}

/// Pluggable backend for the feasibility and optimization queries used by the
/// star algebra and the safety checker.
pub trait LpSolver {
    /// Some `x` with `G x <= f + feasibility_tol`, or `None` when the polyhedron is empty.
    fn find_feasible(&self, g: &RealMatrix, f: &RealVector, tol: &TolerancePolicy) -> Result<Option<RealVector>>;

    /// Minimizes `c^T x` over `G x <= f`.
    fn minimize(&self, c: &RealVector, g: &RealMatrix, f: &RealVector, tol: &TolerancePolicy) -> Result<LpOutcome>;

    /// Maximizes `c^T x` over `G x <= f`; the reported value is the maximum.
    fn maximize(&self, c: &RealVector, g: &RealMatrix, f: &RealVector, tol: &TolerancePolicy) -> Result<LpOutcome> {
        Ok(match self.minimize(&(-c), g, f, tol)? {
            LpOutcome::Optimal { x, value } => LpOutcome::Optimal { x, value: -value },
            other => other,
        })
    }
}

/// Dense two-phase simplex.
#[derive(Debug, Clone, Copy)]
pub struct DenseSimplex {
    /// Pivot magnitudes below this are treated as zero.
    pub pivot_eps: f64,
    /// Iteration budget per phase, as a multiple of `rows + columns`.
    pub iteration_factor: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex { pivot_eps: 1e-11, iteration_factor: 50 }
    }
}

impl LpSolver for DenseSimplex {
    fn find_feasible(&self, g: &RealMatrix, f: &RealVector, tol: &TolerancePolicy) -> Result<Option<RealVector>> {
        let zero = RealVector::zeros(g.ncols());
        match self.solve(&zero, g, f, tol, false)? {
            LpOutcome::Optimal { x, .. } => Ok(Some(x)),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(DaeError::numerical("feasibility problem reported unbounded")),
        }
    }

    fn minimize(&self, c: &RealVector, g: &RealMatrix, f: &RealVector, tol: &TolerancePolicy) -> Result<LpOutcome> {
        self.solve(c, g, f, tol, true)
    }
}

/// Constraint matrix after dropping empty rows and scaling the rest.
struct Scaled {
    g: RealMatrix,
    f: RealVector,
}

fn scale_rows(g: &RealMatrix, f: &RealVector, tol: &TolerancePolicy) -> Option<Scaled> {
    let mut rows = Vec::with_capacity(g.nrows());
    for i in 0..g.nrows() {
        let norm = g.row(i).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if norm == 0.0 {
            // 0 <= f_i: either vacuous or infeasible.
            if f[i] < -tol.feasibility_tol {
                return None;
            }
            continue;
        }
        rows.push((i, 1.0 / norm));
    }
    let k = g.ncols();
    let mut sg = RealMatrix::zeros(rows.len(), k);
    let mut sf = RealVector::zeros(rows.len());
    for (r, (i, s)) in rows.iter().enumerate() {
        for j in 0..k {
            sg[(r, j)] = g[(*i, j)] * s;
        }
        sf[r] = f[*i] * s;
    }
    Some(Scaled { g: sg, f: sf })
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, row: usize) -> f64 {
        self.t[row][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (v, pv) in line.iter_mut().zip(pivot_row.iter()) {
                    *v -= factor * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| cost[b] * self.rhs(r))
            .sum()
    }

    /// Bland's rule: lowest-index improving column enters, ratio ties go to
    /// the lowest basic index.
    fn run(&mut self, cost: &[f64], allowed: &[bool], eps: f64, max_iter: usize) -> Result<PhaseEnd> {
        for _ in 0..max_iter {
            let entering = (0..self.cols).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(r, &b)| cost[b] * self.t[r][j])
                        .sum::<f64>();
                reduced < -eps
            });
            let Some(col) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][col];
                if a > eps {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(PhaseEnd::Unbounded),
            }
        }
        Err(DaeError::numerical(format!("simplex exceeded {max_iter} iterations")))
    }
}

impl DenseSimplex {
    fn solve(
        &self,
        c: &RealVector,
        g: &RealMatrix,
        f: &RealVector,
        tol: &TolerancePolicy,
        optimize: bool,
    ) -> Result<LpOutcome> {
        if g.nrows() != f.len() {
            return Err(DaeError::dims("LP right-hand side", g.nrows(), f.len()));
        }
        if c.len() != g.ncols() {
            return Err(DaeError::dims("LP objective", g.ncols(), c.len()));
        }
        if g.iter().chain(f.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(DaeError::numerical("non-finite LP data"));
        }
        let k = g.ncols();
        let Some(Scaled { g: sg, f: sf }) = scale_rows(g, f, tol) else {
            return Ok(LpOutcome::Infeasible);
        };
        let rows = sg.nrows();
        let negative: Vec<usize> = (0..rows).filter(|&i| sf[i] < 0.0).collect();
        let n_art = negative.len();
        // Columns: x+ (k) | x- (k) | slack (rows) | artificial (n_art)
        let cols = 2 * k + rows + n_art;
        let mut t = vec![vec![0.0; cols + 1]; rows];
        let mut basis = vec![0; rows];
        let mut art = 0;
        for i in 0..rows {
            let sign = if sf[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..k {
                t[i][j] = sign * sg[(i, j)];
                t[i][k + j] = -sign * sg[(i, j)];
            }
            t[i][2 * k + i] = sign;
            t[i][cols] = sign * sf[i];
            if sign < 0.0 {
                t[i][2 * k + rows + art] = 1.0;
                basis[i] = 2 * k + rows + art;
                art += 1;
            } else {
                basis[i] = 2 * k + i;
            }
        }
        let mut tab = Tableau { t, basis, cols };
        let max_iter = self.iteration_factor * (rows + cols).max(1);
        let art_start = 2 * k + rows;

        if n_art > 0 {
            let mut cost1 = vec![0.0; cols];
            for v in cost1.iter_mut().skip(art_start) {
                *v = 1.0;
            }
            let allowed = vec![true; cols];
            tab.run(&cost1, &allowed, self.pivot_eps, max_iter)?;
            let infeasibility = tab.objective(&cost1);
            let scale = sf.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
            if infeasibility > tol.feasibility_tol * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive zero-level artificials out of the basis; rows where that
            // fails are redundant and are removed.
            let mut r = 0;
            while r < tab.t.len() {
                if tab.basis[r] >= art_start {
                    let swap = (0..art_start).find(|&j| tab.t[r][j].abs() > self.pivot_eps);
                    match swap {
                        Some(j) => {
                            tab.pivot(r, j);
                            r += 1;
                        }
                        None => {
                            tab.t.remove(r);
                            tab.basis.remove(r);
                        }
                    }
                } else {
                    r += 1;
                }
            }
        }

        let mut value = 0.0;
        if optimize {
            let mut cost2 = vec![0.0; cols];
            for j in 0..k {
                cost2[j] = c[j];
                cost2[k + j] = -c[j];
            }
            let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
            if let PhaseEnd::Unbounded = tab.run(&cost2, &allowed, self.pivot_eps, max_iter)? {
                return Ok(LpOutcome::Unbounded);
            }
            value = tab.objective(&cost2);
        }

        let mut x = RealVector::zeros(k);
        for (r, &b) in tab.basis.iter().enumerate() {
            let level = tab.rhs(r);
            if b < k {
                x[b] += level;
            } else if b < 2 * k {
                x[b - k] -= level;
            }
        }
        if !optimize {
            value = 0.0;
        }
        Ok(LpOutcome::Optimal { x, value })
    }
}

/// Largest violation `max_i (G x - f)_i`, clamped at zero.
pub fn max_violation(g: &RealMatrix, f: &RealVector, x: &RealVector) -> f64 {
    (g * x - f).iter().fold(0.0_f64, |acc, v| acc.max(*v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn interval_feasible() {
        let g = dmatrix![1.0; -1.0];
        let f = dvector![1.0, 0.0];
        let x = DenseSimplex::default().find_feasible(&g, &f, &tol()).unwrap().unwrap();
        assert!(x[0] >= -1e-9 && x[0] <= 1.0 + 1e-9);
    }

    #[test]
    fn interval_empty() {
        let g = dmatrix![1.0; -1.0];
        let f = dvector![-1.0, 0.0];
        assert!(DenseSimplex::default().find_feasible(&g, &f, &tol()).unwrap().is_none());
    }

    #[test]
    fn zero_rows() {
        let solver = DenseSimplex::default();
        let g = dmatrix![0.0, 0.0];
        assert!(solver.find_feasible(&g, &dvector![-1.0], &tol()).unwrap().is_none());
        assert!(solver.find_feasible(&g, &dvector![0.0], &tol()).unwrap().is_some());
    }

    #[test]
    fn optimize_box() {
        let g = dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, 1.0; 0.0, -1.0];
        let f = dvector![0.2, -0.1, 1.2, -1.0];
        let solver = DenseSimplex::default();
        match solver.minimize(&dvector![1.0, 1.0], &g, &f, &tol()).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 1.1).abs() < 1e-12);
                assert!((x - dvector![0.1, 1.0]).norm() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        match solver.maximize(&dvector![1.0, -2.0], &g, &f, &tol()).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - (0.2 - 2.0)).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_direction() {
        // x >= 0 only; minimize -x is unbounded, minimize x is 0.
        let g = dmatrix![-1.0];
        let f = dvector![0.0];
        let solver = DenseSimplex::default();
        assert_eq!(solver.minimize(&dvector![-1.0], &g, &f, &tol()).unwrap(), LpOutcome::Unbounded);
        match solver.minimize(&dvector![1.0], &g, &f, &tol()).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!(value.abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_pair_and_degenerate_vertex() {
        // alpha_1 = 1 written as two inequalities, plus a redundant constraint through the vertex.
        let g = dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, -1.0; 1.0, 1.0; 0.0, 1.0];
        let f = dvector![1.0, -1.0, 0.0, 1.0, 0.0];
        let solver = DenseSimplex::default();
        let x = solver.find_feasible(&g, &f, &tol()).unwrap().unwrap();
        assert!(max_violation(&g, &f, &x) < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn badly_scaled_rows() {
        let g = dmatrix![1e6, 0.0; -1e-6, 0.0; 0.0, 1.0];
        let f = dvector![2e6, -1e-6, 3.0];
        let x = DenseSimplex::default().find_feasible(&g, &f, &tol()).unwrap().unwrap();
        assert!(x[0] >= 1.0 - 1e-9 && x[0] <= 2.0 + 1e-9);
    }

    #[test]
    fn dimension_checks() {
        let solver = DenseSimplex::default();
        assert!(solver.find_feasible(&dmatrix![1.0], &dvector![1.0, 2.0], &tol()).is_err());
        assert!(solver.minimize(&dvector![1.0, 2.0], &dmatrix![1.0], &dvector![1.0], &tol()).is_err());
    }
}
