//! Modified star sets `{ V alpha : C alpha <= d }`.
//!
//! There is no centre vector. A centre-form star `c + V alpha` is represented
//! by prepending `c` as the first basis column and pinning `alpha_1 = 1` with
//! an inequality pair (see [`StarSet::from_center_form`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{DaeError, Result};
use crate::linalg::ensure_finite;
use crate::lp::{DenseSimplex, LpOutcome, LpSolver};
use crate::tolerance::TolerancePolicy;
use crate::{RealMatrix, RealVector};

/// Rejection attempts per sample before falling back to vertex mixing.
const REJECTION_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct StarSet {
    basis: RealMatrix,
    c: RealMatrix,
    d: RealVector,
}

impl StarSet {
    /// Builds `<V, C alpha <= d>` and rejects empty predicates.
    pub fn new(basis: RealMatrix, c: RealMatrix, d: RealVector) -> Result<Self> {
        Self::with_tolerance(basis, c, d, &TolerancePolicy::default())
    }

    pub fn with_tolerance(basis: RealMatrix, c: RealMatrix, d: RealVector, tol: &TolerancePolicy) -> Result<Self> {
        let star = Self::from_parts_unchecked(basis, c, d)?;
        if DenseSimplex::default().find_feasible(&star.c, &star.d, tol)?.is_none() {
            return Err(DaeError::EmptyPredicate);
        }
        Ok(star)
    }

    /// Shape and finiteness checks only; the caller guarantees the predicate
    /// is nonempty (e.g. because it was copied from another star).
    fn from_parts_unchecked(basis: RealMatrix, c: RealMatrix, d: RealVector) -> Result<Self> {
        let k = basis.ncols();
        if k == 0 || basis.nrows() == 0 {
            return Err(DaeError::EmptyMatrix { name: "V", rows: basis.nrows(), cols: k });
        }
        if c.nrows() == 0 {
            return Err(DaeError::EmptyMatrix { name: "C", rows: c.nrows(), cols: c.ncols() });
        }
        if c.ncols() != k {
            return Err(DaeError::dims("predicate columns", k, c.ncols()));
        }
        if d.len() != c.nrows() {
            return Err(DaeError::dims("predicate bound", c.nrows(), d.len()));
        }
        ensure_finite(&basis, "V")?;
        ensure_finite(&c, "C")?;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(DaeError::NonFinite { name: "d", row: 0, col: 0 });
        }
        Ok(StarSet { basis, c, d })
    }

    /// `{ center + V beta : C beta <= d }` folded into a centre-free star
    /// with basis `[center | V]` and `alpha_1 = 1`.
    pub fn from_center_form(center: &RealVector, basis: &RealMatrix, c: &RealMatrix, d: &RealVector) -> Result<Self> {
        if center.len() != basis.nrows() {
            return Err(DaeError::dims("centre length", basis.nrows(), center.len()));
        }
        if c.ncols() != basis.ncols() {
            return Err(DaeError::dims("predicate columns", basis.ncols(), c.ncols()));
        }
        let (n, k, p) = (basis.nrows(), basis.ncols(), c.nrows());
        let mut v = RealMatrix::zeros(n, k + 1);
        v.set_column(0, center);
        v.view_mut((0, 1), (n, k)).copy_from(basis);
        let mut c2 = RealMatrix::zeros(p + 2, k + 1);
        c2[(0, 0)] = 1.0;
        c2[(1, 0)] = -1.0;
        c2.view_mut((2, 1), (p, k)).copy_from(c);
        let mut d2 = RealVector::zeros(p + 2);
        d2[0] = 1.0;
        d2[1] = -1.0;
        d2.rows_mut(2, p).copy_from(d);
        StarSet::new(v, c2, d2)
    }

    /// Axis-aligned box `lo <= alpha <= hi`.
    pub fn from_box(basis: RealMatrix, lo: &[f64], hi: &[f64]) -> Result<Self> {
        let k = basis.ncols();
        if lo.len() != k || hi.len() != k {
            return Err(DaeError::dims("box bounds", k, lo.len().min(hi.len())));
        }
        let mut c = RealMatrix::zeros(2 * k, k);
        let mut d = RealVector::zeros(2 * k);
        for i in 0..k {
            c[(2 * i, i)] = 1.0;
            d[2 * i] = hi[i];
            c[(2 * i + 1, i)] = -1.0;
            d[2 * i + 1] = -lo[i];
        }
        StarSet::new(basis, c, d)
    }

    pub fn basis(&self) -> &RealMatrix {
        &self.basis
    }

    pub fn predicate_matrix(&self) -> &RealMatrix {
        &self.c
    }

    pub fn predicate_bound(&self) -> &RealVector {
        &self.d
    }

    /// State dimension (basis rows).
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Number of generators `k`.
    pub fn generators(&self) -> usize {
        self.basis.ncols()
    }

    pub fn contains_alpha(&self, alpha: &RealVector, tol: &TolerancePolicy) -> bool {
        alpha.len() == self.generators()
            && (&self.c * alpha - &self.d).iter().all(|v| *v <= tol.feasibility_tol)
    }

    /// `V alpha`.
    pub fn point(&self, alpha: &RealVector) -> RealVector {
        &self.basis * alpha
    }

    /// Same predicate, new basis.
    pub fn with_basis(&self, basis: RealMatrix) -> Result<Self> {
        if basis.ncols() != self.generators() {
            return Err(DaeError::dims("basis columns", self.generators(), basis.ncols()));
        }
        Self::from_parts_unchecked(basis, self.c.clone(), self.d.clone())
    }

    /// `<T V, C, d>`.
    pub fn linear_image(&self, t: &RealMatrix) -> Result<Self> {
        if t.ncols() != self.dim() {
            return Err(DaeError::dims("linear map columns", self.dim(), t.ncols()));
        }
        ensure_finite(t, "T")?;
        Self::from_parts_unchecked(t * &self.basis, self.c.clone(), self.d.clone())
    }

    /// Per-coordinate bounds of the alpha-polytope, or `UnboundedPredicate`.
    pub fn alpha_bounds(&self, tol: &TolerancePolicy) -> Result<Vec<(f64, f64)>> {
        let solver = DenseSimplex::default();
        let k = self.generators();
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let mut e = RealVector::zeros(k);
            e[i] = 1.0;
            let lo = match solver.minimize(&e, &self.c, &self.d, tol)? {
                LpOutcome::Optimal { value, .. } => value,
                LpOutcome::Unbounded => return Err(DaeError::UnboundedPredicate),
                LpOutcome::Infeasible => return Err(DaeError::EmptyPredicate),
            };
            let hi = match solver.maximize(&e, &self.c, &self.d, tol)? {
                LpOutcome::Optimal { value, .. } => value,
                LpOutcome::Unbounded => return Err(DaeError::UnboundedPredicate),
                LpOutcome::Infeasible => return Err(DaeError::EmptyPredicate),
            };
            out.push((lo, hi.max(lo)));
        }
        Ok(out)
    }

    /// Seeded coefficient samples inside the predicate.
    ///
    /// Each sample is drawn uniformly from the LP bounding box and accepted if
    /// it satisfies `C alpha <= d + feasibility_tol`. After
    /// `REJECTION_ATTEMPTS` misses the sample is a random convex combination
    /// of LP vertices instead, so thin or degenerate polytopes still yield points.
    pub fn sample_alphas(&self, count: usize, seed: u64, tol: &TolerancePolicy) -> Result<Vec<RealVector>> {
        let bounds = self.alpha_bounds(tol)?;
        let k = self.generators();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices: Option<Vec<RealVector>> = None;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut accepted = None;
            for _ in 0..REJECTION_ATTEMPTS {
                let alpha = RealVector::from_iterator(
                    k,
                    bounds.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo }),
                );
                if self.contains_alpha(&alpha, tol) {
                    accepted = Some(alpha);
                    break;
                }
            }
            let alpha = match accepted {
                Some(a) => a,
                None => {
                    let verts = match &vertices {
                        Some(v) => v,
                        None => vertices.insert(self.lp_vertices(&mut rng, tol)?),
                    };
                    mix_vertices(verts, &mut rng)
                }
            };
            out.push(alpha);
        }
        Ok(out)
    }

    /// Seeded state samples `V alpha` with `alpha` from [`StarSet::sample_alphas`].
    pub fn sample_points(&self, count: usize, seed: u64, tol: &TolerancePolicy) -> Result<Vec<RealVector>> {
        Ok(self
            .sample_alphas(count, seed, tol)?
            .iter()
            .map(|a| self.point(a))
            .collect())
    }

    fn lp_vertices(&self, rng: &mut ChaCha8Rng, tol: &TolerancePolicy) -> Result<Vec<RealVector>> {
        let solver = DenseSimplex::default();
        let k = self.generators();
        let mut directions: Vec<RealVector> = Vec::new();
        for i in 0..k {
            let mut e = RealVector::zeros(k);
            e[i] = 1.0;
            directions.push(-&e);
            directions.push(e);
        }
        for _ in 0..2 * k {
            directions.push(RealVector::from_iterator(k, (0..k).map(|_| rng.random_range(-1.0..=1.0))));
        }
        let mut verts = Vec::with_capacity(directions.len());
        for dir in directions {
            match solver.minimize(&dir, &self.c, &self.d, tol)? {
                LpOutcome::Optimal { x, .. } => verts.push(x),
                LpOutcome::Unbounded => return Err(DaeError::UnboundedPredicate),
                LpOutcome::Infeasible => return Err(DaeError::EmptyPredicate),
            }
        }
        Ok(verts)
    }
}

/// Convex combination with uniform weights on the simplex.
fn mix_vertices(verts: &[RealVector], rng: &mut ChaCha8Rng) -> RealVector {
    let weights: Vec<f64> = verts.iter().map(|_| Exp1.sample(rng)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = RealVector::zeros(verts[0].len());
    for (v, w) in verts.iter().zip(weights) {
        out += v * (w / total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn unit_box() -> StarSet {
        StarSet::from_box(RealMatrix::identity(2, 2), &[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn identity_and_zero_images() {
        let s = unit_box();
        assert_eq!(s.linear_image(&RealMatrix::identity(2, 2)).unwrap(), s);
        let z = s.linear_image(&RealMatrix::zeros(3, 2)).unwrap();
        assert!(z.basis().iter().all(|v| *v == 0.0));
        assert_eq!(z.predicate_matrix(), s.predicate_matrix());
        assert_eq!(z.predicate_bound(), s.predicate_bound());
    }

    #[test]
    fn image_dimension_mismatch() {
        let s = unit_box();
        assert!(matches!(
            s.linear_image(&RealMatrix::zeros(2, 3)),
            Err(DaeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_empty_predicate() {
        let err = StarSet::new(RealMatrix::identity(1, 1), dmatrix![1.0; -1.0], dvector![-1.0, 0.0]).unwrap_err();
        assert!(matches!(err, DaeError::EmptyPredicate));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(StarSet::new(RealMatrix::zeros(2, 0), RealMatrix::zeros(1, 0), dvector![1.0]).is_err());
        assert!(StarSet::new(RealMatrix::identity(2, 2), dmatrix![1.0, 0.0], dvector![1.0, 2.0]).is_err());
        assert!(StarSet::new(RealMatrix::identity(2, 2), dmatrix![1.0, 0.0, 0.0], dvector![1.0]).is_err());
    }

    #[test]
    fn centre_form_folds_into_first_column() {
        let star = StarSet::from_center_form(
            &dvector![1.0, 2.0],
            &RealMatrix::identity(2, 2),
            &dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, 1.0; 0.0, -1.0],
            &dvector![1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        assert_eq!(star.generators(), 3);
        let tol = TolerancePolicy::default();
        for alpha in star.sample_alphas(50, 3, &tol).unwrap() {
            assert!((alpha[0] - 1.0).abs() < 1e-9);
        }
        assert_eq!(star.point(&dvector![1.0, 0.0, 0.0]), dvector![1.0, 2.0]);
    }

    #[test]
    fn degenerate_box_samples_single_point() {
        let star = StarSet::from_box(dmatrix![1.0, 2.0; 3.0, 4.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let tol = TolerancePolicy::default();
        for p in star.sample_points(10, 1, &tol).unwrap() {
            assert!(p.norm() < 1e-12);
        }
    }

    #[test]
    fn thin_diagonal_polytope_falls_back_to_vertex_mixing() {
        // alpha_1 = alpha_2 in [0, 1]: zero-area set inside its bounding box.
        let c = dmatrix![1.0, -1.0; -1.0, 1.0; 1.0, 0.0; -1.0, 0.0];
        let d = dvector![0.0, 0.0, 1.0, 0.0];
        let star = StarSet::new(RealMatrix::identity(2, 2), c, d).unwrap();
        let tol = TolerancePolicy::default();
        for a in star.sample_alphas(20, 9, &tol).unwrap() {
            assert!(star.contains_alpha(&a, &tol));
            assert!((a[0] - a[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn unbounded_sampling_is_rejected() {
        let star = StarSet::new(RealMatrix::identity(1, 1), dmatrix![-1.0], dvector![0.0]).unwrap();
        assert!(matches!(
            star.sample_points(3, 0, &TolerancePolicy::default()),
            Err(DaeError::UnboundedPredicate)
        ));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let s = unit_box();
        let tol = TolerancePolicy::default();
        assert_eq!(s.sample_points(5, 42, &tol).unwrap(), s.sample_points(5, 42, &tol).unwrap());
        assert_ne!(s.sample_points(5, 42, &tol).unwrap(), s.sample_points(5, 43, &tol).unwrap());
    }
}
