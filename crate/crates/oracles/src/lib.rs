//! Reference computations for tests. Each routine is deliberately naive and
//! shares no code with the `daereach` pipeline it is used to check.

use nalgebra::{DMatrix, DVector};

/// Three-stage Radau IIA collocation applied directly to `E x' = A x`.
///
/// Stage increments `Z_i` solve `E Z_i = h sum_j a_ij A (x0 + Z_j)`; the
/// method is stiffly accurate, so `x1 = x0 + Z_3`. It handles singular `E`
/// without any index reduction.
pub struct RadauIIA {
    n: usize,
    step: f64,
    a: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl RadauIIA {
    pub fn new(e: &DMatrix<f64>, a: &DMatrix<f64>, step: f64) -> Self {
        let n = e.nrows();
        let coeff = radau_coefficients();
        let mut m = DMatrix::zeros(3 * n, 3 * n);
        for (i, row) in coeff.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let mut block = a * (-step * c);
                if i == j {
                    block += e;
                }
                m.view_mut((i * n, j * n), (n, n)).copy_from(&block);
            }
        }
        RadauIIA { n, step, a: a.clone(), lu: m.lu() }
    }

    /// One step for every column of `x0`.
    pub fn step(&self, x0: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let coeff = radau_coefficients();
        let ax0 = &self.a * x0;
        let mut rhs = DMatrix::zeros(3 * n, x0.ncols());
        for (i, row) in coeff.iter().enumerate() {
            let row_sum: f64 = row.iter().sum();
            rhs.view_mut((i * n, 0), (n, x0.ncols())).copy_from(&(&ax0 * (self.step * row_sum)));
        }
        let z = self.lu.solve(&rhs).expect("Radau stage matrix is nonsingular");
        x0 + z.view((2 * n, 0), (n, x0.ncols()))
    }

    /// States at `t = j * substeps * step` for `j = 0 ... outputs`.
    pub fn integrate(&self, x0: &DMatrix<f64>, outputs: usize, substeps: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(outputs + 1);
        let mut x = x0.clone();
        out.push(x.clone());
        for _ in 0..outputs {
            for _ in 0..substeps {
                x = self.step(&x);
            }
            out.push(x.clone());
        }
        out
    }
}

fn radau_coefficients() -> [[f64; 3]; 3] {
    let s6 = 6.0_f64.sqrt();
    [
        [(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0],
        [(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0],
        [(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
    ]
}

/// `e^{M t}` by scaling, a 40-term Taylor sum and repeated squaring.
pub fn expm_series(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mt = m * t;
    let norm = (0..n)
        .map(|c| mt.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let x = mt / 2f64.powi(squarings);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// All vertices of `{x : G x <= f}` by trying every square subsystem.
/// Assumes `G` has full column rank (a pointed polyhedron).
pub fn polytope_vertices(g: &DMatrix<f64>, f: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
    let (p, k) = g.shape();
    let mut verts: Vec<DVector<f64>> = Vec::new();
    for rows in combinations(p, k) {
        let sub = DMatrix::from_fn(k, k, |r, c| g[(rows[r], c)]);
        if sub.determinant().abs() < 1e-12 {
            continue;
        }
        let rhs = DVector::from_fn(k, |r, _| f[rows[r]]);
        let Some(x) = sub.lu().solve(&rhs) else { continue };
        let slack = g * &x - f;
        if slack.iter().all(|v| *v <= tol) && !verts.iter().any(|v| (v - &x).amax() < 1e-9) {
            verts.push(x);
        }
    }
    verts
}

/// Feasibility by vertex enumeration: some vertex of `G x <= f`, or `None`.
pub fn vertex_feasible(g: &DMatrix<f64>, f: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    polytope_vertices(g, f, tol).into_iter().next()
}

/// Corners of the box `lo <= x <= hi`.
pub fn box_vertices(lo: &[f64], hi: &[f64]) -> Vec<DVector<f64>> {
    let k = lo.len();
    (0..1usize << k)
        .map(|mask| DVector::from_fn(k, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }))
        .collect()
}

/// `k`-element subsets of `0..p` in lexicographic order.
pub fn combinations(p: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..p {
            cur.push(i);
            rec(i + 1, p, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, p, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Induced infinity norm (max absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `|lhs - rhs|_max / (1 + prod ||operand||_inf)`.
fn scaled(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>, operands: &[&DMatrix<f64>]) -> f64 {
    let scale: f64 = operands.iter().map(|m| inf_norm(m)).product();
    (lhs - rhs).amax() / (1.0 + scale)
}

/// Norm-scaled residuals of the projector and chain identities.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChainResiduals {
    /// `E_j Q_j = 0`, `Q_j^2 = Q_j`.
    pub kernel_projector: f64,
    /// `Q_j = Q_j^T` (only meaningful for orthogonal projectors).
    pub symmetry: f64,
    /// `E_{j+1} P_j = E_j`, `E_{j+1} Q_j = -A_j Q_j`, and the chain recursion.
    pub chain: f64,
    /// `A_mu = A_0 + sum_j E_{j+1} Q_j`.
    pub telescoping: f64,
    /// `Q_j Q_i = 0` for `j > i`.
    pub admissibility: f64,
    /// `P_j Q_i = Q_i`, `Q_j P_i = Q_j`, `P_i P_j P_i = P_i P_j`, `P_j P_i P_j = P_i P_j` for `j > i`.
    pub admissible_identities: f64,
}

impl ChainResiduals {
    pub fn worst(&self, include_symmetry: bool, include_admissible: bool) -> f64 {
        let mut w = self.kernel_projector.max(self.chain).max(self.telescoping);
        if include_symmetry {
            w = w.max(self.symmetry);
        }
        if include_admissible {
            w = w.max(self.admissibility).max(self.admissible_identities);
        }
        w
    }
}

/// Evaluates every identity on a chain `E_0..E_mu`, `A_0..A_mu`, `Q_0..Q_{mu-1}`.
pub fn chain_residuals(e: &[DMatrix<f64>], a: &[DMatrix<f64>], q: &[DMatrix<f64>]) -> ChainResiduals {
    let n = e[0].nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let p: Vec<DMatrix<f64>> = q.iter().map(|qj| &id - qj).collect();
    let zero = DMatrix::<f64>::zeros(n, n);
    let mut r = ChainResiduals::default();
    for j in 0..q.len() {
        r.kernel_projector = r
            .kernel_projector
            .max(scaled(&(&e[j] * &q[j]), &zero, &[&e[j], &q[j]]))
            .max(scaled(&(&q[j] * &q[j]), &q[j], &[&q[j], &q[j]]));
        r.symmetry = r.symmetry.max((&q[j] - q[j].transpose()).amax() / (1.0 + q[j].amax()));
        r.chain = r
            .chain
            .max(scaled(&(&e[j + 1] * &p[j]), &e[j], &[&e[j + 1], &p[j]]))
            .max(scaled(&(&e[j + 1] * &q[j]), &(-(&a[j] * &q[j])), &[&e[j + 1], &a[j], &q[j]]))
            .max(scaled(&e[j + 1], &(&e[j] - &a[j] * &q[j]), &[&a[j], &q[j]]))
            .max(scaled(&a[j + 1], &(&a[j] * &p[j]), &[&a[j], &p[j]]));
        for i in 0..j {
            let ops = [&p[i], &p[j], &q[i], &q[j]];
            r.admissibility = r.admissibility.max(scaled(&(&q[j] * &q[i]), &zero, &[&q[j], &q[i]]));
            r.admissible_identities = r
                .admissible_identities
                .max(scaled(&(&p[j] * &q[i]), &q[i], &ops))
                .max(scaled(&(&q[j] * &p[i]), &q[j], &ops))
                .max(scaled(&(&p[i] * &p[j] * &p[i]), &(&p[i] * &p[j]), &ops))
                .max(scaled(&(&p[j] * &p[i] * &p[j]), &(&p[i] * &p[j]), &ops));
        }
    }
    let mu = q.len();
    let mut tele = a[0].clone();
    let mut ops = vec![&a[0]];
    for j in 0..mu {
        tele += &e[j + 1] * &q[j];
        ops.push(&e[j + 1]);
    }
    let scale: f64 = ops.iter().map(|m| inf_norm(m)).sum::<f64>() * q.iter().map(inf_norm).fold(1.0, f64::max);
    r.telescoping = (&a[mu] - tele).amax() / (1.0 + scale);
    r
}
