//! Semidiscretized 2-D Stokes flow on the unit square.
//!
//! Marker-and-cell layout on a `k x k` grid of square cells of width `h = 1/k`:
//! pressures live at cell centres, `x`-velocities on interior vertical faces
//! and `y`-velocities on interior horizontal faces. No-slip walls remove the
//! normal boundary faces; tangential wall values enter the Laplacian through a
//! mirrored ghost value (`u_ghost = -u`).
//!
//! The pressure of cell `(k-1, k-1)` is pinned to zero. Without this the
//! constant pressure mode lies in the kernel of `sE - A` for every `s` and
//! the pencil is singular.

use super::{DaeSystem, InputModel};
use crate::error::{DaeError, Result};
use crate::linalg::block_diag;
use crate::RealMatrix;

/// Unknown numbering of the MAC grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StokesLayout {
    pub grid_n: usize,
}

impl StokesLayout {
    pub fn new(grid_n: usize) -> Result<Self> {
        if grid_n < 2 {
            return Err(DaeError::InvalidArgument(format!(
                "Stokes grid needs at least 2 cells per side, got {grid_n}"
            )));
        }
        Ok(StokesLayout { grid_n })
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.grid_n as f64
    }

    /// Interior `x`-velocity faces, `(k-1) k`.
    pub fn n_u(&self) -> usize {
        (self.grid_n - 1) * self.grid_n
    }

    /// Velocity unknowns `n_v = 2 k (k-1)`.
    pub fn n_velocity(&self) -> usize {
        2 * self.n_u()
    }

    /// Pressure unknowns `n_rho = k^2 - 1` (one pinned cell).
    pub fn n_pressure(&self) -> usize {
        self.grid_n * self.grid_n - 1
    }

    pub fn state_dim(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    /// `x`-velocity on the face between cells `(i-1, j)` and `(i, j)`, `1 <= i < k`.
    pub fn u_index(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.grid_n;
        (i >= 1 && i < k && j < k).then(|| j * (k - 1) + (i - 1))
    }

    /// `y`-velocity on the face between cells `(i, j-1)` and `(i, j)`, `1 <= j < k`.
    pub fn v_index(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.grid_n;
        (i < k && j >= 1 && j < k).then(|| self.n_u() + (j - 1) * k + i)
    }

    /// Pressure of cell `(i, j)`; `None` for the pinned cell or outside the grid.
    pub fn p_index(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.grid_n;
        let flat = j * k + i;
        (i < k && j < k && flat < self.n_pressure()).then(|| self.n_velocity() + flat)
    }

    /// The cell whose west and south faces carry the monitored and forced velocities.
    pub fn central_cell(&self) -> (usize, usize) {
        (self.grid_n / 2, self.grid_n / 2)
    }

    /// State index of the `x`-velocity on the central cell's west face.
    pub fn central_u(&self) -> usize {
        let (i, j) = self.central_cell();
        self.u_index(i, j).expect("central west face is interior")
    }

    /// State index of the `y`-velocity on the central cell's south face.
    pub fn central_v(&self) -> usize {
        let (i, j) = self.central_cell();
        self.v_index(i, j).expect("central south face is interior")
    }
}

/// Index-2 Stokes DAE `E = diag(I_{n_v}, 0)`, `A = [[A11, A12], [A12^T, 0]]`
/// with a single body force (`m = 1`) acting on the central cell's
/// west and south faces.
pub fn build_stokes(grid_n: usize) -> Result<DaeSystem> {
    let layout = StokesLayout::new(grid_n)?;
    let k = grid_n;
    let n = layout.state_dim();
    let nv = layout.n_velocity();
    let h = layout.cell_width();
    let inv_h2 = 1.0 / (h * h);
    let inv_h = 1.0 / h;

    let mut a = RealMatrix::zeros(n, n);

    // x-velocities: normal neighbours along x, tangential along y.
    for j in 0..k {
        for i in 1..k {
            let row = layout.u_index(i, j).unwrap();
            laplacian_row(&mut a, row, inv_h2, [
                (layout.u_index(i - 1, j), false),
                (layout.u_index(i + 1, j), false),
                (j.checked_sub(1).and_then(|jm| layout.u_index(i, jm)), true),
                (layout.u_index(i, j + 1), true),
            ]);
            gradient_entries(&mut a, row, inv_h, layout.p_index(i, j), layout.p_index(i - 1, j));
        }
    }
    // y-velocities: normal neighbours along y, tangential along x.
    for j in 1..k {
        for i in 0..k {
            let row = layout.v_index(i, j).unwrap();
            laplacian_row(&mut a, row, inv_h2, [
                (layout.v_index(i, j - 1), false),
                (layout.v_index(i, j + 1), false),
                (i.checked_sub(1).and_then(|im| layout.v_index(im, j)), true),
                (layout.v_index(i + 1, j), true),
            ]);
            gradient_entries(&mut a, row, inv_h, layout.p_index(i, j), layout.p_index(i, j - 1));
        }
    }
    // Divergence rows are the exact transpose of the gradient block.
    let a12 = a.view((0, nv), (nv, n - nv)).into_owned();
    a.view_mut((nv, 0), (n - nv, nv)).copy_from(&a12.transpose());

    let e = block_diag(&RealMatrix::identity(nv, nv), &RealMatrix::zeros(n - nv, n - nv));
    let mut b = RealMatrix::zeros(n, 1);
    b[(layout.central_u(), 0)] = 1.0;
    b[(layout.central_v(), 0)] = 1.0;
    DaeSystem::new(e, a, b)
}

/// Constant forcing, `A_u = [0]`.
pub fn stokes_input_model() -> InputModel {
    InputModel::constant(1)
}

/// Five-point stencil row. A missing tangential neighbour is a wall with a
/// mirrored ghost value; a missing normal neighbour is a zero boundary face.
fn laplacian_row(
    a: &mut RealMatrix,
    row: usize,
    inv_h2: f64,
    neighbours: [(Option<usize>, bool); 4],
) {
    let mut diag = 0.0;
    for (neighbour, tangential) in neighbours {
        diag -= inv_h2;
        match neighbour {
            Some(col) => a[(row, col)] += inv_h2,
            None if tangential => diag -= inv_h2,
            None => {}
        }
    }
    a[(row, row)] += diag;
}

/// Momentum contribution `-(p_plus - p_minus) / h`.
fn gradient_entries(
    a: &mut RealMatrix,
    row: usize,
    inv_h: f64,
    p_plus: Option<usize>,
    p_minus: Option<usize>,
) {
    if let Some(col) = p_plus {
        a[(row, col)] -= inv_h;
    }
    if let Some(col) = p_minus {
        a[(row, col)] += inv_h;
    }
}
