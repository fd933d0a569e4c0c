//! Finite-volume discretization of `−∇·(a ∇u)`.
//!
//! The stored matrix `S` is the symmetric flux-balance (stiffness) matrix
//! divided by the cell volume `∏ hᵢ`, so interior rows read `(−1, 2, −1)/h²`
//! for `a ≡ 1`. Together with the nodal mass weights `W` (1 inside, ½ per
//! bounded wall) the strong-form operator is `A = W⁻¹ S`. On a periodic cell
//! `W = I` and `A = S`. At a Neumann wall the strong form coincides with the
//! reflection-ghost stencil.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Domain, ScalarField};
use crate::krylov::{self, Jacobi, Preconditioner};
use crate::spectral::{SpectralSolver, WeakPreconditioner};

/// Compressed-sparse-row storage of `S`, plus the mass weights.
pub struct SparseOperator {
    domain: Arc<Domain>,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    entries: Vec<f64>,
    diag: Vec<f64>,
    mass: Vec<f64>,
    a_mean: f64,
    spectral: SpectralSolver,
}

impl std::fmt::Debug for SparseOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseOperator")
            .field("n", &self.n())
            .field("nnz", &self.entries.len())
            .field("domain", &self.domain)
            .finish()
    }
}

/// Assembles the operator for the diffusion field `a` (arithmetic mean at
/// faces).
pub fn assemble(domain: &Arc<Domain>, a: &ScalarField) -> Result<SparseOperator> {
    if a.domain().as_ref() != domain.as_ref() {
        return Err(Error::InvalidDomain(
            "diffusion field lives on a different grid".into(),
        ));
    }
    if a.min() <= 0.0 {
        return Err(Error::InvalidCoefficient(format!(
            "diffusion coefficient must be positive, min is {}",
            a.min()
        )));
    }
    let n = domain.len();
    let dim = domain.dim();
    let res = domain.resolution();
    let periodic = domain.is_periodic();
    let av = a.values();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(n * (2 * dim + 1));
    let mut entries = Vec::with_capacity(n * (2 * dim + 1));
    let mut diag = vec![0.0; n];
    row_offsets.push(0);

    let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * dim + 1);
    for i in 0..n {
        let idx = domain.multi_index(i);
        row.clear();
        let mut d = 0.0;
        for axis in 0..dim {
            let h = domain.spacing(axis);
            // Faces normal to `axis` are shortened at walls of the other axis.
            let mut face = 1.0;
            if !periodic {
                for other in (0..dim).filter(|&o| o != axis) {
                    if idx[other] == 0 || idx[other] + 1 == res[other] {
                        face *= 0.5;
                    }
                }
            }
            let m = res[axis];
            let mut neighbours = [None, None];
            if periodic {
                neighbours = [Some((idx[axis] + m - 1) % m), Some((idx[axis] + 1) % m)];
            } else {
                if idx[axis] > 0 {
                    neighbours[0] = Some(idx[axis] - 1);
                }
                if idx[axis] + 1 < m {
                    neighbours[1] = Some(idx[axis] + 1);
                }
            }
            for k in neighbours.into_iter().flatten() {
                let mut jdx = idx;
                jdx[axis] = k;
                let j = domain.flat_index(jdx);
                let coef = face * 0.5 * (av[i] + av[j]) / (h * h);
                row.push((j, -coef));
                d += coef;
            }
        }
        row.push((i, d));
        row.sort_by_key(|&(j, _)| j);
        let mut last: Option<usize> = None;
        for &(j, v) in &row {
            if last == Some(j) {
                *entries.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                entries.push(v);
                last = Some(j);
            }
        }
        diag[i] = d;
        row_offsets.push(col_indices.len());
    }

    let a_mean = av.iter().sum::<f64>() / n as f64;
    Ok(SparseOperator {
        domain: domain.clone(),
        row_offsets,
        col_indices,
        entries,
        diag,
        mass: domain.mass_weights(),
        a_mean,
        spectral: SpectralSolver::new(domain, a_mean),
    })
}

impl SparseOperator {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    /// Nodal mass weights `W`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn a_mean(&self) -> f64 {
        self.a_mean
    }

    pub(crate) fn spectral(&self) -> &SpectralSolver {
        &self.spectral
    }

    /// Stored entry `S[i][j]` (zero when structurally absent).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// Nonzeros of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.entries[span].iter().copied())
    }

    /// `y = S x`.
    pub fn mul_stored(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let span = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.col_indices[span.clone()]
                .iter()
                .zip(&self.entries[span])
                .map(|(&j, v)| v * x[j])
                .sum();
        }
    }

    /// `y = W⁻¹ S x`, the discrete `−∇·(a∇x)`.
    pub fn mul_strong(&self, x: &[f64], y: &mut [f64]) {
        self.mul_stored(x, y);
        for (yi, w) in y.iter_mut().zip(&self.mass) {
            *yi /= w;
        }
    }

    /// Dense copy of `S` (row-major); meant for small grids.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        for (i, r) in m.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                r[j] = v;
            }
        }
        m
    }
}

/// Discrete `−∇·(a∇u)` applied to a field.
pub fn apply(op: &SparseOperator, field: &ScalarField) -> Result<ScalarField> {
    if field.len() != op.n() {
        return Err(Error::DimensionMismatch {
            expected: op.n(),
            found: field.len(),
        });
    }
    let mut y = vec![0.0; op.n()];
    op.mul_strong(field.values(), &mut y);
    Ok(ScalarField::from_parts(op.domain.clone(), y))
}

/// Preconditioner choice for [`solve_shifted_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftedPreconditioner {
    /// Diagonal of `S + shift·diag(weights)`.
    Jacobi,
    /// FFT/cosine-transform inverse of the mean-coefficient operator.
    Spectral,
}

/// Solves `(S + shift·diag(weights)) y = rhs` by Jacobi-preconditioned
/// conjugate gradients to relative residual `tol`.
pub fn solve_shifted(
    op: &SparseOperator,
    shift: f64,
    weights: &[f64],
    rhs: &ScalarField,
    tol: f64,
) -> Result<ScalarField> {
    solve_shifted_with(op, shift, weights, rhs, tol, ShiftedPreconditioner::Jacobi)
}

pub fn solve_shifted_with(
    op: &SparseOperator,
    shift: f64,
    weights: &[f64],
    rhs: &ScalarField,
    tol: f64,
    precond: ShiftedPreconditioner,
) -> Result<ScalarField> {
    let n = op.n();
    for len in [weights.len(), rhs.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let mut y = vec![0.0; n];
    solve_shifted_into(op, shift, weights, rhs.values(), &mut y, tol, precond)?;
    Ok(ScalarField::from_parts(op.domain.clone(), y))
}

pub(crate) fn solve_shifted_into(
    op: &SparseOperator,
    shift: f64,
    weights: &[f64],
    rhs: &[f64],
    y: &mut [f64],
    tol: f64,
    precond: ShiftedPreconditioner,
) -> Result<usize> {
    let n = op.n();
    let matvec = |x: &[f64], out: &mut [f64]| {
        op.mul_stored(x, out);
        for ((o, xi), w) in out.iter_mut().zip(x).zip(weights) {
            *o += shift * w * xi;
        }
    };
    let max_iter = 20 * n + 200;
    let iterations = match precond {
        ShiftedPreconditioner::Jacobi => {
            let diag: Vec<f64> = op
                .diag
                .iter()
                .zip(weights)
                .map(|(d, w)| d + shift * w)
                .collect();
            krylov::conjugate_gradient(matvec, &Jacobi::new(&diag), rhs, y, tol, max_iter)?
        }
        ShiftedPreconditioner::Spectral => {
            let c = weights
                .iter()
                .zip(&op.mass)
                .map(|(w, m)| shift * w / m)
                .sum::<f64>()
                / n as f64;
            let pre = WeakPreconditioner {
                solver: &op.spectral,
                c: if c > 0.0 { c } else { 1.0 },
                mass: &op.mass,
            };
            krylov::conjugate_gradient(matvec, &pre as &dyn Preconditioner, rhs, y, tol, max_iter)?
        }
    };
    // Self-check of the postcondition on the true residual.
    let mut r = vec![0.0; n];
    matvec(y, &mut r);
    let rn = r.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let bn = krylov::norm2(rhs);
    let m_norm = op
        .diag
        .iter()
        .zip(weights)
        .map(|(d, w)| 2.0 * d + (shift * w).abs())
        .fold(0.0, f64::max);
    let floor = 64.0 * f64::EPSILON * m_norm * krylov::norm2(y);
    if bn > 0.0 && rn > (tol * bn * 10.0).max(floor) {
        return Err(Error::NotConverged {
            what: "shifted solve (residual check)",
            iterations,
            residual: rn / bn,
        });
    }
    Ok(iterations)
}
