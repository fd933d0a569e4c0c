//! Fast solver for the constant-coefficient operator `−ā Δ + c` on the grid.
//!
//! On a periodic cell the discrete Laplacian is diagonalized by the DFT; on a
//! vertex-centred Neumann box with reflection ghosts it is diagonalized by the
//! type-I cosine transform. Used as a spectrally equivalent preconditioner
//! for the variable-coefficient systems.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Domain, DomainKind};
use crate::krylov::Preconditioner;

struct Axis {
    n: usize,
    /// Eigenvalues of the 1-D second-difference operator (times ā).
    eig: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Exact inverse of `ā·A₀ + c` where `A₀` is the strong-form discrete
/// Laplacian (`a ≡ 1`) of the domain.
pub struct SpectralSolver {
    kind: DomainKind,
    axes: Vec<Axis>,
}

impl SpectralSolver {
    pub fn new(domain: &Domain, a_mean: f64) -> Self {
        let mut planner = FftPlanner::new();
        let axes = (0..domain.dim())
            .map(|axis| {
                let n = domain.resolution()[axis];
                let h = domain.spacing(axis);
                let scale = a_mean / (h * h);
                let (eig, len): (Vec<f64>, usize) = match domain.kind() {
                    DomainKind::SpPeriodic => (
                        (0..n)
                            .map(|k| scale * (2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()))
                            .collect(),
                        n,
                    ),
                    DomainKind::BoundedNeumann => {
                        let m = n - 1;
                        (
                            (0..n)
                                .map(|k| scale * (2.0 - 2.0 * (PI * k as f64 / m as f64).cos()))
                                .collect(),
                            2 * m,
                        )
                    }
                };
                Axis {
                    n,
                    eig,
                    forward: planner.plan_fft_forward(len),
                    inverse: planner.plan_fft_inverse(len),
                }
            })
            .collect();
        SpectralSolver {
            kind: domain.kind(),
            axes,
        }
    }

    /// Solves `(ā A₀ + c) y = r` for `c > 0`.
    pub fn solve(&self, c: f64, r: &[f64], y: &mut [f64]) {
        let mut buf: Vec<Complex<f64>> = r.iter().map(|&v| Complex::new(v, 0.0)).collect();
        for axis in 0..self.axes.len() {
            self.transform(axis, &mut buf, true);
        }
        let n0 = self.axes[0].n;
        for (i, b) in buf.iter_mut().enumerate() {
            let mut lam = self.axes[0].eig[i % n0];
            if self.axes.len() > 1 {
                lam += self.axes[1].eig[i / n0];
            }
            *b /= lam + c;
        }
        for axis in 0..self.axes.len() {
            self.transform(axis, &mut buf, false);
        }
        for (yi, b) in y.iter_mut().zip(&buf) {
            *yi = b.re;
        }
    }

    fn transform(&self, axis: usize, buf: &mut [Complex<f64>], forward: bool) {
        let ax = &self.axes[axis];
        let n0 = self.axes[0].n;
        let lines = buf.len() / ax.n;
        let stride = if axis == 0 { 1 } else { n0 };
        let start = |line: usize| if axis == 0 { line * n0 } else { line };
        match self.kind {
            DomainKind::SpPeriodic => {
                let plan = if forward { &ax.forward } else { &ax.inverse };
                let scale = if forward { 1.0 } else { 1.0 / ax.n as f64 };
                let mut line_buf = vec![Complex::new(0.0, 0.0); ax.n];
                for line in 0..lines {
                    let s = start(line);
                    for (j, lb) in line_buf.iter_mut().enumerate() {
                        *lb = buf[s + j * stride];
                    }
                    plan.process(&mut line_buf);
                    for (j, lb) in line_buf.iter().enumerate() {
                        buf[s + j * stride] = lb * scale;
                    }
                }
            }
            DomainKind::BoundedNeumann => {
                // Type-I cosine transform through the even extension of
                // length 2(n−1); it is its own inverse up to 2/(n−1).
                let m = ax.n - 1;
                let scale = if forward { 0.5 } else { 1.0 / m as f64 };
                let mut ext = vec![Complex::new(0.0, 0.0); 2 * m];
                for line in 0..lines {
                    let s = start(line);
                    for j in 0..=m {
                        ext[j] = buf[s + j * stride];
                    }
                    for j in 1..m {
                        ext[2 * m - j] = ext[j];
                    }
                    ax.forward.process(&mut ext);
                    for j in 0..=m {
                        buf[s + j * stride] = ext[j] * scale;
                    }
                }
            }
        }
    }
}

/// `(ā A₀ + c)⁻¹` applied to strong-form residuals.
pub struct StrongPreconditioner<'a> {
    pub solver: &'a SpectralSolver,
    pub c: f64,
}

impl Preconditioner for StrongPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solver.solve(self.c, r, z);
    }
}

/// `(ā S₀ + c W)⁻¹` for weak-form (mass-weighted) residuals.
pub struct WeakPreconditioner<'a> {
    pub solver: &'a SpectralSolver,
    pub c: f64,
    pub mass: &'a [f64],
}

impl Preconditioner for WeakPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let scaled: Vec<f64> = r.iter().zip(self.mass).map(|(a, w)| a / w).collect();
        self.solver.solve(self.c, &scaled, z);
    }
}

/// Bordered-system preconditioner: spectral on the field block, identity on
/// the trailing scalar unknowns.
pub struct BorderedPreconditioner<'a> {
    pub inner: StrongPreconditioner<'a>,
    pub n: usize,
}

impl Preconditioner for BorderedPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.inner.apply(&r[..self.n], &mut z[..self.n]);
        z[self.n..].copy_from_slice(&r[self.n..]);
    }
}
