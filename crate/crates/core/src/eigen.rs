//! Principal eigenpair of `−∇·(a∇φ) − μφ = λ₁φ`.
//!
//! With the mass weights `W` of the grid this is the symmetric-definite pencil
//! `(S − Wμ) φ = λ W φ`. Shifted inverse iteration with shift
//! `σ = min(−μ) − 1` keeps `S − Wμ − σW` positive definite, so each step is a
//! conjugate-gradient solve, and the iterate stays positive.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::krylov::dot;
use crate::operators::{solve_shifted_into, ShiftedPreconditioner, SparseOperator};

/// Iteration cap for inverse iteration.
pub const MAX_ITERATIONS: usize = 2000;

#[derive(Debug, Clone)]
pub struct PrincipalPair {
    pub lambda1: f64,
    /// Positive eigenfunction with `‖φ‖∞ = 1`.
    pub phi: ScalarField,
    /// `min φ`.
    pub phi_min: f64,
    /// `‖Aφ − μφ − λ₁φ‖₂ / ‖φ‖₂` at exit.
    pub residual: f64,
    pub iterations: usize,
}

/// Smallest eigenvalue of `A − diag(μ)` and its positive eigenvector,
/// starting from the all-ones vector.
pub fn principal_eigenpair(op: &SparseOperator, mu: &ScalarField, tol: f64) -> Result<PrincipalPair> {
    principal_eigenpair_from(op, mu, tol, None)
}

/// Same as [`principal_eigenpair`] with an optional positive starting
/// vector (continuation reuses the previous eigenvector).
pub fn principal_eigenpair_from(
    op: &SparseOperator,
    mu: &ScalarField,
    tol: f64,
    start: Option<&[f64]>,
) -> Result<PrincipalPair> {
    let n = op.n();
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mu.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("eigen tolerance must be positive, got {tol}")));
    }
    let mass = op.mass();
    let m = mu.values();
    let sigma = m.iter().map(|v| -v).fold(f64::INFINITY, f64::min) - 1.0;
    // Weights of the shifted matrix S + diag(W (−μ − σ)), all ≥ W.
    let weights: Vec<f64> = m.iter().zip(mass).map(|(mi, w)| w * (-mi - sigma)).collect();

    // Rounding floor of the strong-form residual.
    let op_norm = 2.0 * op.diagonal().iter().zip(mass).map(|(d, w)| d / w).fold(0.0, f64::max)
        + m.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    let res_tol = tol.max(8.0 * f64::EPSILON * op_norm);
    let cg_tol = (tol * 1e-2).max(1e-14);

    let mut x: Vec<f64> = match start {
        Some(s) if s.len() == n => s.to_vec(),
        _ => vec![1.0; n],
    };
    normalize_sup(&mut x);
    let mut lambda = rayleigh(op, m, &x);
    let mut y = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut residual = f64::INFINITY;

    for it in 1..=MAX_ITERATIONS {
        for ((r, xi), w) in rhs.iter_mut().zip(&x).zip(mass) {
            *r = w * xi;
        }
        let guess = 1.0 / (lambda - sigma).max(1e-300);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = xi * guess;
        }
        solve_shifted_into(op, 1.0, &weights, &rhs, &mut y, cg_tol, ShiftedPreconditioner::Spectral)?;
        x.copy_from_slice(&y);
        normalize_sup(&mut x);
        let next = rayleigh(op, m, &x);
        let change = (next - lambda).abs();
        lambda = next;
        residual = strong_residual(op, m, lambda, &x);
        if change <= tol * lambda.abs().max(1.0) && residual <= res_tol {
            return finish(op, lambda, x, residual, it);
        }
    }
    Err(Error::NotConverged {
        what: "inverse iteration",
        iterations: MAX_ITERATIONS,
        residual,
    })
}

fn finish(op: &SparseOperator, lambda1: f64, phi: Vec<f64>, residual: f64, iterations: usize) -> Result<PrincipalPair> {
    let phi_min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    if !(phi_min > 0.0) {
        return Err(Error::NonPositiveEigenvector { min: phi_min });
    }
    let phi = ScalarField::new(op.domain().clone(), phi)?;
    Ok(PrincipalPair {
        lambda1,
        phi,
        phi_min,
        residual,
        iterations,
    })
}

/// Scales so the entry of largest magnitude equals +1.
fn normalize_sup(x: &mut [f64]) {
    let mut peak = 0.0f64;
    for &v in x.iter() {
        if v.abs() > peak.abs() {
            peak = v;
        }
    }
    if peak != 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
}

fn rayleigh(op: &SparseOperator, mu: &[f64], x: &[f64]) -> f64 {
    let mut sx = vec![0.0; x.len()];
    op.mul_stored(x, &mut sx);
    let mass = op.mass();
    let num = dot(x, &sx) - x.iter().zip(mu).zip(mass).map(|((xi, m), w)| w * m * xi * xi).sum::<f64>();
    let den: f64 = x.iter().zip(mass).map(|(xi, w)| w * xi * xi).sum();
    num / den
}

/// `‖A x − μx − λx‖₂ / ‖x‖₂` in strong form.
pub(crate) fn strong_residual(op: &SparseOperator, mu: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    op.mul_strong(x, &mut ax);
    let r: f64 = ax
        .iter()
        .zip(x)
        .zip(mu)
        .map(|((a, xi), m)| (a - m * xi - lambda * xi).powi(2))
        .sum();
    (r / dot(x, x)).sqrt()
}
