//! Newton iterations for semilinear systems `G(v) = −A v + g(v) = 0` with a
//! nodewise nonlinearity `g`.

use crate::error::{Error, Result};
use crate::grid::sup_norm;
use crate::krylov::gmres;
use crate::operators::SparseOperator;
use crate::spectral::{BorderedPreconditioner, StrongPreconditioner};

/// Restart length for the Jacobian solves.
pub(crate) const GMRES_RESTART: usize = 60;
pub(crate) const GMRES_MAX_ITER: usize = 1200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Absolute sup-norm tolerance on the strong-form residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative tolerance of each linear solve.
    pub linear_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 50,
            linear_tol: 1e-9,
        }
    }
}

/// Lowest residual the discrete operator can resolve at a given state size.
pub(crate) fn residual_floor(op: &SparseOperator, scale: f64) -> f64 {
    let a_norm = op
        .diagonal()
        .iter()
        .zip(op.mass())
        .map(|(d, w)| 2.0 * d / w)
        .fold(0.0, f64::max);
    32.0 * f64::EPSILON * a_norm * scale.max(1.0)
}

/// Value and derivative of the nodal term at node `i`.
pub(crate) trait NodalTerm {
    fn eval(&self, i: usize, v: f64) -> (f64, f64);
}

impl<F: Fn(usize, f64) -> (f64, f64)> NodalTerm for F {
    fn eval(&self, i: usize, v: f64) -> (f64, f64) {
        self(i, v)
    }
}

/// Writes `G(v)` into `out` and returns its sup-norm.
pub(crate) fn residual<T: NodalTerm + ?Sized>(op: &SparseOperator, term: &T, v: &[f64], out: &mut [f64]) -> f64 {
    op.mul_strong(v, out);
    let mut sup = 0.0f64;
    for (i, o) in out.iter_mut().enumerate() {
        *o = -*o + term.eval(i, v[i]).0;
        sup = sup.max(o.abs());
    }
    sup
}

/// Preconditioner shift for `A − diag(g′)`.
pub(crate) fn precond_shift(gprime: &[f64]) -> f64 {
    let mean = -gprime.iter().sum::<f64>() / gprime.len() as f64;
    mean.abs().max(1.0)
}

/// Solves `(A − diag(g′) + damping) x = rhs`.
pub(crate) fn solve_jacobian(
    op: &SparseOperator,
    gprime: &[f64],
    damping: f64,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
) -> Result<usize> {
    let shifted: Vec<f64> = gprime.iter().map(|g| g - damping).collect();
    let pre = StrongPreconditioner {
        solver: op.spectral(),
        c: precond_shift(&shifted),
    };
    let matvec = |y: &[f64], out: &mut [f64]| {
        op.mul_strong(y, out);
        for ((o, yi), g) in out.iter_mut().zip(y).zip(&shifted) {
            *o -= g * yi;
        }
    };
    x.iter_mut().for_each(|v| *v = 0.0);
    gmres(matvec, &pre, rhs, x, tol, GMRES_RESTART, GMRES_MAX_ITER)
}

/// Solves the bordered system
/// `[A − diag(g′), b; cᵀ, d] [x; y] = [r; s]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn solve_bordered(
    op: &SparseOperator,
    gprime: &[f64],
    b: &[f64],
    c: &[f64],
    d: f64,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
) -> Result<usize> {
    let n = op.n();
    let pre = BorderedPreconditioner {
        inner: StrongPreconditioner {
            solver: op.spectral(),
            c: precond_shift(gprime),
        },
        n,
    };
    let matvec = |y: &[f64], out: &mut [f64]| {
        let (yu, ys) = (&y[..n], y[n]);
        op.mul_strong(yu, &mut out[..n]);
        let mut last = d * ys;
        for i in 0..n {
            out[i] += -gprime[i] * yu[i] + b[i] * ys;
            last += c[i] * yu[i];
        }
        out[n] = last;
    };
    x.iter_mut().for_each(|v| *v = 0.0);
    gmres(matvec, &pre, rhs, x, tol, GMRES_RESTART, GMRES_MAX_ITER)
}

/// Damped Newton with Armijo backtracking on the residual sup-norm.
pub(crate) fn newton<T: NodalTerm + ?Sized>(
    op: &SparseOperator,
    term: &T,
    v: &mut [f64],
    opts: &NewtonOptions,
) -> Result<usize> {
    let n = v.len();
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let mut gprime = vec![0.0; n];
    let mut res = residual(op, term, v, &mut r);
    let tol = opts.tol.max(residual_floor(op, sup_norm(v)));

    for it in 0..opts.max_iter {
        if res <= tol {
            return Ok(it);
        }
        for (i, g) in gprime.iter_mut().enumerate() {
            *g = term.eval(i, v[i]).1;
        }
        if solve_jacobian(op, &gprime, 0.0, &r, &mut dv, opts.linear_tol).is_err() {
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1.0 / 1024.0 {
            for i in 0..n {
                trial[i] = v[i] + step * dv[i];
            }
            let res_trial = residual(op, term, &trial, &mut r_trial);
            if res_trial.is_finite() && res_trial <= (1.0 - 1e-4 * step) * res {
                v.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                res = res_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Stagnation at the rounding floor counts as convergence.
            if res <= 10.0 * tol {
                return Ok(it);
            }
            return Err(Error::NotConverged {
                what: "Newton (line search)",
                iterations: it,
                residual: res,
            });
        }
    }
    if res <= tol {
        return Ok(opts.max_iter);
    }
    Err(Error::NotConverged {
        what: "Newton",
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Pseudo-transient continuation: Newton damped by `1/τ` with `τ` grown by
/// switched evolution relaxation. Converges to attracting states from far
/// away and turns into plain Newton near the solution.
pub(crate) fn pseudo_transient<T: NodalTerm + ?Sized>(
    op: &SparseOperator,
    term: &T,
    v: &mut [f64],
    tau0: f64,
    opts: &NewtonOptions,
    max_steps: usize,
) -> Result<usize> {
    let n = v.len();
    let mut r = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let mut gprime = vec![0.0; n];
    let mut res = residual(op, term, v, &mut r);
    let res0 = res;
    let mut tau = tau0;
    for it in 0..max_steps {
        let tol = opts.tol.max(residual_floor(op, sup_norm(v)));
        if res <= tol {
            return Ok(it);
        }
        for (i, g) in gprime.iter_mut().enumerate() {
            *g = term.eval(i, v[i]).1;
        }
        let damping = if tau.is_finite() { 1.0 / tau } else { 0.0 };
        solve_jacobian(op, &gprime, damping, &r, &mut dv, opts.linear_tol)?;
        for (vi, d) in v.iter_mut().zip(&dv) {
            *vi += d;
        }
        let prev = res;
        res = residual(op, term, v, &mut r);
        if !res.is_finite() {
            break;
        }
        tau = if res < 1e-3 * res0 { f64::INFINITY } else { tau * (prev / res).max(0.5) };
    }
    Err(Error::NotConverged {
        what: "pseudo-transient continuation",
        iterations: max_steps,
        residual: res,
    })
}
