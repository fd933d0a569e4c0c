//! Matrix-free Krylov solvers: preconditioned conjugate gradients for
//! symmetric positive definite systems and restarted GMRES for everything
//! else (indefinite Jacobians, bordered continuation systems).

use crate::error::{Error, Result};

/// Approximate inverse `z ≈ A⁻¹ r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// No preconditioning.
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal (Jacobi) preconditioner.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    /// Entries with non-positive diagonal fall back to the identity.
    pub fn new(diag: &[f64]) -> Self {
        Jacobi {
            inv_diag: diag
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Preconditioned conjugate gradients on `A x = b`, starting from the
/// contents of `x`. Stops when `‖b − A x‖₂ ≤ tol ‖b‖₂` and returns the
/// iteration count. Non-positive curvature is reported as non-convergence.
pub fn conjugate_gradient<A, P>(
    matvec: A,
    precond: &P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize>
where
    A: Fn(&[f64], &mut [f64]),
    P: Preconditioner + ?Sized,
{
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = tol * b_norm;

    let mut r = vec![0.0; n];
    matvec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm2(&r);

    for it in 0..max_iter {
        if res <= target {
            return Ok(it);
        }
        matvec(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(Error::NotConverged {
                what: "conjugate gradient (non-positive curvature)",
                iterations: it,
                residual: res / b_norm,
            });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        res = norm2(&r);
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    // Recompute the true residual before giving up; the recurrence drifts.
    matvec(x, &mut r);
    let true_res = r.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    if true_res <= target {
        return Ok(max_iter);
    }
    Err(Error::NotConverged {
        what: "conjugate gradient",
        iterations: max_iter,
        residual: true_res / b_norm,
    })
}

/// Right-preconditioned restarted GMRES on `A x = b`, starting from the
/// contents of `x`. Stops when `‖b − A x‖₂ ≤ tol ‖b‖₂`.
pub fn gmres<A, P>(
    matvec: A,
    precond: &P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<usize>
where
    A: Fn(&[f64], &mut [f64]),
    P: Preconditioner + ?Sized,
{
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = tol * b_norm;
    let m = restart.max(1);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let mut res;

    loop {
        // r = b − A x
        matvec(x, &mut w);
        let mut r: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
        res = norm2(&r);
        if res <= target {
            return Ok(total);
        }
        if total >= max_iter {
            break;
        }
        r.iter_mut().for_each(|v| *v /= res);
        basis.clear();
        basis.push(r);
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = res;

        let mut k_used = 0;
        for k in 0..m {
            precond.apply(&basis[k], &mut z);
            matvec(&z, &mut w);
            // Modified Gram-Schmidt.
            for (j, v) in basis.iter().enumerate() {
                let hjk = dot(&w, v);
                hess[j][k] = hjk;
                axpy(-hjk, v, &mut w);
            }
            let h_next = norm2(&w);
            hess[k + 1][k] = h_next;

            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];

            k_used = k + 1;
            total += 1;
            let est = g[k + 1].abs();
            if est <= target || h_next == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // Back substitution for the Krylov coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
        }
        let mut update = vec![0.0; n];
        for (yj, v) in y.iter().zip(&basis) {
            axpy(*yj, v, &mut update);
        }
        precond.apply(&update, &mut z);
        axpy(1.0, &z, x);
    }
    Err(Error::NotConverged {
        what: "GMRES",
        iterations: total,
        residual: res / b_norm,
    })
}
