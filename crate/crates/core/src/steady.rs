//! Steady states of the harvested logistic equation
//! `∇·(a∇u) + u(μ − νu) − δh = 0`: the unharvested state, fixed-δ Newton
//! solves, pseudo-arclength continuation through the fold, and linear
//! stability.

use crate::eigen::{principal_eigenpair, principal_eigenpair_from};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::model::Model;
use crate::newton::{newton, pseudo_transient, residual_floor, solve_bordered, NewtonOptions};

/// Eigen tolerance for stability checks along branches.
pub const STABILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub u: ScalarField,
    pub delta: f64,
    /// Sup-norm of the strong-form residual, evaluated after the solve.
    pub residual_norm: f64,
    /// Smallest eigenvalue of `−∇·(a∇·) − (μ − 2νu)`, when computed.
    pub principal_linearization_eigenvalue: Option<f64>,
}

impl SteadyState {
    fn checked(model: &Model, u: Vec<f64>, delta: f64) -> Result<SteadyState> {
        let mut r = vec![0.0; u.len()];
        let residual_norm = model.steady_residual(&u, delta, &mut r);
        Ok(SteadyState {
            u: model.field(u)?,
            delta,
            residual_norm,
            principal_linearization_eigenvalue: None,
        })
    }
}

fn steady_term(model: &Model, delta: f64) -> impl Fn(usize, f64) -> (f64, f64) + '_ {
    let (mu, nu, h) = (
        model.coeffs.mu.values(),
        model.coeffs.nu.values(),
        model.coeffs.h.values(),
    );
    move |i, v| (v * (mu[i] - nu[i] * v) - delta * h[i], mu[i] - 2.0 * nu[i] * v)
}

/// The positive solution `p` of `∇·(a∇p) + p(μ − νp) = 0`.
///
/// Starts from `max(μ/ν, ε_init)` with `ε_init = 10⁻³ ‖μ‖∞ / ν̲` and runs a
/// damped Newton iteration (pseudo-transient continuation).
pub fn solve_unharvested(model: &Model, tol: f64) -> Result<SteadyState> {
    let c = &model.coeffs;
    let pair = principal_eigenpair(&model.op, &c.mu, STABILITY_TOL)?;
    if pair.lambda1 >= 0.0 {
        return Err(Error::NoPositiveState { lambda1: pair.lambda1 });
    }
    let mu_sup = c.mu.sup_norm();
    let eps_init = 1e-3 * mu_sup / c.nu_lo;
    let mut u: Vec<f64> = c
        .mu
        .values()
        .iter()
        .zip(c.nu.values())
        .map(|(m, n)| (m / n).max(eps_init))
        .collect();
    let opts = NewtonOptions { tol, ..NewtonOptions::default() };
    let tau0 = 0.1 / mu_sup.max(1.0);
    pseudo_transient(&model.op, &steady_term(model, 0.0), &mut u, tau0, &opts, 500)?;
    if !(u.iter().copied().fold(f64::INFINITY, f64::min) > 0.0) {
        return Err(Error::NoPositiveState { lambda1: pair.lambda1 });
    }
    SteadyState::checked(model, u, 0.0)
}

/// Damped Newton solve of the harvested steady equation at fixed `delta`.
/// Positivity is not enforced.
pub fn solve_harvested(model: &Model, delta: f64, initial_guess: &ScalarField, tol: f64) -> Result<SteadyState> {
    if initial_guess.len() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            found: initial_guess.len(),
        });
    }
    let mut u = initial_guess.values().to_vec();
    let opts = NewtonOptions { tol, ..NewtonOptions::default() };
    newton(&model.op, &steady_term(model, delta), &mut u, &opts)?;
    SteadyState::checked(model, u, delta)
}

/// Smallest eigenvalue `σ₁` of the linearization `−∇·(a∇·) − (μ − 2νu)` at
/// `state`. Positive means linearly stable.
pub fn stability(model: &Model, state: &SteadyState) -> Result<f64> {
    stability_from(model, state.u.values(), None).map(|(s, _)| s)
}

fn stability_from(model: &Model, u: &[f64], start: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    let m = model.field(model.linearized_growth(u))?;
    let pair = principal_eigenpair_from(&model.op, &m, STABILITY_TOL, start)?;
    Ok((pair.lambda1, pair.phi.into_values()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hyperbolicity {
    Stable,
    Unstable,
    NonHyperbolic,
}

/// Classifies `σ₁`; `|σ₁| < tol` means a zero eigenvalue.
pub fn classify(sigma1: f64, tol: f64) -> Hyperbolicity {
    if sigma1.abs() < tol {
        Hyperbolicity::NonHyperbolic
    } else if sigma1 > 0.0 {
        Hyperbolicity::Stable
    } else {
        Hyperbolicity::Unstable
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub delta: f64,
    pub u: ScalarField,
    pub arclength: f64,
    pub sigma1: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchStatus {
    /// Reached `delta_floor` on the lower branch.
    Complete,
    /// The lower branch stopped early; the fold itself was resolved.
    Truncated(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub delta_star: f64,
    pub u_at_fold: ScalarField,
    pub branch: Vec<BranchPoint>,
    /// Index of the branch point with the largest δ.
    pub fold_index: usize,
    pub status: BranchStatus,
}

impl FoldReport {
    /// Points from `p` up to the fold.
    pub fn upper(&self) -> &[BranchPoint] {
        &self.branch[..=self.fold_index]
    }

    /// Points after the fold, heading back towards δ = 0.
    pub fn lower(&self) -> &[BranchPoint] {
        &self.branch[self.fold_index + 1..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    /// Giving up if the branch climbs past this δ without a fold.
    pub delta_max: f64,
    pub max_steps: usize,
    /// Newton residual tolerance for every branch point.
    pub tol: f64,
    pub ds_initial: f64,
    /// Largest step, relative to `max(1, ‖p‖)`.
    pub ds_max_rel: f64,
    pub ds_min: f64,
    /// Stop once the lower branch reaches this δ.
    pub delta_floor: f64,
    /// Relative width of the final fold bracket.
    pub fold_rel_tol: f64,
    pub max_corrector: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            delta_max: 1e3,
            max_steps: 400,
            tol: 1e-9,
            ds_initial: 5e-4,
            ds_max_rel: 0.1,
            ds_min: 1e-6,
            delta_floor: 1e-4,
            fold_rel_tol: 1e-3,
            max_corrector: 8,
        }
    }
}

/// Extended state `(u, δ)` with the mean-square inner product on `u`.
struct Arc<'a> {
    weights: &'a [f64],
}

impl Arc<'_> {
    fn dot(&self, u1: &[f64], d1: f64, u2: &[f64], d2: f64) -> f64 {
        u1.iter().zip(u2).zip(self.weights).map(|((a, b), w)| w * a * b).sum::<f64>() + d1 * d2
    }

    fn norm(&self, u: &[f64], d: f64) -> f64 {
        self.dot(u, d, u, d).sqrt()
    }
}

/// Pseudo-arclength continuation of the steady branch from `(δ = 0, p)`
/// through the fold and down the lower branch.
pub fn trace_branches(model: &Model, opts: &ContinuationOptions) -> Result<FoldReport> {
    let n = model.n();
    let p = solve_unharvested(model, opts.tol)?;
    let mass = model.op.mass();
    let total: f64 = mass.iter().sum();
    let weights: Vec<f64> = mass.iter().map(|m| m / total).collect();
    let arc = Arc { weights: &weights };
    let h = model.coeffs.h.values();

    let scale = arc.norm(p.u.values(), 0.0).max(1.0);
    let ds_max = opts.ds_max_rel * scale;
    let tol = opts.tol.max(residual_floor(&model.op, p.u.sup_norm()));

    // Tangent at δ = 0: (A − (μ − 2νp)) u′ = −h.
    let g0 = model.linearized_growth(p.u.values());
    let mut tu = vec![0.0; n];
    {
        let rhs: Vec<f64> = h.iter().map(|v| -v).collect();
        crate::newton::solve_jacobian(&model.op, &g0, 0.0, &rhs, &mut tu, 1e-10)?;
    }
    let mut td = 1.0;
    let norm = arc.norm(&tu, td);
    tu.iter_mut().for_each(|v| *v /= norm);
    td /= norm;

    let (sigma0, mut eigvec) = stability_from(model, p.u.values(), None)?;
    let mut branch = vec![BranchPoint {
        delta: 0.0,
        u: p.u.clone(),
        arclength: 0.0,
        sigma1: sigma0,
        stable: sigma0 > 0.0,
    }];

    let mut u_k = p.u.values().to_vec();
    let mut d_k = 0.0;
    let mut s_k = 0.0;
    let mut ds = opts.ds_initial;
    let mut successes = 0usize;
    let mut passed_fold = false;
    let mut failure: Option<Error> = None;

    let mut u = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut rhs = vec![0.0; n + 1];
    let mut sol = vec![0.0; n + 1];
    let mut border_row = vec![0.0; n];

    let mut steps = 0;
    loop {
        if steps >= opts.max_steps {
            failure = Some(Error::StepsExhausted { steps });
            break;
        }
        steps += 1;

        // Land geometrically on δ → 0 instead of overshooting below zero.
        if td < 0.0 && d_k + ds * td < 0.25 * d_k {
            ds = 0.75 * d_k / -td;
        }

        // Predictor.
        for i in 0..n {
            u[i] = u_k[i] + ds * tu[i];
        }
        let mut d = d_k + ds * td;
        for i in 0..n {
            border_row[i] = weights[i] * tu[i];
        }

        // Corrector on the extended system.
        let mut converged = false;
        for _ in 0..opts.max_corrector {
            let res = model.steady_residual(&u, d, &mut r);
            let du_dot: f64 = (0..n).map(|i| border_row[i] * (u[i] - u_k[i])).sum();
            let nres = du_dot + td * (d - d_k) - ds;
            if !res.is_finite() {
                break;
            }
            if res <= tol && nres.abs() <= tol {
                converged = true;
                break;
            }
            let gp = model.linearized_growth(&u);
            rhs[..n].copy_from_slice(&r);
            rhs[n] = -nres;
            if solve_bordered(&model.op, &gp, h, &border_row, td, &rhs, &mut sol, 1e-10).is_err() {
                break;
            }
            for i in 0..n {
                u[i] += sol[i];
            }
            d += sol[n];
        }
        // Reject corrections that wander far from the predictor.
        if converged {
            let moved: Vec<f64> = (0..n).map(|i| u[i] - u_k[i] - ds * tu[i]).collect();
            if arc.norm(&moved, d - d_k - ds * td) > ds {
                converged = false;
            }
        }

        if !converged {
            successes = 0;
            ds *= 0.5;
            if ds < opts.ds_min {
                failure = Some(Error::NotConverged {
                    what: "continuation corrector",
                    iterations: opts.max_corrector,
                    residual: model.steady_residual(&u, d, &mut r),
                });
                break;
            }
            continue;
        }

        // Accept; secant tangent for the next predictor.
        let mut su: Vec<f64> = (0..n).map(|i| u[i] - u_k[i]).collect();
        let mut sd = d - d_k;
        let len = arc.norm(&su, sd);
        su.iter_mut().for_each(|v| *v /= len);
        sd /= len;
        tu = su;
        td = sd;
        s_k += len;
        u_k.copy_from_slice(&u);
        d_k = d;

        let (sigma, vec) = match stability_from(model, &u_k, Some(&eigvec)) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        eigvec = vec;
        branch.push(BranchPoint {
            delta: d_k,
            u: model.field(u_k.clone())?,
            arclength: s_k,
            sigma1: sigma,
            stable: sigma > 0.0,
        });

        if !passed_fold && td < 0.0 {
            passed_fold = true;
        }
        if !passed_fold && d_k > opts.delta_max {
            return Err(Error::FoldNotFound { delta_max: opts.delta_max });
        }
        if passed_fold && d_k <= opts.delta_floor {
            break;
        }

        successes += 1;
        if successes >= 3 {
            ds = (ds * 1.3).min(ds_max);
        }
    }

    if !passed_fold {
        return Err(failure.unwrap_or(Error::StepsExhausted { steps }));
    }
    let status = match failure {
        None => BranchStatus::Complete,
        Some(e) => BranchStatus::Truncated(e),
    };

    let fold_index = branch
        .iter()
        .enumerate()
        .fold(0, |best, (i, b)| if b.delta > branch[best].delta { i } else { best });
    let (delta_star, u_at_fold) = refine_fold(model, &branch, fold_index, opts)?;
    Ok(FoldReport {
        delta_star,
        u_at_fold,
        branch,
        fold_index,
        status,
    })
}

/// Brackets the fold between a δ with a converged steady state and one
/// without, then bisects to relative width `fold_rel_tol`.
fn refine_fold(
    model: &Model,
    branch: &[BranchPoint],
    k: usize,
    opts: &ContinuationOptions,
) -> Result<(f64, ScalarField)> {
    let mut lo = branch[k].delta;
    let mut lo_u = branch[k].u.clone();

    // Vertex of the parabola δ(s) through the three points around the max.
    let mut estimate = lo;
    if k > 0 && k + 1 < branch.len() {
        let (s0, s1, s2) = (branch[k - 1].arclength, branch[k].arclength, branch[k + 1].arclength);
        let (d0, d1, d2) = (branch[k - 1].delta, branch[k].delta, branch[k + 1].delta);
        let a = ((d2 - d1) / (s2 - s1) - (d1 - d0) / (s1 - s0)) / (s2 - s0);
        let b = (d1 - d0) / (s1 - s0) - a * (s1 + s0);
        if a < 0.0 {
            let s_star = -b / (2.0 * a);
            let v = d1 + a * (s_star - s1) * (s_star - s1) + (2.0 * a * s1 + b) * (s_star - s1);
            if v.is_finite() && v > lo {
                estimate = v;
            }
        }
    }

    let attempt = |delta: f64, guess: &ScalarField| solve_harvested(model, delta, guess, opts.tol);
    let mut gap = (estimate - lo).max(opts.fold_rel_tol * lo);
    let mut hi = lo + 2.0 * gap;
    let mut expansions = 0;
    loop {
        match attempt(hi, &lo_u) {
            Ok(s) => {
                lo = hi;
                lo_u = s.u;
                gap *= 2.0;
                hi = lo + gap;
                expansions += 1;
                if expansions > 30 {
                    return Err(Error::NotConverged {
                        what: "fold bracketing",
                        iterations: expansions,
                        residual: f64::NAN,
                    });
                }
            }
            Err(_) => break,
        }
    }
    while hi - lo > opts.fold_rel_tol * lo {
        let mid = 0.5 * (lo + hi);
        match attempt(mid, &lo_u) {
            Ok(s) => {
                lo = mid;
                lo_u = s.u;
            }
            Err(_) => hi = mid,
        }
    }
    Ok((lo, lo_u))
}
