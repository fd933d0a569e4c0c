//! Backward-Euler integration of
//! `u_t = ∇·(a∇u) + u(μ − νu) − F(t, x) ρ_ε(u)` and classification of the
//! long-time outcome.

use crate::error::{Error, Result};
use crate::grid::{sup_norm, ScalarField};
use crate::model::Model;
use crate::newton::{newton, NewtonOptions};
use crate::steady::solve_unharvested;
use crate::thresholds::ThresholdReport;

/// Maximum number of recursive step halvings.
pub const MAX_HALVINGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSpec {
    pub eps: f64,
}

impl RhoSpec {
    pub fn new(eps: f64) -> Result<RhoSpec> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("threshold width eps must be positive, got {eps}")));
        }
        Ok(RhoSpec { eps })
    }
}

/// Cubic smoothstep: 0 for `s ≤ 0`, 1 for `s ≥ ε`.
pub fn rho(spec: RhoSpec, s: f64) -> f64 {
    rho_with_derivative(spec, s).0
}

pub fn rho_with_derivative(spec: RhoSpec, s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else if s >= spec.eps {
        (1.0, 0.0)
    } else {
        let x = s / spec.eps;
        (x * x * (3.0 - 2.0 * x), 6.0 * x * (1.0 - x) / spec.eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Steady detection: residual of the steady equation below this...
    pub tol_steady: f64,
    /// ...and `‖u⁺ − u‖∞ / dt` below this.
    pub tol_rate: f64,
    pub newton: NewtonOptions,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt: 0.05,
            t_max: 200.0,
            tol_steady: 1e-6,
            tol_rate: 1e-6,
            newton: NewtonOptions {
                tol: 1e-11,
                ..NewtonOptions::default()
            },
        }
    }
}

impl EvolveOptions {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("t_max", self.t_max), ("tol_steady", self.tol_steady), ("tol_rate", self.tol_rate)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub sup_norm: f64,
    pub min: f64,
    pub max: f64,
}

impl Sample {
    fn of(t: f64, u: &[f64]) -> Sample {
        Sample {
            t,
            sup_norm: sup_norm(u),
            min: u.iter().copied().fold(f64::INFINITY, f64::min),
            max: u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    /// Steady residual at the final state.
    ConvergedToSteady(f64),
    CollapsedBelowEps0,
    MaxTimeReached,
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::ConvergedToSteady(_) => "converged-to-steady",
            Classification::CollapsedBelowEps0 => "collapsed-below-eps0",
            Classification::MaxTimeReached => "max-time-reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    /// One sample per accepted step, starting at `t = 0`.
    pub samples: Vec<Sample>,
    pub final_state: ScalarField,
    pub classification: Classification,
    /// Largest nodal increase `max(u(tₖ₊₁) − u(tₖ))` over all steps.
    pub max_increase: f64,
    /// Smallest nodal value seen.
    pub min_value: f64,
}

/// Advances `u` from `t` to `t + dt` by backward Euler, with the forcing
/// frozen at the step midpoint. Failed Newton solves are retried as two
/// half steps, recursively.
pub(crate) fn advance(
    model: &Model,
    forcing: &mut dyn FnMut(f64, &mut [f64]),
    rho_spec: RhoSpec,
    u: &mut [f64],
    t: f64,
    dt: f64,
    opts: &NewtonOptions,
) -> Result<()> {
    advance_level(model, forcing, rho_spec, u, t, dt, opts, 0)
}

#[allow(clippy::too_many_arguments)]
fn advance_level(
    model: &Model,
    forcing: &mut dyn FnMut(f64, &mut [f64]),
    rho_spec: RhoSpec,
    u: &mut [f64],
    t: f64,
    dt: f64,
    opts: &NewtonOptions,
    level: usize,
) -> Result<()> {
    let n = u.len();
    let mut f = vec![0.0; n];
    forcing(t + 0.5 * dt, &mut f);
    let (mu, nu) = (model.coeffs.mu.values(), model.coeffs.nu.values());
    let inv = 1.0 / dt;
    let prev = u.to_vec();
    let term = |i: usize, v: f64| {
        let (r, dr) = rho_with_derivative(rho_spec, v);
        (
            v * (mu[i] - nu[i] * v) - f[i] * r - (v - prev[i]) * inv,
            mu[i] - 2.0 * nu[i] * v - f[i] * dr - inv,
        )
    };
    let mut v = prev.clone();
    if newton(&model.op, &term, &mut v, opts).is_ok() {
        u.copy_from_slice(&v);
        return Ok(());
    }
    if level >= MAX_HALVINGS {
        return Err(Error::StepFailed { t, halvings: level });
    }
    let half = 0.5 * dt;
    advance_level(model, forcing, rho_spec, u, t, half, opts, level + 1)?;
    advance_level(model, forcing, rho_spec, u, t + half, half, opts, level + 1)
}

/// One backward-Euler step of the autonomous equation with forcing `δh`.
pub fn step(model: &Model, delta: f64, rho_spec: RhoSpec, u: &ScalarField, dt: f64) -> Result<ScalarField> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if u.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: u.len() });
    }
    let mut v = u.values().to_vec();
    let mut forcing = autonomous(model, delta);
    advance(model, &mut forcing, rho_spec, &mut v, 0.0, dt, &EvolveOptions::default().newton)?;
    model.field(v)
}

fn autonomous(model: &Model, delta: f64) -> impl FnMut(f64, &mut [f64]) + '_ {
    let h = model.coeffs.h.values();
    move |_, out: &mut [f64]| {
        for (o, hi) in out.iter_mut().zip(h) {
            *o = delta * hi;
        }
    }
}

/// Residual of the steady equation with the thresholded harvest,
/// `−Au + u(μ − νu) − δhρ_ε(u)`. Equals the plain steady residual where
/// `u ≥ ε`.
pub fn thresholded_residual(model: &Model, delta: f64, rho_spec: RhoSpec, u: &[f64]) -> f64 {
    let mut r = vec![0.0; u.len()];
    model.op.mul_strong(u, &mut r);
    let (mu, nu, h) = (model.coeffs.mu.values(), model.coeffs.nu.values(), model.coeffs.h.values());
    (0..u.len())
        .map(|i| (-r[i] + u[i] * (mu[i] - nu[i] * u[i]) - delta * h[i] * rho(rho_spec, u[i])).abs())
        .fold(0.0, f64::max)
}

/// Integrates from `u0` until steady, collapsed below `collapse_level` (if
/// given) or `t_max`.
pub fn integrate(
    model: &Model,
    delta: f64,
    rho_spec: RhoSpec,
    u0: &ScalarField,
    opts: &EvolveOptions,
    collapse_level: Option<f64>,
) -> Result<EvolutionResult> {
    opts.validate()?;
    if u0.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: u0.len() });
    }
    let mut u = u0.values().to_vec();
    let mut t = 0.0;
    let mut samples = vec![Sample::of(t, &u)];
    let mut max_increase = f64::NEG_INFINITY;
    let mut min_value = samples[0].min;
    let mut forcing = autonomous(model, delta);
    let mut prev = u.clone();
    let steps = (opts.t_max / opts.dt).ceil() as usize;

    let mut classification = Classification::MaxTimeReached;
    for k in 0..steps {
        let dt = opts.dt.min(opts.t_max - t);
        if dt <= 0.0 {
            break;
        }
        prev.copy_from_slice(&u);
        advance(model, &mut forcing, rho_spec, &mut u, t, dt, &opts.newton)?;
        t = if k + 1 == steps { opts.t_max } else { (k + 1) as f64 * opts.dt };

        let mut rate = 0.0f64;
        for (a, b) in u.iter().zip(&prev) {
            max_increase = max_increase.max(a - b);
            rate = rate.max((a - b).abs());
        }
        rate /= dt;
        let s = Sample::of(t, &u);
        min_value = min_value.min(s.min);
        samples.push(s);

        if let Some(level) = collapse_level {
            if s.sup_norm < level {
                classification = Classification::CollapsedBelowEps0;
                break;
            }
        }
        if rate < opts.tol_rate {
            let res = thresholded_residual(model, delta, rho_spec, &u);
            if res < opts.tol_steady {
                classification = Classification::ConvergedToSteady(res);
                break;
            }
        }
    }
    Ok(EvolutionResult {
        samples,
        final_state: model.field(u)?,
        classification,
        max_increase,
        min_value,
    })
}

/// Integrates from the unharvested state `p`, stopping at the collapse level
/// `ε₀ = 2εν̄/φ̲`. Requires `ε₀ < −λ₁/2`.
pub fn run_from_p(
    model: &Model,
    delta: f64,
    rho_spec: RhoSpec,
    report: &ThresholdReport,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let eps0 = 2.0 * rho_spec.eps * report.nu_hi / report.phi_min;
    let bound = -report.lambda1 / 2.0;
    if !(eps0 < bound) {
        return Err(Error::InvalidEps { eps0, bound });
    }
    let p = solve_unharvested(model, opts.newton.tol.max(1e-10))?;
    integrate(model, delta, rho_spec, &p.u, opts, Some(eps0))
}
