//! Time-periodic forcing `f(ωt, x) = δ g(ωt, x)`: averaging, the period map,
//! periodic orbits by fixed-point iteration and their dominant Floquet
//! multiplier. Bounded (Neumann) domains only.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolve::{advance, RhoSpec};
use crate::grid::{sup_norm, CoefficientSet, Domain, ScalarField};
use crate::model::Model;
use crate::newton::NewtonOptions;
use crate::steady::{solve_harvested, solve_unharvested, SteadyState};

/// Samples of the composite Simpson rule in `average_forcing`.
pub const SIMPSON_SAMPLES: usize = 65;

/// Profile `g(s, x)`, 1-periodic in `s`.
pub type Profile = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ForcingSpec {
    pub g: Profile,
    pub delta: f64,
    pub omega: f64,
}

impl fmt::Debug for ForcingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForcingSpec")
            .field("delta", &self.delta)
            .field("omega", &self.omega)
            .finish_non_exhaustive()
    }
}

impl ForcingSpec {
    pub fn new(g: Profile, delta: f64, omega: f64) -> Result<ForcingSpec> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be nonnegative, got {delta}")));
        }
        Ok(ForcingSpec { g, delta, omega })
    }

    /// `g(s) = 1 + amplitude · sin(2πs)`.
    pub fn sinusoidal(amplitude: f64, delta: f64, omega: f64) -> Result<ForcingSpec> {
        let g: Profile = Arc::new(move |s, _| 1.0 + amplitude * (2.0 * std::f64::consts::PI * s).sin());
        ForcingSpec::new(g, delta, omega)
    }

    pub fn with_omega(&self, omega: f64) -> Result<ForcingSpec> {
        ForcingSpec::new(self.g.clone(), self.delta, omega)
    }

    pub fn period(&self) -> f64 {
        1.0 / self.omega
    }

    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.delta * (self.g)((self.omega * t).rem_euclid(1.0), x)
    }
}

fn require_bounded(domain: &Domain) -> Result<()> {
    if domain.is_periodic() {
        return Err(Error::BoundedDomainRequired);
    }
    Ok(())
}

/// `∫₀¹ g(s, x) ds` per node, by composite Simpson.
fn profile_mean(g: &Profile, domain: &Arc<Domain>) -> Result<ScalarField> {
    let m = SIMPSON_SAMPLES - 1;
    let hs = 1.0 / m as f64;
    let values = (0..domain.len())
        .map(|i| {
            let c = domain.coords(i);
            let x = &c[..domain.dim()];
            let sum: f64 = (0..=m)
                .map(|j| {
                    let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                    w * g(j as f64 * hs, x)
                })
                .sum();
            sum * hs / 3.0
        })
        .collect();
    ScalarField::new(domain.clone(), values)
}

/// Effective autonomous forcing `δh(x) = δ ∫₀¹ g(s, x) ds`.
pub fn average_forcing(spec: &ForcingSpec, domain: &Arc<Domain>) -> Result<ScalarField> {
    profile_mean(&spec.g, domain)?.map(|v| spec.delta * v)
}

/// Model with `h` replaced by the time average of `g`, so that the averaged
/// steady equation is the harvested one at `δ = spec.delta`.
pub fn averaged_model(model: &Model, spec: &ForcingSpec) -> Result<Model> {
    let domain = model.coeffs.domain();
    let h = profile_mean(&spec.g, domain)?;
    if !(h.min() > 0.0) {
        return Err(Error::InvalidCoefficient(format!(
            "time average of the forcing profile must be positive, min is {}",
            h.min()
        )));
    }
    let c = &model.coeffs;
    Model::new(CoefficientSet::new(
        c.a.clone(),
        c.mu.clone(),
        c.nu.clone(),
        h,
        CoefficientSet::DEFAULT_TAU,
    )?)
}

/// Upper steady state `q` of the averaged equation, followed from `p` in
/// `increments` equal steps of δ.
pub fn averaged_state(model: &Model, spec: &ForcingSpec, tol: f64, increments: usize) -> Result<SteadyState> {
    let avg = averaged_model(model, spec)?;
    let mut state = solve_unharvested(&avg, tol)?;
    let k = increments.max(1);
    for j in 1..=k {
        let d = spec.delta * j as f64 / k as f64;
        state = solve_harvested(&avg, d, &state.u, tol)?;
    }
    Ok(state)
}

struct Stepper<'a> {
    model: &'a Model,
    spec: &'a ForcingSpec,
    rho: RhoSpec,
    newton: NewtonOptions,
    coords: Vec<[f64; 2]>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a Model, spec: &'a ForcingSpec, rho: RhoSpec, newton: NewtonOptions) -> Result<Self> {
        let domain = model.coeffs.domain();
        require_bounded(domain)?;
        let coords = (0..domain.len()).map(|i| domain.coords(i)).collect();
        Ok(Stepper { model, spec, rho, newton, coords })
    }

    /// `steps` backward-Euler steps of size `dt` from `t0`; `observe` sees
    /// the state after each step.
    fn run(&self, u: &mut [f64], t0: f64, dt: f64, steps: usize, observe: &mut dyn FnMut(usize, &[f64])) -> Result<()> {
        let dim = self.model.coeffs.domain().dim();
        let mut forcing = |t: f64, out: &mut [f64]| {
            for (o, c) in out.iter_mut().zip(&self.coords) {
                *o = self.spec.eval(t, &c[..dim]);
            }
        };
        for k in 0..steps {
            let t = t0 + k as f64 * dt;
            advance(self.model, &mut forcing, self.rho, u, t, dt, &self.newton)?;
            observe(k + 1, u);
        }
        Ok(())
    }
}

/// Integrates the forced equation from `u0` at time `t0` over `t_span` with
/// steps no longer than `dt`; the forcing is frozen at each step midpoint.
pub fn flow(
    model: &Model,
    spec: &ForcingSpec,
    rho: RhoSpec,
    u0: &ScalarField,
    t0: f64,
    t_span: f64,
    dt: f64,
) -> Result<ScalarField> {
    let max_dt = spec.period() / 32.0;
    if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must lie in (0, T/32 = {max_dt}]")));
    }
    if !(t_span >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_span must be nonnegative, got {t_span}")));
    }
    if u0.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: u0.len() });
    }
    let stepper = Stepper::new(model, spec, rho, OrbitOptions::default().newton)?;
    let steps = (t_span / dt).ceil() as usize;
    let mut u = u0.values().to_vec();
    if steps > 0 {
        stepper.run(&mut u, t0, t_span / steps as f64, steps, &mut |_, _| {})?;
    }
    model.field(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    /// Steps per forcing period; a multiple of 4, at least 32.
    pub steps_per_period: usize,
    pub max_iter: usize,
    pub floquet_iter: usize,
    /// Relative change that stops the Floquet power iteration.
    pub floquet_tol: f64,
    /// Multipliers within this distance of 1 are non-hyperbolic.
    pub tol_fl: f64,
    pub newton: NewtonOptions,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            steps_per_period: 32,
            max_iter: 200,
            floquet_iter: 50,
            floquet_tol: 1e-6,
            tol_fl: 1e-3,
            newton: NewtonOptions {
                tol: 1e-12,
                ..NewtonOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    /// State at phase 0.
    pub u0: ScalarField,
    pub omega: f64,
    /// `‖P(u0) − u0‖∞`, evaluated by one more period map.
    pub period_residual: f64,
    pub floquet_dominant: f64,
    pub hyperbolic: bool,
    pub iterations: usize,
    /// Extremes over nodes and steps of one period.
    pub orbit_min: f64,
    pub orbit_max: f64,
    /// States at phases 0, T/4, T/2, 3T/4.
    pub snapshots: Vec<(f64, ScalarField)>,
}

/// Periodic orbit by fixed-point iteration of the period map from
/// `q_guess`, stopping when `‖P(u) − u‖∞ ≤ tol`.
pub fn find_orbit(
    model: &Model,
    spec: &ForcingSpec,
    rho: RhoSpec,
    q_guess: &ScalarField,
    tol: f64,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit> {
    if opts.steps_per_period < 32 || opts.steps_per_period % 4 != 0 {
        return Err(Error::InvalidParameter(format!(
            "steps_per_period must be a multiple of 4 and at least 32, got {}",
            opts.steps_per_period
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("orbit tolerance must be positive, got {tol}")));
    }
    if q_guess.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: q_guess.len() });
    }
    let stepper = Stepper::new(model, spec, rho, opts.newton)?;
    let m = opts.steps_per_period;
    let dt = spec.period() / m as f64;
    let period_map = |u: &mut [f64]| stepper.run(u, 0.0, dt, m, &mut |_, _| {});

    let mut u = q_guess.values().to_vec();
    let mut next = u.clone();
    let mut res = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        next.copy_from_slice(&u);
        period_map(&mut next)?;
        res = distance(&next, &u);
        std::mem::swap(&mut u, &mut next);
        iterations += 1;
        if res <= tol {
            break;
        }
    }
    if res > tol {
        return Err(Error::NotConverged {
            what: "periodic orbit iteration",
            iterations,
            residual: res,
        });
    }

    // One more period, recording extremes and quarter-phase snapshots.
    let mut pu = u.clone();
    let (mut lo, mut hi) = extremes(&u);
    let mut snapshots = vec![(0.0, model.field(u.clone())?)];
    let mut snap_err = None;
    stepper.run(&mut pu, 0.0, dt, m, &mut |k, v| {
        let (a, b) = extremes(v);
        lo = lo.min(a);
        hi = hi.max(b);
        if k % (m / 4) == 0 && k < m {
            match model.field(v.to_vec()) {
                Ok(f) => snapshots.push((k as f64 / m as f64 * spec.period(), f)),
                Err(e) => snap_err = Some(e),
            }
        }
    })?;
    if let Some(e) = snap_err {
        return Err(e);
    }
    let period_residual = distance(&pu, &u);

    // Power iteration on v ↦ (P(u + ηv) − P(u)) / η.
    let eta = 1e-6 * sup_norm(&u).max(f64::MIN_POSITIVE);
    let mut v = vec![1.0; u.len()];
    let mut mult = 0.0;
    let mut w = vec![0.0; u.len()];
    for _ in 0..opts.floquet_iter {
        for i in 0..w.len() {
            w[i] = u[i] + eta * v[i];
        }
        period_map(&mut w)?;
        for i in 0..w.len() {
            w[i] = (w[i] - pu[i]) / eta;
        }
        let est = sup_norm(&w);
        let change = (est - mult).abs();
        mult = est;
        if est == 0.0 {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / est;
        }
        if change <= opts.floquet_tol * est {
            break;
        }
    }

    Ok(PeriodicOrbit {
        u0: model.field(u)?,
        omega: spec.omega,
        period_residual,
        floquet_dominant: mult,
        hyperbolic: (mult - 1.0).abs() > opts.tol_fl,
        iterations,
        orbit_min: lo,
        orbit_max: hi,
        snapshots,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaRow {
    pub omega: f64,
    pub period_residual: f64,
    pub dist_to_q: f64,
    pub orbit_min: f64,
    pub orbit_max: f64,
    pub floquet: f64,
    pub error: Option<Error>,
}

/// One row of the frequency sweep; failures are recorded in the row.
pub fn omega_row(
    model: &Model,
    template: &ForcingSpec,
    omega: f64,
    rho: RhoSpec,
    q: &ScalarField,
    tol: f64,
    opts: &OrbitOptions,
) -> OmegaRow {
    let orbit = template
        .with_omega(omega)
        .and_then(|spec| find_orbit(model, &spec, rho, q, tol, opts));
    match orbit {
        Ok(o) => OmegaRow {
            omega,
            period_residual: o.period_residual,
            dist_to_q: o.u0.sup_distance(q),
            orbit_min: o.orbit_min,
            orbit_max: o.orbit_max,
            floquet: o.floquet_dominant,
            error: None,
        },
        Err(e) => OmegaRow {
            omega,
            period_residual: f64::NAN,
            dist_to_q: f64::NAN,
            orbit_min: f64::NAN,
            orbit_max: f64::NAN,
            floquet: f64::NAN,
            error: Some(e),
        },
    }
}

/// Orbits for each ω (sorted ascending), started from and compared with `q`.
pub fn omega_sweep(
    model: &Model,
    template: &ForcingSpec,
    omegas: &[f64],
    rho: RhoSpec,
    q: &ScalarField,
    tol: f64,
    opts: &OrbitOptions,
) -> Vec<OmegaRow> {
    let mut list = omegas.to_vec();
    list.sort_by(f64::total_cmp);
    list.into_iter()
        .map(|w| omega_row(model, template, w, rho, q, tol, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainKind;

    fn bounded(mu0: f64) -> Model {
        let d = Domain::new(DomainKind::BoundedNeumann, 1, &[1.0], &[8]).unwrap();
        Model::new(CoefficientSet::homogeneous(&d, mu0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn averages_of_simple_profiles() {
        let d = Domain::new(DomainKind::BoundedNeumann, 2, &[1.0, 1.0], &[5, 5]).unwrap();
        let sine = ForcingSpec::sinusoidal(1.0, 0.3, 1.0).unwrap();
        let avg = average_forcing(&sine, &d).unwrap();
        assert!(avg.values().iter().all(|v| (v - 0.3).abs() < 1e-14));
        let g: Profile = Arc::new(|s, x| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * s).cos() * (x[0] - 3.0 * x[1]));
        let avg = average_forcing(&ForcingSpec::new(g, 0.2, 1.0).unwrap(), &d).unwrap();
        assert!(avg.values().iter().all(|v| (v - 0.2).abs() < 1e-14));
    }

    #[test]
    fn periodic_domains_are_rejected() {
        let d = Domain::new(DomainKind::SpPeriodic, 1, &[1.0], &[8]).unwrap();
        let m = Model::new(CoefficientSet::homogeneous(&d, 1.0, 1.0).unwrap()).unwrap();
        let spec = ForcingSpec::sinusoidal(1.0, 0.1, 4.0).unwrap();
        let u = ScalarField::constant(d, 1.0);
        let r = flow(&m, &spec, RhoSpec::new(0.01).unwrap(), &u, 0.0, 0.25, 0.25 / 32.0);
        assert_eq!(r, Err(Error::BoundedDomainRequired));
    }

    #[test]
    fn flow_checks_step_size_and_keeps_zero() {
        let m = bounded(1.0);
        let spec = ForcingSpec::sinusoidal(1.0, 0.15, 4.0).unwrap();
        let rho = RhoSpec::new(0.01).unwrap();
        let z = ScalarField::zeros(m.coeffs.domain().clone());
        assert!(flow(&m, &spec, rho, &z, 0.0, 0.25, 0.1).is_err());
        let out = flow(&m, &spec, rho, &z, 0.0, 0.25, 0.25 / 32.0).unwrap();
        assert_eq!(out.sup_norm(), 0.0);
    }

    #[test]
    fn autonomous_orbit_is_the_steady_state() {
        let m = bounded(1.0);
        let g: Profile = Arc::new(|_, _| 1.0);
        let spec = ForcingSpec::new(g, 0.1875, 2.0).unwrap();
        let rho = RhoSpec::new(0.01).unwrap();
        let q = averaged_state(&m, &spec, 1e-12, 4).unwrap();
        assert!(q.u.values().iter().all(|v| (v - 0.75).abs() < 1e-10));
        let orbit = find_orbit(&m, &spec, rho, &q.u, 1e-10, &OrbitOptions::default()).unwrap();
        assert!(orbit.u0.sup_distance(&q.u) < 1e-9);
        assert_eq!(orbit.snapshots.len(), 4);
        let expected = (-0.5f64 * 0.5).exp();
        assert!((orbit.floquet_dominant - expected).abs() / expected < 1e-2);
        assert!(orbit.hyperbolic);
    }
}
