//! Closed-form harvesting thresholds and the `κ₀φ` sub-solution check.

use crate::eigen::{principal_eigenpair, PrincipalPair};
use crate::error::{Error, Result};
use crate::grid::{make_landscape, CoefficientSet, Domain, DomainKind, LandscapeSpec, ScalarField};
use crate::model::Model;
use crate::operators::{apply, SparseOperator};
use crate::steady::{trace_branches, ContinuationOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub lambda1: f64,
    pub phi_min: f64,
    /// `min h`.
    pub alpha: f64,
    /// `max h`.
    pub beta: f64,
    pub nu_lo: f64,
    pub nu_hi: f64,
    /// `λ₁² φ̲ / (β ν̄ (1+φ̲)²)`: a steady state exists for `δ ≤ δ₁`.
    pub delta1: f64,
    /// `λ₁² / (4 α ν̲)`: no steady state for `δ > δ₂`.
    pub delta2: f64,
    /// `−λ₁ / (ν̄ (1+φ̲))`.
    pub kappa0: f64,
    /// `2 ε ν̄ / φ̲`.
    pub eps0: f64,
    /// False when `λ₁ ≥ 0`; `δ₁`, `δ₂`, `κ₀` are then meaningless.
    pub applicable: bool,
}

impl ThresholdReport {
    /// Whether `ε₀ < −λ₁/2`, the hypothesis of the long-time dichotomy.
    pub fn eps_admissible(&self) -> bool {
        self.applicable && self.eps0 < -self.lambda1 / 2.0
    }
}

pub fn compute_thresholds(coeffs: &CoefficientSet, pair: &PrincipalPair, eps: f64) -> Result<ThresholdReport> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("threshold width eps must be positive, got {eps}")));
    }
    if pair.phi.len() != coeffs.mu.len() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.mu.len(),
            found: pair.phi.len(),
        });
    }
    let (l, f) = (pair.lambda1, pair.phi_min);
    let (alpha, beta) = (coeffs.alpha(), coeffs.beta());
    let (nu_lo, nu_hi) = (coeffs.nu_lo, coeffs.nu_hi);
    Ok(ThresholdReport {
        lambda1: l,
        phi_min: f,
        alpha,
        beta,
        nu_lo,
        nu_hi,
        delta1: l * l * f / (beta * nu_hi * (1.0 + f) * (1.0 + f)),
        delta2: l * l / (4.0 * alpha * nu_lo),
        kappa0: -l / (nu_hi * (1.0 + f)),
        eps0: 2.0 * eps * nu_hi / f,
        applicable: l < 0.0,
    })
}

/// Residual `∇·(a∇w) + w(μ − νw) − δh` of `w = κ₀φ`, nodewise.
pub fn subsolution_residual(op: &SparseOperator, coeffs: &CoefficientSet, pair: &PrincipalPair, delta: f64) -> Result<Vec<f64>> {
    let kappa0 = -pair.lambda1 / (coeffs.nu_hi * (1.0 + pair.phi_min));
    let w = pair.phi.map(|v| kappa0 * v)?;
    let aw = apply(op, &w)?;
    let (mu, nu, h) = (coeffs.mu.values(), coeffs.nu.values(), coeffs.h.values());
    Ok(w
        .values()
        .iter()
        .enumerate()
        .map(|(i, wi)| -aw.values()[i] + wi * (mu[i] - nu[i] * wi) - delta * h[i])
        .collect())
}

/// Tolerance for the sign check: `10⁻⁶ ‖μ‖∞ ‖φ‖∞`.
pub fn subsolution_tolerance(coeffs: &CoefficientSet, pair: &PrincipalPair) -> f64 {
    1e-6 * coeffs.mu.sup_norm() * pair.phi.sup_norm()
}

/// `min R`, the smallest nodal sub-solution residual.
pub fn subsolution_margin(op: &SparseOperator, coeffs: &CoefficientSet, pair: &PrincipalPair, delta: f64) -> Result<f64> {
    Ok(subsolution_residual(op, coeffs, pair, delta)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// True iff `κ₀φ` is a discrete sub-solution at this δ.
pub fn verify_subsolution(op: &SparseOperator, coeffs: &CoefficientSet, pair: &PrincipalPair, delta: f64) -> Result<bool> {
    if pair.lambda1 >= 0.0 {
        return Err(Error::NoPositiveState { lambda1: pair.lambda1 });
    }
    Ok(subsolution_margin(op, coeffs, pair, delta)? >= -subsolution_tolerance(coeffs, pair))
}

/// Coefficients shared by every row of a fragmentation sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTemplate {
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub target_fraction: f64,
    pub a: f64,
    pub nu: f64,
    pub h: f64,
}

impl Default for SweepTemplate {
    fn default() -> Self {
        let l = LandscapeSpec::fragmented(1);
        SweepTemplate {
            mu_plus: l.mu_plus,
            mu_minus: l.mu_minus,
            target_fraction: l.target_fraction,
            a: 1.0,
            nu: 1.0,
            h: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub lambda1: f64,
    pub phi_min: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta_star: Option<f64>,
    /// Failure of this row, if any.
    pub error: Option<Error>,
}

/// Coefficients of the fragmented landscape with `k²` disks on a
/// `resolution²` unit periodic cell.
pub fn landscape_coefficients(k: usize, resolution: usize, t: &SweepTemplate) -> Result<CoefficientSet> {
    let domain = Domain::new(DomainKind::SpPeriodic, 2, &[1.0, 1.0], &[resolution, resolution])?;
    let spec = LandscapeSpec {
        k,
        mu_plus: t.mu_plus,
        mu_minus: t.mu_minus,
        target_fraction: t.target_fraction,
    };
    let mu = make_landscape(&domain, &spec)?;
    CoefficientSet::new(
        ScalarField::constant(domain.clone(), t.a),
        mu,
        ScalarField::constant(domain.clone(), t.nu),
        ScalarField::constant(domain, t.h),
        CoefficientSet::DEFAULT_TAU,
    )
}

/// One sweep row. `fold` enables the continuation for `δ*`.
pub fn sweep_row(
    k: usize,
    resolution: usize,
    template: &SweepTemplate,
    eigen_tol: f64,
    fold: Option<&ContinuationOptions>,
) -> SweepRow {
    let mut row = SweepRow {
        k,
        lambda1: f64::NAN,
        phi_min: f64::NAN,
        delta1: f64::NAN,
        delta2: f64::NAN,
        delta_star: None,
        error: None,
    };
    let model = match landscape_coefficients(k, resolution, template).and_then(Model::new) {
        Ok(m) => m,
        Err(e) => {
            row.error = Some(e);
            return row;
        }
    };
    let report = principal_eigenpair(&model.op, &model.coeffs.mu, eigen_tol)
        .and_then(|pair| compute_thresholds(&model.coeffs, &pair, 1.0));
    match report {
        Ok(r) => {
            row.lambda1 = r.lambda1;
            row.phi_min = r.phi_min;
            row.delta1 = r.delta1;
            row.delta2 = r.delta2;
        }
        Err(e) => {
            row.error = Some(e);
            return row;
        }
    }
    if let Some(opts) = fold {
        match trace_branches(&model, opts) {
            Ok(rep) => row.delta_star = Some(rep.delta_star),
            Err(e) => row.error = Some(e),
        }
    }
    row
}

/// Thresholds (and optionally `δ*`) for each `k`, sorted by `k`.
pub fn fragmentation_sweep(
    k_list: &[usize],
    resolution: usize,
    template: &SweepTemplate,
    eigen_tol: f64,
    fold: Option<&ContinuationOptions>,
) -> Result<Vec<SweepRow>> {
    if k_list.is_empty() {
        return Err(Error::InvalidParameter("k list is empty".into()));
    }
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    Ok(ks.into_iter().map(|k| sweep_row(k, resolution, template, eigen_tol, fold)).collect())
}
