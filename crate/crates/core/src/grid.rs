//! Structured grids, grid-sampled fields and coefficient sets.
//!
//! Two domain kinds are supported. A space-periodic domain stores one period
//! cell with `n` cells per axis and no duplicated endpoint, so node `i` sits at
//! `i * L / n`. A bounded Neumann box keeps both endpoints, so node `i` sits at
//! `i * L / (n - 1)`. Flat indices run with axis 0 fastest:
//! `index = i0 + n0 * i1`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest admissible node count per axis.
pub const MIN_RESOLUTION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    /// One period cell of a space-periodic medium.
    SpPeriodic,
    /// A box with homogeneous Neumann (no-flux) walls.
    BoundedNeumann,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::SpPeriodic => "sp-periodic",
            DomainKind::BoundedNeumann => "bounded-neumann",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sp-periodic" | "periodic" => Some(DomainKind::SpPeriodic),
            "bounded-neumann" | "bounded" | "neumann" => Some(DomainKind::BoundedNeumann),
            _ => None,
        }
    }
}

/// A validated rectangular grid in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    lengths: Vec<f64>,
    resolution: Vec<usize>,
}

impl Domain {
    /// Validates the parameters and returns a shareable domain.
    pub fn new(
        kind: DomainKind,
        dim: usize,
        lengths: &[f64],
        resolution: &[usize],
    ) -> Result<Arc<Domain>> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidDomain(format!("dim must be 1 or 2, got {dim}")));
        }
        if lengths.len() != dim || resolution.len() != dim {
            return Err(Error::InvalidDomain(format!(
                "expected {dim} lengths and resolutions, got {} and {}",
                lengths.len(),
                resolution.len()
            )));
        }
        for (axis, (&l, &n)) in lengths.iter().zip(resolution).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "length on axis {axis} must be positive, got {l}"
                )));
            }
            if n < MIN_RESOLUTION {
                return Err(Error::InvalidDomain(format!(
                    "resolution on axis {axis} must be at least {MIN_RESOLUTION}, got {n}"
                )));
            }
        }
        Ok(Arc::new(Domain {
            kind,
            lengths: lengths.to_vec(),
            resolution: resolution.to_vec(),
        }))
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == DomainKind::SpPeriodic
    }

    /// Grid spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        let n = self.resolution[axis] as f64;
        match self.kind {
            DomainKind::SpPeriodic => self.lengths[axis] / n,
            DomainKind::BoundedNeumann => self.lengths[axis] / (n - 1.0),
        }
    }

    /// Product of the grid spacings.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Per-axis node indices of a flat index. Unused axes are zero.
    pub fn multi_index(&self, index: usize) -> [usize; 2] {
        let n0 = self.resolution[0];
        if self.dim() == 1 {
            [index, 0]
        } else {
            [index % n0, index / n0]
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        if self.dim() == 1 {
            idx[0]
        } else {
            idx[0] + self.resolution[0] * idx[1]
        }
    }

    /// Physical coordinates of a node. Unused axes are zero.
    pub fn coords(&self, index: usize) -> [f64; 2] {
        let idx = self.multi_index(index);
        let mut x = [0.0; 2];
        for (axis, xa) in x.iter_mut().enumerate().take(self.dim()) {
            *xa = idx[axis] as f64 * self.spacing(axis);
        }
        x
    }

    /// Index of the node closest to `x`, wrapping in the periodic case and
    /// clamping in the bounded case.
    pub fn nearest_index(&self, x: [f64; 2]) -> usize {
        let mut idx = [0usize; 2];
        for (axis, ia) in idx.iter_mut().enumerate().take(self.dim()) {
            let n = self.resolution[axis] as i64;
            let k = (x[axis] / self.spacing(axis)).round() as i64;
            *ia = match self.kind {
                DomainKind::SpPeriodic => k.rem_euclid(n) as usize,
                DomainKind::BoundedNeumann => k.clamp(0, n - 1) as usize,
            };
        }
        self.flat_index(idx)
    }

    /// Nodal quadrature weights relative to `cell_volume`: 1 in the interior,
    /// halved once per bounded wall the node lies on.
    pub fn mass_weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                if self.is_periodic() {
                    return 1.0;
                }
                let idx = self.multi_index(i);
                (0..self.dim())
                    .map(|axis| {
                        if idx[axis] == 0 || idx[axis] + 1 == self.resolution[axis] {
                            0.5
                        } else {
                            1.0
                        }
                    })
                    .product()
            })
            .collect()
    }

    /// Measure of the domain (one period cell in the periodic case).
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// One-line description used by the field file format.
    pub fn header(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "domain {} {} {} {}",
            self.kind.name(),
            self.dim(),
            join(self.lengths.iter().map(|l| format!("{l}")).collect()),
            join(self.resolution.iter().map(|n| n.to_string()).collect()),
        )
    }
}

/// Validated domain constructor.
pub fn build_domain(
    kind: DomainKind,
    dim: usize,
    lengths: &[f64],
    resolution: &[usize],
) -> Result<Arc<Domain>> {
    Domain::new(kind, dim, lengths, resolution)
}

/// A real-valued function sampled at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<Domain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(ScalarField { domain, values })
    }

    /// Builds a field from values already known to be finite and of the
    /// right length.
    pub(crate) fn from_parts(domain: Arc<Domain>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        ScalarField { domain, values }
    }

    pub fn constant(domain: Arc<Domain>, value: f64) -> Self {
        let n = domain.len();
        ScalarField {
            domain,
            values: vec![value; n],
        }
    }

    pub fn zeros(domain: Arc<Domain>) -> Self {
        Self::constant(domain, 0.0)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map; fails if the map produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        ScalarField::new(
            self.domain.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_same_domain(&self, other: &ScalarField) -> Result<()> {
        if self.domain.as_ref() != other.domain.as_ref() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Samples `f` at the node coordinates. `f` receives a slice of length `dim`.
pub fn sample(domain: &Arc<Domain>, f: impl Fn(&[f64]) -> f64) -> Result<ScalarField> {
    let dim = domain.dim();
    let values = (0..domain.len())
        .map(|i| f(&domain.coords(i)[..dim]))
        .collect();
    ScalarField::new(domain.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub min: f64,
    pub max: f64,
    pub sup: f64,
    pub l2: f64,
}

/// Node reductions; the L² norm uses the nodal quadrature (trapezoidal at
/// bounded walls).
pub fn field_stats(field: &ScalarField) -> FieldStats {
    let domain = field.domain();
    let weights = domain.mass_weights();
    let vol = domain.cell_volume();
    let l2 = field
        .values()
        .iter()
        .zip(&weights)
        .map(|(v, w)| w * v * v)
        .sum::<f64>()
        * vol;
    FieldStats {
        min: field.min(),
        max: field.max(),
        sup: field.sup_norm(),
        l2: l2.sqrt(),
    }
}

/// Coefficients of the scalar-diffusion logistic model with harvesting.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub a: ScalarField,
    pub mu: ScalarField,
    pub nu: ScalarField,
    pub h: ScalarField,
    pub nu_lo: f64,
    pub nu_hi: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

impl CoefficientSet {
    /// Ellipticity floor used by the convenience constructors.
    pub const DEFAULT_TAU: f64 = 1e-8;

    pub fn new(
        a: ScalarField,
        mu: ScalarField,
        nu: ScalarField,
        h: ScalarField,
        tau: f64,
    ) -> Result<Self> {
        for f in [&mu, &nu, &h] {
            a.check_same_domain(f)?;
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "ellipticity floor must be positive, got {tau}"
            )));
        }
        if a.min() < tau {
            return Err(Error::InvalidCoefficient(format!(
                "diffusion coefficient min {} is below the ellipticity floor {tau}",
                a.min()
            )));
        }
        let (nu_lo, nu_hi) = (nu.min(), nu.max());
        if !(nu_lo > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "saturation nu must be positive, min is {nu_lo}"
            )));
        }
        let (h_lo, h_hi) = (h.min(), h.max());
        if h_lo < 0.0 {
            return Err(Error::InvalidCoefficient(format!(
                "harvesting profile h must be nonnegative, min is {h_lo}"
            )));
        }
        Ok(CoefficientSet {
            a,
            mu,
            nu,
            h,
            nu_lo,
            nu_hi,
            h_lo,
            h_hi,
        })
    }

    /// a ≡ 1, ν ≡ ν₀, h ≡ 1 with a given growth field.
    pub fn with_growth(mu: ScalarField, nu0: f64) -> Result<Self> {
        let d = mu.domain().clone();
        CoefficientSet::new(
            ScalarField::constant(d.clone(), 1.0),
            mu,
            ScalarField::constant(d.clone(), nu0),
            ScalarField::constant(d, 1.0),
            Self::DEFAULT_TAU,
        )
    }

    /// Spatially constant medium: a ≡ 1, μ ≡ μ₀, ν ≡ ν₀, h ≡ 1.
    pub fn homogeneous(domain: &Arc<Domain>, mu0: f64, nu0: f64) -> Result<Self> {
        Self::with_growth(ScalarField::constant(domain.clone(), mu0), nu0)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.a.domain()
    }

    /// α = min h (attained, non-strict).
    pub fn alpha(&self) -> f64 {
        self.h_lo
    }

    /// β = max h (attained, non-strict).
    pub fn beta(&self) -> f64 {
        self.h_hi
    }
}

/// Growth landscape made of k² equal disks per unit cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeSpec {
    pub k: usize,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub target_fraction: f64,
}

impl LandscapeSpec {
    /// k² disks covering half of the unit cell, μ = 10 inside, −1 outside.
    pub fn fragmented(k: usize) -> Self {
        LandscapeSpec {
            k,
            mu_plus: 10.0,
            mu_minus: -1.0,
            target_fraction: 0.5,
        }
    }

    pub fn radius(&self) -> f64 {
        let k = self.k as f64;
        (self.target_fraction / (k * k * PI)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidCoefficient("landscape k must be >= 1".into()));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction < 1.0) {
            return Err(Error::InvalidCoefficient(format!(
                "landscape fraction must lie in (0,1), got {}",
                self.target_fraction
            )));
        }
        if 2.0 * self.radius() >= 1.0 / self.k as f64 {
            return Err(Error::InvalidCoefficient(format!(
                "disks of radius {} overlap for k = {}",
                self.radius(),
                self.k
            )));
        }
        if !(self.mu_plus.is_finite() && self.mu_minus.is_finite()) {
            return Err(Error::InvalidCoefficient("landscape values must be finite".into()));
        }
        Ok(())
    }

    /// Whether a point lies in one of the disks; the pattern is (1,1)-periodic.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let k = self.k as f64;
        let r = self.radius();
        let local = |t: f64| ((t * k).rem_euclid(1.0) - 0.5) / k;
        let (dx, dy) = (local(x), local(y));
        dx * dx + dy * dy <= r * r
    }
}

/// Two-valued growth field: `mu_plus` at nodes inside a disk, `mu_minus`
/// elsewhere.
pub fn make_landscape(domain: &Arc<Domain>, spec: &LandscapeSpec) -> Result<ScalarField> {
    if domain.dim() != 2 {
        return Err(Error::InvalidDomain(format!(
            "landscape needs a 2-D domain, got dim {}",
            domain.dim()
        )));
    }
    spec.validate()?;
    sample(domain, |x| {
        if spec.contains(x[0], x[1]) {
            spec.mu_plus
        } else {
            spec.mu_minus
        }
    })
}
