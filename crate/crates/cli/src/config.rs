//! TOML run configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use harvest_core::evolve::{EvolveOptions, RhoSpec};
use harvest_core::grid::{make_landscape, sample, CoefficientSet, Domain, DomainKind, LandscapeSpec, ScalarField};
use harvest_core::periodic::{ForcingSpec, OrbitOptions, Profile};
use harvest_core::steady::ContinuationOptions;
use harvest_core::{Model, NewtonOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::read_field;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    #[serde(default)]
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: String,
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub resolution: Vec<usize>,
}

/// Closed set of coefficient expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldConfig {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · cos(2π · wavenumber · x₁ / L₁)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: f64,
    },
    /// `k²` disks with value `mu_plus`, `mu_minus` elsewhere.
    Landscape {
        k: usize,
        #[serde(default = "default_mu_plus")]
        mu_plus: f64,
        #[serde(default = "default_mu_minus")]
        mu_minus: f64,
        #[serde(default = "default_fraction")]
        target_fraction: f64,
    },
    /// Field file, relative paths resolved against the config file.
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}
fn default_mu_plus() -> f64 {
    LandscapeSpec::fragmented(1).mu_plus
}
fn default_mu_minus() -> f64 {
    LandscapeSpec::fragmented(1).mu_minus
}
fn default_fraction() -> f64 {
    LandscapeSpec::fragmented(1).target_fraction
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    #[serde(default = "unit_field")]
    pub a: FieldConfig,
    #[serde(default = "unit_field")]
    pub mu: FieldConfig,
    #[serde(default = "unit_field")]
    pub nu: FieldConfig,
    #[serde(default = "unit_field")]
    pub h: FieldConfig,
}

fn unit_field() -> FieldConfig {
    FieldConfig::Constant { value: 1.0 }
}

impl Default for CoefficientsConfig {
    fn default() -> Self {
        CoefficientsConfig {
            a: unit_field(),
            mu: unit_field(),
            nu: unit_field(),
            h: unit_field(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub eigen_tol: f64,
    pub newton_tol: f64,
    /// Relative tolerance of the inner linear solves.
    pub cg_tol: f64,
    pub dt: f64,
    pub t_max: f64,
    pub tol_steady: f64,
    pub tol_rate: f64,
    pub continuation: ContinuationConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let e = EvolveOptions::default();
        SolverConfig {
            eigen_tol: 1e-10,
            newton_tol: 1e-9,
            cg_tol: 1e-10,
            dt: e.dt,
            t_max: e.t_max,
            tol_steady: e.tol_steady,
            tol_rate: e.tol_rate,
            continuation: ContinuationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationConfig {
    pub delta_max: f64,
    pub max_steps: usize,
    pub ds_initial: f64,
    pub ds_max_rel: f64,
    pub ds_min: f64,
    pub delta_floor: f64,
    pub fold_rel_tol: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        let c = ContinuationOptions::default();
        ContinuationConfig {
            delta_max: c.delta_max,
            max_steps: c.max_steps,
            ds_initial: c.ds_initial,
            ds_max_rel: c.ds_max_rel,
            ds_min: c.ds_min,
            delta_floor: c.delta_floor,
            fold_rel_tol: c.fold_rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Experiment that `validate` checks; subcommands override it.
    pub name: Option<String>,
    pub delta: f64,
    pub eps: f64,
    pub k_list: Vec<usize>,
    /// Grid size per side for the fragmentation sweep.
    pub sweep_resolution: usize,
    /// Whether the fragmentation sweep also traces branches for δ*.
    pub with_fold: bool,
    pub omega: f64,
    pub omega_list: Vec<f64>,
    pub orbit_tol: f64,
    pub steps_per_period: usize,
    pub max_orbit_iter: usize,
    pub forcing: ForcingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: None,
            delta: 0.0,
            eps: 0.01,
            k_list: vec![1, 2, 3, 4, 5, 6],
            sweep_resolution: 128,
            with_fold: false,
            omega: 8.0,
            omega_list: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            orbit_tol: 1e-6,
            steps_per_period: 32,
            max_orbit_iter: 200,
            forcing: ForcingConfig::default(),
        }
    }
}

/// Forcing profile `g(s, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingConfig {
    /// `g = 1`.
    Constant,
    /// `g = 1 + amplitude · sin(2πs)`.
    Sinusoidal { amplitude: f64 },
    /// `g = 1 + amplitude · cos(2πs) · cos(π x₁ / L₁)`.
    Modulated { amplitude: f64 },
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig::Sinusoidal { amplitude: 1.0 }
    }
}

pub const EXPERIMENTS: [&str; 8] = [
    "eigen",
    "steady",
    "branches",
    "thresholds",
    "evolve",
    "periodic",
    "sweep-fragmentation",
    "sweep-omega",
];

/// A problem with the configuration, tied to a field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn diag(path: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        path: path.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: "config".into(),
            message: e.to_string(),
        })
    }

    /// Reads the config and resolves relative field-file paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = RunConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for f in [
            &mut cfg.coefficients.a,
            &mut cfg.coefficients.mu,
            &mut cfg.coefficients.nu,
            &mut cfg.coefficients.h,
        ] {
            if let FieldConfig::File { path } = f {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn domain_kind(&self) -> Option<DomainKind> {
        DomainKind::from_name(&self.domain.kind)
    }

    /// Checks that need no solver.
    pub fn static_diagnostics(&self, experiment: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let d = &self.domain;
        if self.domain_kind().is_none() {
            out.push(diag("domain.kind", format!("unknown domain kind '{}' (expected sp-periodic or bounded-neumann)", d.kind)));
        }
        if !(1..=2).contains(&d.dim) {
            out.push(diag("domain.dim", format!("dimension must be 1 or 2, got {}", d.dim)));
        }
        if d.lengths.len() != d.dim {
            out.push(diag("domain.lengths", format!("expected {} entries, got {}", d.dim, d.lengths.len())));
        }
        if d.lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            out.push(diag("domain.lengths", "lengths must be positive"));
        }
        if d.resolution.len() != d.dim {
            out.push(diag("domain.resolution", format!("expected {} entries, got {}", d.dim, d.resolution.len())));
        }
        if d.resolution.iter().any(|&n| n < harvest_core::grid::MIN_RESOLUTION) {
            out.push(diag("domain.resolution", format!("at least {} nodes per axis", harvest_core::grid::MIN_RESOLUTION)));
        }

        for (name, f) in [
            ("a", &self.coefficients.a),
            ("mu", &self.coefficients.mu),
            ("nu", &self.coefficients.nu),
            ("h", &self.coefficients.h),
        ] {
            let path = format!("coefficients.{name}");
            match f {
                FieldConfig::Landscape { .. } if d.dim != 2 => {
                    out.push(diag(&path, "landscape needs a 2-D domain"));
                }
                FieldConfig::Landscape { k, .. } if *k == 0 => out.push(diag(&format!("{path}.k"), "k must be at least 1")),
                FieldConfig::Landscape { target_fraction, .. } if !(*target_fraction > 0.0 && *target_fraction < 1.0) => {
                    out.push(diag(&format!("{path}.target_fraction"), "must lie in (0, 1)"))
                }
                FieldConfig::Constant { value } if !value.is_finite() => out.push(diag(&format!("{path}.value"), "must be finite")),
                FieldConfig::File { path: p } if !p.exists() => {
                    out.push(diag(&format!("{path}.path"), format!("file {} not found", p.display())))
                }
                _ => {}
            }
        }

        let s = &self.solver;
        for (name, v) in [
            ("eigen_tol", s.eigen_tol),
            ("newton_tol", s.newton_tol),
            ("cg_tol", s.cg_tol),
            ("dt", s.dt),
            ("t_max", s.t_max),
            ("tol_steady", s.tol_steady),
            ("tol_rate", s.tol_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                out.push(diag(&format!("solver.{name}"), format!("must be positive, got {v}")));
            }
        }
        let c = &s.continuation;
        for (name, v) in [
            ("delta_max", c.delta_max),
            ("ds_initial", c.ds_initial),
            ("ds_max_rel", c.ds_max_rel),
            ("ds_min", c.ds_min),
            ("delta_floor", c.delta_floor),
            ("fold_rel_tol", c.fold_rel_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                out.push(diag(&format!("solver.continuation.{name}"), format!("must be positive, got {v}")));
            }
        }
        if c.max_steps == 0 {
            out.push(diag("solver.continuation.max_steps", "must be at least 1"));
        }

        let e = &self.experiment;
        if let Some(name) = &e.name {
            if !EXPERIMENTS.contains(&name.as_str()) {
                out.push(diag("experiment.name", format!("unknown experiment '{name}'")));
            }
        }
        if !(e.delta >= 0.0) || !e.delta.is_finite() {
            out.push(diag("experiment.delta", format!("must be nonnegative, got {}", e.delta)));
        }
        if matches!(experiment, "evolve" | "periodic" | "sweep-omega") && (!(e.eps > 0.0) || !e.eps.is_finite()) {
            out.push(diag("experiment.eps", format!("must be positive, got {}", e.eps)));
        }
        if experiment == "thresholds" && !(e.eps > 0.0) {
            out.push(diag("experiment.eps", format!("must be positive, got {}", e.eps)));
        }
        if experiment == "sweep-fragmentation" {
            if e.k_list.is_empty() || e.k_list.contains(&0) {
                out.push(diag("experiment.k_list", "must be a nonempty list of positive integers"));
            }
            if e.sweep_resolution < harvest_core::grid::MIN_RESOLUTION {
                out.push(diag("experiment.sweep_resolution", "too small"));
            }
        }
        if matches!(experiment, "periodic" | "sweep-omega") {
            if self.domain_kind() == Some(DomainKind::SpPeriodic) {
                out.push(diag(
                    "domain.kind",
                    "time-periodic forcing is only treated on bounded domains with no-flux boundary conditions",
                ));
            }
            if experiment == "periodic" && !(e.omega > 0.0) {
                out.push(diag("experiment.omega", "must be positive"));
            }
            if experiment == "sweep-omega" && (e.omega_list.is_empty() || e.omega_list.iter().any(|w| !(*w > 0.0))) {
                out.push(diag("experiment.omega_list", "must be a nonempty list of positive frequencies"));
            }
            if !(e.orbit_tol > 0.0) {
                out.push(diag("experiment.orbit_tol", "must be positive"));
            }
            if e.steps_per_period < 32 || e.steps_per_period % 4 != 0 {
                out.push(diag("experiment.steps_per_period", "must be a multiple of 4 and at least 32"));
            }
            if e.max_orbit_iter == 0 {
                out.push(diag("experiment.max_orbit_iter", "must be at least 1"));
            }
        }
        out
    }

    pub fn build_domain(&self) -> Result<Arc<Domain>, CliError> {
        let kind = self.domain_kind().ok_or_else(|| CliError::Config {
            path: "domain.kind".into(),
            message: format!("unknown domain kind '{}'", self.domain.kind),
        })?;
        Domain::new(kind, self.domain.dim, &self.domain.lengths, &self.domain.resolution)
            .map_err(|e| CliError::config("domain", e))
    }

    pub fn build_field(&self, domain: &Arc<Domain>, name: &str, f: &FieldConfig) -> Result<ScalarField, CliError> {
        let path = format!("coefficients.{name}");
        let l1 = domain.lengths()[0];
        let field = match f {
            FieldConfig::Constant { value } => Ok(ScalarField::constant(domain.clone(), *value)),
            FieldConfig::Cosine { mean, amplitude, wavenumber } => {
                sample(domain, |x| mean + amplitude * (2.0 * PI * wavenumber * x[0] / l1).cos())
            }
            FieldConfig::Landscape {
                k,
                mu_plus,
                mu_minus,
                target_fraction,
            } => make_landscape(
                domain,
                &LandscapeSpec {
                    k: *k,
                    mu_plus: *mu_plus,
                    mu_minus: *mu_minus,
                    target_fraction: *target_fraction,
                },
            ),
            FieldConfig::File { path: p } => return read_field(p, domain).map_err(|e| e.at(&format!("{path}.path"))),
        };
        field.map_err(|e| CliError::config(&path, e))
    }

    pub fn coefficients(&self) -> Result<CoefficientSet, CliError> {
        let d = self.build_domain()?;
        let c = &self.coefficients;
        CoefficientSet::new(
            self.build_field(&d, "a", &c.a)?,
            self.build_field(&d, "mu", &c.mu)?,
            self.build_field(&d, "nu", &c.nu)?,
            self.build_field(&d, "h", &c.h)?,
            CoefficientSet::DEFAULT_TAU,
        )
        .map_err(|e| CliError::config("coefficients", e))
    }

    pub fn model(&self) -> Result<Model, CliError> {
        Model::new(self.coefficients()?).map_err(|e| CliError::config("coefficients.a", e))
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.solver.newton_tol,
            linear_tol: self.solver.cg_tol,
            ..NewtonOptions::default()
        }
    }

    pub fn continuation(&self) -> ContinuationOptions {
        let c = &self.solver.continuation;
        ContinuationOptions {
            delta_max: c.delta_max,
            max_steps: c.max_steps,
            tol: self.solver.newton_tol,
            ds_initial: c.ds_initial,
            ds_max_rel: c.ds_max_rel,
            ds_min: c.ds_min,
            delta_floor: c.delta_floor,
            fold_rel_tol: c.fold_rel_tol,
            ..ContinuationOptions::default()
        }
    }

    pub fn evolve(&self) -> EvolveOptions {
        EvolveOptions {
            dt: self.solver.dt,
            t_max: self.solver.t_max,
            tol_steady: self.solver.tol_steady,
            tol_rate: self.solver.tol_rate,
            newton: NewtonOptions {
                tol: self.solver.newton_tol.min(EvolveOptions::default().newton.tol),
                linear_tol: self.solver.cg_tol,
                ..NewtonOptions::default()
            },
        }
    }

    pub fn rho(&self) -> Result<RhoSpec, CliError> {
        RhoSpec::new(self.experiment.eps).map_err(|e| CliError::config("experiment.eps", e))
    }

    pub fn orbit(&self) -> OrbitOptions {
        OrbitOptions {
            steps_per_period: self.experiment.steps_per_period,
            max_iter: self.experiment.max_orbit_iter,
            newton: NewtonOptions {
                linear_tol: self.solver.cg_tol,
                ..OrbitOptions::default().newton
            },
            ..OrbitOptions::default()
        }
    }

    pub fn forcing(&self, omega: f64) -> Result<ForcingSpec, CliError> {
        let l1 = self.domain.lengths.first().copied().unwrap_or(1.0);
        let g: Profile = match self.experiment.forcing {
            ForcingConfig::Constant => Arc::new(|_, _| 1.0),
            ForcingConfig::Sinusoidal { amplitude } => Arc::new(move |s, _| 1.0 + amplitude * (2.0 * PI * s).sin()),
            ForcingConfig::Modulated { amplitude } => {
                Arc::new(move |s, x| 1.0 + amplitude * (2.0 * PI * s).cos() * (PI * x[0] / l1).cos())
            }
        };
        ForcingSpec::new(g, self.experiment.delta, omega).map_err(|e| CliError::config("experiment", e))
    }
}
