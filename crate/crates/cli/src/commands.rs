//! Experiments behind each subcommand.

use std::path::Path;

use harvest_core::eigen::principal_eigenpair;
use harvest_core::evolve::run_from_p;
use harvest_core::grid::DomainKind;
use harvest_core::periodic::{averaged_state, find_orbit, omega_row};
use harvest_core::steady::{
    classify, solve_harvested, solve_unharvested, stability, trace_branches, BranchStatus, Hyperbolicity,
};
use harvest_core::thresholds::{compute_thresholds, sweep_row, verify_subsolution, SweepTemplate};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Diagnostic, FieldConfig, RunConfig};
use crate::error::CliError;
use crate::io::{num, sig4, write_csv, write_field, write_pgm, write_raster, write_text, OutDir};

/// Steps of δ used to follow the upper branch from `p`.
const HOMOTOPY_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Scalar {
    fn display(&self) -> String {
        match self {
            Scalar::Num(x) => sig4(*x),
            Scalar::Int(n) => n.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Scalar::Num(x) if x.is_finite() => json!(x),
            Scalar::Num(x) => json!(x.to_string()),
            Scalar::Int(n) => json!(n),
            Scalar::Text(s) => json!(s),
        }
    }
}

/// Ordered key/value scalars of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary(pub Vec<(String, Scalar)>);

impl Summary {
    fn num(&mut self, k: &str, v: f64) -> &mut Self {
        self.0.push((k.into(), Scalar::Num(v)));
        self
    }
    fn int(&mut self, k: &str, v: usize) -> &mut Self {
        self.0.push((k.into(), Scalar::Int(v)));
        self
    }
    fn text(&mut self, k: &str, v: impl Into<String>) -> &mut Self {
        self.0.push((k.into(), Scalar::Text(v.into())));
        self
    }

    pub fn get(&self, k: &str) -> Option<&Scalar> {
        self.0.iter().find(|(key, _)| key == k).map(|(_, v)| v)
    }

    /// `key=value` pairs, numbers to 4 significant digits.
    pub fn line(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={}", v.display()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub summary: Summary,
    pub files: Vec<String>,
}

/// Validates, runs `experiment`, and writes its outputs plus
/// `manifest.json` into `out`.
pub fn run(experiment: &str, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    if let Some(d) = cfg.static_diagnostics(experiment).into_iter().next() {
        return Err(CliError::Config {
            path: d.path,
            message: d.message,
        });
    }
    let mut dir = OutDir::create(out)?;
    let summary = match experiment {
        "eigen" => eigen(cfg, &mut dir)?,
        "steady" => steady(cfg, &mut dir)?,
        "branches" => branches(cfg, &mut dir)?,
        "thresholds" => thresholds(cfg, &mut dir)?,
        "evolve" => evolve(cfg, &mut dir)?,
        "periodic" => periodic(cfg, &mut dir)?,
        "sweep-fragmentation" => sweep_fragmentation(cfg, &mut dir)?,
        "sweep-omega" => sweep_omega(cfg, &mut dir)?,
        other => {
            return Err(CliError::Config {
                path: "experiment.name".into(),
                message: format!("unknown experiment '{other}'"),
            })
        }
    };
    let files = dir.files().to_vec();
    write_manifest(experiment, cfg, &summary, &files, dir.root())?;
    Ok(Outcome { summary, files })
}

fn write_manifest(experiment: &str, cfg: &RunConfig, summary: &Summary, files: &[String], root: &Path) -> Result<(), CliError> {
    let mut s = Map::new();
    for (k, v) in &summary.0 {
        s.insert(k.clone(), v.json());
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": experiment,
        "config": serde_json::to_value(cfg).map_err(|e| CliError::config("config", e))?,
        "summary": Value::Object(s),
        "outputs": files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::config("config", e))?;
    write_text(&root.join("manifest.json"), &(text + "\n"))
}

fn eigen(cfg: &RunConfig, dir: &mut OutDir) -> Result<Summary, CliError> {
    let m = cfg.model()?;
    let pair = principal_eigenpair(&m.op, &m.coeffs.mu, cfg.solver.eigen_tol)?;
    write_raster(&dir.path("eigenfunction.csv"), &pair.phi)?;
    if pair.phi.domain().dim() == 2 {
        write_pgm(&dir.path("eigenfunction.pgm"), &pair.phi)?;
    }
    let mut s = Summary::default();
    s.num("lambda1", pair.lambda1)
        .num("phi_min", pair.phi_min)
        .num("residual", pair.residual)
        .int("iterations", pair.iterations);
    Ok(s)
}

fn steady(cfg: &RunConfig, dir: &mut OutDir) -> Result<Summary, CliError> {
    let m = cfg.model()?;
    let tol = cfg.solver.newton_tol;
    let mut state = solve_unharvested(&m, tol)?;
    let delta = cfg.experiment.delta;
    if delta > 0.0 {
        for j in 1..=HOMOTOPY_STEPS {
            let d = delta * j as f64 / HOMOTOPY_STEPS as f64;
            state = solve_harvested(&m, d, &state.u, tol)?;
        }
    }
    let sigma1 = stability(&m, &state)?;
    write_raster(&dir.path("steady.csv"), &state.u)?;
    write_field(&dir.path("steady.field"), &state.u)?;
    if state.u.domain().dim() == 2 {
        write_pgm(&dir.path("steady.pgm"), &state.u)?;
    }
    let mut s = Summary::default();
    s.num("delta", delta)
        .num("sup_norm", state.u.sup_norm())
        .num("min", state.u.min())
        .num("residual", state.residual_norm)
        .num("sigma1", sigma1)
        .text("hyperbolicity", hyperbolicity(classify(sigma1, cfg.solver.eigen_tol.sqrt())));
    Ok(s)
}

fn hyperbolicity(h: Hyperbolicity) -> &'static str {
    match h {
        Hyperbolicity::Stable => "stable",
        Hyperbolicity::Unstable => "unstable",
        Hyperbolicity::NonHyperbolic => "non-hyperbolic",
    }
}

fn branches(cfg: &RunConfig, dir: &mut OutDir) -> Result<Summary, CliError> {
    let m = cfg.model()?;
    let report = trace_branches(&m, &cfg.continuation())?;
    let rows: Vec<Vec<String>> = report
        .branch
        .iter()
        .map(|b| vec![num(b.arclength), num(b.delta), num(b.u.sup_norm()), num(b.sigma1), b.stable.to_string()])
        .collect();
    write_csv(&dir.path("branch.csv"), &["arclength", "delta", "sup_norm_u", "sigma1", "stable"], &rows)?;
    write_raster(&dir.path("fold.csv"), &report.u_at_fold)?;
    let mut s = Summary::default();
    s.num("delta_star", report.delta_star)
        .num("fold_sup_norm", report.u_at_fold.sup_norm())
        .int("points", report.branch.len());
    match &report.status {
        BranchStatus::Complete => s.text("status", "complete"),
        BranchStatus::Truncated(e) => s.text("status", format!("truncated ({e})")),
    };
    Ok(s)
}

fn thresholds(cfg: &RunConfig, dir: &mut OutDir) -> Result<Summary, CliError> {
    let m = cfg.model()?;
    let pair = principal_eigenpair(&m.op, &m.coeffs.mu, cfg.solver.eigen_tol)?;
    let r = compute_thresholds(&m.coeffs, &pair, cfg.experiment.eps)?;
    let header = [
        "lambda1", "phi_min", "alpha", "beta", "nu_lo", "nu_hi", "delta1", "delta2", "kappa0", "eps0", "applicable",
    ];
    let row = vec![
        num(r.lambda1),
        num(r.phi_min),
        num(r.alpha),
        num(r.beta),
        num(r.nu_lo),
        num(r.nu_hi),
        num(r.delta1),
        num(r.delta2),
        num(r.kappa0),
        num(r.eps0),
        r.applicable.to_string(),
    ];
    write_csv(&dir.path("thresholds.csv"), &header, &[row])?;
    let mut s = Summary::default();
    s.num("lambda1", r.lambda1).num("phi_min", r.phi_min);
    if r.applicable {
        s.num("delta1", r.delta1).num("delta2", r.delta2).num("kappa0", r.kappa0);
    } else {
        s.text("delta1", "n/a").text("delta2", "n/a").text("kappa0", "n/a");
    }
    s.num("eps0", r.eps0);
    if r.applicable && cfg.experiment.delta > 0.0 {
        let ok = verify_subsolution(&m.op, &m.coeffs, &pair, cfg.experiment.delta)?;
        s.text("subsolution", ok.to_string());
    }
    Ok(s)
}

fn evolve(cfg: &RunConfig, dir: &mut OutDir) -> Result<Summary, CliError> {
    let m = cfg.model()?;
    let pair = principal_eigenpair(&m.op, &m.coeffs.mu, cfg.solver.eigen_tol)?;
    let report = compute_thresholds(&m.coeffs, &pair, cfg.experiment.eps)?;
    let result = run_from_p(&m, cfg.experiment.delta, cfg.rho()?, &report, &cfg.evolve())?;
    let rows: Vec<Vec<String>> = result
        .samples
        .iter()
        .map(|s| vec![num(s.t), num(s.sup_norm), num(s.min), num(s.max)])
        .collect();
    write_csv(&dir.path("trajectory.csv"), &["t", "sup_norm", "min", "max"], &rows)?;
    write_raster(&dir.path("final.csv"), &result.final_state)?;
    if result.final_state.domain().dim() == 2 {
        write_pgm(&dir.path("final.pgm"), &result.final_state)?;
    }
    let last = result.samples.last().copied().expect("at least the initial sample");
    let mut s = Summary::default();
    s.text("classification", result.classification.name())
        .num("t_final", last.t)
        .num("sup_norm", last.sup_norm)
        .num("eps0", report.eps0)
        .num("min_value", result.min_value)
        .num("max_increase", result.max_increase);
    Ok(s)
}

fn periodic(cfg: &RunConfig, dir: &mut OutDir) -> Result<Summary, CliError> {
    let m = cfg.model()?;
    let spec = cfg.forcing(cfg.experiment.omega)?;
    let q = averaged_state(&m, &spec, cfg.solver.newton_tol, HOMOTOPY_STEPS)?;
    let orbit = find_orbit(&m, &spec, cfg.rho()?, &q.u, cfg.experiment.orbit_tol, &cfg.orbit())?;
    for (j, (_, snap)) in orbit.snapshots.iter().enumerate() {
        write_raster(&dir.path(&format!("orbit_phase{j}.csv")), snap)?;
    }
    write_raster(&dir.path("averaged_state.csv"), &q.u)?;
    let mut s = Summary::default();
    s.num("omega", orbit.omega)
        .num("period_residual", orbit.period_residual)
        .num("dist_to_q", orbit.u0.sup_distance(&q.u))
        .num("orbit_min", orbit.orbit_min)
        .num("orbit_max", orbit.orbit_max)
        .num("floquet", orbit.floquet_dominant)
        .text("hyperbolic", orbit.hyperbolic.to_string())
        .int("iterations", orbit.iterations);
    Ok(s)
}

/// Template from the `mu` landscape (or the default fragmented one) and
/// constant `a`, `nu`, `h`.
fn sweep_template(cfg: &RunConfig) -> Result<SweepTemplate, CliError> {
    let mut t = SweepTemplate::default();
    if let FieldConfig::Landscape {
        mu_plus,
        mu_minus,
        target_fraction,
        ..
    } = cfg.coefficients.mu
    {
        t.mu_plus = mu_plus;
        t.mu_minus = mu_minus;
        t.target_fraction = target_fraction;
    }
    let constant = |name: &str, f: &FieldConfig| match f {
        FieldConfig::Constant { value } => Ok(*value),
        _ => Err(CliError::Config {
            path: format!("coefficients.{name}"),
            message: "the fragmentation sweep needs a constant field here".into(),
        }),
    };
    t.a = constant("a", &cfg.coefficients.a)?;
    t.nu = constant("nu", &cfg.coefficients.nu)?;
    t.h = constant("h", &cfg.coefficients.h)?;
    Ok(t)
}

fn sweep_fragmentation(cfg: &RunConfig, dir: &mut OutDir) -> Result<Summary, CliError> {
    let template = sweep_template(cfg)?;
    let mut ks = cfg.experiment.k_list.clone();
    ks.sort_unstable();
    ks.dedup();
    let fold = cfg.experiment.with_fold.then(|| cfg.continuation());
    let res = cfg.experiment.sweep_resolution;
    let rows: Vec<_> = ks
        .par_iter()
        .map(|&k| sweep_row(k, res, &template, cfg.solver.eigen_tol, fold.as_ref()))
        .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                num(r.lambda1),
                num(r.phi_min),
                num(r.delta1),
                num(r.delta2),
                num(r.delta_star.unwrap_or(f64::NAN)),
            ]
        })
        .collect();
    write_csv(
        &dir.path("fragmentation.csv"),
        &["k", "lambda1", "phi_min", "delta1", "delta2", "delta_star"],
        &table,
    )?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let ordered = rows.iter().all(|r| r.error.is_some() || r.delta1 <= r.delta2);
    let mut s = Summary::default();
    s.int("rows", rows.len()).int("failed", failed).text("delta1_le_delta2", ordered.to_string());
    if failed == rows.len() {
        return Err(rows.into_iter().find_map(|r| r.error).expect("failed row").into());
    }
    Ok(s)
}

fn sweep_omega(cfg: &RunConfig, dir: &mut OutDir) -> Result<Summary, CliError> {
    let m = cfg.model()?;
    let template = cfg.forcing(1.0)?;
    let q = averaged_state(&m, &template, cfg.solver.newton_tol, HOMOTOPY_STEPS)?;
    let rho = cfg.rho()?;
    let opts = cfg.orbit();
    let mut omegas = cfg.experiment.omega_list.clone();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let rows: Vec<_> = omegas
        .par_iter()
        .map(|&w| omega_row(&m, &template, w, rho, &q.u, cfg.experiment.orbit_tol, &opts))
        .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.omega),
                num(r.period_residual),
                num(r.dist_to_q),
                num(r.orbit_min),
                num(r.orbit_max),
                num(r.floquet),
            ]
        })
        .collect();
    write_csv(
        &dir.path("omega.csv"),
        &["omega", "period_residual", "dist_to_q", "orbit_min", "orbit_max", "floquet"],
        &table,
    )?;
    let converged: Vec<_> = rows.iter().filter(|r| r.error.is_none()).collect();
    let mut s = Summary::default();
    s.int("rows", rows.len()).int("converged", converged.len());
    match converged.first() {
        Some(r) => s.num("smallest_converged_omega", r.omega),
        None => s.text("smallest_converged_omega", "none"),
    };
    let decreasing = converged.windows(2).all(|w| w[1].dist_to_q < w[0].dist_to_q);
    s.text("dist_decreasing", decreasing.to_string());
    Ok(s)
}

/// Full validation without running the experiment. Experiments that need a
/// positive steady state also run the eigensolver.
pub fn validate(cfg: &RunConfig) -> Vec<Diagnostic> {
    let experiment = cfg.experiment.name.clone().unwrap_or_else(|| "eigen".into());
    let mut out = cfg.static_diagnostics(&experiment);
    if !out.is_empty() || matches!(experiment.as_str(), "eigen" | "thresholds" | "sweep-fragmentation") {
        return out;
    }
    if matches!(experiment.as_str(), "periodic" | "sweep-omega") && cfg.domain_kind() == Some(DomainKind::SpPeriodic) {
        return out;
    }
    let m = match cfg.model() {
        Ok(m) => m,
        Err(CliError::Config { path, message }) => {
            out.push(Diagnostic { path, message });
            return out;
        }
        Err(e) => {
            out.push(Diagnostic {
                path: "coefficients".into(),
                message: e.to_string(),
            });
            return out;
        }
    };
    let pair = match principal_eigenpair(&m.op, &m.coeffs.mu, cfg.solver.eigen_tol) {
        Ok(p) => p,
        Err(e) => {
            out.push(Diagnostic {
                path: "coefficients.mu".into(),
                message: format!("principal eigenpair failed: {e}"),
            });
            return out;
        }
    };
    if pair.lambda1 >= 0.0 {
        out.push(Diagnostic {
            path: "coefficients.mu".into(),
            message: format!(
                "lambda1 = {} is not negative, so there is no positive steady state to harvest",
                sig4(pair.lambda1)
            ),
        });
        return out;
    }
    if experiment == "evolve" {
        if let Ok(r) = compute_thresholds(&m.coeffs, &pair, cfg.experiment.eps) {
            if !r.eps_admissible() {
                out.push(Diagnostic {
                    path: "experiment.eps".into(),
                    message: format!(
                        "eps0 = 2 eps nu_hi / phi_min = {} must be below -lambda1/2 = {} for the long-time dichotomy to apply",
                        sig4(r.eps0),
                        sig4(-r.lambda1 / 2.0)
                    ),
                });
            }
        }
    }
    out
}
