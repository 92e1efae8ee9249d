use crate::config::{RunConfig, Task};
use pattern_forge::kernels::identity_suite;
use pattern_forge::lamellae::{lamellae_csv, solve_lamellae};
use pattern_forge::lattice_patterns::{
    nonconstancy_metrics, BravaisLattice, LatticeParams, LatticeSolveConfig, LatticeSolver, LatticeSpectrum,
};
use pattern_forge::slab_branch::{BranchConfig, BranchSolver};
use pattern_forge::slab_spectrum::{spectral_certificate, SlabParams};
use pattern_forge::Error;
use serde_json::{json, Value};
use std::fmt::Write as _;

#[derive(Debug)]
pub enum Failure {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Solver(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::Invalid(_)
            | Error::EmptyWindow { .. }
            | Error::GammaOutsideWindow { .. }
            | Error::Geometry(_) => Failure::Config(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

pub struct Outcome {
    /// (file name, contents).
    pub files: Vec<(String, String)>,
    pub summary: String,
    /// Set when the run finished but some part of it failed; artifacts are still written.
    pub solver_failure: Option<String>,
}

fn report(config: &RunConfig, body: Value) -> String {
    let mut v = json!({ "config": config, "threads": config.threads });
    if let (Value::Object(m), Value::Object(b)) = (&mut v, body) {
        m.extend(b);
    }
    serde_json::to_string_pretty(&v).expect("report is serializable") + "\n"
}

pub fn run(config: &RunConfig) -> Result<Outcome, Failure> {
    config.validate().map_err(Failure::Config)?;
    match config.task {
        Task::Verify => verify(config),
        Task::SlabSpectrum => slab_spectrum(config),
        Task::SlabBranch => slab_branch(config),
        Task::Lamellae => lamellae(config),
        Task::Lattice => lattice(config),
    }
}

fn verify(c: &RunConfig) -> Result<Outcome, Failure> {
    let [a, b, d] = c.identity_point.unwrap_or([0.7, 1.3, 0.4]);
    let rows = identity_suite(c.kappa, a, b, d)?;
    let mut csv = String::from("identity,kappa,alpha,beta,delta,lhs,rhs,residual\n");
    let mut summary = format!("identity suite at kappa = {}\n", c.kappa);
    let mut bad = Vec::new();
    for r in &rows {
        let lhs = r.lhs.map(|v| format!("{v:.16e}")).unwrap_or_else(|| "nan".into());
        let _ = writeln!(csv, "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}", r.id.name(), r.kappa, r.alpha, r.beta, r.delta, lhs, r.rhs, r.residual);
        let _ = writeln!(summary, "  {:<22} residual {:.3e}", r.id.name(), r.residual);
        if !(r.residual < 1e-8) {
            bad.push(r.id.name());
        }
    }
    let stem = c.stem();
    Ok(Outcome {
        files: vec![
            (format!("{stem}_identities.csv"), csv),
            (format!("{stem}_report.json"), report(c, json!({ "identities": rows }))),
        ],
        summary,
        solver_failure: (!bad.is_empty()).then(|| format!("identities above 1e-8: {}", bad.join(", "))),
    })
}

fn slab_params(c: &RunConfig) -> Result<SlabParams, Failure> {
    Ok(SlabParams::new(c.kappa, c.gamma.unwrap_or(0.0))?)
}

fn slab_spectrum(c: &RunConfig) -> Result<Outcome, Failure> {
    let p = slab_params(c)?;
    let rep = spectral_certificate(&p, c.ell_max.unwrap_or(16))?;
    let mut csv = String::from("ell,sigma\n");
    for (l, s) in rep.sigma_at.iter().enumerate() {
        let _ = writeln!(csv, "{l},{s:.16e}");
    }
    let summary = format!(
        "gamma window ({:.6}, {:.6}); lambda_* = {:.12}; certificate {}\n",
        rep.window.lower,
        rep.window.upper,
        rep.lambda_star,
        if rep.all_flags() { "holds" } else { "fails" }
    );
    let failure = (!rep.all_flags()).then(|| format!("spectral certificate fails (offending ell {:?})", rep.offending_ell));
    let stem = c.stem();
    Ok(Outcome {
        files: vec![(format!("{stem}_sigma.csv"), csv), (format!("{stem}_report.json"), report(c, json!({ "spectrum": rep })))],
        summary,
        solver_failure: failure,
    })
}

fn branch_config(c: &RunConfig) -> Result<BranchConfig, Failure> {
    let d = BranchConfig::default_for(c.kappa);
    let cfg = BranchConfig::new(c.kappa, c.n.unwrap_or(d.n), c.k_max.unwrap_or(d.k_max));
    if let Some(s) = c.s_grid.iter().find(|s| !(s.abs() <= cfg.s_max)) {
        return Err(Failure::Config(format!("|s| = {} exceeds s_max = {}", s.abs(), cfg.s_max)));
    }
    Ok(cfg)
}

/// 0 first, then the rest in the given order.
fn s_grid_from_zero(c: &RunConfig) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(c.s_grid.iter().copied().filter(|s| *s != 0.0));
    g
}

fn slab_branch(c: &RunConfig) -> Result<Outcome, Failure> {
    let solver = BranchSolver::new(slab_params(c)?, branch_config(c)?)?;
    let branch = solver.continue_branch(&s_grid_from_zero(c))?;
    let mut summary = format!("branch from lambda_* = {:.12}: {} points\n", branch.lambda_star, branch.points.len());
    for f in &branch.failures {
        let _ = writeln!(summary, "  failed at s = {}: {}", f.s, f.message);
    }
    let failure = (!branch.failures.is_empty()).then(|| format!("{} branch points failed", branch.failures.len()));
    let stem = c.stem();
    Ok(Outcome {
        files: vec![
            (format!("{stem}_branch.csv"), branch.to_csv()),
            (format!("{stem}_report.json"), report(c, json!({ "branch": branch }))),
        ],
        summary,
        solver_failure: failure,
    })
}

fn lamellae(c: &RunConfig) -> Result<Outcome, Failure> {
    let p = slab_params(c)?;
    let cfg = branch_config(c)?;
    let branch = BranchSolver::new(p, cfg.clone())?.continue_branch(&s_grid_from_zero(c))?;
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for &eps in &c.epsilon_grid {
        for &s in &c.s_grid {
            let Some(start) = branch.point_at(s) else {
                failures.push(json!({ "epsilon": eps, "s": s, "message": "no slab point to start from" }));
                continue;
            };
            match solve_lamellae(&p, eps, s, start, &cfg) {
                Ok(pt) => points.push(pt),
                Err(e) => failures.push(json!({ "epsilon": eps, "s": s, "message": e.to_string() })),
            }
        }
    }
    let summary = format!("{} lamellae points, {} failures\n", points.len(), failures.len());
    let failure = (!failures.is_empty()).then(|| format!("{} lamellae points failed", failures.len()));
    let stem = c.stem();
    Ok(Outcome {
        files: vec![
            (format!("{stem}_lamellae.csv"), lamellae_csv(&points)),
            (format!("{stem}_report.json"), report(c, json!({ "points": points, "failures": failures }))),
        ],
        summary,
        solver_failure: failure,
    })
}

fn lattice(c: &RunConfig) -> Result<Outcome, Failure> {
    let dim = c.dim.expect("validated");
    let lat = BravaisLattice::new(dim, c.lattice_basis.clone())?;
    let mut cfg = LatticeSolveConfig::default_for(dim);
    if let Some(k) = c.k_max {
        cfg.k_max = k;
    }
    let spectrum = LatticeSpectrum::new(dim, c.kappa, 16.max(cfg.k_max))?;
    let gamma = c.gamma.unwrap_or_else(|| c.gamma_fraction.unwrap_or(0.0) * spectrum.gamma_n());
    let solver = LatticeSolver::new(LatticeParams { dim, kappa: c.kappa, gamma }, lat.clone(), cfg)?;
    let stem = c.stem();
    let mut files = Vec::new();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut csv = String::from("epsilon,residual_inf,iterations,deviation_inf,ratio,verdict\n");
    for &eps in &c.epsilon_grid {
        let metrics = nonconstancy_metrics(&lat, c.kappa, eps)?;
        match solver.solve(eps) {
            Ok(sol) => {
                let _ = writeln!(
                    csv,
                    "{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
                    eps,
                    sol.residual_inf,
                    sol.iterations,
                    sol.deviation_inf,
                    metrics.ratio,
                    metrics.verdict.label()
                );
                files.push((format!("{stem}_eps{eps}_shape.csv"), sol.shape.to_csv(&solver.basis)));
                runs.push(json!({
                    "epsilon": eps,
                    "residual_inf": sol.residual_inf,
                    "iterations": sol.iterations,
                    "deviation_inf": sol.deviation_inf,
                    "images": sol.images,
                    "shape_coefficients": sol.omega,
                    "nonconstancy": metrics,
                }));
            }
            Err(e) => failures.push(json!({ "epsilon": eps, "message": e.to_string(), "nonconstancy": metrics })),
        }
    }
    let sigma: Vec<f64> = (0..spectrum.mu.len()).map(|k| spectrum.sigma(gamma, k)).collect();
    let body = json!({
        "gamma": gamma,
        "gamma_N": spectrum.gamma_n(),
        "threshold": spectrum.threshold,
        "mu": spectrum.mu,
        "sigma": sigma,
        "runs": runs,
        "failures": failures,
    });
    files.insert(0, (format!("{stem}_lattice.csv"), csv));
    files.insert(1, (format!("{stem}_report.json"), report(c, body)));
    let summary = format!(
        "gamma_N = {:.12}, gamma = {:.12}; {} solves, {} failures\n",
        spectrum.gamma_n(),
        gamma,
        runs.len(),
        failures.len()
    );
    let failure = (!failures.is_empty()).then(|| format!("{} lattice solves failed", failures.len()));
    Ok(Outcome { files, summary, solver_failure: failure })
}
