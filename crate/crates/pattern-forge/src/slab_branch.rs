//! Continuation of the modulated-slab branch φ_s = λ_s + s(v̄ + v_s).
//!
//! Unknowns are λ and v ⊥ v̄. The v̄ coefficient slot of the unknown vector
//! carries λ, so the Newton system is square on the cosine band.

use crate::error::{Error, Result};
use crate::krylov::gmres;
use crate::periodic_field::{mode_index, modes, synthesize_unchecked, vbar_spectrum, CosSpectrum, SymGrid};
use crate::slab_operator::{flat_value, project, QuadratureSpec, SlabOperator, SlabShape};
use crate::slab_spectrum::{gamma_window, lambda_star, sigma_closed_dlambda, sigma_real, SlabParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    pub n: usize,
    pub k_max: usize,
    /// Sup-norm tolerance on the full residual.
    pub tol: f64,
    pub max_iter: usize,
    pub krylov_tol: f64,
    pub s_max: f64,
    /// Largest accepted |λ| jump between neighbouring branch points.
    pub jump_tol: f64,
    pub quad: QuadratureSpec,
}

impl BranchConfig {
    pub fn new(kappa: f64, n: usize, k_max: usize) -> Self {
        let s_max = 0.2;
        BranchConfig {
            n,
            k_max,
            tol: 1e-8,
            max_iter: 25,
            krylov_tol: 1e-10,
            s_max,
            jump_tol: 0.25,
            quad: QuadratureSpec::for_tolerance(kappa, 1e-10, 2.5 * s_max),
        }
    }

    pub fn default_for(kappa: f64) -> Self {
        Self::new(kappa, 32, 15)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub s: f64,
    pub lambda_s: f64,
    pub v_s: CosSpectrum,
    pub residual_inf: f64,
    pub newton_iters: usize,
    /// ‖(I − Π_K) G‖∞ at the accepted point.
    pub truncation_tail: f64,
    pub min_phi: f64,
}

impl BranchPoint {
    /// φ_s on an n×n grid.
    pub fn shape(&self, n: usize) -> Result<SlabShape> {
        let u = vbar_spectrum(self.v_s.k_max).add(&self.v_s).scaled(self.s);
        SlabShape::from_spectrum(self.lambda_s, u, n)
    }

    pub fn v_norm2(&self) -> f64 {
        self.v_s.norm2()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchFailure {
    pub s: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub params: SlabParams,
    pub lambda_star: f64,
    /// Sorted by s.
    pub points: Vec<BranchPoint>,
    pub failures: Vec<BranchFailure>,
}

impl Branch {
    /// H-value F(λ_s) of the flat slab the branch is attached to.
    pub fn h_value(&self, point: &BranchPoint) -> f64 {
        flat_value(&self.params, point.lambda_s)
    }

    pub fn point_at(&self, s: f64) -> Option<&BranchPoint> {
        self.points.iter().find(|p| p.s == s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,lambda_s,v_norm2,residual_inf,H_value\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.s,
                p.lambda_s,
                p.v_norm2(),
                p.residual_inf,
                self.h_value(p)
            );
        }
        out
    }
}

/// An equation N(λ + u) − N(λ) = 0 around a flat family of slabs.
pub(crate) trait ModulatedProblem {
    fn params(&self) -> &SlabParams;
    fn n(&self) -> usize;
    /// Residual on the grid and its Jacobian action at `shape`.
    #[allow(clippy::type_complexity)]
    fn linearize(&self, shape: &SlabShape) -> Result<(SymGrid, Box<dyn Fn(&CosSpectrum) -> SymGrid + '_>)>;
    /// d/dλ of the (constant) flat value N(λ).
    fn flat_slope(&self, lambda: f64) -> f64;
}

impl ModulatedProblem for SlabOperator {
    fn params(&self) -> &SlabParams {
        &self.params
    }

    fn n(&self) -> usize {
        self.n
    }

    fn linearize(&self, shape: &SlabShape) -> Result<(SymGrid, Box<dyn Fn(&CosSpectrum) -> SymGrid + '_>)> {
        let (g, lin) = SlabOperator::linearize(self, shape)?;
        Ok((g, Box::new(move |w| lin.apply(w))))
    }

    fn flat_slope(&self, lambda: f64) -> f64 {
        sigma_real(&self.params, lambda, 0.0)
    }
}

pub(crate) struct NewtonOutcome {
    pub lambda: f64,
    pub v: CosSpectrum,
    pub residual_inf: f64,
    pub iterations: usize,
    pub tail: f64,
    pub min_phi: f64,
}

/// Newton in (λ, v ∈ V₁⊥) on Π_K[G/s] = 0 with GMRES inner solves.
pub(crate) fn newton_modulated(
    problem: &dyn ModulatedProblem,
    s: f64,
    lambda0: f64,
    v0: &CosSpectrum,
    cfg: &BranchConfig,
) -> Result<NewtonOutcome> {
    let k = cfg.k_max;
    let n = problem.n();
    let p = *problem.params();
    let slot = mode_index(0, 1);
    let vbar = vbar_spectrum(k);
    let band = modes(k);
    let mut lambda = lambda0;
    let mut v = CosSpectrum::zeros(k);
    for (idx, &(a, b)) in band.iter().enumerate() {
        v.coeffs[idx] = v0.get(a, b);
    }
    v.coeffs[slot] = 0.0;
    let mut last = f64::INFINITY;
    for it in 0..=cfg.max_iter {
        let u = vbar.add(&v).scaled(s);
        let shape = SlabShape::from_spectrum(lambda, u, n)?;
        let (g, jac) = problem.linearize(&shape)?;
        let res = g.max_abs();
        if !res.is_finite() {
            return Err(Error::NewtonDiverged { iterations: it, residual: res });
        }
        if res <= cfg.tol {
            let proj = project(&g, k);
            let back = synthesize_unchecked(&proj, n);
            let tail = g.zip_with(&back, |a, b| a - b).max_abs();
            let min_phi = shape.phi().min();
            return Ok(NewtonOutcome { lambda, v, residual_inf: res, iterations: it, tail, min_phi });
        }
        if it == cfg.max_iter || (it > 4 && res > 1e3 * last) {
            return Err(Error::NewtonDiverged { iterations: it, residual: res });
        }
        last = res;

        let rhs: Vec<f64> = project(&g, k).coeffs.iter().map(|c| -c / s).collect();
        let one = CosSpectrum::unit(k, 0, 0).scaled(2.0 * PI);
        let slope = problem.flat_slope(lambda);
        let col = project(&jac(&one).map(|x| x - slope), k);
        let col: Vec<f64> = col.coeffs.iter().map(|c| c / s).collect();
        let diag: Vec<f64> = band
            .iter()
            .map(|&(a, b)| {
                if (a, b) == (0, 1) {
                    2.0 * PI * sigma_closed_dlambda(&p, lambda, 1).unwrap_or(1.0)
                } else {
                    sigma_real(&p, lambda, ((a * a + b * b) as f64).sqrt())
                }
            })
            .collect();
        let apply = |x: &[f64]| -> Vec<f64> {
            let mut w = CosSpectrum { k_max: k, coeffs: x.to_vec() };
            w.coeffs[slot] = 0.0;
            let mut out = project(&jac(&w), k).coeffs;
            for (o, c) in out.iter_mut().zip(&col) {
                *o += x[slot] * c;
            }
            out
        };
        let precond = |x: &[f64]| -> Vec<f64> { x.iter().zip(&diag).map(|(a, d)| a / d).collect() };
        let (dx, info) = gmres(apply, precond, &rhs, 60, cfg.krylov_tol, 600);
        if !info.relative_residual.is_finite() {
            return Err(Error::NewtonDiverged { iterations: it, residual: res });
        }
        lambda += dx[slot];
        for (c, d) in v.coeffs.iter_mut().zip(&dx) {
            *c += d;
        }
        v.coeffs[slot] = 0.0;
    }
    unreachable!()
}

fn check_window(p: &SlabParams) -> Result<()> {
    let w = gamma_window(p.kappa)?;
    if !w.nonempty {
        return Err(Error::EmptyWindow { kappa: p.kappa, lower: w.lower, upper: w.upper });
    }
    if !w.contains(p.gamma) {
        return Err(Error::GammaOutsideWindow { gamma: p.gamma, lower: w.lower, upper: w.upper });
    }
    Ok(())
}

/// Reusable solver for one (κ, γ) and configuration.
pub struct BranchSolver {
    pub config: BranchConfig,
    pub lambda_star: f64,
    op: SlabOperator,
}

impl BranchSolver {
    pub fn new(params: SlabParams, config: BranchConfig) -> Result<Self> {
        check_window(&params)?;
        if config.k_max + 1 > config.n / 2 {
            return Err(Error::Invalid(format!("k_max {} exceeds n/2 - 1 for n = {}", config.k_max, config.n)));
        }
        let lambda_star = lambda_star(&params)?;
        let op = SlabOperator::new(params, config.n, config.quad.clone())?;
        Ok(BranchSolver { config, lambda_star, op })
    }

    pub fn params(&self) -> &SlabParams {
        &self.op.params
    }

    pub fn operator(&self) -> &SlabOperator {
        &self.op
    }

    pub fn solve(&self, s: f64, initial: (f64, &CosSpectrum)) -> Result<BranchPoint> {
        let k = self.config.k_max;
        if !s.is_finite() || s.abs() > self.config.s_max {
            return Err(Error::Domain(format!("|s| = {} exceeds s_max = {}", s.abs(), self.config.s_max)));
        }
        if s == 0.0 {
            return Ok(BranchPoint {
                s,
                lambda_s: self.lambda_star,
                v_s: CosSpectrum::zeros(k),
                residual_inf: 0.0,
                newton_iters: 0,
                truncation_tail: 0.0,
                min_phi: self.lambda_star,
            });
        }
        let out = newton_modulated(&self.op, s, initial.0, initial.1, &self.config)?;
        Ok(BranchPoint {
            s,
            lambda_s: out.lambda,
            v_s: out.v,
            residual_inf: out.residual_inf,
            newton_iters: out.iterations,
            truncation_tail: out.tail,
            min_phi: out.min_phi,
        })
    }

    /// Marches away from s = 0 on each side, extrapolating from the last two points.
    pub fn continue_branch(&self, s_grid: &[f64]) -> Result<Branch> {
        if s_grid.first() != Some(&0.0) {
            return Err(Error::Invalid("s grid must start at 0".into()));
        }
        let mut pos: Vec<f64> = s_grid.iter().copied().filter(|s| *s > 0.0).collect();
        let mut neg: Vec<f64> = s_grid.iter().copied().filter(|s| *s < 0.0).collect();
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pos.dedup();
        neg.sort_by(|a, b| b.partial_cmp(a).unwrap());
        neg.dedup();
        let origin = self.solve(0.0, (self.lambda_star, &CosSpectrum::zeros(self.config.k_max)))?;
        let ((mut a, fa), (b, fb)) = rayon::join(|| self.march(&origin, &pos), || self.march(&origin, &neg));
        a.extend(b);
        a.push(origin);
        a.sort_by(|x, y| x.s.partial_cmp(&y.s).unwrap());
        let mut failures = fa;
        failures.extend(fb);
        Ok(Branch { params: *self.params(), lambda_star: self.lambda_star, points: a, failures })
    }

    fn march(&self, origin: &BranchPoint, side: &[f64]) -> (Vec<BranchPoint>, Vec<BranchFailure>) {
        let mut done: Vec<BranchPoint> = Vec::new();
        for &s in side {
            let prev = done.last().unwrap_or(origin);
            let (lam, v) = match done.len() {
                0 => (origin.lambda_s, CosSpectrum::zeros(self.config.k_max)),
                _ => {
                    let older = if done.len() >= 2 { &done[done.len() - 2] } else { origin };
                    let t = (s - prev.s) / (prev.s - older.s);
                    (
                        prev.lambda_s + t * (prev.lambda_s - older.lambda_s),
                        prev.v_s.add(&prev.v_s.sub(&older.v_s).scaled(t)),
                    )
                }
            };
            match self.solve(s, (lam, &v)) {
                Ok(pt) if (pt.lambda_s - prev.lambda_s).abs() > self.config.jump_tol => {
                    let message = format!("lambda jumped from {} to {}", prev.lambda_s, pt.lambda_s);
                    return (done, vec![BranchFailure { s, message }]);
                }
                Ok(pt) => done.push(pt),
                Err(e) => return (done, vec![BranchFailure { s, message: e.to_string() }]),
            }
        }
        (done, Vec::new())
    }
}

pub fn solve_at_s(params: &SlabParams, s: f64, initial: (f64, &CosSpectrum), config: &BranchConfig) -> Result<BranchPoint> {
    BranchSolver::new(*params, config.clone())?.solve(s, initial)
}

pub fn continue_branch(params: &SlabParams, s_grid: &[f64], config: &BranchConfig) -> Result<Branch> {
    BranchSolver::new(*params, config.clone())?.continue_branch(s_grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (SlabParams, BranchConfig) {
        let p = SlabParams::new(0.5, 0.18).unwrap();
        (p, BranchConfig::new(0.5, 16, 7))
    }

    #[test]
    fn zero_amplitude_is_the_bifurcation_point() {
        let (p, cfg) = small();
        let pt = solve_at_s(&p, 0.0, (1.0, &CosSpectrum::zeros(7)), &cfg).unwrap();
        assert_eq!(pt.lambda_s, lambda_star(&p).unwrap());
        assert_eq!(pt.v_norm2(), 0.0);
    }

    #[test]
    fn rejects_gamma_outside_window() {
        let p = SlabParams::new(0.5, 0.5).unwrap();
        let cfg = BranchConfig::new(0.5, 16, 7);
        assert!(matches!(BranchSolver::new(p, cfg), Err(Error::GammaOutsideWindow { .. })));
        let p = SlabParams::new(1.0, 0.5).unwrap();
        assert!(matches!(BranchSolver::new(p, BranchConfig::new(1.0, 16, 7)), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn coarse_solve_converges() {
        let (p, cfg) = small();
        let solver = BranchSolver::new(p, cfg).unwrap();
        let t = std::time::Instant::now();
        let pt = solver.solve(0.05, (solver.lambda_star, &CosSpectrum::zeros(7))).unwrap();
        eprintln!("iters {} res {:e} lam {} |v| {} ({:?})", pt.newton_iters, pt.residual_inf, pt.lambda_s, pt.v_norm2(), t.elapsed());
        assert!(pt.residual_inf < 1e-8);
        assert_eq!(pt.v_s.get(0, 1), 0.0);
        assert!(pt.v_norm2() < 0.05 * 2.0 * PI);
    }

    #[test]
    fn csv_header() {
        let (p, _) = small();
        let b = Branch { params: p, lambda_star: 2.0, points: vec![], failures: vec![] };
        assert_eq!(b.to_csv(), "s,lambda_s,v_norm2,residual_inf,H_value\n");
    }
}
