//! Periodic stacks of slabs with spacing 1/|ε| along z.
//!
//! The image sum is done per Fourier shell β = √(κ² + |k|²): for an image slab
//! at height p/|ε| the in-plane transform of G_κ gives (2π/β) e^{−β·distance},
//! and the z integral over the image is explicit, so
//! F̂(t) = Σ_β (8π/β²) S(β) cosh(β φ(t)) Π_β[sinh(β φ)](t),  S(β) = Σ_{p=1}^{p_max} e^{−pβ/|ε|}.

use crate::error::{Error, Result};
use crate::periodic_field::{analyze_unchecked, modes, synthesize_unchecked, CosSpectrum, SymGrid};
use crate::slab_branch::{newton_modulated, BranchConfig, BranchPoint, ModulatedProblem};
use crate::slab_operator::{SlabOperator, SlabShape};
use crate::slab_spectrum::{lambda_star, sigma_real, SlabParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Which face of the reference slab the potential is evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Face {
    Upper,
    Lower,
}

/// 1 − 2|ε| max φ.
pub fn gap_factor(epsilon: f64, max_phi: f64) -> f64 {
    1.0 - 2.0 * epsilon.abs() * max_phi
}

/// p_max = ⌈|ε|(|ln tol| + 30)/(κ c_gap)⌉.
pub fn p_max_for(kappa: f64, epsilon: f64, max_phi: f64, tol: f64) -> Result<usize> {
    let c = gap_factor(epsilon, max_phi);
    if !(c > 0.0) {
        return Err(Error::Geometry(format!("slabs overlap: |eps| = {} >= 1/(2 max phi) = {}", epsilon.abs(), 0.5 / max_phi)));
    }
    Ok(((epsilon.abs() * (tol.ln().abs() + 30.0)) / (kappa * c)).ceil().max(1.0) as usize)
}

fn check_geometry(epsilon: f64, max_phi: f64) -> Result<()> {
    if epsilon != 0.0 && gap_factor(epsilon, max_phi) <= 0.0 {
        return Err(Error::Geometry(format!("slabs overlap: |eps| = {} >= 1/(2 max phi) = {}", epsilon.abs(), 0.5 / max_phi)));
    }
    Ok(())
}

/// Fourier shells of the band, grouped by |k|².
fn shells(k_max: usize) -> Vec<(usize, Vec<usize>)> {
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for (idx, &(a, b)) in modes(k_max).iter().enumerate() {
        let q = a * a + b * b;
        match out.iter_mut().find(|(k2, _)| *k2 == q) {
            Some((_, v)) => v.push(idx),
            None => out.push((q, vec![idx])),
        }
    }
    out.sort_by_key(|(q, _)| *q);
    out
}

fn project_shell(field: &SymGrid, k_max: usize, members: &[usize]) -> SymGrid {
    let full = analyze_unchecked(field, k_max);
    let mut only = CosSpectrum::zeros(k_max);
    for &i in members {
        only.coeffs[i] = full.coeffs[i];
    }
    synthesize_unchecked(&only, field.n)
}

struct ShellTerm {
    beta: f64,
    members: Vec<usize>,
    /// (8π/β²) S(β), split into images above (p > 0) and below (p < 0).
    weight: f64,
}

/// γ-free stack interaction evaluator for fixed (κ, ε, p_max) on an n-grid.
pub struct StackInteraction {
    pub kappa: f64,
    pub epsilon: f64,
    pub p_max: usize,
    n: usize,
    k_max: usize,
    terms: Vec<ShellTerm>,
}

impl StackInteraction {
    pub fn new(kappa: f64, epsilon: f64, p_max: usize, n: usize) -> Self {
        let k_max = n / 2 - 1;
        let terms = if epsilon == 0.0 {
            Vec::new()
        } else {
            shells(k_max)
                .into_iter()
                .map(|(q, members)| {
                    let beta = (kappa * kappa + q as f64).sqrt();
                    let s: f64 = (1..=p_max).map(|p| (-(p as f64) * beta / epsilon.abs()).exp()).sum();
                    ShellTerm { beta, members, weight: 8.0 * PI / (beta * beta) * s }
                })
                .collect()
        };
        StackInteraction { kappa, epsilon, p_max, n, k_max, terms }
    }

    /// Shells are bounded by e^{−β(1/|ε| − 2 max φ)}; those below e^{−50} of the flat shell are skipped.
    fn active(&self, max_phi: f64) -> impl Iterator<Item = &ShellTerm> {
        let gap = 1.0 / self.epsilon.abs() - 2.0 * max_phi;
        let k = self.kappa;
        self.terms.iter().filter(move |t| (t.beta - k) * gap < 50.0)
    }

    pub fn evaluate(&self, phi: &SymGrid, face: Face) -> Result<SymGrid> {
        assert_eq!(phi.n, self.n);
        let mut out = SymGrid::zeros(self.n);
        if self.epsilon == 0.0 {
            return Ok(out);
        }
        let max_phi = phi.max();
        check_geometry(self.epsilon, max_phi)?;
        let parts: Vec<SymGrid> = self
            .active(max_phi)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|t| {
                let b = t.beta;
                let proj = project_shell(&phi.map(|x| (b * x).sinh()), self.k_max, &t.members);
                // images above see the target at distance p/|ε| − z, images below at p/|ε| + z
                let z = match face {
                    Face::Upper => phi.clone(),
                    Face::Lower => phi.map(|x| -x),
                };
                let above = z.map(|x| (b * x).exp() * 0.5);
                let below = z.map(|x| (-b * x).exp() * 0.5);
                let mut g = SymGrid::zeros(phi.n);
                for i in 0..g.values.len() {
                    g.values[i] = t.weight * (above.values[i] + below.values[i]) * proj.values[i];
                }
                g
            })
            .collect();
        for g in parts {
            for (o, v) in out.values.iter_mut().zip(&g.values) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// Directional derivative DF̂(φ)[w].
    pub fn derivative(&self, phi: &SymGrid, w: &SymGrid) -> SymGrid {
        let mut out = SymGrid::zeros(self.n);
        if self.epsilon == 0.0 {
            return out;
        }
        for t in self.active(phi.max()) {
            let b = t.beta;
            let sh = phi.map(|x| (b * x).sinh());
            let p_sh = project_shell(&sh, self.k_max, &t.members);
            let cw = phi.zip_with(w, |x, y| b * (b * x).cosh() * y);
            let p_cw = project_shell(&cw, self.k_max, &t.members);
            for i in 0..out.values.len() {
                let x = phi.values[i];
                out.values[i] +=
                    t.weight * (b * (b * x).sinh() * w.values[i] * p_sh.values[i] + (b * x).cosh() * p_cw.values[i]);
            }
        }
        out
    }

    /// F̂ of the flat slab of half thickness λ: (4π/κ²) S(κ) sinh(2λκ).
    pub fn flat(&self, lambda: f64) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        let k = self.kappa;
        let s: f64 = (1..=self.p_max).map(|p| (-(p as f64) * k / self.epsilon.abs()).exp()).sum();
        4.0 * PI / (k * k) * s * (2.0 * lambda * k).sinh()
    }

    pub fn flat_dlambda(&self, lambda: f64) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        let k = self.kappa;
        let s: f64 = (1..=self.p_max).map(|p| (-(p as f64) * k / self.epsilon.abs()).exp()).sum();
        8.0 * PI / k * s * (2.0 * lambda * k).cosh()
    }
}

/// F̂(ε, ψ) on the upper face; ε = 0 gives the zero field.
pub fn stack_interaction(shape: &SlabShape, kappa: f64, epsilon: f64, p_max: usize) -> Result<SymGrid> {
    StackInteraction::new(kappa, epsilon, p_max, shape.n).evaluate(&shape.phi(), Face::Upper)
}

pub fn stack_interaction_face(shape: &SlabShape, kappa: f64, epsilon: f64, p_max: usize, face: Face) -> Result<SymGrid> {
    StackInteraction::new(kappa, epsilon, p_max, shape.n).evaluate(&shape.phi(), face)
}

/// N(λ + u) − N(λ) with N = F + γ F̂.
pub struct LamellaeOperator {
    pub slab: SlabOperator,
    pub stack: StackInteraction,
}

impl ModulatedProblem for LamellaeOperator {
    fn params(&self) -> &SlabParams {
        &self.slab.params
    }

    fn n(&self) -> usize {
        self.slab.n
    }

    fn linearize(&self, shape: &SlabShape) -> Result<(SymGrid, Box<dyn Fn(&CosSpectrum) -> SymGrid + '_>)> {
        let (g, lin) = self.slab.linearize(shape)?;
        let phi = shape.phi();
        let gamma = self.slab.params.gamma;
        let fh = self.stack.evaluate(&phi, Face::Upper)?;
        let flat = self.stack.flat(shape.lambda);
        let g = g.zip_with(&fh, |a, b| a + gamma * (b - flat));
        let n = shape.n;
        let band = shape.u.k_max;
        Ok((
            g,
            Box::new(move |w: &CosSpectrum| {
                let mut full = CosSpectrum::zeros(band);
                for (idx, &(a, b)) in modes(w.k_max.min(band)).iter().enumerate() {
                    full.set(a, b, w.coeffs[idx]);
                }
                let wg = synthesize_unchecked(&full, n);
                let d = self.stack.derivative(&phi, &wg);
                lin.apply(w).zip_with(&d, |a, b| a + gamma * b)
            }),
        ))
    }

    fn flat_slope(&self, lambda: f64) -> f64 {
        sigma_real(&self.slab.params, lambda, 0.0) + self.slab.params.gamma * self.stack.flat_dlambda(lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LamellaePoint {
    pub epsilon: f64,
    pub s: f64,
    pub delta: f64,
    pub lambda_eps_s: f64,
    pub v: CosSpectrum,
    pub residual_inf: f64,
    pub newton_iters: usize,
    pub p_max: usize,
}

impl LamellaePoint {
    pub fn csv_header() -> &'static str {
        "epsilon,s,delta,lambda_eps_s,residual_inf\n"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            self.epsilon, self.s, self.delta, self.lambda_eps_s, self.residual_inf
        )
    }
}

pub fn lamellae_csv(points: &[LamellaePoint]) -> String {
    let mut s = String::from(LamellaePoint::csv_header());
    for p in points {
        let _ = write!(s, "{}", p.csv_row());
    }
    s
}

/// Solves M(ε, s, δ, v) = 0 starting from the slab point at the same s.
pub fn solve_lamellae(
    params: &SlabParams,
    epsilon: f64,
    s: f64,
    init_from_slab: &BranchPoint,
    config: &BranchConfig,
) -> Result<LamellaePoint> {
    if !epsilon.is_finite() {
        return Err(Error::Domain("epsilon must be finite".into()));
    }
    let ls = lambda_star(params)?;
    let init_shape = init_from_slab.shape(config.n)?;
    // headroom for the shape to move during Newton
    let max_phi = init_shape.phi().max() * 1.05;
    let p_max = if epsilon == 0.0 { 0 } else { p_max_for(params.kappa, epsilon, max_phi, config.tol * 1e-4)? };
    if s == 0.0 {
        let out = LamellaePoint {
            epsilon,
            s,
            delta: 1.0,
            lambda_eps_s: ls,
            v: CosSpectrum::zeros(config.k_max),
            residual_inf: 0.0,
            newton_iters: 0,
            p_max,
        };
        return Ok(out);
    }
    let problem = LamellaeOperator {
        slab: SlabOperator::new(*params, config.n, config.quad.clone())?,
        stack: StackInteraction::new(params.kappa, epsilon, p_max, config.n),
    };
    let out = newton_modulated(&problem, s, init_from_slab.lambda_s, &init_from_slab.v_s, config)?;
    let delta = out.lambda / ls;
    if !(0.5 < delta && delta < 1.5) {
        return Err(Error::NewtonDiverged { iterations: out.iterations, residual: out.residual_inf });
    }
    Ok(LamellaePoint {
        epsilon,
        s,
        delta,
        lambda_eps_s: out.lambda,
        v: out.v,
        residual_inf: out.residual_inf,
        newton_iters: out.iterations,
        p_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy(n: usize) -> SlabShape {
        SlabShape::new(2.0, &SymGrid::from_fn(n, |a, b| 0.1 * (a.cos() + b.cos()) + 0.03 * a.cos() * b.cos())).unwrap()
    }

    #[test]
    fn flat_stack_matches_closed_form() {
        let st = StackInteraction::new(0.5, 0.06, 10, 16);
        let f = st.evaluate(&SymGrid::constant(16, 2.0), Face::Upper).unwrap();
        assert!(((f.at(3, 7) - st.flat(2.0)) / st.flat(2.0)).abs() < 1e-13);
    }

    #[test]
    fn zero_epsilon_is_zero_field() {
        let f = stack_interaction(&wavy(16), 0.5, 0.0, 5).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn faces_agree() {
        let shape = wavy(16);
        let up = stack_interaction_face(&shape, 0.5, 0.07, 8, Face::Upper).unwrap();
        let lo = stack_interaction_face(&shape, 0.5, 0.07, 8, Face::Lower).unwrap();
        assert!(up.zip_with(&lo, |a, b| a - b).max_abs() <= 1e-14 * up.max_abs());
    }

    #[test]
    fn overlap_is_rejected() {
        assert!(matches!(stack_interaction(&wavy(16), 0.5, 0.3, 5), Err(Error::Geometry(_))));
        assert!(p_max_for(0.5, 0.3, 2.0, 1e-12).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let n = 16;
        let st = StackInteraction::new(0.5, 0.1, 12, n);
        let phi = wavy(n).phi();
        let w = SymGrid::from_fn(n, |a, b| (2.0 * a).cos() + (2.0 * b).cos() + 0.5);
        let h = 1e-5;
        let fp = st.evaluate(&phi.zip_with(&w, |x, y| x + h * y), Face::Upper).unwrap();
        let fm = st.evaluate(&phi.zip_with(&w, |x, y| x - h * y), Face::Upper).unwrap();
        let fd = fp.zip_with(&fm, |a, b| (a - b) / (2.0 * h));
        let d = st.derivative(&phi, &w);
        let gap = fd.zip_with(&d, |a, b| a - b).max_abs() / d.max_abs();
        assert!(gap < 1e-7, "{gap}");
    }

    #[test]
    fn p_max_doubling_is_below_tolerance() {
        let shape = wavy(16);
        let eps = 0.08;
        let pm = p_max_for(0.5, eps, shape.phi().max(), 1e-12).unwrap();
        let a = stack_interaction(&shape, 0.5, eps, pm).unwrap();
        let b = stack_interaction(&shape, 0.5, eps, 2 * pm).unwrap();
        assert!(a.zip_with(&b, |x, y| x - y).max_abs() < 1e-12 * a.max_abs());
    }
}
