//! Newton solve of Q(ε, 1 + ω) = Q(0, 1) for even ω.
//!
//! The equation is used in weak form on the even harmonics of degree ≤ K:
//! ⟨area density + φ^{N−1}(γ(V_self + V_lat) − c₀), Yᵢ⟩ = 0, c₀ = Q(0, 1).

use super::geometry::{area_variation_coeffs, area_variation_derivative, StarShape};
use super::harmonics::HarmonicBasis;
use super::interaction::{lattice_interaction, self_interaction, LatticeLinearization, SelfLinearization, SelfQuadSpec};
use super::lattice::BravaisLattice;
use super::spectrum::LatticeSpectrum;
use crate::error::{Error, Result};
use crate::krylov::gmres;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub dim: usize,
    pub kappa: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSolveConfig {
    pub k_max: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub krylov_tol: f64,
    /// Relative size of the dropped lattice shells.
    pub tail_tol: f64,
    pub quad: SelfQuadSpec,
}

impl LatticeSolveConfig {
    pub fn default_for(dim: usize) -> Self {
        LatticeSolveConfig {
            k_max: if dim == 2 { 16 } else { 8 },
            tol: 1e-10,
            max_iter: 12,
            krylov_tol: 1e-12,
            tail_tol: 1e-14,
            quad: SelfQuadSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSolution {
    pub epsilon: f64,
    pub omega: Vec<f64>,
    pub shape: StarShape,
    pub residual_inf: f64,
    pub iterations: usize,
    /// ‖ω‖∞ on the grid.
    pub deviation_inf: f64,
    pub images: usize,
}

pub struct LatticeSolver {
    pub params: LatticeParams,
    pub lattice: BravaisLattice,
    pub config: LatticeSolveConfig,
    pub basis: HarmonicBasis,
    pub spectrum: LatticeSpectrum,
    even: Vec<usize>,
    c0: f64,
}

impl LatticeSolver {
    pub fn new(params: LatticeParams, lattice: BravaisLattice, config: LatticeSolveConfig) -> Result<Self> {
        if lattice.dim != params.dim {
            return Err(Error::Invalid("lattice and problem dimensions differ".into()));
        }
        let spectrum = LatticeSpectrum::new(params.dim, params.kappa, 16.max(config.k_max))?;
        let g_n = spectrum.gamma_n();
        if !(params.gamma >= 0.0 && params.gamma < g_n) {
            return Err(Error::GammaOutsideWindow { gamma: params.gamma, lower: 0.0, upper: g_n });
        }
        let basis = HarmonicBasis::new(params.dim, config.k_max)?;
        let even = basis.even_modes();
        let round = StarShape::round(&basis, 1.0)?;
        let v0 = self_interaction(&basis, &round, params.kappa, &config.quad)?;
        let c0 = (params.dim - 1) as f64 + params.gamma * v0.iter().sum::<f64>() / v0.len() as f64;
        Ok(LatticeSolver { params, lattice, config, basis, spectrum, even, c0 })
    }

    /// Q(0, 1).
    pub fn reference_value(&self) -> f64 {
        self.c0
    }

    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.basis.len()];
        for (k, &i) in self.even.iter().enumerate() {
            c[i] = x[k];
        }
        c
    }

    pub fn images(&self, epsilon: f64) -> Result<Vec<[f64; 3]>> {
        let cut = self.lattice.cutoff(self.params.kappa, epsilon, self.config.tail_tol);
        self.lattice.images(epsilon, cut)
    }

    fn potential(&self, shape: &StarShape, images: &[[f64; 3]]) -> Result<Vec<f64>> {
        let vs = self_interaction(&self.basis, shape, self.params.kappa, &self.config.quad)?;
        let vl = lattice_interaction(&self.basis, shape, self.params.kappa, images)?;
        Ok(vs.iter().zip(&vl).map(|(a, b)| a + b).collect())
    }

    /// Even-mode residual at 1 + ω (ω given on the even modes).
    pub fn residual(&self, omega: &[f64], images: &[[f64; 3]]) -> Result<Vec<f64>> {
        let shape = StarShape::perturbed(&self.basis, &self.full(omega))?;
        self.residual_at(&shape, images)
    }

    fn residual_at(&self, shape: &StarShape, images: &[[f64; 3]]) -> Result<Vec<f64>> {
        let n = self.params.dim as i32;
        let v = self.potential(shape, images)?;
        let g: Vec<f64> =
            shape.samples.iter().zip(&v).map(|(p, vv)| p.powi(n - 1) * (self.params.gamma * vv - self.c0)).collect();
        let a = area_variation_coeffs(&self.basis, shape);
        let b = self.basis.analyze(&g);
        Ok(self.even.iter().map(|&i| a[i] + b[i]).collect())
    }

    /// Jacobian of [`Self::residual`] at a shape, as a closure on even-mode vectors.
    pub fn jacobian<'a>(
        &'a self,
        shape: &'a StarShape,
        images: &[[f64; 3]],
    ) -> Result<impl Fn(&[f64]) -> Vec<f64> + 'a> {
        let n = self.params.dim as i32;
        let gamma = self.params.gamma;
        let v = self.potential(shape, images)?;
        let sl = SelfLinearization::new(&self.basis, shape, self.params.kappa, &self.config.quad)?;
        let ll = LatticeLinearization::new(&self.basis, shape, self.params.kappa, images)?;
        Ok(move |x: &[f64]| {
            let wc = self.full(x);
            let w = self.basis.synthesize(&wc);
            let dw = self.basis.synthesize_grad(&wc);
            let ds = sl.apply(&self.basis, &wc);
            let dl = ll.apply(&w);
            let g: Vec<f64> = (0..w.len())
                .map(|j| {
                    let p = shape.samples[j];
                    (n - 1) as f64 * p.powi(n - 2) * w[j] * (gamma * v[j] - self.c0) + p.powi(n - 1) * gamma * (ds[j] + dl[j])
                })
                .collect();
            let a = area_variation_derivative(&self.basis, shape, &w, &dw);
            let b = self.basis.analyze(&g);
            self.even.iter().map(|&i| a[i] + b[i]).collect()
        })
    }

    fn preconditioner(&self) -> Result<Vec<f64>> {
        self.even
            .iter()
            .map(|&i| {
                let k = self.basis.degree(i);
                let s = self.spectrum.sigma(self.params.gamma, k);
                if s.abs() < 1e-12 {
                    Err(Error::NearSingular { degree: k, sigma: s })
                } else {
                    Ok(1.0 / s)
                }
            })
            .collect()
    }

    pub fn solve(&self, epsilon: f64) -> Result<LatticeSolution> {
        let images = self.images(epsilon)?;
        let pre = self.preconditioner()?;
        let mut x = vec![0.0; self.even.len()];
        let mut shape = StarShape::perturbed(&self.basis, &self.full(&x))?;
        let mut r = self.residual_at(&shape, &images)?;
        let mut res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let first = res;
        let mut iterations = 0;
        while res > self.config.tol {
            if iterations == self.config.max_iter || !res.is_finite() || res > 1e3 * first.max(1e-300) {
                return Err(Error::NewtonDiverged { iterations, residual: res });
            }
            let dx = {
                let jac = self.jacobian(&shape, &images)?;
                let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
                let precond = |y: &[f64]| y.iter().zip(&pre).map(|(a, b)| a * b).collect();
                gmres(&jac, precond, &rhs, 60, self.config.krylov_tol, 600).0
            };
            for (a, d) in x.iter_mut().zip(&dx) {
                *a += d;
            }
            shape = StarShape::perturbed(&self.basis, &self.full(&x))?;
            r = self.residual_at(&shape, &images)?;
            res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            iterations += 1;
        }
        let omega = self.full(&x);
        let deviation_inf = self.basis.synthesize(&omega).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(LatticeSolution { epsilon, omega, shape, residual_inf: res, iterations, deviation_inf, images: images.len() })
    }
}

pub fn newton_lattice_solve(
    params: LatticeParams,
    lattice: &BravaisLattice,
    epsilon: f64,
    config: LatticeSolveConfig,
) -> Result<LatticeSolution> {
    LatticeSolver::new(params, lattice.clone(), config)?.solve(epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(dim: usize, k: usize) -> LatticeSolver {
        let sp = LatticeSpectrum::new(dim, 0.5, 16).unwrap();
        let p = LatticeParams { dim, kappa: 0.5, gamma: 0.5 * sp.gamma_n() };
        let mut cfg = LatticeSolveConfig::default_for(dim);
        cfg.k_max = k;
        LatticeSolver::new(p, BravaisLattice::cubic(dim, 1, 1.0).unwrap(), cfg).unwrap()
    }

    #[test]
    fn round_linearization_is_diagonal_sigma() {
        for dim in [2, 3] {
            let s = solver(dim, 6);
            let round = StarShape::round(&s.basis, 1.0).unwrap();
            let jac = s.jacobian(&round, &[]).unwrap();
            for (k, &i) in s.even.iter().enumerate() {
                let mut e = vec![0.0; s.even.len()];
                e[k] = 1.0;
                let col = jac(&e);
                let want = s.spectrum.sigma(s.params.gamma, s.basis.degree(i));
                for (m, v) in col.iter().enumerate() {
                    let t = if m == k { want } else { 0.0 };
                    assert!((v - t).abs() < 1e-7, "dim {dim} mode {i} row {m}: {v} vs {t}");
                }
            }
        }
    }

    #[test]
    fn round_ball_is_exact_without_images() {
        let s = solver(2, 8);
        let r = s.residual(&vec![0.0; s.even.len()], &[]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn jacobian_matches_fd() {
        let s = solver(2, 8);
        let images = s.images(0.2).unwrap();
        let x: Vec<f64> = (0..s.even.len()).map(|k| if k == 0 { 0.0 } else { 0.01 / k as f64 }).collect();
        let shape = StarShape::perturbed(&s.basis, &s.full(&x)).unwrap();
        let jac = s.jacobian(&shape, &images).unwrap();
        let d: Vec<f64> = (0..s.even.len()).map(|k| ((k * 5 % 3) as f64 - 1.0) * 0.5).collect();
        let h = 1e-5;
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let rp = s.residual(&xp, &images).unwrap();
        let rm = s.residual(&xm, &images).unwrap();
        let an = jac(&d);
        let gap = (0..an.len()).map(|i| ((rp[i] - rm[i]) / (2.0 * h) - an[i]).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-7, "{gap}");
    }
}
