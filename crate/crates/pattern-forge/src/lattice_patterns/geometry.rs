//! Star-shaped sets B_φ = {rσ : r < φ(σ)} and their area functional.

use super::harmonics::{dot, HarmonicBasis, Vec3};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Radial function in a real harmonic basis, with samples on the basis grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarShape {
    pub dim: usize,
    pub k_max: usize,
    pub coeffs: Vec<f64>,
    pub samples: Vec<f64>,
    pub gradients: Vec<Vec3>,
}

impl StarShape {
    pub fn from_coeffs(basis: &HarmonicBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Invalid(format!("expected {} coefficients, got {}", basis.len(), coeffs.len())));
        }
        let samples = basis.synthesize(&coeffs);
        let m = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(m > 0.0) {
            return Err(Error::DegenerateShape(m));
        }
        let gradients = basis.synthesize_grad(&coeffs);
        Ok(StarShape { dim: basis.dim, k_max: basis.k_max, coeffs, samples, gradients })
    }

    pub fn round(basis: &HarmonicBasis, radius: f64) -> Result<Self> {
        let mut c = vec![0.0; basis.len()];
        c[0] = radius / basis.value_table(0)[0];
        Self::from_coeffs(basis, c)
    }

    /// 1 + ω.
    pub fn perturbed(basis: &HarmonicBasis, omega: &[f64]) -> Result<Self> {
        let mut c = omega.to_vec();
        c[0] += 1.0 / basis.value_table(0)[0];
        Self::from_coeffs(basis, c)
    }

    /// Largest coefficient on an odd degree.
    pub fn odd_part(&self, basis: &HarmonicBasis) -> f64 {
        (0..basis.len()).filter(|&i| basis.degree(i) % 2 == 1).map(|i| self.coeffs[i].abs()).fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Rows "x,y,z,phi" on the basis grid.
    pub fn to_csv(&self, basis: &HarmonicBasis) -> String {
        let mut s = String::from("x,y,z,phi\n");
        for (p, v) in basis.nodes.iter().zip(&self.samples) {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2], v);
        }
        s
    }
}

/// Γ_φ = φ^{N−2} √(φ² + |∇φ|²).
pub fn area_element(dim: usize, phi: f64, grad: &Vec3) -> f64 {
    phi.powi(dim as i32 - 2) * (phi * phi + dot(grad, grad)).sqrt()
}

/// A(φ) = ∫ Γ_φ dσ on the basis grid.
pub fn area(basis: &HarmonicBasis, shape: &StarShape) -> f64 {
    let g: Vec<f64> = shape.samples.iter().zip(&shape.gradients).map(|(p, d)| area_element(shape.dim, *p, d)).collect();
    basis.integrate(&g)
}

/// Pointwise parts of the area density: flux φ^{N−2}∇φ/W and scalar (N−2)φ^{N−3}W + φ^{N−1}/W.
fn density_parts(dim: usize, phi: f64, g: &Vec3) -> (Vec3, f64) {
    let n = dim as i32;
    let w = (phi * phi + dot(g, g)).sqrt();
    let a = phi.powi(n - 2) / w;
    let flux = [a * g[0], a * g[1], a * g[2]];
    let scalar = (n - 2) as f64 * phi.powi(n - 3) * w + phi.powi(n - 1) / w;
    (flux, scalar)
}

/// Coefficients ⟨density, Yᵢ⟩ of −div(φ^{N−2}∇φ/W) + (N−2)φ^{N−3}W + φ^{N−1}/W.
/// The divergence term is taken in weak form, so this is exactly the gradient
/// of the discrete area functional.
pub fn area_variation_coeffs(basis: &HarmonicBasis, shape: &StarShape) -> Vec<f64> {
    let (fl, sc): (Vec<Vec3>, Vec<f64>) =
        shape.samples.iter().zip(&shape.gradients).map(|(p, g)| density_parts(shape.dim, *p, g)).unzip();
    let a = basis.analyze_flux(&fl);
    let b = basis.analyze(&sc);
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}

/// Area density on the grid (band projection of the weak form).
pub fn area_variation_density(basis: &HarmonicBasis, shape: &StarShape) -> Vec<f64> {
    basis.synthesize(&area_variation_coeffs(basis, shape))
}

/// Mean curvature density/φ^{N−1} on the grid.
pub fn star_mean_curvature(basis: &HarmonicBasis, shape: &StarShape) -> Vec<f64> {
    let d = area_variation_density(basis, shape);
    d.iter().zip(&shape.samples).map(|(v, p)| v / p.powi(shape.dim as i32 - 1)).collect()
}

/// Linearization of [`area_variation_coeffs`] in direction w (given by grid values and gradients).
pub fn area_variation_derivative(basis: &HarmonicBasis, shape: &StarShape, w: &[f64], dw: &[Vec3]) -> Vec<f64> {
    let n = shape.dim as i32;
    let nf = n as f64;
    let mut fl = Vec::with_capacity(w.len());
    let mut sc = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let (p, g) = (shape.samples[i], &shape.gradients[i]);
        let ww = (p * p + dot(g, g)).sqrt();
        let dww = (p * w[i] + dot(g, &dw[i])) / ww;
        let a = p.powi(n - 2) / ww;
        let da = (nf - 2.0) * p.powi(n - 3) * w[i] / ww - p.powi(n - 2) * dww / (ww * ww);
        fl.push([da * g[0] + a * dw[i][0], da * g[1] + a * dw[i][1], da * g[2] + a * dw[i][2]]);
        let ds = (nf - 2.0) * (nf - 3.0) * p.powi(n - 4) * w[i] * ww
            + (nf - 2.0) * p.powi(n - 3) * dww
            + (nf - 1.0) * p.powi(n - 2) * w[i] / ww
            - p.powi(n - 1) * dww / (ww * ww);
        sc.push(ds);
    }
    let a = basis.analyze_flux(&fl);
    let b = basis.analyze(&sc);
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}
