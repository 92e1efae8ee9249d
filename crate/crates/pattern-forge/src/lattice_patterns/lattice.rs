//! Bravais lattices ℤa₁ + … + ℤa_M ⊂ ℝ^N, first-order lattice fields and
//! the nonconstancy diagnostics built from them.

use super::geometry::StarShape;
use super::harmonics::{dot, norm, HarmonicBasis, Vec3};
use super::interaction::{ball_factor, lattice_interaction};
use super::spectrum::LatticeSpectrum;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BravaisLattice {
    pub dim: usize,
    pub basis: Vec<Vec3>,
}

impl BravaisLattice {
    pub fn new(dim: usize, basis: Vec<Vec3>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if basis.is_empty() || basis.len() > dim {
            return Err(Error::Invalid(format!("lattice rank must be in 1..={dim}, got {}", basis.len())));
        }
        if dim == 2 && basis.iter().any(|a| a[2] != 0.0) {
            return Err(Error::Invalid("planar lattice vectors need a zero third component".into()));
        }
        let l = BravaisLattice { dim, basis };
        let g = l.gram();
        let scale = (0..l.rank()).map(|i| g[(i, i)]).product::<f64>();
        if !(g.determinant() > 1e-12 * scale) {
            return Err(Error::Invalid("lattice basis vectors are linearly dependent".into()));
        }
        Ok(l)
    }

    /// ℤe₁, ℤe₁ + ℤe₂ or ℤ³ scaled by `spacing`.
    pub fn cubic(dim: usize, rank: usize, spacing: f64) -> Result<Self> {
        let basis = (0..rank)
            .map(|i| {
                let mut v = [0.0; 3];
                if i < 3 {
                    v[i] = spacing;
                }
                v
            })
            .collect();
        Self::new(dim, basis)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    fn gram(&self) -> DMatrix<f64> {
        let m = self.rank();
        DMatrix::from_fn(m, m, |i, j| dot(&self.basis[i], &self.basis[j]))
    }

    /// Nonzero points with |p| ≤ radius, in a fixed order; closed under p ↦ −p.
    pub fn points_within(&self, radius: f64) -> Vec<Vec3> {
        let m = self.rank();
        let ginv = self.gram().try_inverse().expect("basis checked independent");
        // |nᵢ| = |⟨dualᵢ, p⟩| ≤ |dualᵢ| |p|
        let bounds: Vec<i64> = (0..m).map(|i| (radius * ginv[(i, i)].sqrt()).floor() as i64).collect();
        let mut out = Vec::new();
        let mut idx: Vec<i64> = bounds.iter().map(|b| -b).collect();
        loop {
            if idx.iter().any(|&c| c != 0) {
                let mut p = [0.0; 3];
                for (c, a) in idx.iter().zip(&self.basis) {
                    for k in 0..3 {
                        p[k] += *c as f64 * a[k];
                    }
                }
                if norm(&p) <= radius {
                    out.push(p);
                }
            }
            let mut k = 0;
            loop {
                if k == m {
                    return out;
                }
                if idx[k] < bounds[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = -bounds[k];
                k += 1;
            }
        }
    }

    /// Length of the shortest nonzero vector.
    pub fn d_min(&self) -> f64 {
        let r0 = self.basis.iter().map(norm).fold(f64::INFINITY, f64::min);
        self.points_within(r0 * (1.0 + 1e-12)).iter().map(norm).fold(f64::INFINITY, f64::min)
    }

    /// Radius beyond which e^{−κ|p|/ε} sits below tol·e^{−30} relative to the nearest shell.
    pub fn cutoff(&self, kappa: f64, epsilon: f64, tol: f64) -> f64 {
        self.d_min() + epsilon.abs() * (tol.ln().abs() + 30.0) / kappa
    }

    /// Translations p/ε for |p| ≤ cutoff.
    pub fn images(&self, epsilon: f64, cutoff: f64) -> Result<Vec<Vec3>> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(self.points_within(cutoff).into_iter().map(|p| [p[0] / epsilon, p[1] / epsilon, p[2] / epsilon]).collect())
    }
}

/// Σ_{|p| ≤ cutoff} ∫_{B_φ} G(|x − Z − p/ε|) dZ on the basis grid.
pub fn lattice_potential(
    basis: &HarmonicBasis,
    shape: &StarShape,
    lattice: &BravaisLattice,
    kappa: f64,
    epsilon: f64,
    cutoff: f64,
) -> Result<Vec<f64>> {
    if lattice.dim != basis.dim {
        return Err(Error::Invalid("lattice and basis dimensions differ".into()));
    }
    lattice_interaction(basis, shape, kappa, &lattice.images(epsilon, cutoff)?)
}

fn shell_prefactor(dim: usize, c_n: f64, epsilon: f64, ell: f64) -> f64 {
    if dim == 2 {
        c_n * (PI / 2.0).sqrt() * epsilon.powf(1.5) * ell.powf(-2.5)
    } else {
        c_n * epsilon / ell
    }
}

/// Radial weight of a lattice shell: ξ_ε(ℓ) in the plane, ζ_ε(ℓ) in space.
pub fn shell_weight(dim: usize, c_n: f64, kappa: f64, epsilon: f64, ell: f64) -> f64 {
    shell_prefactor(dim, c_n, epsilon, ell) * (-kappa * ell / epsilon).exp()
}

/// First-order lattice field U_ε (N = 2) or V_ε (N = 3) on the basis grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderField {
    pub dim: usize,
    pub epsilon: f64,
    pub samples: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// κ d_min/ε ≥ 10, the regime where the expansion is meaningful.
    pub asymptotic: bool,
}

struct FieldSum {
    kappa: f64,
    shells: Vec<(Vec3, f64)>,
}

impl FieldSum {
    fn new(lattice: &BravaisLattice, kappa: f64, epsilon: f64, scaled: bool) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        let c_n = ball_factor(lattice.dim, kappa)?;
        let d = lattice.d_min();
        let pts = lattice.points_within(lattice.cutoff(kappa, epsilon, 1e-16));
        if pts.is_empty() {
            return Err(Error::Invalid("lattice has no points inside the cutoff".into()));
        }
        let shells = pts
            .into_iter()
            .map(|p| {
                let l = norm(&p);
                let shift = if scaled { d } else { 0.0 };
                let w = shell_prefactor(lattice.dim, c_n, epsilon, l) * (-kappa * (l - shift) / epsilon).exp();
                ([p[0] / l, p[1] / l, p[2] / l], w)
            })
            .collect();
        Ok(FieldSum { kappa, shells })
    }

    fn at(&self, theta: &Vec3) -> f64 {
        self.shells.iter().map(|(u, w)| (self.kappa * dot(theta, u)).cosh() * w).sum()
    }
}

pub fn first_order_field(
    basis: &HarmonicBasis,
    lattice: &BravaisLattice,
    kappa: f64,
    epsilon: f64,
) -> Result<FirstOrderField> {
    if lattice.dim != basis.dim {
        return Err(Error::Invalid("lattice and basis dimensions differ".into()));
    }
    let sum = FieldSum::new(lattice, kappa, epsilon, false)?;
    let samples: Vec<f64> = basis.nodes.iter().map(|t| sum.at(t)).collect();
    let coeffs = basis.analyze(&samples);
    Ok(FirstOrderField {
        dim: basis.dim,
        epsilon,
        samples,
        coeffs,
        asymptotic: kappa * lattice.d_min() / epsilon >= 10.0,
    })
}

/// L_e⁻¹ on the band: each even coefficient divided by σ_γ(degree).
pub fn harmonic_inverse(basis: &HarmonicBasis, spectrum: &LatticeSpectrum, gamma: f64, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != basis.len() {
        return Err(Error::Invalid(format!("expected {} coefficients, got {}", basis.len(), f.len())));
    }
    let mut out = vec![0.0; f.len()];
    for (i, &c) in f.iter().enumerate() {
        let k = basis.degree(i);
        if k % 2 == 1 {
            if c.abs() > 1e-10 {
                return Err(Error::Invalid(format!("odd degree {k} coefficient {c:e} in an even field")));
            }
            continue;
        }
        let s = spectrum.sigma(gamma, k);
        if s.abs() < 1e-12 {
            return Err(Error::NearSingular { degree: k, sigma: s });
        }
        out[i] = c / s;
    }
    Ok(out)
}

/// L_e on the band, the diagonal operator inverted by [`harmonic_inverse`].
pub fn harmonic_apply(basis: &HarmonicBasis, spectrum: &LatticeSpectrum, gamma: f64, w: &[f64]) -> Vec<f64> {
    w.iter().enumerate().map(|(i, c)| c * spectrum.sigma(gamma, basis.degree(i))).collect()
}

fn even_projection(basis: &HarmonicBasis, c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().map(|(i, v)| if basis.degree(i) % 2 == 0 { *v } else { 0.0 }).collect()
}

/// 1 − L_e⁻¹(P_e field).
pub fn first_order_shape(
    basis: &HarmonicBasis,
    spectrum: &LatticeSpectrum,
    lattice: &BravaisLattice,
    gamma: f64,
    epsilon: f64,
) -> Result<StarShape> {
    let f = first_order_field(basis, lattice, spectrum.kappa, epsilon)?;
    let w = harmonic_inverse(basis, spectrum, gamma, &even_projection(basis, &f.coeffs))?;
    StarShape::perturbed(basis, &w.iter().map(|v| -v).collect::<Vec<_>>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NonConstant,
    Inconclusive,
    /// Full-rank lattice: first order cannot decide.
    Open,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::NonConstant => "non-constant",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Open => "open",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonconstancyReport {
    pub dim: usize,
    pub rank: usize,
    /// Field at e₁ and at e_N, both divided by the nearest-shell factor e^{−κ d_min/ε}.
    pub aligned: f64,
    pub perpendicular: f64,
    pub ratio: f64,
    pub verdict: Verdict,
}

pub fn nonconstancy_metrics(lattice: &BravaisLattice, kappa: f64, epsilon: f64) -> Result<NonconstancyReport> {
    let sum = FieldSum::new(lattice, kappa, epsilon, true)?;
    let e1 = [1.0, 0.0, 0.0];
    let en = if lattice.dim == 2 { [0.0, 1.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let (a, p) = (sum.at(&e1), sum.at(&en));
    let ratio = a / p;
    let verdict = if lattice.rank() == lattice.dim {
        Verdict::Open
    } else if (ratio - 1.0).abs() > 1e-10 {
        Verdict::NonConstant
    } else {
        Verdict::Inconclusive
    };
    Ok(NonconstancyReport { dim: lattice.dim, rank: lattice.rank(), aligned: a, perpendicular: p, ratio, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_symmetric_and_complete() {
        let l = BravaisLattice::new(3, vec![[1.0, 0.0, 0.0], [0.5, 0.9, 0.0]]).unwrap();
        let pts = l.points_within(3.0);
        for p in &pts {
            assert!(pts.iter().any(|q| norm(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]]) < 1e-12));
        }
        // brute force over a generous box
        let mut count = 0;
        for i in -20i32..=20 {
            for j in -20i32..=20 {
                let p = [i as f64 + 0.5 * j as f64, 0.9 * j as f64, 0.0];
                if (i, j) != (0, 0) && norm(&p) <= 3.0 {
                    count += 1;
                }
            }
        }
        assert_eq!(pts.len(), count);
        assert!((l.d_min() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dependent_basis_rejected() {
        assert!(BravaisLattice::new(3, vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).is_err());
        assert!(BravaisLattice::new(2, vec![[1.0, 0.0, 0.5]]).is_err());
        assert!(BravaisLattice::new(2, vec![[1.0, 0.0, 0.0]; 3]).is_err());
    }

    #[test]
    fn line_lattice_ratio_is_cosh_kappa() {
        let l = BravaisLattice::cubic(2, 1, 1.0).unwrap();
        for eps in [0.02, 0.05, 0.1] {
            let r = nonconstancy_metrics(&l, 0.5, eps).unwrap();
            assert!((r.ratio - 0.5f64.cosh()).abs() < 1e-12, "{}", r.ratio);
            assert_eq!(r.verdict, Verdict::NonConstant);
        }
    }

    #[test]
    fn tiny_epsilon_does_not_underflow() {
        let l = BravaisLattice::cubic(3, 2, 1.0).unwrap();
        let r = nonconstancy_metrics(&l, 1.0, 1e-3).unwrap();
        assert!(r.aligned.is_finite() && r.aligned > r.perpendicular && r.perpendicular > 0.0);
    }

    #[test]
    fn harmonic_inverse_rejects_odd_and_divides() {
        let b = HarmonicBasis::new(2, 8).unwrap();
        let sp = LatticeSpectrum::new(2, 0.5, 16).unwrap();
        let g = 0.5 * sp.gamma_n();
        let mut f = vec![0.0; b.len()];
        f[0] = 2.0;
        let w = harmonic_inverse(&b, &sp, g, &f).unwrap();
        assert!((w[0] - 2.0 / sp.sigma(g, 0)).abs() < 1e-15);
        f[1] = 1.0;
        assert!(harmonic_inverse(&b, &sp, g, &f).is_err());
    }
}
