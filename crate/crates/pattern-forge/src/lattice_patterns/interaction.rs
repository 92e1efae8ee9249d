//! Nonlocal terms on a star-shaped set: the self potential ∫_{B_φ} G(|x − z|) dz at
//! boundary points and the contribution of the lattice copies B_φ + q.
//!
//! Volume integrals are turned into boundary integrals with a radial potential g,
//! div_z[(z − x) g(|z − x|)] = G(|z − x|), so that
//! V(x) = ∫ g(ρ) (y − x)·n(σ) φ^{N−2} dσ,  y = φ(σ)σ,  n = φσ − ∇φ.

use super::geometry::StarShape;
use super::harmonics::{dot, norm, sub, HarmonicBasis, Vec3};
use crate::error::{Error, Result};
use crate::kernels::{g_kn_unchecked, k0_k1, k1};
use crate::quadrature::GaussRule;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Self-interaction quadrature. N = 3 uses polar coordinates around each target
/// (Gauss in the polar angle, uniform in the azimuth); N = 2 a composite Gauss
/// rule on the arc, graded towards the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfQuadSpec {
    pub polar_nodes: usize,
    pub azimuth_nodes: usize,
    pub arc_levels: usize,
    pub arc_order: usize,
}

impl Default for SelfQuadSpec {
    fn default() -> Self {
        SelfQuadSpec { polar_nodes: 32, azimuth_nodes: 48, arc_levels: 18, arc_order: 16 }
    }
}

/// (1 − e^{−x}(1 + x))/x² with the cancellation handled by a series.
fn yukawa_flux_scaled(x: f64) -> f64 {
    if x < 0.1 {
        let mut term = 1.0;
        let mut s = 0.0;
        for n in 2..14 {
            term *= if n == 2 { 0.5 } else { -x / n as f64 };
            s += term * (n - 1) as f64;
        }
        s
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (x * x)
    }
}

/// Radial potential g with div[(z − x) g] = G.
fn self_flux(dim: usize, kappa: f64, rho: f64) -> f64 {
    let x = kappa * rho;
    if dim == 3 {
        yukawa_flux_scaled(x) / rho
    } else if x < 1e-4 {
        // 1 − xK₁(x) ≈ −(x²/2)(ln(x/2) + γ_E − 1/2)
        -0.5 * ((0.5 * x).ln() + 0.577_215_664_901_532_9 - 0.5) * 2.0
    } else {
        2.0 * (1.0 - x * k1(x)) / (x * x)
    }
}

/// g with its divergence-free part removed; valid away from the source.
fn far_flux(dim: usize, kappa: f64, rho: f64) -> f64 {
    let x = kappa * rho;
    if dim == 3 {
        -(-x).exp() * (1.0 + x) / (kappa * kappa * rho * rho * rho)
    } else {
        -2.0 * k1(x) / (kappa * rho)
    }
}

fn frame(t: &Vec3) -> (Vec3, Vec3) {
    let helper = if t[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let d = dot(&helper, t);
    let a = [helper[0] - d * t[0], helper[1] - d * t[1], helper[2] - d * t[2]];
    let na = norm(&a);
    let a = [a[0] / na, a[1] / na, a[2] / na];
    let b = [t[1] * a[2] - t[2] * a[1], t[2] * a[0] - t[0] * a[2], t[0] * a[1] - t[1] * a[0]];
    (a, b)
}

/// Quadrature points σ and weights around a target direction θ.
fn self_nodes(dim: usize, theta: &Vec3, spec: &SelfQuadSpec) -> Vec<(Vec3, f64)> {
    if dim == 2 {
        let rule = GaussRule::new(spec.arc_order);
        let mut br = vec![0.0];
        for j in (0..=spec.arc_levels).rev() {
            br.push(PI * 0.5f64.powi(j as i32));
        }
        let half: Vec<f64> = br.iter().rev().skip(1).map(|b| 2.0 * PI - b).collect();
        br.extend(half);
        let t0 = theta[1].atan2(theta[0]);
        let mut out = Vec::new();
        for w in br.windows(2) {
            for (t, wt) in rule.on(w[0], w[1]) {
                let a = t0 + t;
                out.push(([a.cos(), a.sin(), 0.0], wt));
            }
        }
        out
    } else {
        let rule = GaussRule::new(spec.polar_nodes);
        let (a, b) = frame(theta);
        let mut out = Vec::new();
        for (lo, hi) in [(0.0, 0.5 * PI), (0.5 * PI, PI)] {
            for (psi, wp) in rule.on(lo, hi) {
                let (sp, cp) = psi.sin_cos();
                for k in 0..spec.azimuth_nodes {
                    let chi = 2.0 * PI * k as f64 / spec.azimuth_nodes as f64;
                    let (sc, cc) = chi.sin_cos();
                    let s = [
                        cp * theta[0] + sp * (cc * a[0] + sc * b[0]),
                        cp * theta[1] + sp * (cc * a[1] + sc * b[1]),
                        cp * theta[2] + sp * (cc * a[2] + sc * b[2]),
                    ];
                    out.push((s, wp * sp * 2.0 * PI / spec.azimuth_nodes as f64));
                }
            }
        }
        out
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// ∫_{B_φ} G(|x − z|) dz at the boundary points x = φ(θ)θ over the basis grid.
pub fn self_interaction(basis: &HarmonicBasis, shape: &StarShape, kappa: f64, spec: &SelfQuadSpec) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    let dim = basis.dim;
    let p = dim as i32 - 2;
    Ok((0..basis.nodes.len())
        .into_par_iter()
        .map(|j| {
            let th = basis.nodes[j];
            let x = [shape.samples[j] * th[0], shape.samples[j] * th[1], shape.samples[j] * th[2]];
            let mut acc = 0.0;
            for (s, w) in self_nodes(dim, &th, spec) {
                let (ph, g) = basis.eval(&shape.coeffs, &s);
                let y = [ph * s[0], ph * s[1], ph * s[2]];
                let n = sub(&y, &g);
                let r = sub(&y, &x);
                let rho = norm(&r);
                if rho > 0.0 {
                    acc += w * self_flux(dim, kappa, rho) * dot(&r, &n) * ph.powi(p);
                }
            }
            acc
        })
        .collect())
}

/// Frozen linearization of [`self_interaction`] at a shape:
/// D[w](θ) = ∫ (w(σ)σ − w(θ)θ)·n(σ) φ^{N−2} G(|x − y|) dσ.
pub struct SelfLinearization {
    /// For each target: (σ, weight·G·φ^{N−1}) pairs.
    nodes: Vec<Vec<(Vec3, f64)>>,
    /// ∫ θ·n φ^{N−2} G dσ per target.
    diag: Vec<f64>,
}

impl SelfLinearization {
    pub fn new(basis: &HarmonicBasis, shape: &StarShape, kappa: f64, spec: &SelfQuadSpec) -> Result<Self> {
        check_kappa(kappa)?;
        let dim = basis.dim;
        let p = dim as i32 - 2;
        let (nodes, diag): (Vec<_>, Vec<_>) = (0..basis.nodes.len())
            .into_par_iter()
            .map(|j| {
                let th = basis.nodes[j];
                let x = [shape.samples[j] * th[0], shape.samples[j] * th[1], shape.samples[j] * th[2]];
                let mut row = Vec::new();
                let mut d = 0.0;
                for (s, w) in self_nodes(dim, &th, spec) {
                    let (ph, g) = basis.eval(&shape.coeffs, &s);
                    let y = [ph * s[0], ph * s[1], ph * s[2]];
                    let n = sub(&y, &g);
                    let rho = norm(&sub(&y, &x));
                    if rho > 0.0 {
                        let c = w * g_kn_unchecked(dim, kappa, rho) * ph.powi(p);
                        row.push((s, c * ph));
                        d += c * dot(&th, &n);
                    }
                }
                (row, d)
            })
            .unzip();
        Ok(SelfLinearization { nodes, diag })
    }

    /// Action on the harmonic coefficients of w, returned on the grid.
    pub fn apply(&self, basis: &HarmonicBasis, w: &[f64]) -> Vec<f64> {
        let wg = basis.synthesize(w);
        (0..self.nodes.len())
            .into_par_iter()
            .map(|j| {
                let s: f64 = self.nodes[j].iter().map(|(sig, c)| c * basis.eval(w, sig).0).sum();
                s - wg[j] * self.diag[j]
            })
            .collect()
    }
}

pub fn self_interaction_derivative(
    basis: &HarmonicBasis,
    shape: &StarShape,
    kappa: f64,
    spec: &SelfQuadSpec,
    w: &[f64],
) -> Result<Vec<f64>> {
    Ok(SelfLinearization::new(basis, shape, kappa, spec)?.apply(basis, w))
}

fn check_images(shape: &StarShape, images: &[Vec3]) -> Result<()> {
    let m = shape.max();
    for q in images {
        if norm(q) <= 2.0 * m {
            return Err(Error::Geometry(format!("lattice copy at distance {} overlaps the set (max radius {m})", norm(q))));
        }
    }
    Ok(())
}

/// Σ_q ∫_{B_φ + q} G(|x − z|) dz at the boundary points, for translations q.
pub fn lattice_interaction(basis: &HarmonicBasis, shape: &StarShape, kappa: f64, images: &[Vec3]) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    check_images(shape, images)?;
    let dim = basis.dim;
    let p = dim as i32 - 2;
    let src: Vec<(Vec3, Vec3, f64)> = (0..basis.nodes.len())
        .map(|i| {
            let (s, ph) = (basis.nodes[i], shape.samples[i]);
            let y = [ph * s[0], ph * s[1], ph * s[2]];
            (y, sub(&y, &shape.gradients[i]), basis.weights[i] * ph.powi(p))
        })
        .collect();
    Ok((0..basis.nodes.len())
        .into_par_iter()
        .map(|j| {
            let th = basis.nodes[j];
            let x = [shape.samples[j] * th[0], shape.samples[j] * th[1], shape.samples[j] * th[2]];
            let mut acc = 0.0;
            for q in images {
                for (y, n, w) in &src {
                    let r = [y[0] + q[0] - x[0], y[1] + q[1] - x[1], y[2] + q[2] - x[2]];
                    acc += w * far_flux(dim, kappa, norm(&r)) * dot(&r, n);
                }
            }
            acc
        })
        .collect())
}

/// Frozen linearization of [`lattice_interaction`], stored as a dense grid operator.
pub struct LatticeLinearization {
    size: usize,
    a: Vec<f64>,
    diag: Vec<f64>,
}

impl LatticeLinearization {
    pub fn new(basis: &HarmonicBasis, shape: &StarShape, kappa: f64, images: &[Vec3]) -> Result<Self> {
        check_kappa(kappa)?;
        check_images(shape, images)?;
        let dim = basis.dim;
        let p = dim as i32 - 2;
        let size = basis.nodes.len();
        let rows: Vec<(Vec<f64>, f64)> = (0..size)
            .into_par_iter()
            .map(|j| {
                let th = basis.nodes[j];
                let x = [shape.samples[j] * th[0], shape.samples[j] * th[1], shape.samples[j] * th[2]];
                let mut row = vec![0.0; size];
                let mut d = 0.0;
                for i in 0..size {
                    let (s, ph) = (basis.nodes[i], shape.samples[i]);
                    let y = [ph * s[0], ph * s[1], ph * s[2]];
                    let kij: f64 = images
                        .iter()
                        .map(|q| norm(&[y[0] + q[0] - x[0], y[1] + q[1] - x[1], y[2] + q[2] - x[2]]))
                        .map(|r| g_kn_unchecked(dim, kappa, r))
                        .sum();
                    let c = basis.weights[i] * kij * ph.powi(p);
                    row[i] = c * ph;
                    d += c * dot(&th, &sub(&y, &shape.gradients[i]));
                }
                (row, d)
            })
            .collect();
        let mut a = Vec::with_capacity(size * size);
        let mut diag = Vec::with_capacity(size);
        for (r, d) in rows {
            a.extend(r);
            diag.push(d);
        }
        Ok(LatticeLinearization { size, a, diag })
    }

    /// Action on grid values of w.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|j| {
                let row = &self.a[j * self.size..(j + 1) * self.size];
                row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - self.diag[j] * w[j]
            })
            .collect()
    }
}

/// c_N = ∫_{B₁} e^{−κ y₁} dy; also the factor in ∫_{B₁} G(|x − z|) dz = c_N G(|x|) for |x| > 1.
pub fn ball_factor(dim: usize, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if dim != 2 && dim != 3 {
        return Err(Error::Invalid(format!("dimension must be 2 or 3, got {dim}")));
    }
    // y₁ = cos t: the transverse measure is 2 sin t (N = 2) or π sin² t (N = 3)
    let rule = GaussRule::new(40);
    let v: f64 = rule
        .composite(0.0, PI, 8)
        .into_iter()
        .map(|(t, w)| {
            let s = t.sin();
            let m = if dim == 2 { 2.0 * s * s } else { PI * s * s * s };
            w * (-kappa * t.cos()).exp() * m
        })
        .sum();
    Ok(v)
}

/// Potential of the round ball of radius R at its own boundary.
pub fn round_self_value(dim: usize, kappa: f64, radius: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let x = kappa * radius;
    match dim {
        3 => Ok(4.0 * PI / (kappa * kappa) * (1.0 - (1.0 + x) * (-x).exp() * x.sinh() / x)),
        2 => {
            // (4π/κ²)(1 − x K₁(x) I₀(x)), with I₀ from the Wronskian I₀K₁ + I₁K₀ = 1/x
            // and the ball factor c₂ = 2π I₁(κ)/κ.
            let (kk0, kk1) = k0_k1(x);
            let i1 = ball_factor(2, x)? * x / (2.0 * PI);
            let i0 = (1.0 / x - i1 * kk0) / kk1;
            Ok(4.0 * PI / (kappa * kappa) * (1.0 - x * kk1 * i0))
        }
        _ => Err(Error::Invalid(format!("dimension must be 2 or 3, got {dim}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_series_joins_closed_form() {
        for &x in &[0.0999, 0.1, 0.1001] {
            let a = yukawa_flux_scaled(x);
            let b = (1.0 - (-x).exp() * (1.0 + x)) / (x * x);
            assert!((a - b).abs() < 1e-13, "{x}");
        }
    }

    #[test]
    fn unit_ball_value() {
        let b = HarmonicBasis::new(3, 6).unwrap();
        let s = StarShape::round(&b, 1.0).unwrap();
        let v = self_interaction(&b, &s, 1.0, &SelfQuadSpec::default()).unwrap();
        let want = 4.0 * PI * (-2.0f64).exp();
        assert!(v.iter().all(|x| (x - want).abs() < 1e-10), "{} vs {want}", v[0]);
    }

    #[test]
    fn disc_value_matches_closed_form() {
        let b = HarmonicBasis::new(2, 6).unwrap();
        for r in [0.7, 1.0, 1.6] {
            let s = StarShape::round(&b, r).unwrap();
            let v = self_interaction(&b, &s, 0.8, &SelfQuadSpec::default()).unwrap();
            let want = round_self_value(2, 0.8, r).unwrap();
            assert!(v.iter().all(|x| (x - want).abs() < 1e-10 * want), "{} vs {want}", v[0]);
        }
    }

    #[test]
    fn ball_factor_closed_forms() {
        let k: f64 = 0.5;
        let c3 = 4.0 * PI * (k * k.cosh() - k.sinh()) / k.powi(3);
        assert!((ball_factor(3, k).unwrap() - c3).abs() < 1e-13);
        assert!((ball_factor(2, k).unwrap() - 3.2407954208747305).abs() < 1e-12);
    }

    #[test]
    fn single_copy_of_round_ball() {
        for dim in [2, 3] {
            let b = HarmonicBasis::new(dim, 14).unwrap();
            let s = StarShape::round(&b, 1.0).unwrap();
            let q = [3.1, if dim == 3 { 0.4 } else { 0.0 }, if dim == 3 { -1.2 } else { 0.7 }];
            let q = if dim == 2 { [3.1, 0.7, 0.0] } else { q };
            let v = lattice_interaction(&b, &s, 0.9, &[q]).unwrap();
            let c = ball_factor(dim, 0.9).unwrap();
            for (j, t) in b.nodes.iter().enumerate() {
                let want = c * g_kn_unchecked(dim, 0.9, norm(&sub(t, &q)));
                assert!((v[j] - want).abs() < 1e-10 * want, "dim {dim}: {} vs {want}", v[j]);
            }
        }
    }

    #[test]
    fn overlapping_images_rejected() {
        let b = HarmonicBasis::new(2, 4).unwrap();
        let s = StarShape::round(&b, 1.0).unwrap();
        assert!(matches!(lattice_interaction(&b, &s, 1.0, &[[1.5, 0.0, 0.0]]), Err(Error::Geometry(_))));
    }

    fn bumped(b: &HarmonicBasis, amp: f64) -> (StarShape, Vec<f64>) {
        let mut om = vec![0.0; b.len()];
        let mut wc = vec![0.0; b.len()];
        for i in b.even_modes().into_iter().skip(1).filter(|&i| b.degree(i) <= 4) {
            om[i] = amp * ((i % 5) as f64 - 2.0) / (1 + b.degree(i)) as f64;
            wc[i] = ((i * 3 % 7) as f64 - 3.0) / (4 * (1 + b.degree(i))) as f64;
        }
        wc[0] = 0.3;
        (StarShape::perturbed(b, &om).unwrap(), wc)
    }

    fn shifted(b: &HarmonicBasis, s: &StarShape, w: &[f64], h: f64) -> StarShape {
        StarShape::from_coeffs(b, s.coeffs.iter().zip(w).map(|(a, c)| a + h * c).collect()).unwrap()
    }

    #[test]
    fn self_derivative_matches_fd() {
        for dim in [2, 3] {
            let b = HarmonicBasis::new(dim, 6).unwrap();
            let (s, wc) = bumped(&b, 0.05);
            let spec = SelfQuadSpec::default();
            let h = 1e-5;
            let vp = self_interaction(&b, &shifted(&b, &s, &wc, h), 0.7, &spec).unwrap();
            let vm = self_interaction(&b, &shifted(&b, &s, &wc, -h), 0.7, &spec).unwrap();
            let d = self_interaction_derivative(&b, &s, 0.7, &spec, &wc).unwrap();
            let gap = (0..d.len()).map(|j| ((vp[j] - vm[j]) / (2.0 * h) - d[j]).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-7, "dim {dim}: {gap}");
        }
    }

    #[test]
    fn lattice_derivative_matches_fd() {
        for dim in [2, 3] {
            let b = HarmonicBasis::new(dim, 12).unwrap();
            let (s, wc) = bumped(&b, 0.05);
            let images = [[4.0, 0.0, 0.0], [-4.0, 0.0, 0.0], [1.0, 4.0, 0.0]];
            let h = 1e-5;
            let vp = lattice_interaction(&b, &shifted(&b, &s, &wc, h), 0.7, &images).unwrap();
            let vm = lattice_interaction(&b, &shifted(&b, &s, &wc, -h), 0.7, &images).unwrap();
            let d = LatticeLinearization::new(&b, &s, 0.7, &images).unwrap().apply(&b.synthesize(&wc));
            let gap = (0..d.len()).map(|j| ((vp[j] - vm[j]) / (2.0 * h) - d[j]).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-7, "dim {dim}: {gap}");
        }
    }

    #[test]
    fn lattice_value_matches_radial_quadrature() {
        for dim in [2, 3] {
            let b = HarmonicBasis::new(dim, 12).unwrap();
            let (s, _) = bumped(&b, 0.05);
            let q = [4.0, 1.0, 0.0];
            let v = lattice_interaction(&b, &s, 0.7, &[q]).unwrap();
            let rule = GaussRule::new(30);
            let fine = HarmonicBasis::new(dim, 40).unwrap();
            let mut c = vec![0.0; fine.len()];
            // same harmonics, finer grid: indices agree up to the coarse band
            c[..b.len()].copy_from_slice(&s.coeffs);
            let phi = fine.synthesize(&c);
            for j in [0, 7, 23] {
                let th = b.nodes[j];
                let x = [s.samples[j] * th[0], s.samples[j] * th[1], s.samples[j] * th[2]];
                let mut want = 0.0;
                for (i, sg) in fine.nodes.iter().enumerate() {
                    let inner: f64 = rule
                        .on(0.0, phi[i])
                        .map(|(r, w)| {
                            let z = [r * sg[0] + q[0] - x[0], r * sg[1] + q[1] - x[1], r * sg[2] + q[2] - x[2]];
                            w * r.powi(dim as i32 - 1) * g_kn_unchecked(dim, 0.7, norm(&z))
                        })
                        .sum();
                    want += fine.weights[i] * inner;
                }
                assert!((v[j] - want).abs() < 1e-9 * want, "dim {dim} j {j}: {} vs {want}", v[j]);
            }
        }
    }
}
