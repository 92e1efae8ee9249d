//! Funk–Hecke eigenvalues μ_k of G_{κ,N} on S^{N−1}, σ_γ(k) and the threshold γ_N.

use super::harmonics::Vec3;
use crate::error::{Error, Result};
use crate::kernels::{g_kn_unchecked, k0};
use crate::quadrature::{adaptive_with_breaks, GaussRule};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const QUAD_TOL: f64 = 1e-13;

fn check(dim: usize, kappa: f64) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::Invalid(format!("dimension must be 2 or 3, got {dim}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// λ_k = k(k + N − 2), eigenvalues of −Δ on S^{N−1}.
pub fn laplace_eigenvalue(dim: usize, k: usize) -> f64 {
    (k * (k + dim - 2)) as f64
}

/// Legendre P_k(x).
pub fn legendre(k: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    for j in 2..=k {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn breaks(k: usize, graded: bool) -> Vec<f64> {
    let mut b = vec![0.0];
    if graded {
        b.extend([1e-8, 1e-6, 1e-4, 1e-2, 0.1]);
    }
    let pieces = k + 2;
    for i in 1..=pieces {
        let x = PI * i as f64 / pieces as f64;
        if x > *b.last().unwrap() {
            b.push(x);
        }
    }
    b
}

/// μ_k from the one-dimensional reduced integrals.
pub fn mu_k(dim: usize, kappa: f64, k: usize) -> Result<f64> {
    check(dim, kappa)?;
    if k == 0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    let v = if dim == 2 {
        // ∫₀^{2π}(1 − cos kt)·2K₀(2κ|sin(t/2)|)dt, folded onto (0, π)
        let mut f = |t: f64| {
            if t == 0.0 {
                0.0
            } else {
                2.0 * (1.0 - (kf * t).cos()) * 2.0 * k0(2.0 * kappa * (0.5 * t).sin())
            }
        };
        adaptive_with_breaks(&mut f, &breaks(k, true), QUAD_TOL, QUAD_TOL)?.value
    } else {
        // τ = cos ψ: 2π∫₀^π (1 − P_k(cos ψ)) e^{−2κ sin(ψ/2)} cos(ψ/2) dψ
        let mut f = |p: f64| 2.0 * PI * (1.0 - legendre(k, p.cos())) * (-2.0 * kappa * (0.5 * p).sin()).exp() * (0.5 * p).cos();
        adaptive_with_breaks(&mut f, &breaks(k, false), QUAD_TOL, QUAD_TOL)?.value
    };
    Ok(v)
}

/// ∫_{S^{N−1}} G_{κ,N}(|θ − σ|) dσ.
pub fn kernel_mass(dim: usize, kappa: f64) -> Result<f64> {
    check(dim, kappa)?;
    if dim == 3 {
        return Ok(2.0 * PI * (-(-2.0 * kappa).exp_m1()) / kappa);
    }
    let mut f = |t: f64| if t == 0.0 { 0.0 } else { 2.0 * 2.0 * k0(2.0 * kappa * (0.5 * t).sin()) };
    Ok(adaptive_with_breaks(&mut f, &breaks(0, true), QUAD_TOL, QUAD_TOL)?.value)
}

/// Composite Gauss rule on (0, L) graded geometrically toward both ends.
fn graded_rule(len: f64, levels: usize, nodes: usize) -> Vec<(f64, f64)> {
    let g = GaussRule::new(nodes);
    let mut cuts = vec![0.0];
    let mut x = 0.25 * len;
    let mut inner = Vec::new();
    for _ in 0..levels {
        inner.push(x);
        x *= 0.2;
    }
    inner.reverse();
    cuts.extend(inner.iter());
    cuts.push(0.5 * len);
    let mut upper: Vec<f64> = inner.iter().rev().map(|c| len - c).collect();
    cuts.append(&mut upper);
    cuts.push(len);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        out.extend(g.on(w[0], w[1]));
    }
    out
}

fn rotate_frame(x: &Vec3) -> (Vec3, Vec3) {
    let helper = if x[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let a = super::harmonics::sub(&helper, &super::harmonics::scale(x, super::harmonics::dot(&helper, x)));
    let an = super::harmonics::norm(&a);
    let a = super::harmonics::scale(&a, 1.0 / an);
    let b = [x[1] * a[2] - x[2] * a[1], x[2] * a[0] - x[0] * a[2], x[0] * a[1] - x[1] * a[0]];
    (a, b)
}

/// μ_k from its defining double integral ½∫∫(Y(θ) − Y(σ))² G dθ dσ / ∫Y²,
/// with Y = cos kθ (N = 2) or the zonal P_k (N = 3).
pub fn mu_k_oracle(dim: usize, kappa: f64, k: usize) -> Result<f64> {
    check(dim, kappa)?;
    if k == 0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    if dim == 2 {
        let m = 4 * k + 16;
        let inner = graded_rule(2.0 * PI, 12, 16);
        let mut total = 0.0;
        for i in 0..m {
            let th = 2.0 * PI * i as f64 / m as f64;
            let yt = (kf * th).cos();
            let mut s = 0.0;
            for &(t, w) in &inner {
                let d = (yt - (kf * (th + t)).cos()).powi(2);
                s += w * d * g_kn_unchecked(2, kappa, 2.0 * (0.5 * t).sin().abs());
            }
            total += s * 2.0 * PI / m as f64;
        }
        return Ok(0.5 * total / PI);
    }
    let (zs, ws) = crate::quadrature::gauss_legendre(k + 4);
    let n_lon = 2 * k + 8;
    let psi = GaussRule::new(24).composite(0.0, PI, 3);
    let n_chi = 2 * k + 8;
    let mut total = 0.0;
    for (z, wz) in zs.iter().zip(&ws) {
        let r = (1.0 - z * z).sqrt();
        for j in 0..n_lon {
            let ph = 2.0 * PI * (j as f64 + 0.5) / n_lon as f64;
            let x = [r * ph.cos(), r * ph.sin(), *z];
            let yx = legendre(k, *z);
            let (a, b) = rotate_frame(&x);
            let mut s = 0.0;
            for &(p, wp) in &psi {
                let (sp, cp) = p.sin_cos();
                let g = g_kn_unchecked(3, kappa, 2.0 * (0.5 * p).sin());
                let mut ring = 0.0;
                for l in 0..n_chi {
                    let c = 2.0 * PI * l as f64 / n_chi as f64;
                    let (sc, cc) = c.sin_cos();
                    let yz = cp * x[2] + sp * (cc * a[2] + sc * b[2]);
                    ring += (yx - legendre(k, yz)).powi(2);
                }
                s += wp * sp * g * ring * 2.0 * PI / n_chi as f64;
            }
            total += wz * 2.0 * PI / n_lon as f64 * s;
        }
    }
    Ok(0.5 * total / (4.0 * PI / (2 * k + 1) as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaThreshold {
    pub gamma: f64,
    /// Degree attaining the minimum (1 stands for λ₁/μ₁).
    pub argmin: usize,
    pub k_max: usize,
    /// (λ_{k_max} − λ₁)/μ_sup, a lower bound for every ratio with k > k_max.
    pub tail_bound: f64,
    pub mu_sup: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpectrum {
    pub dim: usize,
    pub kappa: f64,
    /// μ_0..=μ_{k_max}.
    pub mu: Vec<f64>,
    pub threshold: GammaThreshold,
}

fn threshold_from(dim: usize, mu: &[f64], mu_sup: f64) -> GammaThreshold {
    let k_max = mu.len() - 1;
    let l1 = laplace_eigenvalue(dim, 1);
    let mut gamma = l1 / mu[1];
    let mut argmin = 1;
    for (k, &m) in mu.iter().enumerate().skip(2) {
        let d = m - mu[1];
        if d > 0.0 {
            let r = (laplace_eigenvalue(dim, k) - l1) / d;
            if r < gamma {
                gamma = r;
                argmin = k;
            }
        }
    }
    let tail_bound = (laplace_eigenvalue(dim, k_max) - l1) / mu_sup;
    GammaThreshold { gamma, argmin, k_max, tail_bound, mu_sup, certified: tail_bound >= gamma }
}

impl LatticeSpectrum {
    /// Tabulates μ_k for k ≤ k_max and computes γ_N with its tail certificate.
    /// An uncertified k_max is doubled up to three times.
    pub fn new(dim: usize, kappa: f64, k_max: usize) -> Result<Self> {
        check(dim, kappa)?;
        if k_max < 8 {
            return Err(Error::Invalid(format!("k_max must be at least 8, got {k_max}")));
        }
        let mu_sup = 2.0 * kernel_mass(dim, kappa)?;
        let mut k = k_max;
        let mut mu: Vec<f64> = Vec::new();
        for _ in 0..4 {
            for j in mu.len()..=k {
                mu.push(mu_k(dim, kappa, j)?);
            }
            let threshold = threshold_from(dim, &mu, mu_sup);
            if threshold.certified {
                mu.truncate(k + 1);
                return Ok(LatticeSpectrum { dim, kappa, mu, threshold });
            }
            k *= 2;
        }
        Err(Error::TailCertificate { k_max: k / 2 })
    }

    pub fn lambda(&self, k: usize) -> f64 {
        laplace_eigenvalue(self.dim, k)
    }

    /// σ_γ(k) = λ_k − λ₁ − γ(μ_k − μ₁); degrees above the table use the direct integral.
    pub fn sigma(&self, gamma: f64, k: usize) -> f64 {
        let mu_k_val = if k < self.mu.len() { self.mu[k] } else { mu_k(self.dim, self.kappa, k).unwrap_or(f64::NAN) };
        self.lambda(k) - self.lambda(1) - gamma * (mu_k_val - self.mu[1])
    }

    pub fn gamma_n(&self) -> f64 {
        self.threshold.gamma
    }
}

pub fn sigma_lattice(dim: usize, kappa: f64, gamma: f64, k: usize) -> Result<f64> {
    check(dim, kappa)?;
    let l = laplace_eigenvalue(dim, k) - laplace_eigenvalue(dim, 1);
    Ok(l - gamma * (mu_k(dim, kappa, k)? - mu_k(dim, kappa, 1)?))
}

pub fn gamma_n(dim: usize, kappa: f64, k_max: usize) -> Result<GammaThreshold> {
    Ok(LatticeSpectrum::new(dim, kappa, k_max)?.threshold)
}
