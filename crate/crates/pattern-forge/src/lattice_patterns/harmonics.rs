//! Real harmonic bases on S¹ and S² with a product quadrature grid.
//!
//! S¹: 1/√(2π), cos kθ/√π, sin kθ/√π, indexed 0, 2k−1, 2k.
//! S²: real spherical harmonics Y_ℓm, index ℓ² + ℓ + m. They are evaluated as
//! polynomials N_ℓm Q_ℓ^m(z)·Re/Im (x + iy)^m, where P_ℓ^m = (1 − z²)^{m/2} Q_ℓ^m,
//! so tangential gradients have no pole singularity.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use std::f64::consts::PI;

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub const MAX_DEGREE: usize = 48;

/// Number of real harmonics of degree ≤ k_max.
pub fn mode_count(dim: usize, k_max: usize) -> usize {
    if dim == 2 {
        2 * k_max + 1
    } else {
        (k_max + 1) * (k_max + 1)
    }
}

pub fn degree_of(dim: usize, index: usize) -> usize {
    if dim == 2 {
        index.div_ceil(2)
    } else {
        (index as f64).sqrt().floor() as usize
    }
}

/// Index of Y_ℓm (S²) or of cos/sin(ℓθ) (S¹, m ≥ 0 for cos, m < 0 for sin).
pub fn mode_index(dim: usize, l: usize, m: i64) -> usize {
    if dim == 2 {
        match (l, m >= 0) {
            (0, _) => 0,
            (l, true) => 2 * l - 1,
            (l, false) => 2 * l,
        }
    } else {
        ((l * l + l) as i64 + m) as usize
    }
}

fn norm_lm(l: usize, m: usize) -> f64 {
    // (ℓ−m)!/(ℓ+m)!
    let mut r = 1.0;
    for j in (l - m + 1)..=(l + m) {
        r /= j as f64;
    }
    let base = ((2 * l + 1) as f64 / (4.0 * PI) * r).sqrt();
    if m == 0 {
        base
    } else {
        base * 2f64.sqrt()
    }
}

/// Precomputed N_ℓm for degrees ≤ k_max.
#[derive(Clone, Debug)]
struct SphNorms {
    k_max: usize,
    n: Vec<f64>,
}

impl SphNorms {
    fn new(k_max: usize) -> Self {
        let mut n = vec![0.0; (k_max + 1) * (k_max + 1)];
        for l in 0..=k_max {
            for m in 0..=l {
                n[l * (k_max + 1) + m] = norm_lm(l, m);
            }
        }
        SphNorms { k_max, n }
    }

    fn get(&self, l: usize, m: usize) -> f64 {
        self.n[l * (self.k_max + 1) + m]
    }
}

/// Σ cᵢ Yᵢ(σ) and its tangential gradient at a unit vector σ.
fn eval_s2(norms: &SphNorms, coeffs: &[f64], k_max: usize, s: &Vec3, mut each: Option<&mut dyn FnMut(usize, f64, Vec3)>) -> (f64, Vec3) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let mut val = 0.0;
    let mut g = [0.0; 3];
    // (x+iy)^m and (x+iy)^{m−1}
    let (mut cm, mut sm) = (1.0, 0.0);
    let (mut cp, mut sp) = (0.0, 0.0);
    let mut qmm = 1.0;
    for m in 0..=k_max {
        if m > 0 {
            cp = cm;
            sp = sm;
            let (c, d) = (cm * x - sm * y, cm * y + sm * x);
            cm = c;
            sm = d;
            qmm *= (2 * m - 1) as f64;
        }
        let mf = m as f64;
        let (dcx, dsx) = (mf * cp, mf * sp);
        let (dcy, dsy) = (-mf * sp, mf * cp);
        let (mut q2, mut dq2) = (0.0, 0.0);
        let (mut q1, mut dq1) = (qmm, 0.0);
        for l in m..=k_max {
            let (q, dq) = if l == m {
                (qmm, 0.0)
            } else if l == m + 1 {
                (z * (2 * m + 1) as f64 * qmm, (2 * m + 1) as f64 * qmm)
            } else {
                let a = (2 * l - 1) as f64;
                let b = (l + m - 1) as f64;
                let d = (l - m) as f64;
                ((a * z * q1 - b * q2) / d, (a * (q1 + z * dq1) - b * dq2) / d)
            };
            if l > m {
                q2 = q1;
                dq2 = dq1;
                q1 = q;
                dq1 = dq;
            }
            let nrm = norms.get(l, m);
            let idx_c = l * l + l + m;
            let parts: [(usize, f64, Vec3); 2] = [
                (idx_c, nrm * q * cm, [nrm * q * dcx, nrm * q * dcy, nrm * dq * cm]),
                (l * l + l - m, nrm * q * sm, [nrm * q * dsx, nrm * q * dsy, nrm * dq * sm]),
            ];
            let count = if m == 0 { 1 } else { 2 };
            for (idx, v, amb) in parts.iter().take(count) {
                let c = if coeffs.is_empty() { 0.0 } else { coeffs[*idx] };
                let radial = dot(amb, s);
                let tg = [amb[0] - radial * s[0], amb[1] - radial * s[1], amb[2] - radial * s[2]];
                if let Some(f) = each.as_mut() {
                    f(*idx, *v, tg);
                }
                if c != 0.0 {
                    val += c * v;
                    g[0] += c * tg[0];
                    g[1] += c * tg[1];
                    g[2] += c * tg[2];
                }
            }
        }
    }
    (val, g)
}

fn eval_s1(coeffs: &[f64], k_max: usize, s: &Vec3, mut each: Option<&mut dyn FnMut(usize, f64, Vec3)>) -> (f64, Vec3) {
    let th = s[1].atan2(s[0]);
    let perp = [-th.sin(), th.cos(), 0.0];
    let c0 = 1.0 / (2.0 * PI).sqrt();
    let ck = 1.0 / PI.sqrt();
    let mut val = 0.0;
    let mut d = 0.0;
    let mut visit = |idx: usize, v: f64, dv: f64, val: &mut f64, d: &mut f64| {
        if let Some(f) = each.as_mut() {
            f(idx, v, scale(&perp, dv));
        }
        if !coeffs.is_empty() {
            *val += coeffs[idx] * v;
            *d += coeffs[idx] * dv;
        }
    };
    visit(0, c0, 0.0, &mut val, &mut d);
    for k in 1..=k_max {
        let kf = k as f64;
        let (sn, cs) = (kf * th).sin_cos();
        visit(2 * k - 1, ck * cs, -ck * kf * sn, &mut val, &mut d);
        visit(2 * k, ck * sn, ck * kf * cs, &mut val, &mut d);
    }
    (val, scale(&perp, d))
}

/// Real harmonics of degree ≤ k_max on S^{dim−1} together with a quadrature grid
/// that integrates products of two of them exactly.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    pub dim: usize,
    pub k_max: usize,
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// values[i][j] = Y_i(node_j).
    values: Vec<Vec<f64>>,
    grads: Vec<Vec<Vec3>>,
    norms: Option<SphNorms>,
    shape: (usize, usize),
}

impl HarmonicBasis {
    /// Default grid: 4k_max + 8 uniform points on S¹; (k_max + 2) × (2k_max + 4) on S².
    pub fn new(dim: usize, k_max: usize) -> Result<Self> {
        if dim == 2 {
            Self::with_grid(dim, k_max, 4 * k_max + 8, 1)
        } else {
            Self::with_grid(dim, k_max, k_max + 2, 2 * k_max + 4)
        }
    }

    pub fn with_grid(dim: usize, k_max: usize, n_a: usize, n_b: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if k_max > MAX_DEGREE {
            return Err(Error::Invalid(format!("degree {k_max} above supported maximum {MAX_DEGREE}")));
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if dim == 2 {
            if n_a < 2 * k_max + 2 {
                return Err(Error::Invalid("circle grid too coarse for the band".into()));
            }
            for i in 0..n_a {
                let t = 2.0 * PI * i as f64 / n_a as f64;
                nodes.push([t.cos(), t.sin(), 0.0]);
                weights.push(2.0 * PI / n_a as f64);
            }
        } else {
            if n_a < k_max + 1 || n_b < 2 * k_max + 1 {
                return Err(Error::Invalid("sphere grid too coarse for the band".into()));
            }
            let (zs, ws) = gauss_legendre(n_a);
            for (z, w) in zs.iter().zip(&ws) {
                let r = (1.0 - z * z).sqrt();
                for j in 0..n_b {
                    let p = 2.0 * PI * (j as f64 + 0.5) / n_b as f64;
                    nodes.push([r * p.cos(), r * p.sin(), *z]);
                    weights.push(w * 2.0 * PI / n_b as f64);
                }
            }
        }
        let norms = if dim == 3 { Some(SphNorms::new(k_max)) } else { None };
        let count = mode_count(dim, k_max);
        let mut values = vec![vec![0.0; nodes.len()]; count];
        let mut grads = vec![vec![[0.0; 3]; nodes.len()]; count];
        let mut b = HarmonicBasis { dim, k_max, nodes, weights, values: Vec::new(), grads: Vec::new(), norms, shape: (n_a, n_b) };
        for j in 0..b.nodes.len() {
            let s = b.nodes[j];
            b.visit(&s, &mut |i, v, g| {
                values[i][j] = v;
                grads[i][j] = g;
            });
        }
        b.values = values;
        b.grads = grads;
        Ok(b)
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        mode_count(self.dim, self.k_max)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degree(&self, index: usize) -> usize {
        degree_of(self.dim, index)
    }

    pub fn even_modes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.degree(i) % 2 == 0).collect()
    }

    fn visit(&self, s: &Vec3, f: &mut dyn FnMut(usize, f64, Vec3)) {
        match self.dim {
            2 => {
                eval_s1(&[], self.k_max, s, Some(f));
            }
            _ => {
                eval_s2(self.norms.as_ref().unwrap(), &[], self.k_max, s, Some(f));
            }
        }
    }

    /// Σ cᵢ Yᵢ(σ) and its tangential gradient at an arbitrary unit vector.
    pub fn eval(&self, coeffs: &[f64], s: &Vec3) -> (f64, Vec3) {
        match self.dim {
            2 => eval_s1(coeffs, self.k_max, s, None),
            _ => eval_s2(self.norms.as_ref().unwrap(), coeffs, self.k_max, s, None),
        }
    }

    /// Values of every basis function at σ.
    pub fn basis_at(&self, s: &Vec3) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.visit(s, &mut |i, v, _| out[i] = v);
        out
    }

    pub fn value_table(&self, index: usize) -> &[f64] {
        &self.values[index]
    }

    pub fn grad_table(&self, index: usize) -> &[Vec3] {
        &self.grads[index]
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for (c, row) in coeffs.iter().zip(&self.values) {
            if *c != 0.0 {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += c * v;
                }
            }
        }
        out
    }

    pub fn synthesize_grad(&self, coeffs: &[f64]) -> Vec<Vec3> {
        let mut out = vec![[0.0; 3]; self.nodes.len()];
        for (c, row) in coeffs.iter().zip(&self.grads) {
            if *c != 0.0 {
                for (o, g) in out.iter_mut().zip(row) {
                    o[0] += c * g[0];
                    o[1] += c * g[1];
                    o[2] += c * g[2];
                }
            }
        }
        out
    }

    /// ⟨f, Yᵢ⟩ by the grid quadrature.
    pub fn analyze(&self, samples: &[f64]) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| row.iter().zip(samples).zip(&self.weights).map(|((y, f), w)| y * f * w).sum())
            .collect()
    }

    /// ⟨V, ∇Yᵢ⟩ for a tangential vector field V.
    pub fn analyze_flux(&self, field: &[Vec3]) -> Vec<f64> {
        self.grads
            .iter()
            .map(|row| row.iter().zip(field).zip(&self.weights).map(|((g, v), w)| dot(g, v) * w).sum())
            .collect()
    }

    pub fn integrate(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }
}
