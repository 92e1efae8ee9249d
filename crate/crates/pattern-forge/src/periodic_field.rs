//! Doubly 2π-periodic fields with the swap/reflection symmetries
//! φ(t₁,t₂) = φ(t₂,t₁) = φ(−t₁,t₂), in grid and cosine-coefficient form.
//!
//! Coefficients are taken against the orthonormal symmetrized basis
//! b_k ∝ cos(k₁t₁)cos(k₂t₂) + cos(k₂t₁)cos(k₁t₂), k₁ ≤ k₂, so that
//! Parseval holds exactly.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Default points per axis.
pub const DEFAULT_N: usize = 64;
/// Default band limit.
pub const DEFAULT_K_MAX: usize = 20;

const SYMMETRY_TOL: f64 = 1e-8;

#[inline]
pub fn grid_point(n: usize, i: usize) -> f64 {
    -PI + 2.0 * PI * i as f64 / n as f64
}

/// Samples on t_i = −π + 2πi/n, stored row-major with the first index along t₁.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymGrid {
    pub n: usize,
    pub values: Vec<f64>,
}

fn check_n(n: usize) -> Result<()> {
    if n < 16 || n % 2 != 0 {
        return Err(Error::Invalid(format!("grid size must be even and at least 16, got {n}")));
    }
    Ok(())
}

impl SymGrid {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if values.len() != n * n {
            return Err(Error::Invalid(format!("expected {} values, got {}", n * n, values.len())));
        }
        Ok(SymGrid { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        SymGrid { n, values: vec![0.0; n * n] }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        SymGrid { n, values: vec![c; n * n] }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(n: usize, f: F) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = f(grid_point(n, i), grid_point(n, j));
            }
        }
        SymGrid { n, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Largest change under the swap and the reflection t₁ ↦ −t₁.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = self.at(i, j);
                d = d.max((v - self.at(j, i)).abs());
                d = d.max((v - self.at((n - i) % n, j)).abs());
            }
        }
        d
    }

    /// Average over the eight-element symmetry group.
    pub fn symmetrize(&self) -> SymGrid {
        let n = self.n;
        let r = |i: usize| (n - i) % n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let s = self.at(i, j)
                    + self.at(r(i), j)
                    + self.at(i, r(j))
                    + self.at(r(i), r(j))
                    + self.at(j, i)
                    + self.at(r(j), i)
                    + self.at(j, r(i))
                    + self.at(r(j), r(i));
                out[i * n + j] = 0.125 * s;
            }
        }
        SymGrid { n, values: out }
    }

    /// t ↦ f(t + (π, π)).
    pub fn shift_half_period(&self) -> SymGrid {
        let n = self.n;
        let h = n / 2;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.at((i + h) % n, (j + h) % n);
            }
        }
        SymGrid { n, values: out }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> SymGrid {
        SymGrid { n: self.n, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &SymGrid, f: F) -> SymGrid {
        assert_eq!(self.n, other.n);
        SymGrid { n: self.n, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t1,t2,value\n");
        for i in 0..self.n {
            for j in 0..self.n {
                let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", grid_point(self.n, i), grid_point(self.n, j), self.at(i, j));
            }
        }
        s
    }
}

/// L² inner product over [−π, π]² by the trapezoid rule.
pub fn inner(a: &SymGrid, b: &SymGrid) -> f64 {
    assert_eq!(a.n, b.n);
    let h = 2.0 * PI / a.n as f64;
    h * h * a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>()
}

/// Number of stored modes k₁ ≤ k₂ ≤ k_max.
pub fn mode_count(k_max: usize) -> usize {
    (k_max + 1) * (k_max + 2) / 2
}

#[inline]
pub fn mode_index(k1: usize, k2: usize) -> usize {
    let (a, b) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
    b * (b + 1) / 2 + a
}

/// Modes in storage order.
pub fn modes(k_max: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(mode_count(k_max));
    for b in 0..=k_max {
        for a in 0..=b {
            out.push((a, b));
        }
    }
    out
}

/// Normalization of the symmetrized basis function for (k₁, k₂).
pub fn basis_norm(k1: usize, k2: usize) -> f64 {
    let m = |k: usize| if k == 0 { 2.0 } else { 1.0 };
    let pair: f64 = if k1 == k2 { 1.0 } else { 2.0 };
    1.0 / (PI * (m(k1) * m(k2) * pair).sqrt())
}

/// Orthonormal symmetrized basis function b_k.
pub fn basis_value(k1: usize, k2: usize, t1: f64, t2: f64) -> f64 {
    let (a, b) = (k1 as f64, k2 as f64);
    let raw = if k1 == k2 {
        (a * t1).cos() * (a * t2).cos()
    } else {
        (a * t1).cos() * (b * t2).cos() + (b * t1).cos() * (a * t2).cos()
    };
    basis_norm(k1, k2) * raw
}

/// e_k(t) = (1/π) cos(k₁t₁) cos(k₂t₂).
pub fn e_k(k1: usize, k2: usize, t1: f64, t2: f64) -> f64 {
    (k1 as f64 * t1).cos() * (k2 as f64 * t2).cos() / PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosSpectrum {
    pub k_max: usize,
    pub coeffs: Vec<f64>,
}

impl CosSpectrum {
    pub fn zeros(k_max: usize) -> Self {
        CosSpectrum { k_max, coeffs: vec![0.0; mode_count(k_max)] }
    }

    pub fn get(&self, k1: usize, k2: usize) -> f64 {
        if k1.max(k2) > self.k_max {
            0.0
        } else {
            self.coeffs[mode_index(k1, k2)]
        }
    }

    pub fn set(&mut self, k1: usize, k2: usize, v: f64) {
        self.coeffs[mode_index(k1, k2)] = v;
    }

    /// Unit coefficient on b_k.
    pub fn unit(k_max: usize, k1: usize, k2: usize) -> Self {
        let mut s = Self::zeros(k_max);
        s.set(k1, k2, 1.0);
        s
    }

    /// L² norm (Parseval).
    pub fn norm2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        CosSpectrum { k_max: self.k_max, coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    pub fn add(&self, other: &CosSpectrum) -> Self {
        assert_eq!(self.k_max, other.k_max);
        CosSpectrum { k_max: self.k_max, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &CosSpectrum) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// f(t) = Σ A[a][b] cos(a t₁) cos(b t₂), A symmetric, (k_max+1)² row-major.
    pub fn dense(&self) -> Vec<f64> {
        let m = self.k_max + 1;
        let mut a = vec![0.0; m * m];
        for (idx, &(k1, k2)) in modes(self.k_max).iter().enumerate() {
            let c = self.coeffs[idx] * basis_norm(k1, k2);
            a[k1 * m + k2] += c;
            if k1 != k2 {
                a[k2 * m + k1] += c;
            }
        }
        a
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k1,k2,c_k\n");
        for (idx, &(k1, k2)) in modes(self.k_max).iter().enumerate() {
            let _ = writeln!(s, "{k1},{k2},{:.16e}", self.coeffs[idx]);
        }
        s
    }
}

/// cos(k t_i) for k = 0..=k_max, row k.
fn cos_table(n: usize, k_max: usize) -> Vec<f64> {
    let mut c = vec![0.0; (k_max + 1) * n];
    for k in 0..=k_max {
        for i in 0..n {
            c[k * n + i] = (k as f64 * grid_point(n, i)).cos();
        }
    }
    c
}

fn check_band(n: usize, k_max: usize) -> Result<()> {
    check_n(n)?;
    if k_max + 1 > n / 2 {
        return Err(Error::Invalid(format!("band limit {k_max} exceeds n/2 - 1 = {}", n / 2 - 1)));
    }
    Ok(())
}

/// Cosine coefficients on the band k₁ ≤ k₂ ≤ k_max.
pub fn analyze(grid: &SymGrid, k_max: usize) -> Result<CosSpectrum> {
    check_band(grid.n, k_max)?;
    let d = grid.symmetry_defect();
    if d > SYMMETRY_TOL {
        return Err(Error::Symmetry(d));
    }
    Ok(analyze_unchecked(grid, k_max))
}

/// [`analyze`] without the symmetry check (the projection is still well defined).
pub fn analyze_unchecked(grid: &SymGrid, k_max: usize) -> CosSpectrum {
    let n = grid.n;
    let m = k_max + 1;
    let c = cos_table(n, k_max);
    // T = C G (m × n), then M = T Cᵀ (m × m)
    let mut t = vec![0.0; m * n];
    for k in 0..m {
        for i in 0..n {
            let ck = c[k * n + i];
            if ck == 0.0 {
                continue;
            }
            let row = &grid.values[i * n..(i + 1) * n];
            let out = &mut t[k * n..(k + 1) * n];
            for j in 0..n {
                out[j] += ck * row[j];
            }
        }
    }
    let mut mm = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            mm[a * m + b] = (0..n).map(|j| t[a * n + j] * c[b * n + j]).sum();
        }
    }
    let h = 2.0 * PI / n as f64;
    let mut spec = CosSpectrum::zeros(k_max);
    for (idx, &(k1, k2)) in modes(k_max).iter().enumerate() {
        let raw = if k1 == k2 { mm[k1 * m + k1] } else { mm[k1 * m + k2] + mm[k2 * m + k1] };
        spec.coeffs[idx] = h * h * basis_norm(k1, k2) * raw;
    }
    spec
}

pub fn synthesize(spec: &CosSpectrum, n: usize) -> Result<SymGrid> {
    check_band(n, spec.k_max)?;
    Ok(synthesize_unchecked(spec, n))
}

pub fn synthesize_unchecked(spec: &CosSpectrum, n: usize) -> SymGrid {
    let m = spec.k_max + 1;
    let a = spec.dense();
    let c = cos_table(n, spec.k_max);
    // T = A C (m × n), values = Cᵀ T
    let mut t = vec![0.0; m * n];
    for p in 0..m {
        for q in 0..m {
            let apq = a[p * m + q];
            if apq == 0.0 {
                continue;
            }
            for j in 0..n {
                t[p * n + j] += apq * c[q * n + j];
            }
        }
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = (0..m).map(|p| c[p * n + i] * t[p * n + j]).sum();
        }
    }
    SymGrid { n, values }
}

/// Evaluates a band-limited field at an arbitrary point.
#[derive(Clone, Debug)]
pub struct PointEvaluator {
    m: usize,
    dense: Vec<f64>,
}

impl PointEvaluator {
    pub fn new(spec: &CosSpectrum) -> Self {
        PointEvaluator { m: spec.k_max + 1, dense: spec.dense() }
    }

    /// Σ A[a][b] cos(a t₁) cos(b t₂), with the cosines from the Chebyshev recurrence.
    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        let m = self.m;
        let mut c1 = [0.0f64; 64];
        let mut c2 = [0.0f64; 64];
        assert!(m <= 64);
        cos_multiples(t1, &mut c1[..m]);
        cos_multiples(t2, &mut c2[..m]);
        self.eval_with(&c1[..m], &c2[..m])
    }

    /// Same as [`eval`](Self::eval) with precomputed cos(a t₁), cos(b t₂).
    #[inline]
    pub fn eval_with(&self, c1: &[f64], c2: &[f64]) -> f64 {
        let m = self.m;
        let mut s = 0.0;
        for a in 0..m {
            let row = &self.dense[a * m..(a + 1) * m];
            let mut r = 0.0;
            for b in 0..m {
                r += row[b] * c2[b];
            }
            s += c1[a] * r;
        }
        s
    }
}

#[inline]
pub fn cos_multiples(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    let c = t.cos();
    out[1] = c;
    for k in 2..out.len() {
        out[k] = 2.0 * c * out[k - 1] - out[k - 2];
    }
}

/// u = a·v̄ + remainder with ⟨remainder, v̄⟩ = 0, v̄ = cos t₁ + cos t₂.
pub fn project_v1(grid: &SymGrid) -> (f64, SymGrid) {
    let vbar = SymGrid::from_fn(grid.n, |a, b| a.cos() + b.cos());
    // ⟨v̄, v̄⟩ = 4π²
    let a = inner(grid, &vbar) / (4.0 * PI * PI);
    let rem = grid.zip_with(&vbar, |u, v| u - a * v);
    (a, rem)
}

/// v̄ = cos t₁ + cos t₂ in coefficient form: 2π on the (0,1) mode.
pub fn vbar_spectrum(k_max: usize) -> CosSpectrum {
    let mut s = CosSpectrum::zeros(k_max);
    s.set(0, 1, 2.0 * PI);
    s
}

/// Gradient, divergence and Laplacian on a general (not necessarily symmetric)
/// periodic n×n grid, by FFT.
pub struct Spectral {
    n: usize,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Spectral { n, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        for row in data.chunks_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    fn wavenumber(&self, i: usize) -> f64 {
        let n = self.n;
        if i <= n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        }
    }

    fn apply<F: Fn(f64, f64) -> Complex64>(&self, values: &[f64], symbol: F) -> Vec<f64> {
        let n = self.n;
        let mut d: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut d, false);
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] *= symbol(self.wavenumber(i), self.wavenumber(j));
            }
        }
        self.transform(&mut d, true);
        let s = 1.0 / (n * n) as f64;
        d.iter().map(|c| c.re * s).collect()
    }

    // Nyquist mode dropped for odd derivatives.
    fn odd(&self, k: f64) -> f64 {
        if (k.abs() - (self.n / 2) as f64).abs() < 0.5 {
            0.0
        } else {
            k
        }
    }

    pub fn d1(&self, values: &[f64]) -> Vec<f64> {
        self.apply(values, |k1, _| Complex64::new(0.0, self.odd(k1)))
    }

    pub fn d2(&self, values: &[f64]) -> Vec<f64> {
        self.apply(values, |_, k2| Complex64::new(0.0, self.odd(k2)))
    }

    pub fn gradient(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.d1(values), self.d2(values))
    }

    pub fn divergence(&self, v1: &[f64], v2: &[f64]) -> Vec<f64> {
        let a = self.d1(v1);
        let b = self.d2(v2);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }

    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        self.apply(values, |k1, k2| Complex64::new(-(k1 * k1 + k2 * k2), 0.0))
    }
}

/// Gradient and divergence of a symmetric field (the components themselves
/// are not symmetric, so they come back as plain arrays).
pub fn spectral_derivatives(grid: &SymGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let sp = Spectral::new(grid.n);
    let (g1, g2) = sp.gradient(&grid.values);
    let div = sp.divergence(&g1, &g2);
    (g1, g2, div)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_vbar_coefficients() {
        let one = SymGrid::constant(32, 1.0);
        let s = analyze(&one, 15).unwrap();
        assert!((s.get(0, 0) - 2.0 * PI).abs() < 1e-12);
        assert!(s.coeffs[1..].iter().all(|c| c.abs() < 1e-12));
        let v = SymGrid::from_fn(32, |a, b| a.cos() + b.cos());
        let s = analyze(&v, 15).unwrap();
        assert!((s.get(1, 0) - 2.0 * PI).abs() < 1e-12);
        assert!(s.sub(&vbar_spectrum(15)).norm2() < 1e-12);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let g = SymGrid::from_fn(16, |a, b| a.cos() + 0.1 * b.sin());
        assert!(matches!(analyze(&g, 7), Err(Error::Symmetry(_))));
        assert!(analyze(&SymGrid::zeros(16), 8).is_err());
    }

    #[test]
    fn projection_examples() {
        let n = 32;
        let v = SymGrid::from_fn(n, |a, b| a.cos() + b.cos());
        let (a, r) = project_v1(&v);
        assert!((a - 1.0).abs() < 1e-14 && r.max_abs() < 1e-14);
        let (a, _) = project_v1(&SymGrid::from_fn(n, |x, y| (2.0 * x).cos() + (2.0 * y).cos()));
        assert!(a.abs() < 1e-14);
        let (a, r) = project_v1(&SymGrid::from_fn(n, |x, y| 3.0 * (x.cos() + y.cos()) + x.cos() * y.cos()));
        assert!((a - 3.0).abs() < 1e-13);
        let (a2, _) = project_v1(&r);
        assert!(a2.abs() < 1e-14);
    }

    #[test]
    fn derivative_of_cosine() {
        let n = 32;
        let g = SymGrid::from_fn(n, |a, b| a.cos() + b.cos());
        let (g1, _, _) = spectral_derivatives(&g);
        for i in 0..n {
            for j in 0..n {
                assert!((g1[i * n + j] + grid_point(n, i).sin()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn point_evaluator_matches_synthesis() {
        let mut s = CosSpectrum::zeros(7);
        for (i, c) in s.coeffs.iter_mut().enumerate() {
            *c = ((i * 37 % 11) as f64 - 5.0) / 7.0;
        }
        let g = synthesize(&s, 16).unwrap();
        let ev = PointEvaluator::new(&s);
        for i in 0..16 {
            for j in 0..16 {
                assert!((ev.eval(grid_point(16, i), grid_point(16, j)) - g.at(i, j)).abs() < 1e-12);
            }
        }
        let direct: f64 = modes(7)
            .iter()
            .enumerate()
            .map(|(idx, &(a, b))| s.coeffs[idx] * basis_value(a, b, 0.3, -1.7))
            .sum();
        assert!((ev.eval(0.3, -1.7) - direct).abs() < 1e-12);
    }
}
