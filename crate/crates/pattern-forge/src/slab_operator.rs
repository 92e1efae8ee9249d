//! The slab operator F(φ) = mean curvature of the graph of φ plus γ times the
//! Yukawa potential of the slab {|z| < φ(t)}, and its linearization.
//!
//! The potential at the upper face is A − B with
//! A(t) = ∫ Ψ(|r|, φ(t)+φ(t−r)) dr and B(t) = ∫ Ψ(|r|, φ(t)−φ(t−r)) dr,
//! Ψ(a, h) = ∫₀ʰ G_κ(√(a²+w²)) dw. A is smooth and its plane Fourier transform
//! separates in φ(t) and φ(t−r), so it is summed exactly over wavenumbers.
//! B is split into h·G_κ(|r|), handled spectrally, plus a remainder that
//! is O(h³) near r = 0 and decays like e^{−κ|r|}; only that remainder uses
//! local polar quadrature around each target.

use crate::error::{Error, Result};
use crate::periodic_field::{
    analyze_unchecked, cos_multiples, grid_point, mode_index, modes, synthesize_unchecked, CosSpectrum, PointEvaluator,
    Spectral, SymGrid,
};
use crate::quadrature::GaussRule;
use crate::slab_spectrum::{sigma_real, SlabParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// γ-free flat potential 2π(1 − e^{−2λκ})/κ².
pub fn flat_potential(kappa: f64, lambda: f64) -> f64 {
    2.0 * PI * (-(-2.0 * lambda * kappa).exp_m1()) / (kappa * kappa)
}

/// F(λ) for the flat slab of half thickness λ.
pub fn flat_value(p: &SlabParams, lambda: f64) -> f64 {
    p.gamma * flat_potential(p.kappa, lambda)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Angular nodes at radius a: `angular_base + angular_per_unit · a`, rounded up to even.
    pub angular_base: usize,
    pub angular_per_unit: f64,
    /// Gauss–Legendre panels of this width cover (0, r_max].
    pub radial_panel: f64,
    pub radial_nodes: usize,
    pub r_max: f64,
    /// Gauss–Legendre nodes for the inner (z-direction) integral.
    pub inner_nodes: usize,
    pub tol: f64,
}

impl QuadratureSpec {
    /// Chooses r_max so the remainder tail is below `tol` for height differences
    /// up to `2·amplitude`.
    pub fn for_tolerance(kappa: f64, tol: f64, amplitude: f64) -> Self {
        let mut q = QuadratureSpec {
            angular_base: 32,
            angular_per_unit: 3.0,
            radial_panel: 1.0,
            radial_nodes: 8,
            r_max: 1.0,
            inner_nodes: 8,
            tol,
        };
        let h = 2.0 * amplitude.max(1e-3);
        let mut r = 1.0;
        while remainder_tail(kappa, h, r) > tol && r < 1e4 {
            r += 0.5;
        }
        q.r_max = r.ceil();
        q
    }

    pub fn default_for(kappa: f64) -> Self {
        Self::for_tolerance(kappa, 1e-10, 0.5)
    }
}

/// Bound on ∫_{|r|>R} |Ψ(|r|,h) − h G_κ(|r|)| dr for |h| ≤ h_max.
pub fn remainder_tail(kappa: f64, h_max: f64, r: f64) -> f64 {
    PI * h_max.powi(3) / 3.0 * (kappa / r + 1.0 / (r * r)) * (-kappa * r).exp() / kappa
}

/// λ + u with u band-limited on the grid band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabShape {
    pub lambda: f64,
    pub n: usize,
    pub u: CosSpectrum,
}

impl SlabShape {
    pub fn new(lambda: f64, u: &SymGrid) -> Result<Self> {
        let k = u.n / 2 - 1;
        let spec = crate::periodic_field::analyze(u, k)?;
        Self::from_spectrum(lambda, spec, u.n)
    }

    pub fn flat(lambda: f64, n: usize) -> Self {
        SlabShape { lambda, n, u: CosSpectrum::zeros(n / 2 - 1) }
    }

    pub fn from_spectrum(lambda: f64, u: CosSpectrum, n: usize) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if u.k_max + 1 > n / 2 {
            return Err(Error::Invalid(format!("band {} too wide for n = {n}", u.k_max)));
        }
        let mut full = CosSpectrum::zeros(n / 2 - 1);
        for (idx, &(a, b)) in modes(u.k_max).iter().enumerate() {
            full.set(a, b, u.coeffs[idx]);
        }
        let s = SlabShape { lambda, n, u: full };
        let m = s.phi().min();
        if !(m > 0.0) {
            return Err(Error::DegenerateShape(m));
        }
        Ok(s)
    }

    pub fn u_grid(&self) -> SymGrid {
        synthesize_unchecked(&self.u, self.n)
    }

    pub fn phi(&self) -> SymGrid {
        self.u_grid().map(|v| v + self.lambda)
    }
}

struct PolarTable {
    offsets: Vec<(f64, f64)>,
    weights: Vec<f64>,
    radius: Vec<f64>,
    decay: Vec<f64>,
    inner_x: Vec<f64>,
    inner_w: Vec<f64>,
}

impl PolarTable {
    fn new(kappa: f64, q: &QuadratureSpec) -> Self {
        let rule = GaussRule::new(q.radial_nodes);
        let panels = (q.r_max / q.radial_panel).ceil().max(1.0) as usize;
        let radial = rule.composite(0.0, q.r_max, panels);
        let mut t = PolarTable {
            offsets: Vec::new(),
            weights: Vec::new(),
            radius: Vec::new(),
            decay: Vec::new(),
            inner_x: Vec::new(),
            inner_w: Vec::new(),
        };
        for (a, w) in radial {
            let mut m = q.angular_base + (q.angular_per_unit * a).ceil() as usize;
            m += m % 2;
            let dth = 2.0 * PI / m as f64;
            for l in 0..m {
                let th = dth * l as f64;
                t.offsets.push((a * th.cos(), a * th.sin()));
                t.weights.push(a * w * dth);
                t.radius.push(a);
                t.decay.push((-kappa * a).exp());
            }
        }
        let inner = GaussRule::new(q.inner_nodes);
        for (x, w) in inner.on(0.0, 1.0) {
            t.inner_x.push(x);
            t.inner_w.push(w);
        }
        t
    }
}

/// R(a, h) = Ψ(a, h) − h G_κ(a) by Gauss–Legendre in ξ = w/a, and ∂R/∂h of
/// that same discrete formula.
#[inline]
fn remainder(kappa: f64, a: f64, decay: f64, h: f64, xs: &[f64], ws: &[f64]) -> (f64, f64) {
    let m = h / a;
    let ka = kappa * a;
    let mut s = 0.0;
    let mut ds = 0.0;
    for (&x, &w) in xs.iter().zip(ws) {
        let xi = m * x;
        let sq = (1.0 + xi * xi).sqrt();
        let q = xi * xi / (sq + 1.0);
        let e = (-ka * q).exp_m1();
        let f = (e - q) / sq;
        let fp = -(1.0 + e) * xi * (ka * sq + 1.0) / (sq * sq * sq);
        s += w * f;
        ds += w * (f + xi * fp);
    }
    (decay * m * s, decay * ds / a)
}

/// Fundamental-domain targets (0 ≤ t₁ ≤ t₂ ≤ π) as grid indices.
fn fundamental_targets(n: usize) -> Vec<(usize, usize)> {
    let mut axis: Vec<usize> = (n / 2..n).collect();
    axis.push(0);
    let mut out = Vec::new();
    for (p, &i) in axis.iter().enumerate() {
        for &j in &axis[p..] {
            out.push((i, j));
        }
    }
    out
}

#[inline]
fn fold(n: usize, i: usize) -> usize {
    if i == 0 || i >= n / 2 {
        i
    } else {
        n - i
    }
}

fn fill_symmetric(n: usize, targets: &[(usize, usize)], vals: &[f64]) -> SymGrid {
    let key = |i: usize| if i == 0 { n } else { i };
    let mut lookup = vec![0.0; n * n];
    for (&(i, j), &v) in targets.iter().zip(vals) {
        lookup[i * n + j] = v;
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (fold(n, i), fold(n, j));
            let (a, b) = if key(a) <= key(b) { (a, b) } else { (b, a) };
            out[i * n + j] = lookup[a * n + b];
        }
    }
    SymGrid { n, values: out }
}

/// Reusable operator for a fixed (κ, γ), grid and quadrature.
pub struct SlabOperator {
    pub params: SlabParams,
    pub quad: QuadratureSpec,
    pub n: usize,
    table: PolarTable,
    spectral: Spectral,
    targets: Vec<(usize, usize)>,
}

/// Per-wavenumber data of the exactly summed A-term.
struct WaveTerm {
    k1: usize,
    k2: usize,
    beta: f64,
    /// (2π/β²) e^{−2λβ} times the multiplicity of ±k.
    pref: f64,
}

/// Linearization of F at a fixed shape; `apply` is cheap.
pub struct Linearization {
    n: usize,
    m: usize,
    gamma: f64,
    kappa: f64,
    grad: (Vec<f64>, Vec<f64>),
    wave: Vec<WaveTerm>,
    /// e^{−u β_k} on the grid for each wave term.
    damp: Vec<Vec<f64>>,
    damp_hat: Vec<f64>,
    targets: Vec<(usize, usize)>,
    /// Σ ∂R/∂h · weight at each target.
    local_diag: Vec<f64>,
    /// Σ ∂R/∂h · weight · cos(a·p₁)cos(b·p₂) over nodes p = t − r.
    local_mat: Vec<Vec<f64>>,
    spectral: Spectral,
}

impl SlabOperator {
    pub fn new(params: SlabParams, n: usize, quad: QuadratureSpec) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::Invalid(format!("grid size must be even and at least 16, got {n}")));
        }
        Ok(SlabOperator {
            table: PolarTable::new(params.kappa, &quad),
            spectral: Spectral::new(n),
            targets: fundamental_targets(n),
            params,
            quad,
            n,
        })
    }

    fn check(&self, shape: &SlabShape) -> Result<SymGrid> {
        if shape.n != self.n {
            return Err(Error::Invalid(format!("shape grid {} differs from operator grid {}", shape.n, self.n)));
        }
        let phi = shape.phi();
        let m = phi.min();
        if !(m > 0.0) {
            return Err(Error::DegenerateShape(m));
        }
        let u = shape.u_grid();
        let tail = remainder_tail(self.params.kappa, 2.0 * u.max_abs(), self.quad.r_max);
        if tail > 10.0 * self.quad.tol {
            return Err(Error::Quadrature { achieved: tail, target: self.quad.tol });
        }
        Ok(u)
    }

    pub fn mean_curvature(&self, shape: &SlabShape) -> SymGrid {
        mean_curvature_with(&self.spectral, &shape.u_grid())
    }

    fn wave_terms(&self, lambda: f64, umax: f64) -> Vec<WaveTerm> {
        let kappa = self.params.kappa;
        let kc = self.n / 2 - 1;
        let mut out = Vec::new();
        for k1 in 0..=kc {
            for k2 in 0..=kc {
                let beta = (kappa * kappa + (k1 * k1 + k2 * k2) as f64).sqrt();
                let scale = (-2.0 * (lambda - umax) * beta).exp();
                if scale < 1e-20 && (k1 + k2) > 0 {
                    continue;
                }
                let mult = if k1 > 0 { 2.0 } else { 1.0 } * if k2 > 0 { 2.0 } else { 1.0 };
                out.push(WaveTerm { k1, k2, beta, pref: mult * 2.0 * PI / (beta * beta) * (-2.0 * lambda * beta).exp() });
            }
        }
        out
    }

    /// A(φ) − A(λ) on the full grid; optionally the damping grids for the linearization.
    fn smooth_part(&self, lambda: f64, u: &SymGrid, keep: bool) -> (Vec<f64>, Vec<WaveTerm>, Vec<Vec<f64>>, Vec<f64>) {
        let n = self.n;
        let waves = self.wave_terms(lambda, u.max_abs());
        let cosk: Vec<Vec<f64>> = (0..n / 2)
            .map(|k| (0..n).map(|i| (k as f64 * grid_point(n, i)).cos()).collect())
            .collect();
        let inv = 1.0 / (n * n) as f64;
        let results: Vec<(Vec<f64>, Option<Vec<f64>>, f64)> = waves
            .par_iter()
            .map(|w| {
                let (c1, c2) = (&cosk[w.k1], &cosk[w.k2]);
                let em: Vec<f64> = u.values.iter().map(|&v| (-v * w.beta).exp_m1()).collect();
                let mut hat = 0.0;
                for i in 0..n {
                    let row = &em[i * n..(i + 1) * n];
                    let mut r = 0.0;
                    for j in 0..n {
                        r += row[j] * c2[j];
                    }
                    hat += c1[i] * r;
                }
                hat *= inv;
                let delta = if w.k1 == 0 && w.k2 == 0 { 1.0 } else { 0.0 };
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let e = em[i * n + j];
                        out[i * n + j] = -w.pref * (c1[i] * c2[j] * (hat * (1.0 + e)) + delta * e);
                    }
                }
                let damp = if keep { Some(em.iter().map(|e| 1.0 + e).collect()) } else { None };
                (out, damp, delta + hat)
            })
            .collect();
        let mut total = vec![0.0; n * n];
        let mut damp = Vec::new();
        let mut damp_hat = Vec::new();
        for (out, d, h) in results {
            for (t, o) in total.iter_mut().zip(&out) {
                *t += o;
            }
            if let Some(d) = d {
                damp.push(d);
                damp_hat.push(h);
            }
        }
        (total, waves, damp, damp_hat)
    }

    fn linear_part(&self, u: &CosSpectrum) -> SymGrid {
        let kappa = self.params.kappa;
        let mut s = u.clone();
        for (idx, &(a, b)) in modes(u.k_max).iter().enumerate() {
            let beta = (kappa * kappa + (a * a + b * b) as f64).sqrt();
            s.coeffs[idx] *= 2.0 * PI / kappa - 2.0 * PI / beta;
        }
        synthesize_unchecked(&s, self.n)
    }

    /// Remainder values on the targets and, when asked, the local derivative data.
    fn local_part(&self, shape: &SlabShape, u: &SymGrid, keep: bool) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let m = shape.u.k_max + 1;
        let ev = PointEvaluator::new(&shape.u);
        let kappa = self.params.kappa;
        let tb = &self.table;
        let res: Vec<(f64, f64, Vec<f64>)> = self
            .targets
            .par_iter()
            .map(|&(i, j)| {
                let (t1, t2) = (grid_point(n, i), grid_point(n, j));
                let ut = u.at(i, j);
                let mut val = 0.0;
                let mut diag = 0.0;
                let mut mat = if keep { vec![0.0; m * m] } else { Vec::new() };
                let mut c1 = vec![0.0; m];
                let mut c2 = vec![0.0; m];
                for p in 0..tb.offsets.len() {
                    let (r1, r2) = tb.offsets[p];
                    let up = if keep {
                        cos_multiples(t1 - r1, &mut c1);
                        cos_multiples(t2 - r2, &mut c2);
                        ev.eval_with(&c1, &c2)
                    } else {
                        ev.eval(t1 - r1, t2 - r2)
                    };
                    let (r, dr) = remainder(kappa, tb.radius[p], tb.decay[p], ut - up, &tb.inner_x, &tb.inner_w);
                    let w = tb.weights[p];
                    val += w * r;
                    if keep {
                        let d = w * dr;
                        diag += d;
                        for a in 0..m {
                            let f = d * c1[a];
                            let row = &mut mat[a * m..(a + 1) * m];
                            for b in 0..m {
                                row[b] += f * c2[b];
                            }
                        }
                    }
                }
                (val, diag, mat)
            })
            .collect();
        let mut vals = Vec::with_capacity(res.len());
        let mut diags = Vec::with_capacity(res.len());
        let mut mats = Vec::with_capacity(res.len());
        for (v, d, mm) in res {
            vals.push(v);
            diags.push(d);
            mats.push(mm);
        }
        (vals, diags, mats)
    }

    /// γ-free potential P(φ) = A − B on the grid.
    pub fn potential(&self, shape: &SlabShape) -> Result<SymGrid> {
        let u = self.check(shape)?;
        let dp = self.potential_change(shape, &u, false).0;
        let flat = flat_potential(self.params.kappa, shape.lambda);
        Ok(dp.map(|v| v + flat))
    }

    fn potential_change(&self, shape: &SlabShape, u: &SymGrid, keep: bool) -> (SymGrid, Option<Linearization>) {
        let n = self.n;
        let (smooth, waves, damp, damp_hat) = self.smooth_part(shape.lambda, u, keep);
        let lin = self.linear_part(&shape.u);
        let (vals, diags, mats) = self.local_part(shape, u, keep);
        let rem = fill_symmetric(n, &self.targets, &vals);
        let mut out = SymGrid::zeros(n);
        for idx in 0..n * n {
            out.values[idx] = smooth[idx] - lin.values[idx] - rem.values[idx];
        }
        let linearization = if keep {
            let (g1, g2) = self.spectral.gradient(&u.values);
            Some(Linearization {
                n,
                m: shape.u.k_max + 1,
                gamma: self.params.gamma,
                kappa: self.params.kappa,
                grad: (g1, g2),
                wave: waves,
                damp,
                damp_hat,
                targets: self.targets.clone(),
                local_diag: diags,
                local_mat: mats,
                spectral: Spectral::new(n),
            })
        } else {
            None
        };
        (out, linearization)
    }

    /// G(λ, u) = F(λ + u) − F(λ).
    pub fn residual(&self, shape: &SlabShape) -> Result<SymGrid> {
        let u = self.check(shape)?;
        let mc = mean_curvature_with(&self.spectral, &u);
        let (dp, _) = self.potential_change(shape, &u, false);
        Ok(mc.zip_with(&dp, |a, b| a + self.params.gamma * b))
    }

    /// Residual together with the linearization at the same shape.
    pub fn linearize(&self, shape: &SlabShape) -> Result<(SymGrid, Linearization)> {
        let u = self.check(shape)?;
        let mc = mean_curvature_with(&self.spectral, &u);
        let (dp, lin) = self.potential_change(shape, &u, true);
        Ok((mc.zip_with(&dp, |a, b| a + self.params.gamma * b), lin.unwrap()))
    }
}

fn mean_curvature_with(sp: &Spectral, u: &SymGrid) -> SymGrid {
    let (g1, g2) = sp.gradient(&u.values);
    let mut f1 = vec![0.0; g1.len()];
    let mut f2 = vec![0.0; g1.len()];
    for i in 0..g1.len() {
        let w = (1.0 + g1[i] * g1[i] + g2[i] * g2[i]).sqrt();
        f1[i] = g1[i] / w;
        f2[i] = g2[i] / w;
    }
    let div = sp.divergence(&f1, &f2);
    SymGrid { n: u.n, values: div.iter().map(|d| -d).collect() }
}

impl Linearization {
    /// DF(φ)[w] on the grid.
    pub fn apply(&self, w: &CosSpectrum) -> SymGrid {
        let n = self.n;
        let mut wfull = CosSpectrum::zeros(self.m - 1);
        for (idx, &(a, b)) in modes(w.k_max.min(self.m - 1)).iter().enumerate() {
            wfull.coeffs[mode_index(a, b)] = w.coeffs[idx];
        }
        let wg = synthesize_unchecked(&wfull, n);

        // linearized mean curvature
        let (g1, g2) = &self.grad;
        let (w1, w2) = self.spectral.gradient(&wg.values);
        let mut f1 = vec![0.0; n * n];
        let mut f2 = vec![0.0; n * n];
        for i in 0..n * n {
            let ww = (1.0 + g1[i] * g1[i] + g2[i] * g2[i]).sqrt();
            let dot = g1[i] * w1[i] + g2[i] * w2[i];
            let w3 = ww * ww * ww;
            f1[i] = w1[i] / ww - g1[i] * dot / w3;
            f2[i] = w2[i] / ww - g2[i] * dot / w3;
        }
        let div = self.spectral.divergence(&f1, &f2);

        // smooth part
        let cosk: Vec<Vec<f64>> = (0..n / 2)
            .map(|k| (0..n).map(|i| (k as f64 * grid_point(n, i)).cos()).collect())
            .collect();
        let inv = 1.0 / (n * n) as f64;
        let mut smooth = vec![0.0; n * n];
        for (t, wt) in self.wave.iter().enumerate() {
            let (c1, c2) = (&cosk[wt.k1], &cosk[wt.k2]);
            let d = &self.damp[t];
            let mut hat = 0.0;
            for i in 0..n {
                let mut r = 0.0;
                for j in 0..n {
                    r += wg.values[i * n + j] * d[i * n + j] * c2[j];
                }
                hat += c1[i] * r;
            }
            hat *= inv;
            let f = wt.pref * wt.beta;
            for i in 0..n {
                for j in 0..n {
                    let idx = i * n + j;
                    smooth[idx] += f * c1[i] * c2[j] * d[idx] * (wg.values[idx] * self.damp_hat[t] + hat);
                }
            }
        }

        // h·G part
        let mut lin = wfull.clone();
        for (idx, &(a, b)) in modes(wfull.k_max).iter().enumerate() {
            let beta = (self.kappa * self.kappa + (a * a + b * b) as f64).sqrt();
            lin.coeffs[idx] *= 2.0 * PI / self.kappa - 2.0 * PI / beta;
        }
        let lin = synthesize_unchecked(&lin, n);

        // local remainder
        let dense = wfull.dense();
        let vals: Vec<f64> = self
            .targets
            .iter()
            .enumerate()
            .map(|(p, &(i, j))| {
                let mat = &self.local_mat[p];
                let s: f64 = mat.iter().zip(&dense).map(|(a, b)| a * b).sum();
                self.local_diag[p] * wg.at(i, j) - s
            })
            .collect();
        let rem = fill_symmetric(n, &self.targets, &vals);

        let mut out = SymGrid::zeros(n);
        for idx in 0..n * n {
            out.values[idx] = -div[idx] + self.gamma * (smooth[idx] - lin.values[idx] - rem.values[idx]);
        }
        out
    }
}

/// −div(∇φ/√(1+|∇φ|²)).
pub fn mean_curvature_graph(shape: &SlabShape) -> SymGrid {
    mean_curvature_with(&Spectral::new(shape.n), &shape.u_grid())
}

/// γ-free Yukawa potential of the slab at its upper face.
pub fn yukawa_slab_potential(shape: &SlabShape, kappa: f64, quad: &QuadratureSpec) -> Result<SymGrid> {
    let p = SlabParams::new(kappa, 0.0)?;
    SlabOperator::new(p, shape.n, quad.clone())?.potential(shape)
}

/// G(λ, u) = F(λ + u) − F(λ).
pub fn residual_g(p: &SlabParams, lambda: f64, u: &SymGrid, quad: &QuadratureSpec) -> Result<SymGrid> {
    let shape = SlabShape::new(lambda, u)?;
    SlabOperator::new(*p, u.n, quad.clone())?.residual(&shape)
}

/// DF(φ)[w].
pub fn jacobian_action(p: &SlabParams, shape: &SlabShape, w: &SymGrid, quad: &QuadratureSpec) -> Result<SymGrid> {
    let ws = crate::periodic_field::analyze(w, shape.n / 2 - 1)?;
    let op = SlabOperator::new(*p, shape.n, quad.clone())?;
    let (_, lin) = op.linearize(shape)?;
    Ok(lin.apply(&ws))
}

/// Multiplies each coefficient by σ_{λ,γ}(|k|).
pub fn flat_action(p: &SlabParams, lambda: f64, spec: &CosSpectrum) -> Result<CosSpectrum> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let mut out = spec.clone();
    for (idx, &(a, b)) in modes(spec.k_max).iter().enumerate() {
        out.coeffs[idx] *= sigma_real(p, lambda, ((a * a + b * b) as f64).sqrt());
    }
    Ok(out)
}

/// Coefficients of a grid field on the band of `k_max`; the projection used by the solvers.
pub fn project(grid: &SymGrid, k_max: usize) -> CosSpectrum {
    analyze_unchecked(grid, k_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slab_spectrum::lambda_star;

    fn params() -> SlabParams {
        SlabParams::new(0.5, 0.18).unwrap()
    }

    fn bumpy(n: usize, s: f64) -> CosSpectrum {
        let mut u = CosSpectrum::zeros(n / 2 - 1);
        u.set(0, 1, 2.0 * PI * s);
        u.set(1, 1, 0.3 * s);
        u.set(0, 2, -0.2 * s);
        u.set(2, 3, 0.05 * s);
        u
    }

    #[test]
    fn flat_shape_gives_closed_form() {
        let n = 16;
        let op = SlabOperator::new(params(), n, QuadratureSpec::default_for(0.5)).unwrap();
        let shape = SlabShape::flat(1.0, n);
        let p = op.potential(&shape).unwrap();
        let expect = flat_potential(0.5, 1.0);
        assert!(p.values.iter().all(|v| (v - expect).abs() < 1e-13));
        assert_eq!(op.residual(&shape).unwrap().max_abs(), 0.0);
        assert!((flat_value(&params(), 1.0) - 2.859_646_037_470_375).abs() < 1e-12);
    }

    #[test]
    fn flat_linearization_is_diagonal() {
        let n = 16;
        let p = params();
        let ls = lambda_star(&p).unwrap();
        let op = SlabOperator::new(p, n, QuadratureSpec::default_for(0.5)).unwrap();
        let (_, lin) = op.linearize(&SlabShape::flat(ls, n)).unwrap();
        for &(a, b) in &[(0, 0), (0, 1), (1, 1), (2, 3), (0, 5)] {
            let w = CosSpectrum::unit(7, a, b);
            let out = project(&lin.apply(&w), 7);
            let sig = sigma_real(&p, ls, ((a * a + b * b) as f64).sqrt());
            let expect = w.scaled(sig);
            assert!(out.sub(&expect).norm2() < 1e-10, "({a},{b}) {} vs {sig}", out.get(a, b));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let n = 16;
        let p = params();
        let op = SlabOperator::new(p, n, QuadratureSpec::for_tolerance(0.5, 1e-8, 0.3)).unwrap();
        let base = bumpy(n, 0.05);
        let shape = SlabShape::from_spectrum(2.2, base.clone(), n).unwrap();
        let t0 = std::time::Instant::now();
        let (_, lin) = op.linearize(&shape).unwrap();
        println!("linearize {:?}", t0.elapsed());
        let mut w = CosSpectrum::zeros(7);
        w.set(0, 0, 0.4);
        w.set(1, 2, 1.0);
        w.set(0, 1, -0.7);
        let jw = lin.apply(&w);
        let h = 1e-4;
        let mut wf = CosSpectrum::zeros(n / 2 - 1);
        for (idx, &(a, b)) in modes(7).iter().enumerate() {
            wf.set(a, b, w.coeffs[idx]);
        }
        let plus = SlabShape::from_spectrum(2.2, base.add(&wf.scaled(h)), n).unwrap();
        let minus = SlabShape::from_spectrum(2.2, base.sub(&wf.scaled(h)), n).unwrap();
        let t0 = std::time::Instant::now();
        let gp = op.residual(&plus).unwrap();
        println!("residual {:?}", t0.elapsed());
        let gm = op.residual(&minus).unwrap();
        let fd = gp.zip_with(&gm, |a, b| (a - b) / (2.0 * h));
        let gap = fd.zip_with(&jw, |a, b| a - b).max_abs();
        println!("fd gap {gap:e} scale {}", jw.max_abs());
        assert!(gap < 1e-7);
    }
}
