//! Yukawa kernels, modified Bessel functions K0/K1 and the integral
//! identities they satisfy.

use crate::error::{Error, Result};
use crate::quadrature::adaptive_with_breaks;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Beyond this argument e^{-x} is zero in double precision.
pub const UNDERFLOW_X: f64 = 745.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub kappa: f64,
}

impl KernelParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        Ok(KernelParams { kappa })
    }
}

/// e^{-κr}/r.
pub fn yukawa(kappa: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("yukawa needs r > 0, got {r}")));
    }
    Ok(yukawa_unchecked(kappa, r))
}

#[inline]
pub fn yukawa_unchecked(kappa: f64, r: f64) -> f64 {
    (-kappa * r).exp() / r
}

/// Value of K_ν together with the underflow flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselValue {
    pub value: f64,
    pub underflow: bool,
}

/// K_0(x) or K_1(x) for x > 0.
pub fn bessel_k(order: u8, x: f64) -> Result<BesselValue> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("bessel_k needs x > 0, got {x}")));
    }
    if order > 1 {
        return Err(Error::Domain(format!("only orders 0 and 1 are supported, got {order}")));
    }
    if x > UNDERFLOW_X {
        return Ok(BesselValue { value: 0.0, underflow: true });
    }
    let (k0, k1) = k0_k1(x);
    Ok(BesselValue { value: if order == 0 { k0 } else { k1 }, underflow: false })
}

#[inline]
pub fn k0(x: f64) -> f64 {
    k0_k1(x).0
}

#[inline]
pub fn k1(x: f64) -> f64 {
    k0_k1(x).1
}

/// (K_0(x), K_1(x)) for x > 0; zeros past the underflow threshold.
pub fn k0_k1(x: f64) -> (f64, f64) {
    if x > UNDERFLOW_X {
        (0.0, 0.0)
    } else if x < 2.0 {
        k_series(x)
    } else {
        k_steed(x)
    }
}

fn k_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let l = (0.5 * x).ln();
    // I0, I1 and the harmonic-number series share the same powers of y.
    let mut term = 1.0; // y^k / (k!)^2
    let mut i0 = 0.0;
    let mut i1s = 0.0; // Σ y^k/(k!(k+1)!)
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut h = 0.0; // H_k
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            term *= y / (kf * kf);
            h += 1.0 / kf;
        }
        let t1 = term / (kf + 1.0);
        i0 += term;
        i1s += t1;
        s0 += term * h;
        // ψ(k+1)+ψ(k+2) = 2H_k + 1/(k+1) - 2γ
        s1 += t1 * (2.0 * h + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA);
        if term < 1e-18 * i0 {
            break;
        }
    }
    let i1 = 0.5 * x * i1s;
    let k0 = -(l + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + l * i1 - 0.25 * x * s1;
    (k0, k1)
}

// Steed's continued fraction for K_ν with ν = 0 (Temme's CF2).
fn k_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..20_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = ((PI / (2.0 * x)).ln() * 0.5 - x - s.ln()).exp();
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// The kernel G_{κ,N}: 2K_0(κr) in the plane, e^{-κr}/r in space.
pub fn g_kn(dimension: usize, kappa: f64, r: f64) -> Result<f64> {
    if dimension != 2 && dimension != 3 {
        return Err(Error::Domain(format!("dimension must be 2 or 3, got {dimension}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("g_kn needs r > 0, got {r}")));
    }
    Ok(g_kn_unchecked(dimension, kappa, r))
}

#[inline]
pub fn g_kn_unchecked(dimension: usize, kappa: f64, r: f64) -> f64 {
    if dimension == 2 {
        2.0 * k0(kappa * r)
    } else {
        yukawa_unchecked(kappa, r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentityId {
    CosYukawaLine,
    CosK0Line,
    YukawaPlaneMass,
    CosK0Shifted,
    YukawaPlaneShifted,
}

impl IdentityId {
    pub const ALL: [IdentityId; 5] = [
        IdentityId::CosYukawaLine,
        IdentityId::CosK0Line,
        IdentityId::YukawaPlaneMass,
        IdentityId::CosK0Shifted,
        IdentityId::YukawaPlaneShifted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityId::CosYukawaLine => "cos_yukawa_line",
            IdentityId::CosK0Line => "cos_k0_line",
            IdentityId::YukawaPlaneMass => "yukawa_plane_mass",
            IdentityId::CosK0Shifted => "cos_k0_shifted",
            IdentityId::YukawaPlaneShifted => "yukawa_plane_shifted",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub id: IdentityId,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    /// None when the quadrature failed to converge.
    pub lhs: Option<f64>,
    pub rhs: f64,
    pub residual: f64,
    pub error: Option<String>,
}

const QUAD_TOL: f64 = 1e-13;

/// Truncation radius so that e^{-decay·R} is below the tolerance.
fn truncation(decay: f64, tol: f64) -> f64 {
    (30.0 + tol.ln().abs()) / decay
}

// ∫_0^R f with break points every `step`, so oscillation is resolved from the start.
fn half_line<F: FnMut(f64) -> f64>(mut f: F, decay: f64, omega: f64, scale: f64) -> Result<f64> {
    let r = truncation(decay, QUAD_TOL);
    let step = (PI / omega.max(1e-3)).min(1.0 / decay).min(r);
    let panels = ((r / step).ceil() as usize).clamp(1, 2000);
    let mut breaks: Vec<f64> = (0..=panels).map(|i| r * i as f64 / panels as f64).collect();
    breaks.insert(1, breaks[1] * 1e-3);
    let out = adaptive_with_breaks(&mut f, &breaks, QUAD_TOL * scale, QUAD_TOL)?;
    Ok(out.value)
}

fn report(id: IdentityId, kappa: f64, alpha: f64, beta: f64, delta: f64, lhs: Result<f64>, rhs: f64) -> IdentityReport {
    match lhs {
        Ok(v) => IdentityReport {
            id,
            kappa,
            alpha,
            beta,
            delta,
            lhs: Some(v),
            rhs,
            residual: (v - rhs).abs() / rhs.abs().max(1.0),
            error: None,
        },
        Err(e) => IdentityReport {
            id,
            kappa,
            alpha,
            beta,
            delta,
            lhs: None,
            rhs,
            residual: f64::INFINITY,
            error: Some(e.to_string()),
        },
    }
}

/// Evaluates the five line/plane integral identities of the Yukawa and K_0
/// kernels by quadrature and compares them to their closed forms.
pub fn identity_suite(kappa: f64, alpha: f64, beta: f64, delta: f64) -> Result<Vec<IdentityReport>> {
    KernelParams::new(kappa)?;
    if alpha < 0.0 || beta < 0.0 || delta < 0.0 {
        return Err(Error::Domain("alpha, beta, delta must be nonnegative".into()));
    }
    let mut out = Vec::with_capacity(5);

    // ∫_R cos(βr) G_κ(√(r²+α²)) dr = 2K_0(α√(κ²+β²))
    {
        let rhs = 2.0 * k0(alpha * (kappa * kappa + beta * beta).sqrt());
        let lhs = if alpha > 0.0 {
            half_line(
                |r| {
                    let d = (r * r + alpha * alpha).sqrt();
                    2.0 * (beta * r).cos() * yukawa_unchecked(kappa, d)
                },
                kappa,
                beta,
                rhs.abs(),
            )
        } else {
            Err(Error::Domain("alpha must be positive for this identity".into()))
        };
        out.push(report(IdentityId::CosYukawaLine, kappa, alpha, beta, delta, lhs, rhs));
    }

    // ∫_R cos(βr) K_0(r√(κ²+α²)) dr = π/√(κ²+β²+α²)
    {
        let c = (kappa * kappa + alpha * alpha).sqrt();
        let rhs = PI / (kappa * kappa + beta * beta + alpha * alpha).sqrt();
        let lhs = half_line(|r| if r > 0.0 { 2.0 * (beta * r).cos() * k0(c * r) } else { 0.0 }, c, beta, rhs);
        out.push(report(IdentityId::CosK0Line, kappa, alpha, beta, delta, lhs, rhs));
    }

    // ∫_{R²} G_κ(|x|) dx = 2π/κ
    {
        let rhs = 2.0 * PI / kappa;
        let lhs = half_line(|r| if r > 0.0 { 2.0 * PI * r * yukawa_unchecked(kappa, r) } else { 2.0 * PI }, kappa, 0.0, rhs);
        out.push(report(IdentityId::YukawaPlaneMass, kappa, alpha, beta, delta, lhs, rhs));
    }

    // ∫_R cos(βr) K_0(√(r²+δ²)√(α²+κ²)) dr = π e^{-δ√(β²+α²+κ²)}/√(β²+α²+κ²)
    {
        let c = (kappa * kappa + alpha * alpha).sqrt();
        let m = (beta * beta + alpha * alpha + kappa * kappa).sqrt();
        let rhs = PI * (-delta * m).exp() / m;
        let lhs = half_line(
            |r| {
                let d = (r * r + delta * delta).sqrt();
                if d > 0.0 {
                    2.0 * (beta * r).cos() * k0(c * d)
                } else {
                    0.0
                }
            },
            c,
            beta,
            rhs,
        );
        out.push(report(IdentityId::CosK0Shifted, kappa, alpha, beta, delta, lhs, rhs));
    }

    // ∫_{R²} G_κ(√(|x|²+δ²)) dx = 2π e^{-δκ}/κ
    {
        let rhs = 2.0 * PI * (-delta * kappa).exp() / kappa;
        let lhs = half_line(
            |r| {
                let d = (r * r + delta * delta).sqrt();
                if d > 0.0 {
                    2.0 * PI * r * yukawa_unchecked(kappa, d)
                } else {
                    2.0 * PI
                }
            },
            kappa,
            0.0,
            rhs,
        );
        out.push(report(IdentityId::YukawaPlaneShifted, kappa, alpha, beta, delta, lhs, rhs));
    }
    Ok(out)
}
