//! Spectrum of the linearized slab operator: σ_{λ,γ}(ℓ), the γ window,
//! the bifurcation thickness λ_* and a spectral certificate.

use crate::error::{Error, Result};
use crate::quadrature::adaptive_with_breaks;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabParams {
    pub kappa: f64,
    pub gamma: f64,
}

impl SlabParams {
    /// γ = 0 is accepted (pure mean curvature); negative values are not.
    pub fn new(kappa: f64, gamma: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("gamma must be nonnegative, got {gamma}")));
        }
        Ok(SlabParams { kappa, gamma })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda must be positive, got {lambda}")))
    }
}

/// σ_{λ,γ} at a real frequency x ≥ 0.
pub fn sigma_real(p: &SlabParams, lambda: f64, x: f64) -> f64 {
    let k = p.kappa;
    let b = (k * k + x * x).sqrt();
    x * x
        - 2.0 * PI * p.gamma * (1.0 / k - 1.0 / b - (-2.0 * lambda * b).exp() / b - (-2.0 * lambda * k).exp() / k)
}

/// x-derivative of [`sigma_real`].
pub fn sigma_real_dx(p: &SlabParams, lambda: f64, x: f64) -> f64 {
    let k = p.kappa;
    let b = (k * k + x * x).sqrt();
    let b3 = b * b * b;
    2.0 * x - 2.0 * PI * p.gamma * (x / b3 + (-2.0 * lambda * b).exp() * x * (2.0 * lambda * b + 1.0) / b3)
}

pub fn sigma_closed(p: &SlabParams, lambda: f64, ell: u32) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(sigma_real(p, lambda, ell as f64))
}

/// ∂_λ σ_{λ,γ}(ℓ) = −4πγ(e^{−2λ√(κ²+ℓ²)} + e^{−2λκ}).
pub fn sigma_closed_dlambda(p: &SlabParams, lambda: f64, ell: u32) -> Result<f64> {
    check_lambda(lambda)?;
    let b = (p.kappa * p.kappa + (ell * ell) as f64).sqrt();
    Ok(-4.0 * PI * p.gamma * ((-2.0 * lambda * b).exp() + (-2.0 * lambda * p.kappa).exp()))
}

/// σ_{λ,γ}(|k|) from its defining plane integrals, by polar quadrature.
pub fn sigma_oracle(p: &SlabParams, lambda: f64, k: (i64, i64)) -> Result<f64> {
    check_lambda(lambda)?;
    let (k1, k2) = (k.0 as f64, k.1 as f64);
    let kn = (k1 * k1 + k2 * k2).sqrt();
    let kappa = p.kappa;
    let tol: f64 = 1e-13;
    let radius = (32.0 + tol.ln().abs()) / kappa;
    // exact for trigonometric polynomials of degree < m in θ; the integrand is entire
    let angular = |r: f64, sign: f64| -> f64 {
        let m = 2 * ((kn * r).ceil() as usize) + 40;
        let mut s = 0.0;
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            s += 1.0 + sign * (k1 * r * th.cos()).cos() * (k2 * r * th.sin()).cos();
        }
        s * 2.0 * PI / m as f64
    };
    let panels = ((radius * (kn.max(1.0))).ceil() as usize).clamp(8, 4000);
    let breaks: Vec<f64> = (0..=panels).map(|i| radius * i as f64 / panels as f64).collect();
    // (1 − Πcos) G_κ(|r|) r dr dθ; the r from the measure cancels the 1/r
    let mut near = |r: f64| (-kappa * r).exp() * angular(r, -1.0);
    let first = adaptive_with_breaks(&mut near, &breaks, tol, tol)?.value;
    let d2 = 4.0 * lambda * lambda;
    let mut far = |r: f64| {
        let d = (r * r + d2).sqrt();
        r * (-kappa * d).exp() / d * angular(r, 1.0)
    };
    let second = adaptive_with_breaks(&mut far, &breaks, tol, tol)?.value;
    Ok(kn * kn - p.gamma * first + p.gamma * second)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaWindow {
    pub lower: f64,
    pub upper: f64,
    pub nonempty: bool,
}

impl GammaWindow {
    pub fn contains(&self, gamma: f64) -> bool {
        self.lower < gamma && gamma < self.upper
    }
}

pub fn gamma_window(kappa: f64) -> Result<GammaWindow> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let b = (kappa * kappa + 1.0).sqrt();
    let lower = (0.5 / PI) / (1.0 / kappa - 1.0 / b);
    let upper = b * b * b / (2.0 * PI);
    Ok(GammaWindow { lower, upper, nonempty: lower < upper })
}

/// Unique λ with σ_{λ,γ}(1) = 0.
pub fn lambda_star(p: &SlabParams) -> Result<f64> {
    let limit = 1.0 - 2.0 * PI * p.gamma * (1.0 / p.kappa - 1.0 / (p.kappa * p.kappa + 1.0).sqrt());
    if limit >= 0.0 {
        return Err(Error::NoBifurcation { limit });
    }
    let f = |l: f64| sigma_real(p, l, 1.0);
    let mut lo = 1e-6;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoBifurcation { limit });
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() < 1e-14 {
            break;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = sigma_closed_dlambda(p, x, 1)?;
        let newton = x - fx / d;
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * x {
            break;
        }
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub params: SlabParams,
    pub window: GammaWindow,
    pub lambda_star: f64,
    /// σ_{λ_*,γ}(ℓ) for ℓ = 0..=ell_max.
    pub sigma_at: Vec<f64>,
    /// 4πγ e^{−2λ_*κ}/κ, the closed form of σ(0).
    pub sigma0_closed: f64,
    pub dlambda_sigma1: f64,
    pub kernel_simple: bool,
    pub range_coercive: bool,
    pub transversal: bool,
    pub monotone_g: bool,
    pub offending_ell: Option<u32>,
}

impl SpectrumReport {
    pub fn all_flags(&self) -> bool {
        self.kernel_simple && self.range_coercive && self.transversal && self.monotone_g
    }
}

pub fn spectral_certificate(p: &SlabParams, ell_max: u32) -> Result<SpectrumReport> {
    if ell_max < 8 {
        return Err(Error::Invalid(format!("ell_max must be at least 8, got {ell_max}")));
    }
    let window = gamma_window(p.kappa)?;
    if !window.nonempty {
        return Err(Error::EmptyWindow { kappa: p.kappa, lower: window.lower, upper: window.upper });
    }
    if !window.contains(p.gamma) {
        return Err(Error::GammaOutsideWindow { gamma: p.gamma, lower: window.lower, upper: window.upper });
    }
    let ls = lambda_star(p)?;
    let sigma_at: Vec<f64> = (0..=ell_max).map(|l| sigma_real(p, ls, l as f64)).collect();
    let sigma0_closed = 4.0 * PI * p.gamma * (-2.0 * ls * p.kappa).exp() / p.kappa;
    let dlambda_sigma1 = sigma_closed_dlambda(p, ls, 1)?;
    let mut offending = None;

    let kernel_simple = sigma_at[0] > 0.0 && sigma_at[1].abs() < 1e-12 && sigma_at[2..].iter().all(|&s| s > 0.0);
    if !kernel_simple {
        offending = Some(if sigma_at[0] <= 0.0 { 0 } else { 1 });
    }
    let mut range_coercive = true;
    for l in 1..ell_max as usize {
        if sigma_at[l + 1] <= sigma_at[l] {
            range_coercive = false;
            offending.get_or_insert(l as u32 + 1);
            break;
        }
    }
    // σ(ℓ)/ℓ² approaches 1 from below at rate O(ℓ^{-2})
    let tail = 2.0 * PI * p.gamma / p.kappa;
    for l in 2..=ell_max as usize {
        let lf = l as f64;
        let ratio = sigma_at[l] / (lf * lf);
        if !(ratio <= 1.0 + 1e-15 && 1.0 - ratio <= tail / (lf * lf)) {
            range_coercive = false;
            offending.get_or_insert(l as u32);
            break;
        }
    }
    let transversal = dlambda_sigma1 < 0.0;
    let mut monotone_g = true;
    let steps = 4 * ell_max;
    for j in 0..=steps {
        let x = 1.0 + (ell_max as f64 - 1.0) * j as f64 / steps as f64;
        if sigma_real_dx(p, ls, x) <= 0.0 {
            monotone_g = false;
            break;
        }
    }
    Ok(SpectrumReport {
        params: *p,
        window,
        lambda_star: ls,
        sigma_at,
        sigma0_closed,
        dlambda_sigma1,
        kernel_simple,
        range_coercive,
        transversal,
        monotone_g,
        offending_ell: offending,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SlabParams {
        SlabParams::new(0.5, 0.18).unwrap()
    }

    #[test]
    fn sigma_reference_value() {
        let s = sigma_closed(&base(), 1.0, 1).unwrap();
        assert!((s - 0.689_865_160_765_387).abs() < 1e-12);
    }

    #[test]
    fn zero_gamma_gives_laplacian() {
        let p = SlabParams::new(0.7, 0.0).unwrap();
        for l in 0..10 {
            assert_eq!(sigma_closed(&p, 1.3, l).unwrap(), (l * l) as f64);
        }
    }

    #[test]
    fn window_values() {
        let w = gamma_window(0.5).unwrap();
        assert!((w.lower - 0.143_956_998_396_008_15).abs() < 1e-12);
        assert!((w.upper - 0.222_425_794_817_867_84).abs() < 1e-12);
        assert!(w.nonempty);
        let w = gamma_window(1.0).unwrap();
        assert!((w.lower - 0.543_388_965_223_067_1).abs() < 1e-12);
        assert!((w.upper - 0.450_158_158_078_553_1).abs() < 1e-12);
        assert!(!w.nonempty);
    }

    #[test]
    fn lambda_star_reference() {
        let ls = lambda_star(&base()).unwrap();
        assert!((ls - 2.229_069_668_813_971).abs() < 1e-10);
        assert!(sigma_closed(&base(), ls, 1).unwrap().abs() < 1e-12);
        let s0 = sigma_closed(&base(), ls, 0).unwrap();
        assert!((s0 - 0.486_899_925_220_355_6).abs() < 1e-10);
    }

    #[test]
    fn below_window_has_no_bifurcation() {
        let p = SlabParams::new(0.5, 0.10).unwrap();
        match lambda_star(&p) {
            Err(Error::NoBifurcation { limit }) => {
                let expect = 1.0 - 2.0 * PI * 0.1 * (2.0 - 1.0 / 1.25f64.sqrt());
                assert!((limit - expect).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn certificate_flags() {
        let r = spectral_certificate(&base(), 16).unwrap();
        assert!(r.all_flags(), "{r:?}");
        assert!(r.sigma_at[2] > 0.0);
        assert!(spectral_certificate(&SlabParams::new(0.5, 0.0).unwrap(), 16).is_err());
        assert!(matches!(
            spectral_certificate(&SlabParams::new(1.0, 0.5).unwrap(), 16),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn oracle_agrees_with_closed_form() {
        let p = base();
        for k in [(0, 0), (1, 0), (3, 4)] {
            let l = ((k.0 * k.0 + k.1 * k.1) as f64).sqrt() as u32;
            let a = sigma_oracle(&p, 1.0, k).unwrap();
            let b = sigma_closed(&p, 1.0, l).unwrap();
            assert!(((a - b) / b).abs() < 1e-8, "{k:?}: {a} vs {b}");
        }
        let z = SlabParams::new(0.5, 0.0).unwrap();
        assert_eq!(sigma_oracle(&z, 1.0, (0, 0)).unwrap(), 0.0);
    }
}
