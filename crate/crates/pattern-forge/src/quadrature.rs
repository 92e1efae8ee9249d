//! Gauss–Legendre rules and an adaptive Gauss–Kronrod integrator.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A Gauss–Legendre rule that can be mapped onto any interval.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussRule { nodes, weights }
    }

    /// Nodes and weights on [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule on [a, b] split into `panels` equal pieces.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let lo = a + h * p as f64;
            out.extend(self.on(lo, lo + h));
        }
        out
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration on [a, b].
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol*|I|)`.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    adaptive_with_breaks(&mut f, &[a, b], abs_tol, rel_tol)
}

/// Same as [`adaptive`] but starting from the given break points.
pub fn adaptive_with_breaks<F: FnMut(f64) -> f64>(
    f: &mut F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    const MAX_INTERVALS: usize = 4000;
    let mut pieces: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let error: f64 = pieces.iter().map(|p| p.3).sum();
        let target = abs_tol.max(rel_tol * value.abs());
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature { achieved: error, target });
        }
        if error <= target {
            return Ok(Integral { value, error });
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { achieved: error, target });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature { achieved: error, target });
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        let r = adaptive(|x: f64| -x.ln(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reports_failure() {
        let r = adaptive(|x: f64| 1.0 / x, 0.0, 1.0, 1e-12, 1e-12);
        assert!(r.is_err());
    }
}
