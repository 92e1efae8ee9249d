use pattern_forge::periodic_field::{analyze, grid_point, synthesize, CosSpectrum, SymGrid};
use pattern_forge::quadrature::{adaptive, adaptive_with_breaks};
use pattern_forge::slab_operator::{
    flat_action, mean_curvature_graph, residual_g, yukawa_slab_potential, QuadratureSpec, SlabOperator, SlabShape,
};
use pattern_forge::slab_spectrum::{lambda_star, sigma_real, SlabParams};
use std::f64::consts::PI;

fn field(n: usize, s: f64) -> SymGrid {
    SymGrid::from_fn(n, |a, b| s * (a.cos() + b.cos()) + 0.3 * s * a.cos() * b.cos())
}

fn psi(kappa: f64, a: f64, h: f64) -> f64 {
    if h == 0.0 {
        return 0.0;
    }
    let f = |w: f64| {
        let d = (a * a + w * w).sqrt();
        (-kappa * d).exp() / d
    };
    let lo = h.min(0.0);
    let hi = h.max(0.0);
    let sign = h.signum();
    let mut g = f;
    let breaks = [lo, lo + 1e-3 * (hi - lo), hi];
    let breaks: Vec<f64> = if sign > 0.0 { breaks.to_vec() } else { vec![lo, hi - 1e-3 * (hi - lo), hi] };
    let v = adaptive_with_breaks(&mut g, &breaks, 1e-14, 1e-12).unwrap().value;
    sign * v
}

// Brute-force ∫_{R²} [Ψ(|r|, φ(t)+φ(t−r)) − Ψ(|r|, φ(t)−φ(t−r))] dr.
fn brute_potential(kappa: f64, phi: &dyn Fn(f64, f64) -> f64, t: (f64, f64)) -> f64 {
    let pt = phi(t.0, t.1);
    let radius = (26.0f64 + 30.0) / kappa;
    let ring = |a: f64| -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        let m = 2 * (6.0 * a).ceil() as usize + 64;
        let mut s = 0.0;
        for l in 0..m {
            let th = 2.0 * PI * l as f64 / m as f64;
            let ps = phi(t.0 - a * th.cos(), t.1 - a * th.sin());
            s += psi(kappa, a, pt + ps) - psi(kappa, a, pt - ps);
        }
        a * s * 2.0 * PI / m as f64
    };
    let mut breaks = vec![0.0, 1e-4, 1e-2, 0.1, 0.5];
    let mut x = 1.0;
    while x < radius {
        breaks.push(x);
        x += 1.0;
    }
    breaks.push(radius);
    let mut f = ring;
    adaptive_with_breaks(&mut f, &breaks, 1e-11, 1e-11).unwrap().value
}

#[test]
fn potential_matches_brute_force_integral() {
    let kappa = 0.5;
    let n = 16;
    let s = 0.08;
    let lambda = 0.9;
    let u = field(n, s);
    let shape = SlabShape::new(lambda, &u).unwrap();
    let quad = QuadratureSpec::for_tolerance(kappa, 1e-12, 0.2);
    let p = yukawa_slab_potential(&shape, kappa, &quad).unwrap();
    let phi = |a: f64, b: f64| lambda + s * (a.cos() + b.cos()) + 0.3 * s * a.cos() * b.cos();
    for &(i, j) in &[(8usize, 8usize), (10, 13), (0, 4)] {
        let t = (grid_point(n, i), grid_point(n, j));
        let exact = brute_potential(kappa, &phi, t);
        let got = p.at(i, j);
        assert!(((got - exact) / exact).abs() < 1e-7, "at {t:?}: {got} vs {exact}");
    }
}

#[test]
fn flat_potential_has_closed_form_value() {
    // the γ-free flat potential equals ∫_0^{2λ} 2π e^{−κw}/κ dw
    let kappa = 0.5;
    let lambda = 1.0;
    let shape = SlabShape::flat(lambda, 16);
    let p = yukawa_slab_potential(&shape, kappa, &QuadratureSpec::default_for(kappa)).unwrap();
    let by_quad = adaptive(|w: f64| 2.0 * PI * (-kappa * w).exp() / kappa, 0.0, 2.0 * lambda, 1e-14, 1e-14)
        .unwrap()
        .value;
    assert!((p.at(3, 5) - by_quad).abs() < 1e-12);
    assert!(p.symmetry_defect() < 1e-14);
}

#[test]
fn mean_curvature_linear_response() {
    let n = 32;
    let eps = 1e-4;
    let shape = SlabShape::new(1.0, &SymGrid::from_fn(n, |a, b| eps * (a.cos() + b.cos()))).unwrap();
    let mc = mean_curvature_graph(&shape);
    let lin = SymGrid::from_fn(n, |a, b| eps * (a.cos() + b.cos()));
    assert!(mc.zip_with(&lin, |x, y| x - y).max_abs() < 1e-11);
    assert_eq!(mean_curvature_graph(&SlabShape::flat(2.0, n)).max_abs(), 0.0);
}

// Area A(φ) = ∫ √(1+|∇φ|²) dt; its first variation is ∫ H·w dt.
#[test]
fn mean_curvature_is_area_gradient() {
    let n = 32;
    let base = |a: f64, b: f64| 0.3 * (a.cos() + b.cos()) + 0.1 * (2.0 * a).cos() * b.cos() + 0.1 * a.cos() * (2.0 * b).cos();
    let w = |a: f64, b: f64| (a.cos() * b.cos()) + 0.5 * ((3.0 * a).cos() + (3.0 * b).cos());
    let area = |t: f64| {
        // analytic gradient of base + t w
        let h = 2.0 * PI / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (grid_point(n, i), grid_point(n, j));
                let g1 = -0.3 * a.sin() - 0.2 * (2.0 * a).sin() * b.cos() - 0.1 * a.sin() * (2.0 * b).cos()
                    + t * (-a.sin() * b.cos() - 1.5 * (3.0 * a).sin());
                let g2 = -0.3 * b.sin() - 0.1 * (2.0 * a).cos() * b.sin() - 0.2 * a.cos() * (2.0 * b).sin()
                    + t * (-a.cos() * b.sin() - 1.5 * (3.0 * b).sin());
                s += (1.0 + g1 * g1 + g2 * g2).sqrt();
            }
        }
        s * h * h
    };
    let dt = 1e-4;
    let fd = (area(dt) - area(-dt)) / (2.0 * dt);
    let shape = SlabShape::new(2.0, &SymGrid::from_fn(n, base)).unwrap();
    let mc = mean_curvature_graph(&shape);
    let wg = SymGrid::from_fn(n, w);
    let pairing = pattern_forge::periodic_field::inner(&mc, &wg);
    assert!(((pairing - fd) / fd).abs() < 1e-6, "{pairing} vs {fd}");
}

#[test]
fn residual_vanishes_at_zero_and_inherits_symmetry() {
    let p = SlabParams::new(0.5, 0.18).unwrap();
    let quad = QuadratureSpec::default_for(0.5);
    let z = residual_g(&p, 2.0, &SymGrid::zeros(16), &quad).unwrap();
    assert_eq!(z.max_abs(), 0.0);
    let g = residual_g(&p, 2.0, &field(16, 0.05), &quad).unwrap();
    assert!(g.symmetry_defect() < 1e-12);
}

#[test]
fn pure_curvature_residual_is_mean_free() {
    let p = SlabParams::new(0.5, 0.0).unwrap();
    let g = residual_g(&p, 1.0, &field(16, 0.2), &QuadratureSpec::default_for(0.5)).unwrap();
    let mean: f64 = g.values.iter().sum::<f64>() / g.values.len() as f64;
    assert!(mean.abs() < 1e-13);
}

#[test]
fn half_period_shift_flips_the_kernel_mode() {
    let p = SlabParams::new(0.5, 0.18).unwrap();
    let n = 16;
    let op = SlabOperator::new(p, n, QuadratureSpec::default_for(0.5)).unwrap();
    let u = field(n, 0.05);
    let a = op.residual(&SlabShape::new(2.1, &u).unwrap()).unwrap();
    let b = op.residual(&SlabShape::new(2.1, &u.shift_half_period()).unwrap()).unwrap();
    assert!(a.shift_half_period().zip_with(&b, |x, y| x - y).max_abs() < 1e-12);
}

#[test]
fn small_amplitude_residual_is_linear() {
    let p = SlabParams::new(0.5, 0.18).unwrap();
    let ls = lambda_star(&p).unwrap();
    let n = 16;
    let s = 1e-3;
    let u = SymGrid::from_fn(n, |a, b| s * (a.cos() + b.cos()));
    let g = residual_g(&p, ls, &u, &QuadratureSpec::default_for(0.5)).unwrap();
    assert!(g.max_abs() < 1e-2);
    // the kernel mode is annihilated to first order
    let c = analyze(&g.symmetrize(), 7).unwrap();
    assert!((c.get(0, 1) / s).abs() < 1e-2);
}

#[test]
fn flat_action_examples() {
    let p = SlabParams::new(0.5, 0.18).unwrap();
    let ls = lambda_star(&p).unwrap();
    let e10 = CosSpectrum::unit(4, 1, 0);
    assert!(flat_action(&p, ls, &e10).unwrap().norm2() < 1e-12);
    let e00 = CosSpectrum::unit(4, 0, 0);
    let out = flat_action(&p, ls, &e00).unwrap();
    assert!((out.get(0, 0) - 0.486_899_925_220_355_6).abs() < 1e-10);
    let z = SlabParams::new(0.5, 0.0).unwrap();
    let mut c = CosSpectrum::zeros(4);
    c.set(2, 3, 1.5);
    assert!((flat_action(&z, 1.0, &c).unwrap().get(2, 3) - 1.5 * 13.0).abs() < 1e-12);
    let _ = synthesize(&c, 16).unwrap();
    assert!(sigma_real(&p, ls, 2.0) > 0.0);
}
