use pattern_forge::lamellae::{p_max_for, solve_lamellae, stack_interaction, StackInteraction};
use pattern_forge::periodic_field::{grid_point, SymGrid};
use pattern_forge::quadrature::GaussRule;
use pattern_forge::slab_branch::{BranchConfig, BranchSolver};
use pattern_forge::slab_operator::SlabShape;
use pattern_forge::slab_spectrum::SlabParams;
use std::f64::consts::PI;

fn phi(a: f64, b: f64) -> f64 {
    2.0 + 0.1 * (a.cos() + b.cos()) + 0.03 * a.cos() * b.cos()
}

// Direct polar quadrature of Σ_{0<|p|≤p_max} ∫_{R²} ∫_{−φ(s)}^{φ(s)} G_κ dz ds at one target.
fn brute_stack(kappa: f64, eps: f64, p_max: i32, t: (f64, f64)) -> f64 {
    let zt = phi(t.0, t.1);
    let radial = GaussRule::new(10).composite(0.0, 60.0 / kappa, 240);
    let inner = GaussRule::new(20);
    let mut total = 0.0;
    for (a, wa) in radial {
        let m = 2 * (2.0 * a).ceil() as usize + 48;
        let mut ring = 0.0;
        for l in 0..m {
            let th = 2.0 * PI * l as f64 / m as f64;
            let ps = phi(t.0 - a * th.cos(), t.1 - a * th.sin());
            for p in (-p_max..=p_max).filter(|p| *p != 0) {
                let c = p as f64 / eps;
                ring += inner.integrate(-ps, ps, |z| {
                    let d = (a * a + (zt - z - c).powi(2)).sqrt();
                    (-kappa * d).exp() / d
                });
            }
        }
        total += wa * a * ring * 2.0 * PI / m as f64;
    }
    total
}

#[test]
fn stack_sum_matches_direct_integral() {
    let n = 16;
    let shape = SlabShape::new(2.0, &SymGrid::from_fn(n, |a, b| phi(a, b) - 2.0)).unwrap();
    let f = stack_interaction(&shape, 0.5, 0.1, 3).unwrap();
    for &(i, j) in &[(8usize, 8usize), (2, 11)] {
        let t = (grid_point(n, i), grid_point(n, j));
        let exact = brute_stack(0.5, 0.1, 3, t);
        let rel = ((f.at(i, j) - exact) / exact).abs();
        assert!(rel < 1e-9, "{} vs {exact} ({rel:e})", f.at(i, j));
    }
}

#[test]
fn flat_stack_is_log_linear_in_inverse_epsilon() {
    let lambda = 2.229;
    let kappa = 0.5;
    let pts: Vec<(f64, f64)> = [0.02, 0.04, 0.06, 0.08]
        .iter()
        .map(|&e| {
            let pm = p_max_for(kappa, e, lambda, 1e-14).unwrap();
            let st = StackInteraction::new(kappa, e, pm, 16);
            (1.0 / e, st.evaluate(&SymGrid::constant(16, lambda), pattern_forge::lamellae::Face::Upper).unwrap().max_abs().ln())
        })
        .collect();
    // slope between the two smallest ε is −κ up to e^{−κ/ε} corrections
    let slope = (pts[1].1 - pts[0].1) / (pts[1].0 - pts[0].0);
    assert!((slope + kappa).abs() < 1e-6, "{slope}");
}

#[test]
fn coarse_lamellae_solve() {
    let p = SlabParams::new(0.5, 0.18).unwrap();
    let cfg = BranchConfig::new(0.5, 16, 7);
    let solver = BranchSolver::new(p, cfg.clone()).unwrap();
    let s = 0.05;
    let slab = solver.solve(s, (solver.lambda_star, &pattern_forge::periodic_field::CosSpectrum::zeros(7))).unwrap();
    let zero = solve_lamellae(&p, 0.0, s, &slab, &cfg).unwrap();
    assert!((zero.lambda_eps_s - slab.lambda_s).abs() < 1e-12);
    assert!((zero.delta - slab.lambda_s / solver.lambda_star).abs() < 1e-12);
    let a = solve_lamellae(&p, 0.05, s, &slab, &cfg).unwrap();
    let b = solve_lamellae(&p, -0.05, s, &slab, &cfg).unwrap();
    assert!(a.residual_inf < 1e-8);
    assert_eq!(a.delta, b.delta);
    assert_eq!(a.v.get(0, 1), 0.0);
    assert!(a.delta != zero.delta);
    // the shift is of the order of the nearest-image coupling e^{−κ(1/ε − 2 max φ)}
    let dd = (a.delta - zero.delta).abs();
    assert!(dd < 10.0 * (-0.5f64 * (20.0 - 2.0 * 2.4)).exp(), "{dd:e}");
}
