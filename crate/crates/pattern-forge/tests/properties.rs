use pattern_forge::kernels::{k0, k0_k1, k1};
use pattern_forge::lattice_patterns::harmonics::{norm, HarmonicBasis};
use pattern_forge::lattice_patterns::lattice::{harmonic_apply, harmonic_inverse, BravaisLattice};
use pattern_forge::lattice_patterns::spectrum::LatticeSpectrum;
use pattern_forge::periodic_field::{analyze, modes, synthesize, CosSpectrum, SymGrid};
use pattern_forge::slab_spectrum::{gamma_window, lambda_star, sigma_real, SlabParams};
use proptest::prelude::*;
use std::sync::OnceLock;

fn spectrum(dim: usize) -> &'static LatticeSpectrum {
    static S2: OnceLock<LatticeSpectrum> = OnceLock::new();
    static S3: OnceLock<LatticeSpectrum> = OnceLock::new();
    if dim == 2 {
        S2.get_or_init(|| LatticeSpectrum::new(2, 0.8, 16).unwrap())
    } else {
        S3.get_or_init(|| LatticeSpectrum::new(3, 0.8, 16).unwrap())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn k_recurrence_and_wronskian_sign(x in 0.05f64..60.0) {
        // K₁' = −K₀ − K₁/x, checked by central differences
        let h = 1e-5 * x;
        let d = (k1(x + h) - k1(x - h)) / (2.0 * h);
        prop_assert!((d + k0(x) + k1(x) / x).abs() < 1e-6 * (k0(x) + k1(x) / x));
        let (a, b) = k0_k1(x);
        prop_assert!(a > 0.0 && b > a);
    }

    #[test]
    fn cos_spectrum_round_trip(coeffs in prop::collection::vec(-1.0f64..1.0, 36)) {
        let mut s = CosSpectrum::zeros(7);
        for (v, &(k1, k2)) in coeffs.iter().zip(modes(7).iter()) {
            s.set(k1, k2, *v);
        }
        let g = synthesize(&s, 32).unwrap();
        prop_assert!(g.symmetry_defect() < 1e-13);
        let back = analyze(&g, 7).unwrap();
        prop_assert!(back.sub(&s).norm2() < 1e-12);
    }

    #[test]
    fn symmetrize_is_idempotent(vals in prop::collection::vec(-1.0f64..1.0, 16 * 16)) {
        let g = SymGrid::new(16, vals).unwrap().symmetrize();
        prop_assert!(g.symmetry_defect() < 1e-15);
        prop_assert!(g.symmetrize().zip_with(&g, |a, b| a - b).max_abs() < 1e-15);
        let twice = g.shift_half_period().shift_half_period();
        prop_assert!(twice.zip_with(&g, |a, b| a - b).max_abs() < 1e-15);
    }

    #[test]
    fn slab_sigma_vanishes_at_one(kappa in 0.2f64..0.75, t in 0.05f64..0.95) {
        let w = gamma_window(kappa).unwrap();
        prop_assume!(w.nonempty);
        let gamma = w.lower + t * (w.upper - w.lower);
        let p = SlabParams::new(kappa, gamma).unwrap();
        let ls = lambda_star(&p).unwrap();
        prop_assert!(sigma_real(&p, ls, 1.0).abs() < 1e-10);
    }

    #[test]
    fn lattice_sigma_one_is_zero(dim in 2usize..=3, gamma in 0.0f64..5.0) {
        prop_assert!(spectrum(dim).sigma(gamma, 1).abs() < 1e-10);
    }

    #[test]
    fn harmonic_inverse_round_trip(dim in 2usize..=3, seed in prop::collection::vec(-1.0f64..1.0, 81), t in 0.05f64..0.95) {
        let b = HarmonicBasis::new(dim, 8).unwrap();
        let sp = spectrum(dim);
        let g = t * sp.gamma_n();
        let mut f = vec![0.0; b.len()];
        for i in b.even_modes() {
            f[i] = seed[i % seed.len()];
        }
        let back = harmonic_apply(&b, sp, g, &harmonic_inverse(&b, sp, g, &f).unwrap());
        for (a, c) in back.iter().zip(&f) {
            prop_assert!((a - c).abs() < 1e-10);
        }
    }

    #[test]
    fn lattice_enumeration_is_symmetric(a in 0.6f64..2.0, bx in -1.0f64..1.0, by in 0.6f64..2.0, r in 1.0f64..6.0) {
        let l = BravaisLattice::new(3, vec![[a, 0.0, 0.0], [bx, by, 0.0]]).unwrap();
        let pts = l.points_within(r);
        for p in &pts {
            prop_assert!(norm(p) <= r && norm(p) > 0.0);
            prop_assert!(pts.iter().any(|q| (p[0] + q[0]).abs() + (p[1] + q[1]).abs() < 1e-12));
        }
    }
}
