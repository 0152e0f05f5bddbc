use flatlens::retrieval::{retrieve_params, slab_sparams, stacked_sparams, Layer};
use flatlens::wavelength_mm;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn round_trip_recovers_material(
        eps in 1.0f64..16.0,
        f in 30.0f64..40.0,
        frac in 0.01f64..1.0,
    ) {
        let t = frac * wavelength_mm(f) / eps.sqrt() / 8.0;
        let r = slab_sparams(c(eps), c(1.0), t, f).unwrap();
        prop_assume!(r.s21.norm() > 1e-6);
        let p = retrieve_params(&r, None).unwrap();
        prop_assert!((p.eps - eps).norm() < 1e-6, "{:?}", p);
        prop_assert!((p.mu - 1.0).norm() < 1e-6);
        // Lossless input: real index, real positive impedance.
        prop_assert!(p.n.im.abs() < 1e-9 && p.z.im.abs() < 1e-9 && p.z.re > 0.0);
    }

    #[test]
    fn lossless_slab_conserves_energy(
        eps in 1.0f64..16.0,
        mu in 0.5f64..4.0,
        t in 0.01f64..10.0,
        f in 1.0f64..100.0,
    ) {
        let r = slab_sparams(c(eps), c(mu), t, f).unwrap();
        prop_assert!((r.s11.norm_sqr() + r.s21.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stack_transmission_is_reciprocal(
        layers in prop::collection::vec((1.0f64..16.0, 0.05f64..1.0), 1..8),
        f in 30.0f64..40.0,
    ) {
        let fwd: Vec<Layer> = layers
            .iter()
            .map(|&(e, t)| Layer { eps: c(e), mu: c(1.0), thickness_mm: t })
            .collect();
        let mut rev = fwd.clone();
        rev.reverse();
        let a = stacked_sparams(&fwd, f).unwrap();
        let b = stacked_sparams(&rev, f).unwrap();
        prop_assert!((a.s21 - b.s21).norm() < 1e-12);
        prop_assert!((a.s11.norm_sqr() + a.s21.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_stack_equals_one_slab(eps in 1.0f64..16.0, n in 1usize..10, f in 30.0f64..40.0) {
        let t = 0.508;
        let layers = vec![Layer { eps: c(eps), mu: c(1.0), thickness_mm: t }; n];
        let a = stacked_sparams(&layers, f).unwrap();
        let b = slab_sparams(c(eps), c(1.0), t * n as f64, f).unwrap();
        prop_assert!((a.s11 - b.s11).norm() < 1e-10);
        prop_assert!((a.s21 - b.s21).norm() < 1e-10);
    }
}
