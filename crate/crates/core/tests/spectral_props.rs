use dampwave::model::{NonlinearityProfile, PowerTerm};
use dampwave::spectral::SpectralBasis;
use proptest::prelude::*;

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn dim_and_coeffs() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=3, 2usize..=5).prop_flat_map(|(d, n)| (Just(d), Just(n), coeffs(n.pow(d as u32))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval((d, n, c) in dim_and_coeffs()) {
        let b = SpectralBasis::new(d, n, 3).unwrap();
        let phys = b.to_physical(&c).unwrap();
        let l2 = b.lp_norm_pow(&phys, 2.0).unwrap();
        let want: f64 = c.iter().map(|x| x * x).sum();
        prop_assert!((l2 - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn projection_inverts_synthesis((d, n, c) in dim_and_coeffs()) {
        let b = SpectralBasis::new(d, n, 3).unwrap();
        let back = b.to_modal(&b.to_physical(&c).unwrap()).unwrap();
        for (x, y) in c.iter().zip(&back) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn quintic_products_are_alias_free(c in coeffs(6)) {
        // Projecting u⁵ must not depend on the oversampling once it is at least 3.
        let proj = |over: usize| {
            let b = SpectralBasis::new(1, 6, over).unwrap();
            let u = b.to_physical(&c).unwrap();
            let u5: Vec<f64> = u.iter().map(|x| x.powi(5)).collect();
            b.to_modal(&u5).unwrap()
        };
        let (a, b) = (proj(3), proj(6));
        let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn source_derivatives_match_differences(s in -3.0f64..3.0, p in 1.0f64..5.0, a in -2.0f64..2.0) {
        let t = PowerTerm::new(a, p);
        let h = 1e-5;
        let fd = (t.f(s + h) - t.f(s - h)) / (2.0 * h);
        prop_assert!((fd - t.fp(s)).abs() <= 1e-5 * (1.0 + t.fp(s).abs()));
        let fd_anti = (t.antiderivative(s + h) - t.antiderivative(s - h)) / (2.0 * h);
        prop_assert!((fd_anti - t.f(s)).abs() <= 1e-6 * (1.0 + t.f(s).abs()));
    }

    #[test]
    fn damping_is_monotone(a in -4.0f64..4.0, b in -4.0f64..4.0, lin in 0.0f64..2.0, q in 0.01f64..2.0) {
        let p = NonlinearityProfile::new(lin, q, vec![]);
        prop_assert!((p.g(a) - p.g(b)) * (a - b) >= 0.0);
        prop_assert!(p.gp(a) >= 0.0);
    }
}

#[test]
fn eigenvalues_follow_lexicographic_modes() {
    let b = SpectralBasis::new(2, 3, 3).unwrap();
    let want = [2.0, 5.0, 10.0, 5.0, 8.0, 13.0, 10.0, 13.0, 18.0];
    assert_eq!(b.eigenvalues(), &want);
    assert_eq!(b.lambda1(), 2.0);
    assert_eq!(b.sorted_eigenvalues()[..3], [2.0, 5.0, 5.0]);
}

#[test]
fn low_oversampling_is_rejected() {
    assert!(SpectralBasis::new(1, 4, 2).is_err());
    assert!(SpectralBasis::new(4, 2, 3).is_err());
}
