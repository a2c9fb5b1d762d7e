use anosov_core::equilibrium::periodic_points;
use anosov_core::leaves::LeafChart;
use anosov_core::map::AnosovMap;
use anosov_core::periodic::periodic_count;
use anosov_core::splitting::{invariance_residual, Side};
use anosov_core::torus::{IntMatrix2, TorusPoint};
use proptest::prelude::*;

fn maps() -> Vec<AnosovMap> {
    vec![
        AnosovMap::linear_cat(),
        AnosovMap::standard(0.05),
        AnosovMap::standard(0.1),
    ]
}

fn point() -> impl Strategy<Value = TorusPoint> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| TorusPoint::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn inverse_undoes_the_map(p in point(), which in 0usize..3) {
        let a = &maps()[which];
        let q = a.apply_inverse(&a.apply(&p)).unwrap();
        prop_assert!(q.distance(&p) < 1e-12);
    }

    #[test]
    fn derivative_matches_central_differences(p in point(), which in 0usize..3) {
        let a = &maps()[which];
        let d = a.derivative(&p);
        let h = 1e-6;
        for j in 0..2 {
            let mut plus = p.coords();
            let mut minus = p.coords();
            plus[j] += h;
            minus[j] -= h;
            let fp = a.lift(plus);
            let fm = a.lift(minus);
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                let scale = d.0[i][j].abs().max(1.0);
                prop_assert!((fd - d.0[i][j]).abs() / scale < 1e-5);
            }
        }
    }

    #[test]
    fn log_det_is_additive_along_orbits(p in point(), n in 1usize..=5) {
        // beyond n = 5 the determinant of the product loses digits to
        // cancellation between entries of size λⁿ
        let a = AnosovMap::standard(0.1);
        // D(aⁿ) by the chain rule
        let mut q = p;
        let mut prod = anosov_core::torus::Mat2::IDENTITY;
        let mut sum = 0.0;
        for _ in 0..n {
            let d = a.derivative(&q);
            sum += d.det().abs().ln();
            prod = d.mul(&prod);
            q = a.apply(&q);
        }
        prop_assert!((prod.det().abs().ln() - sum).abs() < 1e-10);
    }

    #[test]
    fn splitting_is_invariant(p in point()) {
        let a = AnosovMap::standard(0.05);
        prop_assert!(invariance_residual(&a, &p, Side::Unstable).unwrap() < 1e-8);
        prop_assert!(invariance_residual(&a, &p, Side::Stable).unwrap() < 1e-8);
    }

    #[test]
    fn stable_leaves_contract_forward(p in point(), t in 0.01..0.08f64) {
        let a = AnosovMap::standard(0.05);
        let chart = LeafChart::new(&a, &p, Side::Stable).unwrap();
        let mut y = TorusPoint::from_vec(chart.point(t).unwrap());
        let mut x = p;
        let mut last = x.distance(&y);
        for _ in 0..15 {
            x = a.apply(&x);
            y = a.apply(&y);
            let d = x.distance(&y);
            prop_assert!(d < 0.8 * last);
            last = d;
        }
    }
}

#[test]
fn periodic_counts_match_the_linear_model() {
    let a = AnosovMap::standard(0.05);
    for n in 1..=8 {
        let set = periodic_points(&a, n, None).unwrap();
        let expected = periodic_count(&IntMatrix2::cat_map(), n).unwrap();
        assert_eq!(set.len() as u128, expected, "period {n}");
        // |det(Aⁿ − I)| = λⁿ + λ⁻ⁿ − 2 for the cat map
        let l = (3.0 + 5f64.sqrt()) / 2.0;
        let direct = l.powi(n as i32) + l.powi(-(n as i32)) - 2.0;
        assert!((expected as f64 - direct).abs() < 1e-6);
    }
}
