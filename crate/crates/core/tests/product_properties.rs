use anosov_core::leaves::LeafChart;
use anosov_core::map::AnosovMap;
use anosov_core::potential::{FourierTerm, Potential};
use anosov_core::product::{omega_pair, omega_s, omega_u};
use anosov_core::splitting::Side;
use anosov_core::torus::TorusPoint;
use proptest::prelude::*;

fn fourier() -> Potential {
    Potential::fourier(vec![
        FourierTerm {
            k: [1, 0],
            cos: 0.3,
            sin: 0.0,
        },
        FourierTerm {
            k: [0, 1],
            cos: 0.0,
            sin: 0.2,
        },
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn omega_cocycle(
        x1 in 0.0..1.0f64, x2 in 0.0..1.0f64,
        dy in (-0.05..0.05f64, -0.05..0.05f64),
        t in -0.04..0.04f64,
    ) {
        let a = AnosovMap::standard(0.05);
        let phi = fourier();
        let x = TorusPoint::new(x1, x2);
        let y = x.translate([dy.0, dy.1]);
        let yp = TorusPoint::from_vec(LeafChart::new(&a, &y, Side::Stable).unwrap().point(t).unwrap());
        let lhs = omega_u(&a, &phi, None, &x, &y, 1e-13).unwrap();
        let r1 = omega_u(&a, &phi, None, &x, &yp, 1e-13).unwrap();
        let r2 = omega_pair(&a, &phi, None, &yp, &y, Side::Stable, 1e-13).unwrap();
        prop_assert!((lhs.value - r1.value - r2.value).abs() < 1e-8);
    }

    #[test]
    fn omega_vanishes_for_constants(
        x1 in 0.0..1.0f64, x2 in 0.0..1.0f64,
        dy in (-0.05..0.05f64, -0.05..0.05f64),
        c in -3.0..3.0f64,
    ) {
        let a = AnosovMap::standard(0.05);
        let phi = Potential::Constant { value: c };
        let x = TorusPoint::new(x1, x2);
        let y = x.translate([dy.0, dy.1]);
        prop_assert!(omega_u(&a, &phi, None, &x, &y, 1e-13).unwrap().value.abs() < 1e-14);
        prop_assert!(omega_s(&a, &phi, None, &x, &y, 1e-13).unwrap().value.abs() < 1e-14);
    }
}

#[test]
fn tail_bound_controls_truncation() {
    let a = AnosovMap::standard(0.05);
    let phi = fourier();
    let x = TorusPoint::new(0.2, 0.7);
    let y = TorusPoint::new(0.23, 0.68);
    for tol in [1e-4, 1e-6, 1e-8] {
        let coarse = omega_u(&a, &phi, None, &x, &y, tol).unwrap();
        let fine = omega_u(&a, &phi, None, &x, &y, tol * 1e-4).unwrap();
        assert!(fine.terms >= coarse.terms);
        assert!(
            (fine.value - coarse.value).abs() <= coarse.tail_bound + 1e-12,
            "tol {tol}: change {} bound {}",
            (fine.value - coarse.value).abs(),
            coarse.tail_bound
        );
    }
}

#[test]
fn leaf_measures_are_refinement_cauchy() {
    use anosov_core::product::{leaf_measure_on_chart, refinement_tv, DEFAULT_IMAGE_SPACING};
    let a = AnosovMap::standard(0.05);
    let phi = fourier();
    let chart = LeafChart::new(&a, &TorusPoint::new(0.4, 0.1), Side::Unstable).unwrap();
    let at = |n| {
        leaf_measure_on_chart(&a, &phi, None, &chart, -0.1, 0.1, n, DEFAULT_IMAGE_SPACING).unwrap()
    };
    let (m6, m8, m10) = (at(6), at(8), at(10));
    let d1 = refinement_tv(&m6, &m8, 32);
    let d2 = refinement_tv(&m8, &m10, 32);
    assert!(d2 < d1, "{d1} {d2}");
    assert!(d2 < 0.5 * d1, "{d1} {d2}");
}
