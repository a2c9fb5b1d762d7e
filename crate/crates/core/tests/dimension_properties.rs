use std::sync::OnceLock;

use anosov_core::dimension::{
    pointwise_dimension_indexed, sample_centers, ScaleWindow, SpatialIndex,
};
use anosov_core::equilibrium::{ensemble, OrbitEnsemble};
use anosov_core::map::AnosovMap;
use anosov_core::potential::Potential;
use anosov_core::torus::TorusPoint;
use proptest::prelude::*;

fn haar() -> &'static (OrbitEnsemble, SpatialIndex) {
    static E: OnceLock<(OrbitEnsemble, SpatialIndex)> = OnceLock::new();
    E.get_or_init(|| {
        let e = ensemble(&AnosovMap::linear_cat(), &Potential::Zero, 12, None).unwrap();
        let idx = SpatialIndex::from_ensemble(&e);
        (e, idx)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_masses_grow_with_radius(x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let (_, idx) = haar();
        let est = pointwise_dimension_indexed(idx, &TorusPoint::new(x, y), &ScaleWindow::for_index(idx)).unwrap();
        // radii are listed in decreasing order
        for w in est.masses.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        for w in est.radii.windows(2) {
            prop_assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn neighbour_query_agrees_with_a_scan(x in 0.0..1.0f64, y in 0.0..1.0f64, r in 0.001..0.1f64) {
        let (e, idx) = haar();
        let c = TorusPoint::new(x, y);
        let expected = e.points.iter().filter(|p| p.distance(&c) <= r).count();
        prop_assert_eq!(idx.neighbours(&c, r).len(), expected);
    }
}

#[test]
fn halving_the_window_keeps_haar_slopes() {
    use anosov_core::sum::median;
    let (e, idx) = haar();
    let full = ScaleWindow::for_index(idx);
    let half = full.halved();
    let (mut sa, mut sb, mut err) = (vec![], vec![], vec![]);
    for c in sample_centers(e, 20, 3).unwrap() {
        let a = pointwise_dimension_indexed(idx, &c, &full).unwrap();
        let b = pointwise_dimension_indexed(idx, &c, &half).unwrap();
        sa.push(a.slope);
        sb.push(b.slope);
        err.push(a.slope_stderr.max(b.slope_stderr));
    }
    let (ma, mb) = (median(&sa), median(&sb));
    assert!((ma - mb).abs() < 2.0 * median(&err), "{ma} {mb}");
}
