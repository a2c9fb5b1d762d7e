use std::sync::OnceLock;

use anosov_core::conjugacy::{compute_conjugacy, Conjugacy};
use anosov_core::equilibrium::{ensemble, entropy, pressure};
use anosov_core::map::AnosovMap;
use anosov_core::potential::{FourierTerm, Potential};
use anosov_core::torus::TorusPoint;
use proptest::prelude::*;

const GRID: usize = 256;

fn conj() -> &'static Conjugacy {
    static C: OnceLock<Conjugacy> = OnceLock::new();
    C.get_or_init(|| compute_conjugacy(&AnosovMap::standard(0.05), GRID, 1e-10, 200).unwrap())
}

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

fn golden() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

#[test]
fn conjugacy_equation_and_rate() {
    let c = conj();
    assert!(c.converged);
    assert!(c.residual < 1e-9, "residual {}", c.residual);
    let l = (3.0 + 5f64.sqrt()) / 2.0;
    if let Some(rate) = c.measured_rate() {
        assert!(rate <= 1.0 / l + 0.05, "rate {rate}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugacy_transports_iterates(x in 0.0..1.0f64, y in 0.0..1.0f64, n in 1usize..=6) {
        let c = conj();
        let a = &c.map;
        let lin = a.linear_part().to_real();
        let p = TorusPoint::new(x, y);
        let lhs = c.apply_h(&a.iterate(&p, n));
        let mut rhs = c.apply_h(&p).coords();
        for _ in 0..n {
            rhs = lin.apply(rhs);
        }
        let rhs = TorusPoint::new(rhs[0], rhs[1]);
        // errors of h are amplified by at most λ per step of L_A
        let bound = 3f64.powi(n as i32) * (c.residual + c.off_grid_error) + 1e-9;
        prop_assert!(lhs.distance(&rhs) < bound, "{} vs {}", lhs.distance(&rhs), bound);
    }

    #[test]
    fn constant_shift_is_exact(c in -2.0..2.0f64, n in 1u32..=7) {
        let a = AnosovMap::standard(0.05);
        let phi = fourier();
        let shifted = Potential::Fourier {
            terms: vec![
                FourierTerm { k: [0, 0], cos: c, sin: 0.0 },
                FourierTerm { k: [1, 0], cos: 0.3, sin: 0.0 },
                FourierTerm { k: [0, 1], cos: 0.0, sin: 0.2 },
            ],
        };
        let p0 = pressure(&a, &phi, n, None).unwrap();
        let p1 = pressure(&a, &shifted, n, None).unwrap();
        prop_assert!((p1 - p0 - c).abs() < 1e-12);
    }

    #[test]
    fn pressure_is_monotone(c in 0.0..1.0f64, n in 1u32..=7) {
        let a = AnosovMap::standard(0.05);
        // fourier() ≤ fourier() + c pointwise, also with a nonconstant bump
        let lo = fourier();
        let hi = Potential::Fourier {
            terms: vec![
                FourierTerm { k: [0, 0], cos: c, sin: 0.0 },
                FourierTerm { k: [1, 1], cos: c, sin: 0.0 },
                FourierTerm { k: [1, 0], cos: 0.3, sin: 0.0 },
                FourierTerm { k: [0, 1], cos: 0.0, sin: 0.2 },
            ],
        };
        prop_assert!(pressure(&a, &lo, n, None).unwrap() <= pressure(&a, &hi, n, None).unwrap());
    }
}

#[test]
fn ensemble_is_invariant() {
    let a = AnosovMap::standard(0.05);
    let e = ensemble(&a, &fourier(), 8, None).unwrap();
    // a permutes the atoms and the weights are constant along orbits
    let mut seen = vec![false; e.len()];
    for (i, &j) in e.image.iter().enumerate() {
        assert!(!seen[j]);
        seen[j] = true;
        assert!(a.apply(&e.points[i]).distance(&e.points[j]) < 1e-10);
        assert!((e.weights[i] - e.weights[j]).abs() <= 1e-14 * e.weights[i].abs().max(1e-300));
    }
}

#[test]
fn pressure_of_composition_with_the_map() {
    // P_n(φ∘a) = P_n(φ): orbit sums are cyclic
    let a = AnosovMap::linear_cat();
    let phi = fourier();
    // φ(Ax) for A = [[2,1],[1,1]]: k·Ax = (Aᵀk)·x
    let composed = Potential::fourier(vec![
        FourierTerm {
            k: [2, 1],
            cos: 0.3,
            sin: 0.0,
        },
        FourierTerm {
            k: [1, 1],
            cos: 0.0,
            sin: 0.2,
        },
    ]);
    for n in 1..=8 {
        let p0 = pressure(&a, &phi, n, None).unwrap();
        let p1 = pressure(&a, &composed, n, None).unwrap();
        assert!((p0 - p1).abs() < 1e-12, "n = {n}");
    }
}

#[test]
fn linear_mme_entropy_converges() {
    let a = AnosovMap::linear_cat();
    let l = (3.0 + 5f64.sqrt()) / 2.0;
    for n in [6u32, 8, 10] {
        let e = ensemble(&a, &Potential::Zero, n, None).unwrap();
        assert!(
            (entropy(&e) - golden()).abs() < 4.0 * l.powi(-(n as i32)),
            "n = {n}"
        );
    }
}
