use anosov_core::equilibrium::{ensemble, exponent_report, ExponentReport};
use anosov_core::map::AnosovMap;
use anosov_core::potential::Potential;
use anosov_core::rigidity::{
    centralizer_generator, chi_bar, entropy_of_element, entropy_spectrum, fourier_coefficients,
    quotient_contraction, rational_point, signed_sum, GroupElementSymbol,
};
use anosov_core::torus::IntMatrix2;
use proptest::prelude::*;
use std::sync::OnceLock;

fn linear_report() -> &'static ExponentReport {
    static R: OnceLock<ExponentReport> = OnceLock::new();
    R.get_or_init(|| exponent_report(&AnosovMap::linear_cat(), &Potential::Zero, 10, None).unwrap())
}

fn unit() -> IntMatrix2 {
    IntMatrix2::new([[1, 1], [1, 0]]).unwrap()
}

proptest! {
    #[test]
    fn chi_bar_is_additive(m in -50i64..50, n in -50i64..50) {
        let r = linear_report();
        let (a, b) = (GroupElementSymbol::power(m), GroupElementSymbol::power(n));
        let ab = a.compose(&b).unwrap();
        prop_assert_eq!(ab.power, m + n);
        prop_assert!((chi_bar(r, &ab) - chi_bar(r, &a) - chi_bar(r, &b)).abs() <= 1e-12 * (m.abs() + n.abs() + 1) as f64);
        let h = signed_sum(entropy_of_element(r, &a), chi_bar(r, &a), entropy_of_element(r, &b), chi_bar(r, &b));
        prop_assert!((h - entropy_of_element(r, &ab)).abs() <= 1e-12 * (m.abs() + n.abs() + 1) as f64);
    }

    #[test]
    fn quotient_contraction_is_multiplicative(i in -6i64..6, j in -6i64..6, si in any::<bool>(), sj in any::<bool>()) {
        let a = IntMatrix2::cat_map();
        let sign = |m: IntMatrix2, s: bool| if s { m.neg() } else { m };
        let b = sign(unit().pow(i).unwrap(), si);
        let c = sign(unit().pow(j).unwrap(), sj);
        let bc = b.mul(&c).unwrap();
        let lhs = quotient_contraction(&bc, &a).unwrap();
        let rhs = quotient_contraction(&b, &a).unwrap() * quotient_contraction(&c, &a).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn integer_powers_are_exact(k in 0i64..30) {
        // Fibonacci identity M^k = [[F(k+1), F(k)], [F(k), F(k−1)]]
        let mut f = vec![0i64, 1];
        for i in 2..=(k as usize + 2) {
            f.push(f[i - 1] + f[i - 2]);
        }
        let k = k as usize;
        let expect = if k == 0 { [[1, 0], [0, 1]] } else { [[f[k + 1], f[k]], [f[k], f[k - 1]]] };
        prop_assert_eq!(unit().pow(k as i64).unwrap().entries(), expect);
    }
}

#[test]
fn generators_of_related_automorphisms() {
    for (a, m, k) in [
        ([[2, 1], [1, 1]], [[1, 1], [1, 0]], 2u32),
        ([[5, 3], [3, 2]], [[1, 1], [1, 0]], 4),
        ([[3, 1], [2, 1]], [[3, 1], [2, 1]], 1),
    ] {
        let a = IntMatrix2::new(a).unwrap();
        let cd = centralizer_generator(&a, 5).unwrap();
        assert_eq!(cd.k, k);
        let mm = IntMatrix2::new(m).unwrap();
        assert!(
            cd.m == mm || cd.m == mm.inverse() || cd.m == mm.neg() || cd.m == mm.inverse().neg()
        );
        let p = cd.m.pow(cd.k as i64).unwrap();
        assert_eq!(if cd.sign < 0 { p.neg() } else { p }, a);
    }
}

#[test]
fn translation_statistic_is_zero_at_origin_and_lipschitz() {
    let e = ensemble(&AnosovMap::standard(0.05), &Potential::Zero, 8, None).unwrap();
    let modes = 3;
    let coeffs = fourier_coefficients(&e, None, modes);
    assert_eq!(coeffs.statistic(&rational_point((0, 1), (0, 1))), 0.0);
    // |1 − e^{iθ}| is 1-Lipschitz in θ, so neighbours at distance d on the
    // grid differ by at most max|ĉ|·2π·modes·(|d₁|+|d₂|)
    let cmax = coeffs
        .coefficients
        .iter()
        .map(|c| c.1.hypot(c.2))
        .fold(0.0, f64::max);
    let q = 12;
    for i in 0..q {
        for j in 0..q {
            let v = rational_point((i, q), (j, q));
            let w = rational_point((i + 1, q), (j, q));
            let lip = cmax * std::f64::consts::TAU * modes as f64 / q as f64;
            assert!((coeffs.statistic(&v) - coeffs.statistic(&w)).abs() <= lip + 1e-15);
        }
    }
}

#[test]
fn spectrum_is_quantized() {
    let r = linear_report();
    let s = entropy_spectrum(r, (-5, 5)).unwrap();
    for (m, h) in &s.entries {
        let k = (h / s.gap).round();
        assert_eq!(k as i64, m.abs());
        assert!((h - k * s.gap).abs() < 1e-12);
    }
    let golden = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    assert!((s.gap - golden).abs() < 1e-4);
}
