//! Periodic-orbit approximants of equilibrium states.
//!
//! The ensemble at period n puts mass ∝ exp(S_nφ(p)) on every p ∈ Fix(aⁿ);
//! P_n = (1/n) log Σ exp(S_nφ(p)) approximates the pressure. Since a
//! permutes Fix(aⁿ) and S_nφ is constant along orbits, each approximant is
//! exactly invariant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugacy::Conjugacy;
use crate::error::{Error, Result};
use crate::map::AnosovMap;
use crate::periodic::{periodic_set, PeriodicSet, DEFAULT_CAP};
use crate::potential::Potential;
use crate::splitting::orbit_splitting;
use crate::sum::{compensated_sum, log_sum_exp};
use crate::torus::TorusPoint;

pub const DEFAULT_PERIOD: u32 = 12;
pub const REFINEMENT_PERIOD: u32 = 10;
const NEGATIVE_ENTROPY_TOL: f64 = 1e-9;

/// S_nφ(p) = Σ_{i<n} φ(aⁱp).
pub fn birkhoff_sum(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    p: &TorusPoint,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("Birkhoff sums need n >= 1".into()));
    }
    let mut terms = Vec::with_capacity(n);
    let mut q = *p;
    for _ in 0..n {
        terms.push(phi.evaluate(map, conj, &q)?);
        q = map.apply(&q);
    }
    Ok(compensated_sum(&terms))
}

/// Fix(aⁿ) for the map; perturbed orbits are seeded from h⁻¹ of the linear
/// points when a conjugacy is supplied, otherwise from the linear points.
pub fn periodic_points(map: &AnosovMap, n: u32, conj: Option<&Conjugacy>) -> Result<PeriodicSet> {
    match conj {
        Some(c) if !map.is_linear() => periodic_set(map, n, DEFAULT_CAP, |p| {
            c.apply_h_inverse_bilinear(p).unwrap_or(*p)
        }),
        _ => periodic_set(map, n, DEFAULT_CAP, |p| *p),
    }
}

/// Weighted periodic approximant of the equilibrium state of φ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitEnsemble {
    pub period: u32,
    pub points: Vec<TorusPoint>,
    pub weights: Vec<f64>,
    pub pressure_n: f64,
    pub potential: Potential,
    /// φ at each point.
    pub phi: Vec<f64>,
    /// S_nφ at each point.
    pub sums: Vec<f64>,
    /// log ‖Da e_u‖ and log ‖Da e_s‖ at each point.
    pub log_ju: Vec<f64>,
    pub log_js: Vec<f64>,
    /// Index of the image a(points[i]).
    pub image: Vec<usize>,
}

impl OrbitEnsemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Σ w φ, computed from the stored per-point values.
    pub fn mean_potential(&self) -> f64 {
        weighted(&self.weights, &self.phi)
    }

    /// Sum of the weights (1 up to rounding).
    pub fn total_weight(&self) -> f64 {
        compensated_sum(&self.weights)
    }
}

fn weighted(w: &[f64], v: &[f64]) -> f64 {
    let terms: Vec<f64> = w.iter().zip(v).map(|(a, b)| a * b).collect();
    compensated_sum(&terms)
}

/// Build the ensemble from an enumerated periodic set.
pub fn ensemble_from_set(
    map: &AnosovMap,
    set: &PeriodicSet,
    phi: &Potential,
    conj: Option<&Conjugacy>,
) -> Result<OrbitEnsemble> {
    let total = set.len();
    let n = set.period as usize;
    let per_orbit: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = set
        .orbits
        .par_iter()
        .map(|o| {
            let sp = orbit_splitting(map, &o.points)?;
            let m = o.len();
            let values: Vec<f64> = match phi {
                Potential::PhiU => sp.log_ju.iter().map(|v| -v).collect(),
                // D(a⁻¹) at p_i on E^s is the inverse of Da at p_{i−1}
                Potential::PhiS => (0..m).map(|i| sp.log_js[(i + m - 1) % m]).collect(),
                _ => o
                    .points
                    .iter()
                    .map(|p| phi.evaluate(map, conj, p))
                    .collect::<Result<_>>()?,
            };
            Ok((values, sp.log_ju, sp.log_js))
        })
        .collect::<Result<_>>()?;
    let mut phi_vals = vec![0.0; total];
    let mut sums = vec![0.0; total];
    let mut log_ju = vec![0.0; total];
    let mut log_js = vec![0.0; total];
    let mut image = vec![0usize; total];
    for (o, (vals, ju, js)) in set.orbits.iter().zip(per_orbit) {
        let m = o.len();
        let s = compensated_sum(&vals) * (n / m) as f64;
        for (k, &i) in o.indices.iter().enumerate() {
            phi_vals[i] = vals[k];
            sums[i] = s;
            log_ju[i] = ju[k];
            log_js[i] = js[k];
            image[i] = o.indices[(k + 1) % m];
        }
    }
    let lse = log_sum_exp(&sums);
    let weights: Vec<f64> = sums.iter().map(|s| (s - lse).exp()).collect();
    Ok(OrbitEnsemble {
        period: set.period,
        points: set.points.clone(),
        weights,
        pressure_n: lse / n as f64,
        potential: phi.clone(),
        phi: phi_vals,
        sums,
        log_ju,
        log_js,
        image,
    })
}

pub fn ensemble(
    map: &AnosovMap,
    phi: &Potential,
    n: u32,
    conj: Option<&Conjugacy>,
) -> Result<OrbitEnsemble> {
    let set = periodic_points(map, n, conj)?;
    ensemble_from_set(map, &set, phi, conj)
}

/// P_n(φ).
pub fn pressure(map: &AnosovMap, phi: &Potential, n: u32, conj: Option<&Conjugacy>) -> Result<f64> {
    Ok(ensemble(map, phi, n, conj)?.pressure_n)
}

/// Σ_p w_p f(p), evaluated in parallel and summed in a fixed order.
pub fn integrate<F>(e: &OrbitEnsemble, f: F) -> f64
where
    F: Fn(&TorusPoint) -> f64 + Sync,
{
    let vals: Vec<f64> = e.points.par_iter().map(&f).collect();
    weighted(&e.weights, &vals)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    /// P_n − ∫φ before clamping.
    pub raw: f64,
    pub clamped: bool,
}

/// h = P_n − ∫φ dμ_n, clamped at zero (flagged) when negative.
pub fn entropy_estimate(e: &OrbitEnsemble) -> EntropyEstimate {
    let raw = e.pressure_n - e.mean_potential();
    let clamped = raw < -NEGATIVE_ENTROPY_TOL;
    EntropyEstimate {
        value: raw.max(0.0),
        raw,
        clamped,
    }
}

pub fn entropy(e: &OrbitEnsemble) -> f64 {
    entropy_estimate(e).value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentErrors {
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub entropy: f64,
    pub delta_u: f64,
    pub delta_s: f64,
    pub dim_total: f64,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub entropy: f64,
    pub delta_u: f64,
    pub delta_s: f64,
    pub dim_total: f64,
    pub pressure: f64,
    pub period_used: u32,
    pub refinement_period: u32,
    pub entropy_clamped: bool,
    pub error_estimates: ExponentErrors,
}

#[derive(Debug, Clone, Copy)]
struct RawExponents {
    lu: f64,
    ls: f64,
    h: f64,
    du: f64,
    ds: f64,
    dim: f64,
    p: f64,
    clamped: bool,
}

fn raw_exponents(e: &OrbitEnsemble) -> Result<RawExponents> {
    let lu = weighted(&e.weights, &e.log_ju);
    let ls = weighted(&e.weights, &e.log_js);
    if lu < 1e-6 {
        return Err(Error::DegenerateExponent(lu));
    }
    if ls > -1e-6 {
        return Err(Error::DegenerateExponent(ls));
    }
    let h = entropy_estimate(e);
    let du = h.value / lu;
    let ds = h.value / ls.abs();
    Ok(RawExponents {
        lu,
        ls,
        h: h.value,
        du,
        ds,
        dim: du + ds,
        p: e.pressure_n,
        clamped: h.clamped,
    })
}

/// Exponents, entropy and dimensions of the period-n ensemble together with
/// their differences from the period-m ensemble.
pub fn exponent_report_from(
    fine: &OrbitEnsemble,
    coarse: &OrbitEnsemble,
) -> Result<ExponentReport> {
    let a = raw_exponents(fine)?;
    let b = raw_exponents(coarse)?;
    Ok(ExponentReport {
        lambda_u: a.lu,
        lambda_s: a.ls,
        entropy: a.h,
        delta_u: a.du,
        delta_s: a.ds,
        dim_total: a.dim,
        pressure: a.p,
        period_used: fine.period,
        refinement_period: coarse.period,
        entropy_clamped: a.clamped,
        error_estimates: ExponentErrors {
            lambda_u: (a.lu - b.lu).abs(),
            lambda_s: (a.ls - b.ls).abs(),
            entropy: (a.h - b.h).abs(),
            delta_u: (a.du - b.du).abs(),
            delta_s: (a.ds - b.ds).abs(),
            dim_total: (a.dim - b.dim).abs(),
            pressure: (a.p - b.p).abs(),
        },
    })
}

/// Refinement period paired with n: n − 2 (or n − 1 for n ≤ 3).
pub fn refinement_of(n: u32) -> u32 {
    if n > 3 {
        n - 2
    } else {
        n.saturating_sub(1).max(1)
    }
}

pub fn exponent_report(
    map: &AnosovMap,
    phi: &Potential,
    n: u32,
    conj: Option<&Conjugacy>,
) -> Result<ExponentReport> {
    let fine = ensemble(map, phi, n, conj)?;
    let coarse = ensemble(map, phi, refinement_of(n), conj)?;
    exponent_report_from(&fine, &coarse)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG_LAMBDA: f64 = 0.9624236501192069;

    #[test]
    fn zero_potential_small_period() {
        let a = AnosovMap::linear_cat();
        let e = ensemble(&a, &Potential::Zero, 2, None).unwrap();
        assert_eq!(e.len(), 5);
        for w in &e.weights {
            assert!((w - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_shift_is_exact_and_entropy_unchanged() {
        let a = AnosovMap::linear_cat();
        let e0 = ensemble(&a, &Potential::Zero, 6, None).unwrap();
        let e1 = ensemble(&a, &Potential::Constant { value: 0.5 }, 6, None).unwrap();
        assert!((e1.pressure_n - e0.pressure_n - 0.5).abs() < 1e-14);
        assert!((entropy(&e1) - entropy(&e0)).abs() < 1e-14);
    }

    #[test]
    fn linear_report_matches_haar_values() {
        let a = AnosovMap::linear_cat();
        let r = exponent_report(&a, &Potential::Zero, 8, None).unwrap();
        assert!((r.lambda_u - LOG_LAMBDA).abs() < 1e-12);
        assert!((r.lambda_s + LOG_LAMBDA).abs() < 1e-12);
        // finite-n deviation of the Bowen sum is about 2λ⁻ⁿ/n
        assert!((r.entropy - LOG_LAMBDA).abs() < 1e-3);
    }

    #[test]
    fn birkhoff_additivity() {
        let a = AnosovMap::standard(0.05);
        let phi = Potential::PhiU;
        let p = TorusPoint::new(0.12, 0.34);
        let s5 = birkhoff_sum(&a, &phi, None, &p, 5).unwrap();
        let s3 = birkhoff_sum(&a, &phi, None, &p, 3).unwrap();
        let s2 = birkhoff_sum(&a, &phi, None, &a.iterate(&p, 3), 2).unwrap();
        assert!((s5 - s3 - s2).abs() < 1e-12);
    }

    #[test]
    fn ensemble_is_invariant() {
        let a = AnosovMap::standard(0.05);
        let e = ensemble(&a, &Potential::PhiU, 5, None).unwrap();
        assert!((e.total_weight() - 1.0).abs() < 1e-12);
        for (i, &j) in e.image.iter().enumerate() {
            assert!(a.apply(&e.points[i]).distance(&e.points[j]) < 1e-11);
            assert_eq!(e.weights[i], e.weights[j]);
        }
        let f = |p: &TorusPoint| (std::f64::consts::TAU * p.x1()).cos();
        let g = |p: &TorusPoint| f(&a.apply(p));
        assert!((integrate(&e, f) - integrate(&e, g)).abs() < 1e-12);
    }
}
