//! The invariant line fields E^u, E^s and the unstable log-Jacobian.
//!
//! Directions are obtained by cocycle power iteration: the unstable
//! eigenvector of A placed at a⁻ⁿ(p) is pushed forward n times, and the
//! stable one placed at aⁿ(p) is pulled back. On a periodic orbit the
//! monodromy eigenvectors give the exact invariant directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::AnosovMap;
use crate::torus::{dot, line_angle, norm, normalize, scale, Mat2, TorusPoint, Vec2};

pub const DEFAULT_DEPTH: usize = 20;
const MAX_DEPTH: usize = 60;
const ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Stable,
    Unstable,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Stable => Side::Unstable,
            Side::Unstable => Side::Stable,
        }
    }
}

/// Orient `v` like `reference` (the lines carry no orientation).
fn orient(v: Vec2, reference: Vec2) -> Vec2 {
    if dot(v, reference) < 0.0 {
        scale(-1.0, v)
    } else {
        v
    }
}

fn push_forward(map: &AnosovMap, backward_orbit: &[TorusPoint], depth: usize, start: Vec2) -> Vec2 {
    let mut v = start;
    for k in (1..=depth).rev() {
        v = normalize(map.derivative(&backward_orbit[k]).apply(v));
    }
    v
}

fn pull_back(map: &AnosovMap, forward_orbit: &[TorusPoint], depth: usize, start: Vec2) -> Vec2 {
    let mut v = start;
    for k in (0..depth).rev() {
        let d = map.derivative(&forward_orbit[k]);
        v = normalize(d.solve(v).expect("Da is invertible on a certified map"));
    }
    v
}

/// Unit vector spanning E^u(p), oriented like the unstable eigenvector of A.
pub fn unstable_direction(map: &AnosovMap, p: &TorusPoint, n_iter: usize) -> Result<Vec2> {
    let frame = map.eigen_frame();
    if map.is_linear() {
        return Ok(frame.e_u);
    }
    let n_iter = n_iter.max(DEFAULT_DEPTH);
    let mut orbit = vec![*p];
    while orbit.len() <= MAX_DEPTH + 2 {
        let prev = map.apply_inverse(orbit.last().unwrap())?;
        orbit.push(prev);
    }
    let mut depth = n_iter.min(MAX_DEPTH);
    let mut v = push_forward(map, &orbit, depth, frame.e_u);
    loop {
        let w = push_forward(map, &orbit, depth + 2, frame.e_u);
        if line_angle(v, w) < ANGLE_TOL || depth + 2 >= MAX_DEPTH {
            return Ok(orient(w, frame.e_u));
        }
        v = w;
        depth += 2;
    }
}

/// Unit vector spanning E^s(p), oriented like the stable eigenvector of A.
pub fn stable_direction(map: &AnosovMap, p: &TorusPoint, n_iter: usize) -> Result<Vec2> {
    let frame = map.eigen_frame();
    if map.is_linear() {
        return Ok(frame.e_s);
    }
    let n_iter = n_iter.max(DEFAULT_DEPTH);
    let mut orbit = vec![*p];
    while orbit.len() <= MAX_DEPTH + 2 {
        let next = map.apply(orbit.last().unwrap());
        orbit.push(next);
    }
    let mut depth = n_iter.min(MAX_DEPTH);
    let mut v = pull_back(map, &orbit, depth, frame.e_s);
    loop {
        let w = pull_back(map, &orbit, depth + 2, frame.e_s);
        if line_angle(v, w) < ANGLE_TOL || depth + 2 >= MAX_DEPTH {
            return Ok(orient(w, frame.e_s));
        }
        v = w;
        depth += 2;
    }
}

pub fn direction(map: &AnosovMap, p: &TorusPoint, side: Side) -> Result<Vec2> {
    match side {
        Side::Unstable => unstable_direction(map, p, DEFAULT_DEPTH),
        Side::Stable => stable_direction(map, p, DEFAULT_DEPTH),
    }
}

/// log J(p) = log ‖Da_p e_u(p)‖.
pub fn log_unstable_jacobian(map: &AnosovMap, p: &TorusPoint) -> Result<f64> {
    let e = unstable_direction(map, p, DEFAULT_DEPTH)?;
    Ok(norm(map.derivative(p).apply(e)).ln())
}

/// log ‖D(a⁻¹)_p e_s(p)‖, the stable analogue of log J.
pub fn log_stable_expansion(map: &AnosovMap, p: &TorusPoint) -> Result<f64> {
    let e = stable_direction(map, p, DEFAULT_DEPTH)?;
    let prev = map.apply_inverse(p)?;
    let d = map.derivative(&prev);
    let v = d.solve(e).ok_or(Error::NonConvergence {
        what: "stable expansion (singular Jacobian)",
        iterations: 0,
        residual: f64::NAN,
    })?;
    Ok(norm(v).ln())
}

/// Angle between Da_p e(p) and e(a(p)) for the chosen line field.
pub fn invariance_residual(map: &AnosovMap, p: &TorusPoint, side: Side) -> Result<f64> {
    let e = direction(map, p, side)?;
    let e_next = direction(map, &map.apply(p), side)?;
    Ok(line_angle(map.derivative(p).apply(e), e_next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingSample {
    pub point: TorusPoint,
    pub e_u: Vec2,
    pub e_s: Vec2,
    /// Angle between the two lines, in radians.
    pub angle: f64,
}

pub fn splitting_sample(map: &AnosovMap, p: &TorusPoint) -> Result<SplittingSample> {
    let e_u = unstable_direction(map, p, DEFAULT_DEPTH)?;
    let e_s = stable_direction(map, p, DEFAULT_DEPTH)?;
    Ok(SplittingSample {
        point: *p,
        e_u,
        e_s,
        angle: line_angle(e_u, e_s),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplittingSweep {
    pub samples: usize,
    pub min_angle: f64,
    pub max_invariance_residual: f64,
    pub witness: TorusPoint,
}

/// Splitting statistics over `samples` seeded random points.
pub fn splitting_sweep(map: &AnosovMap, samples: usize, seed: u64) -> Result<SplittingSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<TorusPoint> = (0..samples)
        .map(|_| TorusPoint::new(rng.gen(), rng.gen()))
        .collect();
    let rows: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|p| {
            let s = splitting_sample(map, p)?;
            let ru = invariance_residual(map, p, Side::Unstable)?;
            let rs = invariance_residual(map, p, Side::Stable)?;
            Ok((s.angle, ru.max(rs)))
        })
        .collect::<Result<_>>()?;
    let mut min_angle = f64::INFINITY;
    let mut max_res: f64 = 0.0;
    let mut witness = TorusPoint::origin();
    for (p, (a, r)) in pts.iter().zip(rows) {
        if a < min_angle {
            min_angle = a;
            witness = *p;
        }
        max_res = max_res.max(r);
    }
    Ok(SplittingSweep {
        samples,
        min_angle,
        max_invariance_residual: max_res,
        witness,
    })
}

/// Splitting data along a periodic orbit `points` (points[i+1] = a(points[i])).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitSplitting {
    pub e_u: Vec<Vec2>,
    pub e_s: Vec<Vec2>,
    /// log ‖Da e_u‖ at each orbit point.
    pub log_ju: Vec<f64>,
    /// log ‖Da e_s‖ at each orbit point (negative).
    pub log_js: Vec<f64>,
}

impl OrbitSplitting {
    /// Unstable exponent of the orbit, Σ log J / period.
    pub fn unstable_exponent(&self) -> f64 {
        crate::sum::compensated_sum(&self.log_ju) / self.log_ju.len() as f64
    }

    pub fn stable_exponent(&self) -> f64 {
        crate::sum::compensated_sum(&self.log_js) / self.log_js.len() as f64
    }
}

/// Exact invariant directions on a periodic orbit from the monodromy matrix.
pub fn orbit_splitting(map: &AnosovMap, points: &[TorusPoint]) -> Result<OrbitSplitting> {
    let m = points.len();
    if m == 0 {
        return Err(Error::InvalidInput("empty orbit".into()));
    }
    let frame = map.eigen_frame();
    let jac: Vec<Mat2> = points.iter().map(|p| map.derivative(p)).collect();
    let mut mono = Mat2::IDENTITY;
    for d in &jac {
        mono = d.mul(&mono);
    }
    let singular = || Error::NonConvergence {
        what: "orbit monodromy (singular)",
        iterations: 0,
        residual: f64::NAN,
    };
    let vu = mono.dominant_eigenvector().ok_or_else(singular)?;
    let vs = mono
        .inverse()
        .ok_or_else(singular)?
        .dominant_eigenvector()
        .ok_or_else(singular)?;
    let mut e_u = vec![[0.0; 2]; m];
    let mut log_ju = vec![0.0; m];
    let mut v = orient(normalize(vu), frame.e_u);
    for i in 0..m {
        e_u[i] = v;
        let w = jac[i].apply(v);
        log_ju[i] = norm(w).ln();
        v = orient(normalize(w), frame.e_u);
    }
    let mut e_s = vec![[0.0; 2]; m];
    let mut v = orient(normalize(vs), frame.e_s);
    // e_s(p_i) = Da(p_i)⁻¹ e_s(p_{i+1}), walking backward from p_m = p_0
    for i in (0..m).rev() {
        let w = jac[i].solve(v).ok_or_else(singular)?;
        v = orient(normalize(w), frame.e_s);
        e_s[i] = v;
    }
    let log_js = (0..m).map(|i| norm(jac[i].apply(e_s[i])).ln()).collect();
    Ok(OrbitSplitting {
        e_u,
        e_s,
        log_ju,
        log_js,
    })
}
