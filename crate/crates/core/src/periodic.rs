//! Periodic points: exact enumeration for the linear model and Newton
//! refinement (multiple shooting over whole orbits) for perturbed maps.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::enumerate_inverse_lattice;
use crate::map::AnosovMap;
use crate::torus::{norm, sub, wrap, IntMatrix2, Mat2, TorusPoint, Vec2};

pub const DEFAULT_CAP: usize = 2_000_000;
pub const MAX_PERIOD: u32 = 14;
const NEWTON_MAX_ITER: usize = 50;
const COLLISION_DISTANCE: f64 = 1e-9;

/// Fixed points of L_{Aⁿ}, exact rationals over a common denominator.
#[derive(Debug, Clone)]
pub struct LinearPeriodicPoints {
    pub period: u32,
    pub denominator: i128,
    pub numerators: Vec<[i128; 2]>,
}

impl LinearPeriodicPoints {
    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn point(&self, i: usize) -> TorusPoint {
        let d = self.denominator as f64;
        let n = self.numerators[i];
        TorusPoint::new(n[0] as f64 / d, n[1] as f64 / d)
    }

    pub fn points(&self) -> Vec<TorusPoint> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// |det(Aⁿ − I)|.
pub fn periodic_count(a: &IntMatrix2, n: u32) -> Result<u128> {
    let an = a.pow(n as i64)?.entries();
    let m = [
        [an[0][0] as i128 - 1, an[0][1] as i128],
        [an[1][0] as i128, an[1][1] as i128 - 1],
    ];
    Ok((m[0][0] * m[1][1] - m[0][1] * m[1][0]).unsigned_abs())
}

pub fn linear_periodic_points(a: &IntMatrix2, n: u32, cap: usize) -> Result<LinearPeriodicPoints> {
    if !a.is_hyperbolic() {
        return Err(Error::NotHyperbolic(a.entries()));
    }
    if n == 0 || n > MAX_PERIOD {
        return Err(Error::InvalidInput(format!(
            "period {n} outside 1..={MAX_PERIOD}"
        )));
    }
    let an = a.pow(n as i64)?.entries();
    let m = [
        [an[0][0] as i128 - 1, an[0][1] as i128],
        [an[1][0] as i128, an[1][1] as i128 - 1],
    ];
    let e = enumerate_inverse_lattice(&m, cap)?;
    Ok(LinearPeriodicPoints {
        period: n,
        denominator: e.denominator,
        numerators: e.numerators,
    })
}

/// The |det(Aⁿ−I)| fixed points of L_{Aⁿ}, in lexicographic Smith order.
pub fn periodic_points_linear(a: &IntMatrix2, n: u32) -> Result<Vec<TorusPoint>> {
    Ok(linear_periodic_points(a, n, DEFAULT_CAP)?.points())
}

/// Partition of the linear periodic points into L_A-orbits. Each orbit is
/// listed in dynamical order starting at its smallest index; orbits are
/// sorted by that index.
pub fn linear_orbits(a: &IntMatrix2, pts: &LinearPeriodicPoints) -> Vec<Vec<usize>> {
    let index: HashMap<[i128; 2], usize> = pts
        .numerators
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, i))
        .collect();
    let den = pts.denominator;
    let mut seen = vec![false; pts.len()];
    let mut orbits = Vec::new();
    for start in 0..pts.len() {
        if seen[start] {
            continue;
        }
        let mut orbit = vec![start];
        seen[start] = true;
        let mut cur = pts.numerators[start];
        loop {
            let img = a.apply_int(cur);
            let next = [img[0].rem_euclid(den), img[1].rem_euclid(den)];
            let j = index[&next];
            if j == start {
                break;
            }
            seen[j] = true;
            orbit.push(j);
            cur = next;
        }
        orbits.push(orbit);
    }
    orbits
}

/// A refined periodic orbit of the represented map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Points in dynamical order: points[i+1] = a(points[i]).
    pub points: Vec<TorusPoint>,
    /// Positions of the points in the global (linear lexicographic) order.
    pub indices: Vec<usize>,
    /// max_i d(a(points[i]), points[i+1]).
    pub residual: f64,
}

impl PeriodicOrbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Jacobians D a at each orbit point.
    pub fn jacobians(&self, map: &AnosovMap) -> Vec<Mat2> {
        self.points.iter().map(|p| map.derivative(p)).collect()
    }
}

fn shooting_residuals(map: &AnosovMap, xs: &[Vec2]) -> (Vec<Vec2>, Vec<Mat2>, f64) {
    let m = xs.len();
    let mut f = Vec::with_capacity(m);
    let mut jac = Vec::with_capacity(m);
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let (y, d) = map.lift_with_jacobian(xs[i]);
        let r = wrap(sub(y, xs[(i + 1) % m]));
        worst = worst.max(norm(r));
        f.push(r);
        jac.push(d);
    }
    (f, jac, worst)
}

/// Newton refinement of a whole periodic orbit from per-point seeds
/// (multiple shooting). Returns torus points and the max step residual.
pub fn refine_orbit(map: &AnosovMap, seeds: &[TorusPoint]) -> Result<(Vec<TorusPoint>, f64)> {
    let m = seeds.len();
    if m == 0 {
        return Err(Error::InvalidInput("empty orbit".into()));
    }
    let mut xs: Vec<Vec2> = seeds.iter().map(|p| p.coords()).collect();
    let (mut f, mut jac, mut res) = shooting_residuals(map, &xs);
    let mut iters = 0;
    while res > 2e-15 && iters < NEWTON_MAX_ITER {
        // δ_{i+1} = D_i δ_i + F_i with δ_m = δ_0
        let mut phi = Mat2::IDENTITY;
        let mut c = [0.0, 0.0];
        for i in 0..m {
            c = crate::torus::add(jac[i].apply(c), f[i]);
            phi = jac[i].mul(&phi);
        }
        let lhs = Mat2::IDENTITY.sub(&phi);
        let delta0 = lhs.solve(c).ok_or(Error::NonConvergence {
            what: "periodic orbit (singular shooting matrix)",
            iterations: iters,
            residual: res,
        })?;
        let mut delta = delta0;
        let mut trial = xs.clone();
        for i in 0..m {
            trial[i] = crate::torus::add(xs[i], delta);
            delta = crate::torus::add(jac[i].apply(delta), f[i]);
        }
        let (f2, j2, r2) = shooting_residuals(map, &trial);
        iters += 1;
        if r2 >= res && res < 1e-13 {
            break;
        }
        xs = trial;
        f = f2;
        jac = j2;
        res = r2;
    }
    if res > 1e-12 || !res.is_finite() {
        return Err(Error::NonConvergence {
            what: "periodic orbit refinement",
            iterations: iters,
            residual: res,
        });
    }
    Ok((xs.into_iter().map(TorusPoint::from_vec).collect(), res))
}

/// Refine a single point of period `n` from a seed; the remaining orbit seeds
/// are forward iterates of the seed.
pub fn refine_periodic_point(map: &AnosovMap, n: u32, seed: &TorusPoint) -> Result<TorusPoint> {
    let mut seeds = Vec::with_capacity(n as usize);
    let mut p = *seed;
    for _ in 0..n {
        seeds.push(p);
        p = map.apply(&p);
    }
    let (pts, _) = refine_orbit(map, &seeds)?;
    Ok(pts[0])
}

/// All periodic points of period `n` (i.e. Fix(aⁿ)), grouped by orbits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicSet {
    pub period: u32,
    /// All points in the global order (lexicographic in the linear model).
    pub points: Vec<TorusPoint>,
    /// Linear counterparts h(points[i]).
    pub linear_points: Vec<TorusPoint>,
    pub orbits: Vec<PeriodicOrbit>,
    pub max_residual: f64,
}

impl PeriodicSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Per-point residual (that of its orbit).
    pub fn residuals(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.len()];
        for o in &self.orbits {
            for &i in &o.indices {
                r[i] = o.residual;
            }
        }
        r
    }
}

/// Enumerate Fix(aⁿ). `seed` maps a linear periodic point to an initial
/// guess for its counterpart (typically h⁻¹); it is ignored for linear maps.
pub fn periodic_set<F>(map: &AnosovMap, n: u32, cap: usize, seed: F) -> Result<PeriodicSet>
where
    F: Fn(&TorusPoint) -> TorusPoint + Sync,
{
    let a = map.linear_part();
    let lin = linear_periodic_points(&a, n, cap)?;
    let orbit_idx = linear_orbits(&a, &lin);
    let linear_points = lin.points();
    let orbits: Vec<PeriodicOrbit> = orbit_idx
        .par_iter()
        .map(|idx| {
            let lin_pts: Vec<TorusPoint> = idx.iter().map(|&i| linear_points[i]).collect();
            if map.is_linear() {
                let res = lin_pts
                    .iter()
                    .enumerate()
                    .map(|(k, p)| map.apply(p).distance(&lin_pts[(k + 1) % lin_pts.len()]))
                    .fold(0.0, f64::max);
                return Ok(PeriodicOrbit {
                    points: lin_pts,
                    indices: idx.clone(),
                    residual: res,
                });
            }
            let seeds: Vec<TorusPoint> = lin_pts.iter().map(&seed).collect();
            let (pts, res) = refine_orbit(map, &seeds)?;
            Ok(PeriodicOrbit {
                points: pts,
                indices: idx.clone(),
                residual: res,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = vec![TorusPoint::origin(); lin.len()];
    let mut max_residual: f64 = 0.0;
    for o in &orbits {
        for (p, &i) in o.points.iter().zip(&o.indices) {
            points[i] = *p;
        }
        max_residual = max_residual.max(o.residual);
    }
    check_collisions(&points)?;
    Ok(PeriodicSet {
        period: n,
        points,
        linear_points,
        orbits,
        max_residual,
    })
}

/// Error if two points lie within 1e-9 of each other.
pub fn check_collisions(points: &[TorusPoint]) -> Result<()> {
    let cell = 1e-6;
    let cells = (1.0 / cell) as i64;
    let key = |p: &TorusPoint| ((p.x1() / cell) as i64, (p.x2() / cell) as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    for (i, p) in points.iter().enumerate() {
        let (cx, cy) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let k = ((cx + dx).rem_euclid(cells), (cy + dy).rem_euclid(cells));
                if let Some(list) = grid.get(&k) {
                    for &j in list {
                        if j > i {
                            let d = p.distance(&points[j]);
                            if d < COLLISION_DISTANCE {
                                return Err(Error::Collision {
                                    first: i,
                                    second: j,
                                    distance: d,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
