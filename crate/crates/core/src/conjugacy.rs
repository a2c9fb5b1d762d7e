//! The conjugacy h = id + u with h∘a = L_A∘h.
//!
//! Writing a(x) = A·x + g(x) and splitting u = u⁺e_u + u⁻e_s in the
//! eigenbasis of A, the conjugacy equation decouples into
//!
//! ```text
//! u⁺(x)   = (g⁺(x) + u⁺(a(x))) / λ_u          (contracting forward)
//! u⁻(a x) = λ_s u⁻(x) − g⁻(x)                   (contracting backward)
//! ```
//!
//! Both are solved by sweeping over a periodic grid with bilinear
//! interpolation. Pointwise evaluation unrolls the same recursions `depth`
//! times along the orbit before falling back to the grid, which damps the
//! interpolation error by λ^{-depth}.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::AnosovMap;
use crate::periodic::refine_periodic_point;
use crate::sum::linear_fit;
use crate::torus::{add, dot, norm, sub, wrap, EigenFrame, Mat2, TorusPoint, Vec2};

pub const DEFAULT_GRID: usize = 1024;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SERIES_DEPTH: usize = 24;

/// Which of h, h⁻¹ a consumer should evaluate (used by pullback potentials).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conjugacy {
    pub grid_n: usize,
    /// Unstable component u⁺ at grid point (i/N, j/N), stored at j·N + i.
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    /// Sup-norm of the discretized conjugacy equation on the grid.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of successive sweep updates.
    pub update_history: Vec<f64>,
    pub direction: Direction,
    pub frame: EigenFrame,
    pub map: AnosovMap,
    pub series_depth: usize,
    /// Max difference between pure bilinear and series-refined u at random
    /// off-grid points.
    pub off_grid_error: f64,
    /// |h(p₀)| for the fixed point p₀ of a continuing the origin.
    pub normalization_offset: f64,
}

fn perturbation(map: &AnosovMap, a_real: &Mat2, x: Vec2) -> Vec2 {
    sub(map.lift(x), a_real.apply(x))
}

fn reduce(x: Vec2) -> Vec2 {
    [x[0].rem_euclid(1.0), x[1].rem_euclid(1.0)]
}

fn interp(field: &[f64], n: usize, p: Vec2) -> f64 {
    let fx = p[0].rem_euclid(1.0) * n as f64;
    let fy = p[1].rem_euclid(1.0) * n as f64;
    let i0 = (fx.floor() as usize) % n;
    let j0 = (fy.floor() as usize) % n;
    let tx = fx - fx.floor();
    let ty = fy - fy.floor();
    let i1 = (i0 + 1) % n;
    let j1 = (j0 + 1) % n;
    let v00 = field[j0 * n + i0];
    let v10 = field[j0 * n + i1];
    let v01 = field[j1 * n + i0];
    let v11 = field[j1 * n + i1];
    (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
}

/// Solve the conjugacy equation on a `grid_n × grid_n` grid.
pub fn compute_conjugacy(
    map: &AnosovMap,
    grid_n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Conjugacy> {
    if grid_n < 256 || !grid_n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "conjugacy grid must be a power of two >= 256, got {grid_n}"
        )));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let frame = map.eigen_frame();
    let a_real = map.linear_part().to_real();
    let n = grid_n;
    let total = n * n;
    let grid_point = |idx: usize| [(idx % n) as f64 / n as f64, (idx / n) as f64 / n as f64];

    if map.is_linear() {
        let mut c = Conjugacy {
            grid_n,
            u_plus: vec![0.0; total],
            u_minus: vec![0.0; total],
            residual: 0.0,
            converged: true,
            iterations: 0,
            update_history: Vec::new(),
            direction: Direction::Forward,
            frame,
            map: map.clone(),
            series_depth: DEFAULT_SERIES_DEPTH,
            off_grid_error: 0.0,
            normalization_offset: 0.0,
        };
        c.normalization_offset = c
            .apply_h(&TorusPoint::origin())
            .distance(&TorusPoint::origin());
        return Ok(c);
    }

    // forward images and unstable forcing at grid points
    let fwd: Vec<(Vec2, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(idx);
            let g = perturbation(map, &a_real, x);
            (map.lift(x), dot(frame.left_u, g))
        })
        .collect();
    // backward images and stable forcing
    let bwd: Vec<(Vec2, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let y = grid_point(idx);
            let x = map.inverse_lift(y)?;
            let g = perturbation(map, &a_real, x);
            Ok((x, dot(frame.left_s, g)))
        })
        .collect::<Result<Vec<_>>>()?;

    let lu = frame.lambda_u;
    let ls = frame.lambda_s;
    let mut up = vec![0.0; total];
    let mut um = vec![0.0; total];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        let next: Vec<(f64, f64)> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let (ax, gp) = fwd[idx];
                let (bx, gm) = bwd[idx];
                ((gp + interp(&up, n, ax)) / lu, ls * interp(&um, n, bx) - gm)
            })
            .collect();
        let mut delta: f64 = 0.0;
        for (idx, (p, m)) in next.into_iter().enumerate() {
            delta = delta.max((p - up[idx]).abs()).max((m - um[idx]).abs());
            up[idx] = p;
            um[idx] = m;
        }
        history.push(delta);
        iterations = it + 1;
        if delta < tol * 1e-2 {
            converged = true;
            break;
        }
    }
    let residual = (0..total)
        .into_par_iter()
        .map(|idx| {
            let (ax, gp) = fwd[idx];
            let (bx, gm) = bwd[idx];
            let ru = gp + interp(&up, n, ax) - lu * up[idx];
            let rs = ls * interp(&um, n, bx) - gm - um[idx];
            ru.abs().max(rs.abs())
        })
        .reduce(|| 0.0, f64::max);
    if !converged || residual >= tol {
        return Err(Error::NonConvergence {
            what: "conjugacy iteration",
            iterations,
            residual,
        });
    }
    let mut c = Conjugacy {
        grid_n,
        u_plus: up,
        u_minus: um,
        residual,
        converged,
        iterations,
        update_history: history,
        direction: Direction::Forward,
        frame,
        map: map.clone(),
        series_depth: DEFAULT_SERIES_DEPTH,
        off_grid_error: 0.0,
        normalization_offset: 0.0,
    };
    c.off_grid_error = c.estimate_off_grid_error(512, 0x5eed);
    let p0 = refine_periodic_point(map, 1, &TorusPoint::origin())?;
    c.normalization_offset = c.apply_h(&p0).distance(&TorusPoint::origin());
    Ok(c)
}

impl Conjugacy {
    pub fn with_direction(mut self, d: Direction) -> Self {
        self.direction = d;
        self
    }

    /// Bilinear interpolation of (u⁺, u⁻).
    pub fn displacement_grid(&self, p: Vec2) -> Vec2 {
        [
            interp(&self.u_plus, self.grid_n, p),
            interp(&self.u_minus, self.grid_n, p),
        ]
    }

    /// (u⁺, u⁻) at `p`, refined by unrolling the recursions `depth` times.
    pub fn displacement(&self, p: Vec2, depth: usize) -> Vec2 {
        if self.map.is_linear() {
            return [0.0, 0.0];
        }
        let a_real = self.map.linear_part().to_real();
        let f = &self.frame;
        // unstable part: forward orbit
        let mut up = 0.0;
        let mut w = 1.0 / f.lambda_u;
        let mut x = p;
        for _ in 0..depth {
            up += w * dot(f.left_u, perturbation(&self.map, &a_real, x));
            x = reduce(self.map.lift(x));
            w /= f.lambda_u;
        }
        up += w * f.lambda_u * interp(&self.u_plus, self.grid_n, x);
        // stable part: backward orbit
        let mut um = 0.0;
        let mut w = 1.0;
        let mut y = p;
        for _ in 0..depth {
            match self.map.inverse_lift(y) {
                Ok(prev) => {
                    um -= w * dot(f.left_s, perturbation(&self.map, &a_real, prev));
                    y = reduce(prev);
                    w *= f.lambda_s;
                }
                Err(_) => break,
            }
        }
        um += w * interp(&self.u_minus, self.grid_n, y);
        [up, um]
    }

    fn displacement_vector(&self, p: Vec2, depth: usize) -> Vec2 {
        let d = self.displacement(p, depth);
        self.frame.compose(d[0], d[1])
    }

    /// h(p), evaluated with the configured series depth.
    pub fn apply_h(&self, p: &TorusPoint) -> TorusPoint {
        let x = p.coords();
        TorusPoint::from_vec(add(x, self.displacement_vector(x, self.series_depth)))
    }

    /// h(p) from the grid alone (bilinear).
    pub fn apply_h_bilinear(&self, p: &TorusPoint) -> TorusPoint {
        let x = p.coords();
        let d = self.displacement_grid(x);
        TorusPoint::from_vec(add(x, self.frame.compose(d[0], d[1])))
    }

    fn invert(&self, q: &TorusPoint, depth: usize, tol: f64) -> Result<TorusPoint> {
        let target = q.coords();
        let mut x = target;
        let n = self.grid_n as f64;
        let mut res = f64::INFINITY;
        for _ in 0..50 {
            let hx = add(x, self.displacement_vector(x, depth));
            let r = wrap(sub(hx, target));
            res = norm(r);
            if res < tol {
                return Ok(TorusPoint::from_vec(x));
            }
            // quasi-Newton: Jacobian of the grid interpolant at cell scale
            let step = 1.0 / n;
            let mut jac = Mat2::IDENTITY;
            for col in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[col] += step;
                xm[col] -= step;
                let dp = self.displacement_grid(xp);
                let dm = self.displacement_grid(xm);
                let dv = self.frame.compose(
                    (dp[0] - dm[0]) / (2.0 * step),
                    (dp[1] - dm[1]) / (2.0 * step),
                );
                jac.0[0][col] += dv[0];
                jac.0[1][col] += dv[1];
            }
            let delta = jac.solve(r).unwrap_or(r);
            x = sub(x, delta);
        }
        Err(Error::NonConvergence {
            what: "conjugacy inverse",
            iterations: 50,
            residual: res,
        })
    }

    /// h⁻¹(q): the a-orbit shadowing the L_A-orbit of q, found by sweeping
    /// the split orbit equations over a window of `2·series_depth` steps.
    pub fn apply_h_inverse(&self, q: &TorusPoint) -> Result<TorusPoint> {
        if self.map.is_linear() {
            return Ok(*q);
        }
        let k = self.series_depth.max(8);
        let f = &self.frame;
        let a_real = self.map.linear_part().to_real();
        let l = self.map.linear_part();
        let l_inv = l.inverse();
        // reference pseudo-orbit z_i = L^i q for i = -k..=k
        let m = 2 * k + 1;
        let mut z = vec![[0.0; 2]; m];
        z[k] = q.coords();
        for i in k + 1..m {
            z[i] = reduce(l.to_real().apply(z[i - 1]));
        }
        for i in (0..k).rev() {
            z[i] = reduce(l_inv.to_real().apply(z[i + 1]));
        }
        // defects of the pseudo-orbit: A z_i − z_{i+1} mod Z²
        let defect: Vec<Vec2> = (0..m - 1)
            .map(|i| wrap(sub(a_real.apply(z[i]), z[i + 1])))
            .collect();
        let dp: Vec<f64> = defect.iter().map(|d| dot(f.left_u, *d)).collect();
        let dm: Vec<f64> = defect.iter().map(|d| dot(f.left_s, *d)).collect();
        // w_{i+1} = A w_i + g(z_i + w_i) + defect_i
        let mut wp = vec![0.0; m];
        let mut wm = vec![0.0; m];
        let mut change = f64::INFINITY;
        let mut sweeps = 0;
        while change > 1e-16 && sweeps < 200 {
            change = 0.0;
            for i in (0..m - 1).rev() {
                let x = add(z[i], f.compose(wp[i], wm[i]));
                let g = perturbation(&self.map, &a_real, x);
                let v = (wp[i + 1] - dot(f.left_u, g) - dp[i]) / f.lambda_u;
                change = change.max((v - wp[i]).abs());
                wp[i] = v;
            }
            for i in 0..m - 1 {
                let x = add(z[i], f.compose(wp[i], wm[i]));
                let g = perturbation(&self.map, &a_real, x);
                let v = f.lambda_s * wm[i] + dot(f.left_s, g) + dm[i];
                change = change.max((v - wm[i + 1]).abs());
                wm[i + 1] = v;
            }
            sweeps += 1;
        }
        if !(change <= 1e-14) {
            return Err(Error::NonConvergence {
                what: "conjugacy inverse (shadowing)",
                iterations: sweeps,
                residual: change,
            });
        }
        Ok(TorusPoint::from_vec(add(z[k], f.compose(wp[k], wm[k]))))
    }

    /// h⁻¹(q) using only the bilinear grid (accuracy ~ interpolation error).
    pub fn apply_h_inverse_bilinear(&self, q: &TorusPoint) -> Result<TorusPoint> {
        if self.map.is_linear() {
            return Ok(*q);
        }
        self.invert(q, 0, 1e-12)
    }

    /// Evaluate h or h⁻¹ according to `direction`.
    pub fn transport(&self, p: &TorusPoint) -> Result<TorusPoint> {
        match self.direction {
            Direction::Forward => Ok(self.apply_h(p)),
            Direction::Inverse => self.apply_h_inverse(p),
        }
    }

    pub fn estimate_off_grid_error(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec2> = (0..samples)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        pts.par_iter()
            .map(|&p| {
                let a = self.displacement_grid(p);
                let b = self.displacement(p, self.series_depth);
                (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Geometric rate of the sweep updates (ratio of the last two updates
    /// before round-off).
    pub fn measured_rate(&self) -> Option<f64> {
        let h: Vec<f64> = self
            .update_history
            .iter()
            .copied()
            .filter(|v| *v > 1e-13)
            .collect();
        if h.len() < 4 {
            return None;
        }
        let k = h.len() / 2;
        Some((h[h.len() - 1] / h[k]).powf(1.0 / (h.len() - 1 - k) as f64))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub exponent: f64,
    /// Slopes over the fine and coarse halves of the dyadic scales.
    pub window_slopes: [f64; 2],
    pub scales: Vec<f64>,
    pub mean_increments: Vec<f64>,
    /// True when u vanishes identically and the regression is undefined.
    pub degenerate: bool,
}

/// Empirical Hölder exponent of h − id from grid increments at dyadic scales.
pub fn holder_estimate(c: &Conjugacy) -> HolderEstimate {
    let n = c.grid_n;
    let max_abs = c
        .u_plus
        .iter()
        .chain(&c.u_minus)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return HolderEstimate {
            exponent: 1.0,
            window_slopes: [1.0, 1.0],
            scales: Vec::new(),
            mean_increments: Vec::new(),
            degenerate: true,
        };
    }
    let stride = (n / 64).max(1);
    let offsets: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
    let mut scales = Vec::new();
    let mut incs = Vec::new();
    let mut s = 1usize;
    while s <= n / 8 {
        let mut acc = Vec::new();
        let mut dist_acc = Vec::new();
        for j in (0..n).step_by(stride) {
            for i in (0..n).step_by(stride) {
                for (ox, oy) in offsets {
                    let i2 = (i as i64 + ox * s as i64).rem_euclid(n as i64) as usize;
                    let j2 = (j as i64 + oy * s as i64).rem_euclid(n as i64) as usize;
                    let a = j * n + i;
                    let b = j2 * n + i2;
                    let du = c
                        .frame
                        .compose(c.u_plus[b] - c.u_plus[a], c.u_minus[b] - c.u_minus[a]);
                    acc.push(norm(du));
                    dist_acc.push(((ox * ox + oy * oy) as f64).sqrt() * s as f64 / n as f64);
                }
            }
        }
        let mean_inc = crate::sum::pairwise_sum(&acc) / acc.len() as f64;
        let mean_d = crate::sum::pairwise_sum(&dist_acc) / dist_acc.len() as f64;
        scales.push(mean_d);
        incs.push(mean_inc);
        s *= 2;
    }
    let lx: Vec<f64> = scales.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = incs.iter().map(|v| v.ln()).collect();
    let (slope, _, _) = linear_fit(&lx, &ly);
    let half = lx.len() / 2;
    let (fine, _, _) = linear_fit(&lx[..=half], &ly[..=half]);
    let (coarse, _, _) = linear_fit(&lx[half..], &ly[half..]);
    HolderEstimate {
        exponent: slope.min(1.0),
        window_slopes: [fine, coarse],
        scales,
        mean_increments: incs,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_gives_identity() {
        let c = compute_conjugacy(&AnosovMap::linear_cat(), 256, 1e-8, 10).unwrap();
        assert_eq!(c.residual, 0.0);
        assert!(c.u_plus.iter().all(|v| *v == 0.0));
        let h = holder_estimate(&c);
        assert!(h.degenerate);
        assert_eq!(h.exponent, 1.0);
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(compute_conjugacy(&AnosovMap::linear_cat(), 300, 1e-8, 10).is_err());
        assert!(compute_conjugacy(&AnosovMap::linear_cat(), 128, 1e-8, 10).is_err());
    }

    #[test]
    fn too_few_sweeps_is_nonconvergence() {
        let r = compute_conjugacy(&AnosovMap::standard(0.05), 256, 1e-8, 3);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn perturbed_conjugacy_small_grid() {
        let a = AnosovMap::standard(0.05);
        let c = compute_conjugacy(&a, 256, 1e-8, 200).unwrap();
        assert!(c.residual < 1e-8);
        assert!(c.normalization_offset < 1e-12);
        let rate = c.measured_rate().unwrap();
        let bound = (1.0 / c.frame.lambda_u).max(c.frame.lambda_s.abs());
        assert!(rate <= bound + 0.05, "rate {rate} bound {bound}");
        // conjugacy equation at off-grid points, series evaluation
        for &(x, y) in &[(0.123, 0.456), (0.9, 0.01), (0.5, 0.77)] {
            let p = TorusPoint::new(x, y);
            let lhs = c.apply_h(&a.apply(&p));
            let rhs = AnosovMap::linear_cat().apply(&c.apply_h(&p));
            assert!(lhs.distance(&rhs) < 1e-11, "{}", lhs.distance(&rhs));
            let back = c
                .apply_h_inverse(&c.apply_h(&p))
                .map_err(|e| format!("{e:?}"))
                .unwrap();
            assert!(back.distance(&p) < 1e-9);
        }
    }
}
