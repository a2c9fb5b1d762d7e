//! Local stable and unstable leaves, the bracket and holonomies.
//!
//! A leaf is represented through a dynamical chart. For the unstable leaf
//! of x we take q = a⁻ᴺ(x) and the straight segment through q along E^u(q),
//! then push it forward N times; the stable leaf uses aᴺ and a⁻ᴺ instead.
//! The chart parameter is scaled to unit speed at the base, so it
//! approximates arclength nearby.
//! Leaf tracing integrates the line field (RK4) as a predictor and snaps
//! each step back onto the chart as the corrector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::AnosovMap;
use crate::splitting::{direction, Side};
use crate::torus::{add, dot, norm, normalize, scale, sub, wrap, Mat2, TorusPoint, Vec2};

pub const DEFAULT_CHART_SIZE: f64 = 0.1;
pub const MAX_HALF_LENGTH: f64 = 0.2;
/// Total number of base-map applications used by a chart.
const CHART_BASE_DEPTH: u32 = 12;
const CORRECTOR_TOL: f64 = 1e-6;

fn reduce(x: Vec2) -> Vec2 {
    [x[0].rem_euclid(1.0), x[1].rem_euclid(1.0)]
}

/// A leaf through `base` parametrized as a dynamical image of a segment.
#[derive(Debug, Clone)]
pub struct LeafChart {
    map: AnosovMap,
    side: Side,
    base: TorusPoint,
    /// Lift of the pulled-back base point.
    q: Vec2,
    dir: Vec2,
    depth: usize,
    scale: f64,
    tangent0: Vec2,
}

impl LeafChart {
    pub fn new(map: &AnosovMap, base: &TorusPoint, side: Side) -> Result<Self> {
        let depth = CHART_BASE_DEPTH.div_ceil(map.power).max(1) as usize;
        let lam = map.eigen_frame().lambda_u.abs();
        let q = match side {
            Side::Unstable => map.iterate_inverse(base, depth)?,
            Side::Stable => map.iterate(base, depth),
        };
        let dir = direction(map, &q, side)?;
        let mut chart = Self {
            map: map.clone(),
            side,
            base: *base,
            q: q.coords(),
            dir,
            depth,
            scale: lam.powi(-(depth as i32)),
            tangent0: [0.0, 0.0],
        };
        // unit speed at the base
        let (_, tan) = chart.point_and_tangent(0.0)?;
        let speed = norm(tan);
        chart.scale /= speed;
        chart.tangent0 = scale(1.0 / speed, tan);
        Ok(chart)
    }

    pub fn base(&self) -> TorusPoint {
        self.base
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Unit tangent at the base point.
    pub fn tangent_at_base(&self) -> Vec2 {
        self.tangent0
    }

    fn raw(&self, t: f64) -> Result<Vec2> {
        let x = add(self.q, scale(t * self.scale, self.dir));
        match self.side {
            Side::Unstable => {
                let mut y = x;
                for _ in 0..self.depth {
                    y = reduce(self.map.lift(y));
                }
                Ok(y)
            }
            Side::Stable => {
                let mut y = x;
                for _ in 0..self.depth {
                    y = reduce(self.map.inverse_lift(y)?);
                }
                Ok(y)
            }
        }
    }

    /// The lift of a torus point closest to the base lift.
    fn near_base(&self, y: Vec2) -> Vec2 {
        let b = self.base.coords();
        add(b, wrap(sub(y, b)))
    }

    /// Lift of the leaf point with chart parameter `t`, near the base lift.
    pub fn point(&self, t: f64) -> Result<Vec2> {
        Ok(self.near_base(self.raw(t)?))
    }

    /// Point and derivative with respect to `t`.
    pub fn point_and_tangent(&self, t: f64) -> Result<(Vec2, Vec2)> {
        let x = add(self.q, scale(t * self.scale, self.dir));
        let v = scale(self.scale, self.dir);
        let (y, jac) = match self.side {
            Side::Unstable => {
                let mut y = x;
                let mut m = Mat2::IDENTITY;
                for _ in 0..self.depth {
                    let (ny, d) = self.map.lift_with_jacobian(y);
                    m = d.mul(&m);
                    y = reduce(ny);
                }
                (y, m)
            }
            Side::Stable => {
                let mut y = x;
                let mut m = Mat2::IDENTITY;
                for _ in 0..self.depth {
                    let prev = self.map.inverse_lift(y)?;
                    let d = self.map.lift_jacobian(prev);
                    let dinv = d.inverse().ok_or(Error::NonConvergence {
                        what: "leaf chart (singular Jacobian)",
                        iterations: 0,
                        residual: f64::NAN,
                    })?;
                    m = dinv.mul(&m);
                    y = reduce(prev);
                }
                (y, m)
            }
        };
        Ok((self.near_base(y), jac.apply(v)))
    }

    /// Chart parameter of the leaf point closest to `target` (a lift near
    /// the base), by Newton on the orthogonality condition.
    pub fn project(&self, target: Vec2, guess: f64) -> Result<(f64, f64)> {
        let mut t = guess;
        let mut dist = f64::INFINITY;
        for _ in 0..30 {
            let (y, tan) = self.point_and_tangent(t)?;
            let r = wrap(sub(target, y));
            dist = norm(r);
            let step = dot(r, tan) / dot(tan, tan);
            t += step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        Ok((t, dist))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafSegment {
    pub base: TorusPoint,
    pub side: Side,
    /// Signed arclength from the base, increasing.
    pub params: Vec<f64>,
    pub points: Vec<TorusPoint>,
    /// Chart parameter of each point (used by holonomies and brackets).
    #[serde(skip)]
    pub chart_params: Vec<f64>,
    /// Largest predictor/corrector discrepancy seen while tracing.
    pub max_drift: f64,
}

impl LeafSegment {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn rk4_step(map: &AnosovMap, side: Side, x: Vec2, h: f64, orient: Vec2) -> Result<Vec2> {
    let field = |y: Vec2| -> Result<Vec2> {
        let e = direction(map, &TorusPoint::from_vec(y), side)?;
        Ok(if dot(e, orient) < 0.0 {
            scale(-1.0, e)
        } else {
            e
        })
    };
    let k1 = field(x)?;
    let k2 = field(add(x, scale(h / 2.0, k1)))?;
    let k3 = field(add(x, scale(h / 2.0, k2)))?;
    let k4 = field(add(x, scale(h, k3)))?;
    let s = add(add(k1, scale(2.0, k2)), add(scale(2.0, k3), k4));
    Ok(add(x, scale(h / 6.0, s)))
}

/// Trace W^σ_loc(p) over [−half_length, half_length] with the given step.
pub fn local_manifold(
    map: &AnosovMap,
    p: &TorusPoint,
    side: Side,
    half_length: f64,
    step: f64,
) -> Result<LeafSegment> {
    if !(half_length > 0.0 && half_length <= MAX_HALF_LENGTH) {
        return Err(Error::InvalidInput(format!(
            "half_length must lie in (0, {MAX_HALF_LENGTH}], got {half_length}"
        )));
    }
    if !(step > 0.0 && step <= half_length) {
        return Err(Error::InvalidInput(format!("bad leaf step {step}")));
    }
    let chart = LeafChart::new(map, p, side)?;
    let n = (half_length / step).ceil() as usize;
    let h = half_length / n as f64;
    let trace = |sign: f64| -> Result<(Vec<f64>, Vec<Vec2>, Vec<f64>, f64)> {
        let mut arcs = Vec::with_capacity(n);
        let mut pts = Vec::with_capacity(n);
        let mut ts = Vec::with_capacity(n);
        let mut drift: f64 = 0.0;
        let mut x = p.coords();
        let mut t = 0.0;
        let mut arc = 0.0;
        let (_, tan0) = chart.point_and_tangent(0.0)?;
        let mut orient = scale(sign, normalize(tan0));
        for _ in 0..n {
            let pred = rk4_step(map, side, x, h, orient)?;
            let (t_new, d) = chart.project(pred, t + sign * h)?;
            if d > CORRECTOR_TOL {
                return Err(Error::LeafEscape {
                    drift: d,
                    param: arc,
                });
            }
            drift = drift.max(d);
            let (y, tan) = chart.point_and_tangent(t_new)?;
            arc += norm(sub(y, x));
            orient = scale(sign, normalize(tan));
            x = y;
            t = t_new;
            arcs.push(sign * arc);
            pts.push(y);
            ts.push(t);
        }
        Ok((arcs, pts, ts, drift))
    };
    let (bwd, fwd) = rayon::join(|| trace(-1.0), || trace(1.0));
    let (ba, bp, bt, bd) = bwd?;
    let (fa, fp, ft, fd) = fwd?;
    let mut params = Vec::with_capacity(2 * n + 1);
    let mut points = Vec::with_capacity(2 * n + 1);
    let mut chart_params = Vec::with_capacity(2 * n + 1);
    for i in (0..n).rev() {
        params.push(ba[i]);
        points.push(TorusPoint::from_vec(bp[i]));
        chart_params.push(bt[i]);
    }
    params.push(0.0);
    points.push(*p);
    chart_params.push(0.0);
    for i in 0..n {
        params.push(fa[i]);
        points.push(TorusPoint::from_vec(fp[i]));
        chart_params.push(ft[i]);
    }
    Ok(LeafSegment {
        base: *p,
        side,
        params,
        points,
        chart_params,
        max_drift: bd.max(fd),
    })
}

/// Intersection of two transverse charts: returns (s, t, point) with
/// cu.point(s) = cs.point(t) mod Z².
pub fn intersect(cu: &LeafChart, cs: &LeafChart, limit: f64) -> Result<(f64, f64, TorusPoint)> {
    // linear guess from the chart tangents at the two base points
    let d = wrap(sub(cs.base.coords(), cu.base.coords()));
    let tu0 = cu.tangent_at_base();
    let ts0 = cs.tangent_at_base();
    let g = Mat2([[tu0[0], -ts0[0]], [tu0[1], -ts0[1]]])
        .solve(d)
        .ok_or(Error::OutOfChart("tangent leaves".into()))?;
    let mut s = g[0];
    let mut t = g[1];
    let mut res = f64::INFINITY;
    for _ in 0..40 {
        let (pu, tu) = cu.point_and_tangent(s)?;
        let (ps, ts) = cs.point_and_tangent(t)?;
        let r = wrap(sub(pu, ps));
        res = norm(r);
        if res < 1e-14 {
            break;
        }
        let jac = Mat2([[tu[0], -ts[0]], [tu[1], -ts[1]]]);
        let step = jac
            .solve(r)
            .ok_or(Error::OutOfChart("tangent leaves".into()))?;
        s -= step[0];
        t -= step[1];
        if step[0].abs().max(step[1].abs()) < 1e-15 {
            break;
        }
        if s.abs() > limit || t.abs() > limit || !s.is_finite() || !t.is_finite() {
            return Err(Error::OutOfChart(format!(
                "leaf parameters ({s:.3e}, {t:.3e}) exceed {limit}"
            )));
        }
    }
    if res > 1e-10 {
        return Err(Error::OutOfChart(format!(
            "no intersection (residual {res:e})"
        )));
    }
    let p = cu.point(s)?;
    Ok((s, t, TorusPoint::from_vec(p)))
}

/// [x, y] = W^u_loc(x) ∩ W^s_loc(y) within the default chart size.
pub fn bracket(map: &AnosovMap, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
    bracket_within(map, x, y, DEFAULT_CHART_SIZE)
}

pub fn bracket_within(
    map: &AnosovMap,
    x: &TorusPoint,
    y: &TorusPoint,
    chart: f64,
) -> Result<TorusPoint> {
    if x.distance(y) > chart {
        return Err(Error::OutOfChart(format!(
            "points are {:.3e} apart, chart size {chart}",
            x.distance(y)
        )));
    }
    if x == y {
        return Ok(*x);
    }
    let cu = LeafChart::new(map, x, Side::Unstable)?;
    let cs = LeafChart::new(map, y, Side::Stable)?;
    let (_, _, p) = intersect(&cu, &cs, MAX_HALF_LENGTH.max(2.0 * chart))?;
    Ok(p)
}

/// Parameter correspondence of a holonomy between two transversals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Holonomy {
    /// Index into the source segment.
    pub from_index: Vec<usize>,
    pub param_from: Vec<f64>,
    /// Arclength-like chart parameter on the target transversal.
    pub param_to: Vec<f64>,
    pub points_to: Vec<TorusPoint>,
    pub monotone: bool,
}

impl Holonomy {
    /// Max/min ratio of local slopes of the parameter map.
    pub fn distortion(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for w in 0..self.param_to.len().saturating_sub(1) {
            let s = (self.param_to[w + 1] - self.param_to[w])
                / (self.param_from[w + 1] - self.param_from[w]);
            lo = lo.min(s.abs());
            hi = hi.max(s.abs());
        }
        hi / lo
    }
}

/// Slide the points of `from` along leaves of the `along` foliation onto
/// the leaf carrying `to`. Both segments must be leaves of the other
/// foliation.
pub fn holonomy(
    map: &AnosovMap,
    from: &LeafSegment,
    to: &LeafSegment,
    along: Side,
) -> Result<Holonomy> {
    if from.side != along.other() || to.side != along.other() {
        return Err(Error::InvalidInput(
            "holonomy transversals must be leaves of the other foliation".into(),
        ));
    }
    let target = LeafChart::new(map, &to.base, to.side)?;
    let rows: Vec<(f64, TorusPoint)> = from
        .points
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let slide = LeafChart::new(map, z, along)?;
            let res = match along {
                Side::Unstable => intersect(&slide, &target, MAX_HALF_LENGTH),
                Side::Stable => {
                    intersect(&target, &slide, MAX_HALF_LENGTH).map(|(s, t, p)| (t, s, p))
                }
            };
            res.map(|(_, t, p)| (t, p))
                .map_err(|_| Error::NoIntersection(i))
        })
        .collect::<Result<_>>()?;
    let param_to: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let points_to = rows.iter().map(|r| r.1).collect();
    let inc = param_to.windows(2).all(|w| w[1] > w[0]);
    let dec = param_to.windows(2).all(|w| w[1] < w[0]);
    Ok(Holonomy {
        from_index: (0..from.len()).collect(),
        param_from: from.params.clone(),
        param_to,
        points_to,
        monotone: inc || dec,
    })
}
