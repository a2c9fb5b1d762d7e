//! Leafwise measures, the ω cocycles and the local product structure.
//!
//! Conventions: the unstable leaf measure of generation n has density
//! e^{S_nφ(y)} with respect to arclength on aⁿW pulled back to W; the stable
//! one uses backward sums and a⁻ⁿ. With these,
//! a_*(e^{−φ} m^u_x) ∝ m^u_{a x}, holonomy along stable leaves transports
//! m^u with density e^{−ω^u}, and μ = e^{−(ω^u+ω^s+φ)} (m^u_x × m^s_x) on a
//! chart. All comparisons renormalize to total mass one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugacy::Conjugacy;
use crate::equilibrium::OrbitEnsemble;
use crate::error::{Error, Result};
use crate::leaves::{intersect, LeafChart, LeafSegment, MAX_HALF_LENGTH};
use crate::map::AnosovMap;
use crate::potential::Potential;
use crate::splitting::{direction, Side};
use crate::sum::compensated_sum;
use crate::torus::{add, dot, norm, scale, sub, wrap, TorusPoint, Vec2};

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const MAX_TERMS: usize = 200;
/// Arclength between reference atoms on the n-th image of a leaf.
pub const DEFAULT_IMAGE_SPACING: f64 = 0.2;
const MAX_SAMPLES: usize = 8_000_000;
const SWITCH_SEPARATION: f64 = 1e-6;
/// Largest admissible product chart half-size.
pub const MAX_CHART_HALF_SIZE: f64 = 0.25;
/// Parameter limit for intersections inside a product chart.
const CHART_REACH: f64 = 3.0 * MAX_CHART_HALF_SIZE;
/// Steps between re-projections of an ω pair onto the common leaf.
const REPROJECT_EVERY: usize = 4;

fn phi_at(map: &AnosovMap, phi: &Potential, conj: Option<&Conjugacy>, p: Vec2) -> Result<f64> {
    phi.evaluate(map, conj, &TorusPoint::from_vec(p))
}

/// A truncated ω sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaSum {
    pub value: f64,
    pub terms: usize,
    /// Geometric bound on the neglected tail.
    pub tail_bound: f64,
    /// Measured contraction rate of the pair separation.
    pub contraction: f64,
}

impl OmegaSum {
    fn zero() -> Self {
        OmegaSum {
            value: 0.0,
            terms: 0,
            tail_bound: 0.0,
            contraction: 0.0,
        }
    }
}

/// Σ_{i≥0} φ(g^i z) − φ(g^i y) for z, y on a common leaf contracted by g
/// (g = a along stable leaves, g = a⁻¹ along unstable leaves).
pub fn omega_pair(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    z: &TorusPoint,
    y: &TorusPoint,
    contracted: Side,
    tail_tol: f64,
) -> Result<OmegaSum> {
    if matches!(phi, Potential::Zero | Potential::Constant { .. }) || z == y {
        return Ok(OmegaSum::zero());
    }
    let step = |p: Vec2| -> Result<Vec2> {
        match contracted {
            Side::Stable => Ok(map.apply(&TorusPoint::from_vec(p)).coords()),
            Side::Unstable => Ok(map.apply_inverse(&TorusPoint::from_vec(p))?.coords()),
        }
    };
    let mut terms = Vec::new();
    let mut zi = z.coords();
    let mut yi = y.coords();
    let mut sep = norm(wrap(sub(zi, yi)));
    let mut theta: f64 = 0.0;
    let mut grad: f64 = 0.0;
    let mut last = f64::INFINITY;
    // exact pairs while the separation is resolvable; z is re-projected
    // onto the leaf of y after each step so transverse rounding cannot grow
    while sep >= SWITCH_SEPARATION && terms.len() < MAX_TERMS {
        let t = phi_at(map, phi, conj, zi)? - phi_at(map, phi, conj, yi)?;
        grad = grad.max(t.abs() / sep);
        terms.push(t);
        last = t.abs();
        yi = step(yi)?;
        zi = step(zi)?;
        if terms.len() % REPROJECT_EVERY == 0 {
            let chart = LeafChart::new(map, &TorusPoint::from_vec(yi), contracted)?;
            let d = wrap(sub(zi, yi));
            let (tp, _) = chart.project(add(yi, d), dot(d, chart.tangent_at_base()))?;
            zi = chart.point(tp)?;
        }
        let prev_sep = sep;
        sep = norm(wrap(sub(zi, yi)));
        theta = sep / prev_sep;
    }
    // tangent transport of the offset along the contracted line
    if terms.len() < MAX_TERMS {
        let e = direction(map, &TorusPoint::from_vec(yi), contracted)?;
        let mut v = scale(dot(wrap(sub(zi, yi)), e), e);
        loop {
            let t = phi_at(map, phi, conj, add(yi, v))? - phi_at(map, phi, conj, yi)?;
            let len = norm(v);
            if len > 0.0 {
                grad = grad.max(t.abs() / len);
            }
            terms.push(t);
            last = t.abs().max(grad * len);
            if last < tail_tol || terms.len() >= MAX_TERMS {
                break;
            }
            let ny = step(yi)?;
            let nv = match contracted {
                Side::Stable => map.derivative(&TorusPoint::from_vec(yi)).apply(v),
                Side::Unstable => map.derivative(&TorusPoint::from_vec(ny)).solve(v).ok_or(
                    Error::NonConvergence {
                        what: "omega transport (singular Jacobian)",
                        iterations: terms.len(),
                        residual: f64::NAN,
                    },
                )?,
            };
            if len > 0.0 {
                theta = norm(nv) / len;
            }
            yi = ny;
            v = nv;
        }
    }
    let theta = theta.min(0.999);
    Ok(OmegaSum {
        value: compensated_sum(&terms),
        terms: terms.len(),
        tail_bound: last * theta / (1.0 - theta),
        contraction: theta,
    })
}

/// ω^u_x(y) = Σ_{i≥0} φ(aⁱ[x,y]) − φ(aⁱy).
pub fn omega_u(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    x: &TorusPoint,
    y: &TorusPoint,
    tail_tol: f64,
) -> Result<OmegaSum> {
    if x == y {
        return Ok(OmegaSum::zero());
    }
    let z = crate::leaves::bracket_within(map, x, y, MAX_HALF_LENGTH)?;
    omega_pair(map, phi, conj, &z, y, Side::Stable, tail_tol)
}

/// ω^s_x(y) = Σ_{i≥0} φ(a⁻ⁱ[y,x]) − φ(a⁻ⁱy).
pub fn omega_s(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    x: &TorusPoint,
    y: &TorusPoint,
    tail_tol: f64,
) -> Result<OmegaSum> {
    if x == y {
        return Ok(OmegaSum::zero());
    }
    let z = crate::leaves::bracket_within(map, y, x, MAX_HALF_LENGTH)?;
    omega_pair(map, phi, conj, &z, y, Side::Unstable, tail_tol)
}

/// Generation-n leaf measure on a chart parameter interval, stored as a
/// normalized cumulative distribution on a fine uniform grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafMeasure {
    pub base: TorusPoint,
    pub side: Side,
    pub generation: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    /// cdf[k] = mass of [t_lo, t_lo + k·(t_hi − t_lo)/(len − 1)].
    pub cdf: Vec<f64>,
}

impl LeafMeasure {
    pub fn samples(&self) -> usize {
        self.cdf.len() - 1
    }

    fn cdf_at(&self, t: f64) -> f64 {
        let n = self.samples();
        let u = ((t - self.t_lo) / (self.t_hi - self.t_lo) * n as f64).clamp(0.0, n as f64);
        let k = (u.floor() as usize).min(n - 1);
        let f = u - k as f64;
        self.cdf[k] * (1.0 - f) + self.cdf[k + 1] * f
    }

    /// Mass of the chart-parameter interval [a, b] (order-insensitive).
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        (self.cdf_at(a.max(b)) - self.cdf_at(a.min(b))).max(0.0)
    }

    /// Masses of `bins` equal intervals, as (midpoint, mass) atoms.
    pub fn atoms(&self, bins: usize) -> Vec<(f64, f64)> {
        let w = (self.t_hi - self.t_lo) / bins as f64;
        (0..bins)
            .map(|k| {
                let a = self.t_lo + k as f64 * w;
                (a + 0.5 * w, self.mass(a, a + w))
            })
            .collect()
    }
}

/// Running data of one reference atom: log of S_nφ and of the arclength
/// growth factor of the chart tangent under n steps.
fn atom_log_weight(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    side: Side,
    y0: Vec2,
    v0: Vec2,
    n: usize,
) -> Result<f64> {
    let mut y = y0;
    let mut v = v0;
    let mut s = 0.0;
    for _ in 0..n {
        match side {
            Side::Unstable => {
                let (ny, d) = map.lift_with_jacobian(y);
                let nv = d.apply(v);
                s += match phi {
                    Potential::PhiU => -(norm(nv) / norm(v)).ln(),
                    _ => phi_at(map, phi, conj, y)?,
                };
                y = [ny[0].rem_euclid(1.0), ny[1].rem_euclid(1.0)];
                v = nv;
            }
            Side::Stable => {
                let ny = map.inverse_lift(y)?;
                let d = map.lift_jacobian(ny);
                let nv = d.solve(v).ok_or(Error::NonConvergence {
                    what: "stable leaf measure (singular Jacobian)",
                    iterations: 0,
                    residual: f64::NAN,
                })?;
                s += match phi {
                    Potential::PhiS => -(norm(nv) / norm(v)).ln(),
                    _ => phi_at(map, phi, conj, y)?,
                };
                y = [ny[0].rem_euclid(1.0), ny[1].rem_euclid(1.0)];
                v = nv;
            }
        }
    }
    Ok(s + norm(v).ln())
}

/// Leaf measure of generation n on chart parameters [t_lo, t_hi].
pub fn leaf_measure_on_chart(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    chart: &LeafChart,
    t_lo: f64,
    t_hi: f64,
    n: usize,
    image_spacing: f64,
) -> Result<LeafMeasure> {
    let (t_lo, t_hi) = (t_lo.min(t_hi), t_lo.max(t_hi));
    if !(t_hi > t_lo) {
        return Err(Error::InvalidInput("empty leaf interval".into()));
    }
    let lam = map.eigen_frame().lambda_u.abs();
    let growth = lam.powi(n as i32) * (t_hi - t_lo);
    let samples = ((growth / image_spacing).ceil() as usize).max(64);
    if samples > MAX_SAMPLES {
        return Err(Error::Overflow(format!(
            "leaf measure needs {samples} reference atoms (cap {MAX_SAMPLES})"
        )));
    }
    let h = (t_hi - t_lo) / samples as f64;
    let side = chart.side();
    let logw: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let t = t_lo + (k as f64 + 0.5) * h;
            let (y, v) = chart.point_and_tangent(t)?;
            atom_log_weight(map, phi, conj, side, y, v, n)
        })
        .collect::<Result<_>>()?;
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let total = compensated_sum(&w);
    let mut cdf = Vec::with_capacity(samples + 1);
    cdf.push(0.0);
    // running compensated prefix sums
    let mut acc = 0.0;
    let mut comp = 0.0;
    for x in &w {
        let y = x / total - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        cdf.push(acc);
    }
    *cdf.last_mut().unwrap() = 1.0;
    Ok(LeafMeasure {
        base: chart.base(),
        side,
        generation: n,
        t_lo,
        t_hi,
        cdf,
    })
}

/// Leaf measure on the parameter range of a traced segment.
pub fn leaf_measure(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    segment: &LeafSegment,
    n: usize,
) -> Result<LeafMeasure> {
    let chart = LeafChart::new(map, &segment.base, segment.side)?;
    let lo = segment.chart_params.first().copied().unwrap_or(-0.1);
    let hi = segment.chart_params.last().copied().unwrap_or(0.1);
    leaf_measure_on_chart(map, phi, conj, &chart, lo, hi, n, DEFAULT_IMAGE_SPACING)
}

/// Total variation distance between two mass vectors after normalization.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let sp = compensated_sum(p);
    let sq = compensated_sum(q);
    let d: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(a, b)| (a / sp - b / sq).abs())
        .collect();
    0.5 * compensated_sum(&d)
}

/// TV distance between two leaf measures on a common chart, on `bins`
/// equal intervals of the first one's range.
pub fn refinement_tv(a: &LeafMeasure, b: &LeafMeasure, bins: usize) -> f64 {
    let pa: Vec<f64> = a.atoms(bins).iter().map(|x| x.1).collect();
    let w = (a.t_hi - a.t_lo) / bins as f64;
    let pb: Vec<f64> = (0..bins)
        .map(|k| {
            let lo = a.t_lo + k as f64 * w;
            b.mass(lo, lo + w)
        })
        .collect();
    total_variation(&pa, &pb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianCheck {
    pub discrepancy: f64,
    pub generation: usize,
    pub bins: usize,
}

fn bin_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|k| lo + (hi - lo) * k as f64 / bins as f64)
        .collect()
}

/// Compare a_*(e^{−φ} m^u_x) with m^u_{a(x)} on the images of `bins` equal
/// intervals of the measure's range.
pub fn check_dynamical_jacobian(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    lm: &LeafMeasure,
    bins: usize,
) -> Result<JacobianCheck> {
    if lm.side != Side::Unstable {
        return Err(Error::InvalidInput(
            "dynamical Jacobian check needs an unstable leaf measure".into(),
        ));
    }
    let source = LeafChart::new(map, &lm.base, Side::Unstable)?;
    let target = LeafChart::new(map, &map.apply(&lm.base), Side::Unstable)?;
    let lam = map.eigen_frame().lambda_u;
    let edges = bin_edges(lm.t_lo, lm.t_hi, bins);
    let images: Vec<f64> = edges
        .par_iter()
        .map(|&t| {
            let y = source.point(t)?;
            let ay = map.lift(y);
            let (tp, d) = target.project(ay, lam * t)?;
            if d > 1e-8 {
                return Err(Error::LeafEscape { drift: d, param: t });
            }
            Ok(tp)
        })
        .collect::<Result<_>>()?;
    let pushed: Vec<f64> = (0..bins)
        .into_par_iter()
        .map(|k| {
            let mid = source.point(0.5 * (edges[k] + edges[k + 1]))?;
            let f = phi_at(map, phi, conj, mid)?;
            Ok(lm.mass(edges[k], edges[k + 1]) * (-f).exp())
        })
        .collect::<Result<_>>()?;
    let lo = images.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = images.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tm = leaf_measure_on_chart(
        map,
        phi,
        conj,
        &target,
        lo,
        hi,
        lm.generation,
        DEFAULT_IMAGE_SPACING,
    )?;
    let direct: Vec<f64> = (0..bins)
        .map(|k| tm.mass(images[k], images[k + 1]))
        .collect();
    Ok(JacobianCheck {
        discrepancy: total_variation(&pushed, &direct),
        generation: lm.generation,
        bins,
    })
}

/// Transport m^u_x to W^u(x_s) by stable holonomy, reweight by e^{−ω^u_x},
/// and compare with m^u_{x_s}.
pub fn check_holonomy_jacobian(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    x: &TorusPoint,
    x_s: &TorusPoint,
    half_length: f64,
    generation: usize,
    bins: usize,
) -> Result<JacobianCheck> {
    let cx = LeafChart::new(map, x, Side::Unstable)?;
    let lm = leaf_measure_on_chart(
        map,
        phi,
        conj,
        &cx,
        -half_length,
        half_length,
        generation,
        DEFAULT_IMAGE_SPACING,
    )?;
    if x == x_s {
        return Ok(JacobianCheck {
            discrepancy: 0.0,
            generation,
            bins,
        });
    }
    let cxs = LeafChart::new(map, x_s, Side::Unstable)?;
    let edges = bin_edges(-half_length, half_length, bins);
    // slide a point of W^u(x) along its stable leaf to W^u(x_s)
    let slide = |t: f64| -> Result<(Vec2, f64, TorusPoint)> {
        let y = cx.point(t)?;
        let cs = LeafChart::new(map, &TorusPoint::from_vec(y), Side::Stable)?;
        let (s, _, z) = intersect(&cxs, &cs, MAX_HALF_LENGTH)
            .map_err(|_| Error::OutOfChart(format!("holonomy at {t}")))?;
        Ok((y, s, z))
    };
    let images: Vec<f64> = edges
        .par_iter()
        .map(|&t| slide(t).map(|r| r.1))
        .collect::<Result<_>>()?;
    let pushed: Vec<f64> = (0..bins)
        .into_par_iter()
        .map(|k| {
            let (y, _, z) = slide(0.5 * (edges[k] + edges[k + 1]))?;
            let w = omega_pair(
                map,
                phi,
                conj,
                &TorusPoint::from_vec(y),
                &z,
                Side::Stable,
                DEFAULT_TAIL_TOL,
            )?;
            Ok(lm.mass(edges[k], edges[k + 1]) * (-w.value).exp())
        })
        .collect::<Result<_>>()?;
    let lo = images.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = images.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tm = leaf_measure_on_chart(
        map,
        phi,
        conj,
        &cxs,
        lo,
        hi,
        generation,
        DEFAULT_IMAGE_SPACING,
    )?;
    let direct: Vec<f64> = (0..bins)
        .map(|k| tm.mass(images[k], images[k + 1]))
        .collect();
    Ok(JacobianCheck {
        discrepancy: total_variation(&pushed, &direct),
        generation,
        bins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductConfig {
    /// Bins per side.
    pub resolution: usize,
    /// Half-width of the chart in leaf parameters.
    pub half_size: f64,
    /// Generation of the leaf measures.
    pub generation: usize,
    /// Relative offset (in units of half_size) of the second base point.
    pub shift: f64,
}

impl Default for ProductConfig {
    fn default() -> Self {
        ProductConfig {
            resolution: 32,
            half_size: 0.2,
            generation: 12,
            shift: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    /// TV between the product formula and the binned ensemble.
    pub tv: f64,
    /// TV between product formulas built at the center and at a shifted base.
    pub base_shift_tv: f64,
    pub atoms_in_chart: usize,
    pub chart_mass: f64,
    pub resolution: usize,
    pub half_size: f64,
    pub generation: usize,
    pub period: u32,
}

/// Chart geometry shared by the product-formula evaluations.
struct ChartGrid {
    /// Points of W^u(x) at the u-bin edges and midpoints.
    u_edges: Vec<TorusPoint>,
    u_mids: Vec<TorusPoint>,
    s_edges: Vec<TorusPoint>,
    s_mids: Vec<TorusPoint>,
    /// Bin centers [s_mid_j, u_mid_i], stored at i·K + j.
    centers: Vec<TorusPoint>,
}

fn chart_grid(map: &AnosovMap, x: &TorusPoint, k: usize, delta: f64) -> Result<ChartGrid> {
    let cu = LeafChart::new(map, x, Side::Unstable)?;
    let cs = LeafChart::new(map, x, Side::Stable)?;
    let edges = bin_edges(-delta, delta, k);
    let mids: Vec<f64> = (0..k).map(|i| 0.5 * (edges[i] + edges[i + 1])).collect();
    let on = |c: &LeafChart, ts: &[f64]| -> Result<Vec<TorusPoint>> {
        ts.par_iter()
            .map(|&t| c.point(t).map(TorusPoint::from_vec))
            .collect()
    };
    let u_edges = on(&cu, &edges)?;
    let u_mids = on(&cu, &mids)?;
    let s_edges = on(&cs, &edges)?;
    let s_mids = on(&cs, &mids)?;
    let s_charts: Vec<LeafChart> = u_mids
        .par_iter()
        .map(|p| LeafChart::new(map, p, Side::Stable))
        .collect::<Result<_>>()?;
    let u_charts: Vec<LeafChart> = s_mids
        .par_iter()
        .map(|p| LeafChart::new(map, p, Side::Unstable))
        .collect::<Result<_>>()?;
    let centers: Vec<TorusPoint> = (0..k * k)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            intersect(&u_charts[j], &s_charts[i], CHART_REACH).map(|r| r.2)
        })
        .collect::<Result<_>>()?;
    Ok(ChartGrid {
        u_edges,
        u_mids,
        s_edges,
        s_mids,
        centers,
    })
}

/// Bin masses of the product formula built at base point `b`, for the
/// rectangles of the grid (defined in the center's coordinates).
fn product_masses(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    b: &TorusPoint,
    g: &ChartGrid,
    generation: usize,
) -> Result<Vec<f64>> {
    let k = g.u_mids.len();
    let bu = LeafChart::new(map, b, Side::Unstable)?;
    let bs = LeafChart::new(map, b, Side::Stable)?;
    // [b, y] for y on W^u(x): param on W^u(b) and the point itself
    let to_bu = |y: &TorusPoint| -> Result<(f64, TorusPoint)> {
        let c = LeafChart::new(map, y, Side::Stable)?;
        intersect(&bu, &c, CHART_REACH).map(|r| (r.0, r.2))
    };
    // [y, b] for y on W^s(x): param on W^s(b)
    let to_bs = |y: &TorusPoint| -> Result<(f64, TorusPoint)> {
        let c = LeafChart::new(map, y, Side::Unstable)?;
        intersect(&c, &bs, CHART_REACH).map(|r| (r.1, r.2))
    };
    let ue: Vec<f64> = g
        .u_edges
        .par_iter()
        .map(|y| to_bu(y).map(|r| r.0))
        .collect::<Result<_>>()?;
    let se: Vec<f64> = g
        .s_edges
        .par_iter()
        .map(|y| to_bs(y).map(|r| r.0))
        .collect::<Result<_>>()?;
    let um: Vec<TorusPoint> = g
        .u_mids
        .par_iter()
        .map(|y| to_bu(y).map(|r| r.1))
        .collect::<Result<_>>()?;
    let sm: Vec<TorusPoint> = g
        .s_mids
        .par_iter()
        .map(|y| to_bs(y).map(|r| r.1))
        .collect::<Result<_>>()?;
    let span = |e: &[f64]| {
        let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (ulo, uhi) = span(&ue);
    let (slo, shi) = span(&se);
    let mu = leaf_measure_on_chart(
        map,
        phi,
        conj,
        &bu,
        ulo,
        uhi,
        generation,
        DEFAULT_IMAGE_SPACING,
    )?;
    let ms = leaf_measure_on_chart(
        map,
        phi,
        conj,
        &bs,
        slo,
        shi,
        generation,
        DEFAULT_IMAGE_SPACING,
    )?;
    let u_mass: Vec<f64> = (0..k).map(|i| mu.mass(ue[i], ue[i + 1])).collect();
    let s_mass: Vec<f64> = (0..k).map(|j| ms.mass(se[j], se[j + 1])).collect();
    (0..k * k)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            let p = g.centers[idx];
            let wu = omega_pair(map, phi, conj, &um[i], &p, Side::Stable, DEFAULT_TAIL_TOL)?;
            let ws = omega_pair(map, phi, conj, &sm[j], &p, Side::Unstable, DEFAULT_TAIL_TOL)?;
            let f = phi.evaluate(map, conj, &p)?;
            Ok(u_mass[i] * s_mass[j] * (-(wu.value + ws.value + f)).exp())
        })
        .collect()
}

/// Compare the product formula on a chart around `center` with the binned
/// ensemble, and with the product formula built at a shifted base point.
pub fn product_reconstruction(
    map: &AnosovMap,
    phi: &Potential,
    conj: Option<&Conjugacy>,
    ensemble: &OrbitEnsemble,
    center: &TorusPoint,
    cfg: &ProductConfig,
) -> Result<ProductReport> {
    let k = cfg.resolution;
    let delta = cfg.half_size;
    if k == 0 || !(delta > 0.0 && delta <= MAX_CHART_HALF_SIZE) {
        return Err(Error::InvalidInput(format!(
            "product chart needs resolution > 0 and half-size in (0, {MAX_CHART_HALF_SIZE}]"
        )));
    }
    let g = chart_grid(map, center, k, delta)?;
    let formula = product_masses(map, phi, conj, center, &g, cfg.generation)?;

    let cu = LeafChart::new(map, center, Side::Unstable)?;
    let cs = LeafChart::new(map, center, Side::Stable)?;
    let shifted = {
        let yu = TorusPoint::from_vec(cu.point(cfg.shift * delta)?);
        let ys = TorusPoint::from_vec(cs.point(cfg.shift * delta)?);
        let a = LeafChart::new(map, &ys, Side::Unstable)?;
        let b = LeafChart::new(map, &yu, Side::Stable)?;
        intersect(&a, &b, CHART_REACH)?.2
    };
    let formula_shifted = product_masses(map, phi, conj, &shifted, &g, cfg.generation)?;

    // bin the ensemble in the center's chart coordinates
    let frame = map.eigen_frame();
    let reach = 1.5 * delta;
    let binned: Vec<Option<(usize, f64)>> = ensemble
        .points
        .par_iter()
        .zip(ensemble.weights.par_iter())
        .map(|(q, &w)| {
            let c = frame.coords(center.displacement_to(q));
            if c[0].abs() > reach || c[1].abs() > reach {
                return Ok(None);
            }
            let qs = LeafChart::new(map, q, Side::Stable)?;
            let qu = LeafChart::new(map, q, Side::Unstable)?;
            let u = match intersect(&cu, &qs, CHART_REACH) {
                Ok(r) => r.0,
                Err(_) => return Ok(None),
            };
            let s = match intersect(&qu, &cs, CHART_REACH) {
                Ok(r) => r.1,
                Err(_) => return Ok(None),
            };
            if u.abs() >= delta || s.abs() >= delta {
                return Ok(None);
            }
            let i = (((u + delta) / (2.0 * delta)) * k as f64).floor() as usize;
            let j = (((s + delta) / (2.0 * delta)) * k as f64).floor() as usize;
            Ok(Some((i.min(k - 1) * k + j.min(k - 1), w)))
        })
        .collect::<Result<_>>()?;
    let mut hist = vec![0.0; k * k];
    let mut atoms = 0;
    for (idx, w) in binned.into_iter().flatten() {
        hist[idx] += w;
        atoms += 1;
    }
    let chart_mass = compensated_sum(&hist);
    if atoms == 0 {
        return Err(Error::OutOfChart(
            "no ensemble atoms inside the chart".into(),
        ));
    }
    Ok(ProductReport {
        tv: total_variation(&formula, &hist),
        base_shift_tv: total_variation(&formula, &formula_shifted),
        atoms_in_chart: atoms,
        chart_mass,
        resolution: k,
        half_size: delta,
        generation: cfg.generation,
        period: ensemble.period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leaves::local_manifold;
    use crate::potential::FourierTerm;

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

    #[test]
    fn omega_vanishes_for_constants_and_diagonal() {
        let a = AnosovMap::standard(0.05);
        let x = TorusPoint::new(0.3, 0.3);
        let y = TorusPoint::new(0.33, 0.28);
        let c = Potential::Constant { value: 0.7 };
        assert_eq!(omega_u(&a, &c, None, &x, &y, 1e-12).unwrap().value, 0.0);
        assert_eq!(
            omega_u(&a, &fourier(), None, &x, &x, 1e-12).unwrap().value,
            0.0
        );
    }

    #[test]
    fn omega_cocycle_identity() {
        let a = AnosovMap::standard(0.05);
        let phi = fourier();
        let x = TorusPoint::new(0.3, 0.3);
        let y = TorusPoint::new(0.34, 0.27);
        // y' on the stable leaf of y shares the bracket with x
        let cs = LeafChart::new(&a, &y, Side::Stable).unwrap();
        let yp = TorusPoint::from_vec(cs.point(0.02).unwrap());
        let lhs = omega_u(&a, &phi, None, &x, &y, 1e-13).unwrap();
        let r1 = omega_u(&a, &phi, None, &x, &yp, 1e-13).unwrap();
        let r2 = omega_pair(&a, &phi, None, &yp, &y, Side::Stable, 1e-13).unwrap();
        assert!(
            (lhs.value - r1.value - r2.value).abs() < 1e-8,
            "{} {} {}",
            lhs.value,
            r1.value,
            r2.value
        );
        assert!(lhs.tail_bound < 1e-10);
    }

    #[test]
    fn srb_leaf_measure_is_arclength() {
        let a = AnosovMap::standard(0.05);
        let seg =
            local_manifold(&a, &TorusPoint::new(0.4, 0.6), Side::Unstable, 0.05, 0.01).unwrap();
        let lm = leaf_measure(&a, &Potential::PhiU, None, &seg, 6).unwrap();
        let chart = LeafChart::new(&a, &seg.base, Side::Unstable).unwrap();
        let atoms = lm.atoms(8);
        let w = (lm.t_hi - lm.t_lo) / 8.0;
        let lens: Vec<f64> = (0..8)
            .map(|k| {
                let p0 = chart.point(lm.t_lo + k as f64 * w).unwrap();
                let p1 = chart.point(lm.t_lo + (k + 1) as f64 * w).unwrap();
                norm(sub(p1, p0))
            })
            .collect();
        let total: f64 = lens.iter().sum();
        for (m, l) in atoms.iter().zip(&lens) {
            assert!((m.1 / (l / total) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn linear_dynamical_check_is_tight() {
        let a = AnosovMap::linear_cat();
        let seg =
            local_manifold(&a, &TorusPoint::new(0.2, 0.5), Side::Unstable, 0.05, 0.01).unwrap();
        let lm = leaf_measure(&a, &Potential::Zero, None, &seg, 6).unwrap();
        let r = check_dynamical_jacobian(&a, &Potential::Zero, None, &lm, 32).unwrap();
        assert!(r.discrepancy < 1e-6, "{}", r.discrepancy);
    }
}
