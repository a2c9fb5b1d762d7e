//! Grid certification of the Anosov property by invariant cone fields.
//!
//! The unstable cone at every point is the set of vectors within
//! `halfwidth` radians of the unstable eigenline of A; the stable cone is
//! defined from the stable eigenline. For each grid point we require that
//! Da maps the unstable cone strictly inside itself while expanding every
//! vector in it, and that Da⁻¹ does the same for the stable cone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::map::AnosovMap;
use crate::torus::{dot, norm, EigenFrame, Mat2, Vec2};

pub const DEFAULT_SAFETY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub pass: bool,
    pub grid_n: usize,
    pub cone_halfwidth: f64,
    pub safety: f64,
    /// Smallest stretch factor of a cone vector over both cone families.
    pub worst_expansion: f64,
    /// Smallest value of 1 − (image half-angle)/(cone half-angle).
    pub worst_containment_margin: f64,
    /// Grid cell (i, j) attaining the worst combined margin.
    pub witness_cell: [usize; 2],
    pub witness_side: String,
}

#[derive(Clone, Copy)]
struct CellResult {
    expansion: f64,
    containment: f64,
    side_is_stable: bool,
}

/// Angle (signed) of `v` measured from `axis` in the orthonormal frame
/// (axis, axis⊥).
fn angle_from(axis: Vec2, v: Vec2) -> f64 {
    let perp = [-axis[1], axis[0]];
    dot(v, perp).atan2(dot(v, axis))
}

/// Minimum of |M w|/|w| over unit vectors w within `half` of `axis`.
fn min_stretch_on_cone(m: &Mat2, axis: Vec2, half: f64) -> f64 {
    let perp = [-axis[1], axis[0]];
    let at = |t: f64| {
        let w = [
            axis[0] * t.cos() + perp[0] * t.sin(),
            axis[1] * t.cos() + perp[1] * t.sin(),
        ];
        norm(m.apply(w))
    };
    let mut best = at(-half).min(at(half));
    // interior critical points are eigenvectors of MᵀM
    let mtm = m.transpose().mul(m);
    let (a, b, d) = (mtm.0[0][0], mtm.0[0][1], mtm.0[1][1]);
    let theta0 = 0.5 * (2.0 * b).atan2(a - d);
    for k in 0..4 {
        let dir = [
            (theta0 + k as f64 * std::f64::consts::FRAC_PI_2).cos(),
            (theta0 + k as f64 * std::f64::consts::FRAC_PI_2).sin(),
        ];
        let t = angle_from(axis, dir);
        if t.abs() <= half {
            best = best.min(at(t));
        }
    }
    best
}

/// Half-angle of the image cone relative to `axis` (max |angle| of the image
/// of the two edges, assuming the image stays on the same side), and whether
/// the image is properly oriented.
fn image_half_angle(m: &Mat2, axis: Vec2, half: f64) -> f64 {
    let perp = [-axis[1], axis[0]];
    let edge = |t: f64| {
        [
            axis[0] * t.cos() + perp[0] * t.sin(),
            axis[1] * t.cos() + perp[1] * t.sin(),
        ]
    };
    let mut worst: f64 = 0.0;
    // the image of a sector under an invertible linear map is the sector
    // spanned by the edge images (or its complement); the center must
    // stay inside, which we check via the axis image
    let center = m.apply(axis);
    let mut c_angle = angle_from(axis, center);
    // lines, not rays
    if c_angle > std::f64::consts::FRAC_PI_2 {
        c_angle -= std::f64::consts::PI;
    } else if c_angle < -std::f64::consts::FRAC_PI_2 {
        c_angle += std::f64::consts::PI;
    }
    worst = worst.max(c_angle.abs());
    for t in [-half, half] {
        let img = m.apply(edge(t));
        let mut a = angle_from(axis, img);
        if a > std::f64::consts::FRAC_PI_2 {
            a -= std::f64::consts::PI;
        } else if a < -std::f64::consts::FRAC_PI_2 {
            a += std::f64::consts::PI;
        }
        worst = worst.max(a.abs());
    }
    worst
}

fn check_point(map: &AnosovMap, frame: &EigenFrame, x: Vec2, half: f64) -> CellResult {
    let d = map.base_jacobian(x);
    let eu = frame.e_u;
    let es = frame.e_s;
    let exp_u = min_stretch_on_cone(&d, eu, half);
    let cont_u = 1.0 - image_half_angle(&d, eu, half) / half;
    let (exp_s, cont_s) = match d.inverse() {
        Some(dinv) => (
            min_stretch_on_cone(&dinv, es, half),
            1.0 - image_half_angle(&dinv, es, half) / half,
        ),
        None => (0.0, f64::NEG_INFINITY),
    };
    let u_score = (exp_u - 1.0).min(cont_u);
    let s_score = (exp_s - 1.0).min(cont_s);
    CellResult {
        expansion: exp_u.min(exp_s),
        containment: cont_u.min(cont_s),
        side_is_stable: s_score < u_score,
    }
}

/// Cone-field certification on a `grid_n × grid_n` grid of the base map.
///
/// Passes when every grid point has expansion factor > 1 + safety and
/// containment margin > safety.
pub fn verify_anosov_cones(map: &AnosovMap, grid_n: usize, cone_halfwidth: f64) -> ConeReport {
    verify_anosov_cones_with_safety(map, grid_n, cone_halfwidth, DEFAULT_SAFETY)
}

pub fn verify_anosov_cones_with_safety(
    map: &AnosovMap,
    grid_n: usize,
    cone_halfwidth: f64,
    safety: f64,
) -> ConeReport {
    let frame = map.linear.eigen_frame().expect("hyperbolic linear part");
    let cells: Vec<CellResult> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|idx| {
            let i = idx / grid_n;
            let j = idx % grid_n;
            let x = [i as f64 / grid_n as f64, j as f64 / grid_n as f64];
            check_point(map, &frame, x, cone_halfwidth)
        })
        .collect();
    let mut worst_exp = f64::INFINITY;
    let mut worst_cont = f64::INFINITY;
    let mut worst_score = f64::INFINITY;
    let mut witness = 0usize;
    let mut witness_stable = false;
    for (idx, c) in cells.iter().enumerate() {
        worst_exp = worst_exp.min(c.expansion);
        worst_cont = worst_cont.min(c.containment);
        let score = (c.expansion - 1.0).min(c.containment);
        if score < worst_score {
            worst_score = score;
            witness = idx;
            witness_stable = c.side_is_stable;
        }
    }
    let pass = grid_n >= 1 && worst_exp > 1.0 + safety && worst_cont > safety;
    ConeReport {
        pass,
        grid_n,
        cone_halfwidth,
        safety,
        worst_expansion: worst_exp,
        worst_containment_margin: worst_cont,
        witness_cell: [witness / grid_n, witness % grid_n],
        witness_side: if witness_stable {
            "stable".into()
        } else {
            "unstable".into()
        },
    }
}
