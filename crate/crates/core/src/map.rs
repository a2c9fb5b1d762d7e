//! Sinusoidal perturbations of hyperbolic toral automorphisms.
//!
//! The base map is `x ↦ A·x + Σ_j ε_j v_j sin(2π(k_j·x + ρ_j))`, which is
//! Z²-periodic term by term. A map may also stand for a fixed power of that
//! base map (`power > 1`); all evaluation routines then compose the base map.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{add, norm, wrap, EigenFrame, IntMatrix2, Mat2, TorusPoint, Vec2};

/// One term `amplitude · direction · sin(2π(frequency·x + phase))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: f64,
    pub direction: Vec2,
    pub frequency: [i64; 2],
    #[serde(default)]
    pub phase: f64,
}

impl Perturbation {
    fn arg(&self, x: Vec2) -> f64 {
        TAU * (self.frequency[0] as f64 * x[0] + self.frequency[1] as f64 * x[1] + self.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnosovMap {
    pub linear: IntMatrix2,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
    /// Number of compositions of the base map this object represents.
    #[serde(default = "one")]
    pub power: u32,
}

fn one() -> u32 {
    1
}

const INVERSE_MAX_ITER: usize = 50;

impl AnosovMap {
    pub fn new(linear: IntMatrix2, perturbations: Vec<Perturbation>) -> Result<Self> {
        if !linear.is_hyperbolic() {
            return Err(Error::NotHyperbolic(linear.entries()));
        }
        Ok(Self {
            linear,
            perturbations,
            power: 1,
        })
    }

    pub fn linear_cat() -> Self {
        Self::new(IntMatrix2::cat_map(), Vec::new()).unwrap()
    }

    /// The cat map with the canonical one-term perturbation
    /// `ε (1,0) sin(2π x₁)`.
    pub fn standard(eps: f64) -> Self {
        Self::new(
            IntMatrix2::cat_map(),
            vec![Perturbation {
                amplitude: eps,
                direction: [1.0, 0.0],
                frequency: [1, 0],
                phase: 0.0,
            }],
        )
        .unwrap()
    }

    /// The same base map composed `k` times.
    pub fn powered(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("power must be positive".into()));
        }
        Ok(Self {
            linear: self.linear,
            perturbations: self.perturbations.clone(),
            power: self.power * k,
        })
    }

    pub fn is_linear(&self) -> bool {
        self.perturbations.iter().all(|p| p.amplitude == 0.0)
    }

    /// The linear part of the represented map, A^power.
    pub fn linear_part(&self) -> IntMatrix2 {
        self.linear
            .pow(self.power as i64)
            .expect("power of A fits in i64")
    }

    pub fn eigen_frame(&self) -> EigenFrame {
        self.linear_part()
            .eigen_frame()
            .expect("hyperbolic by construction")
    }

    /// Perturbation g(x) of the base map, so that base(x) = A·x + g(x).
    pub fn base_perturbation(&self, x: Vec2) -> Vec2 {
        let mut g = [0.0, 0.0];
        for p in &self.perturbations {
            let s = p.amplitude * p.arg(x).sin();
            g[0] += s * p.direction[0];
            g[1] += s * p.direction[1];
        }
        g
    }

    /// Base map on a lift (no reduction mod Z²).
    pub fn base_lift(&self, x: Vec2) -> Vec2 {
        add(self.linear.to_real().apply(x), self.base_perturbation(x))
    }

    /// Exact Jacobian of the base map.
    pub fn base_jacobian(&self, x: Vec2) -> Mat2 {
        let mut m = self.linear.to_real();
        for p in &self.perturbations {
            let c = p.amplitude * TAU * p.arg(x).cos();
            for i in 0..2 {
                for j in 0..2 {
                    m.0[i][j] += c * p.direction[i] * p.frequency[j] as f64;
                }
            }
        }
        m
    }

    /// Inverse of the base map by Newton iteration on a lift seeded at A⁻¹·q.
    pub fn base_inverse(&self, q: Vec2) -> Result<Vec2> {
        let ainv = self.linear.inverse().to_real();
        let mut x = ainv.apply(q);
        if self.is_linear() {
            return Ok(x);
        }
        let mut last = f64::INFINITY;
        let floor = 4.0 * f64::EPSILON * (1.0 + norm(q));
        for _ in 0..INVERSE_MAX_ITER {
            let r = wrap(crate::torus::sub(self.base_lift(x), q));
            let rn = norm(r);
            if rn <= floor {
                return Ok(x);
            }
            let jac = self.base_jacobian(x);
            let step = jac.solve(r).ok_or(Error::NonConvergence {
                what: "inverse map (singular Jacobian)",
                iterations: 0,
                residual: rn,
            })?;
            x = crate::torus::sub(x, step);
            last = rn;
        }
        let r = norm(wrap(crate::torus::sub(self.base_lift(x), q)));
        if r < 1e-13 * (1.0 + norm(q)) {
            return Ok(x);
        }
        Err(Error::NonConvergence {
            what: "inverse map",
            iterations: INVERSE_MAX_ITER,
            residual: last.min(r),
        })
    }

    /// The represented map on a lift.
    pub fn lift(&self, x: Vec2) -> Vec2 {
        let mut y = x;
        for _ in 0..self.power {
            y = self.base_lift(y);
        }
        y
    }

    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        TorusPoint::from_vec(self.lift(p.coords()))
    }

    /// Exact Jacobian of the represented map (chain rule over the power).
    pub fn derivative(&self, p: &TorusPoint) -> Mat2 {
        self.lift_jacobian(p.coords())
    }

    pub fn lift_jacobian(&self, x: Vec2) -> Mat2 {
        let mut y = x;
        let mut m = Mat2::IDENTITY;
        for _ in 0..self.power {
            m = self.base_jacobian(y).mul(&m);
            y = self.base_lift(y);
        }
        m
    }

    /// Map and Jacobian in one pass.
    pub fn lift_with_jacobian(&self, x: Vec2) -> (Vec2, Mat2) {
        let mut y = x;
        let mut m = Mat2::IDENTITY;
        for _ in 0..self.power {
            m = self.base_jacobian(y).mul(&m);
            y = self.base_lift(y);
        }
        (y, m)
    }

    pub fn inverse_lift(&self, q: Vec2) -> Result<Vec2> {
        let mut x = q;
        for _ in 0..self.power {
            x = self.base_inverse(x)?;
        }
        Ok(x)
    }

    pub fn apply_inverse(&self, q: &TorusPoint) -> Result<TorusPoint> {
        self.inverse_lift(q.coords()).map(TorusPoint::from_vec)
    }

    /// Minimum of |det Da| over a uniform grid; zero or sign change means the
    /// map is not a local diffeomorphism there.
    pub fn min_abs_jacobian_det(&self, grid_n: usize) -> (f64, bool) {
        let mut min = f64::INFINITY;
        let mut pos = false;
        let mut neg = false;
        for i in 0..grid_n {
            for j in 0..grid_n {
                let x = [i as f64 / grid_n as f64, j as f64 / grid_n as f64];
                let d = self.base_jacobian(x).det();
                min = min.min(d.abs());
                pos |= d > 0.0;
                neg |= d < 0.0;
            }
        }
        (min, pos && neg)
    }

    pub fn check_local_diffeomorphism(&self, grid_n: usize) -> Result<()> {
        let (min, sign_change) = self.min_abs_jacobian_det(grid_n);
        if sign_change || min == 0.0 {
            return Err(Error::NotCertified(format!(
                "det Da vanishes on the {grid_n}x{grid_n} grid (min |det| = {min:e})"
            )));
        }
        Ok(())
    }

    /// Iterate `n` times on the torus.
    pub fn iterate(&self, p: &TorusPoint, n: usize) -> TorusPoint {
        let mut q = *p;
        for _ in 0..n {
            q = self.apply(&q);
        }
        q
    }

    pub fn iterate_inverse(&self, p: &TorusPoint, n: usize) -> Result<TorusPoint> {
        let mut q = *p;
        for _ in 0..n {
            q = self.apply_inverse(&q)?;
        }
        Ok(q)
    }
}
