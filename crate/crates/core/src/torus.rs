//! Points of R²/Z², real 2×2 matrices, and unimodular integer matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale(s: f64, a: Vec2) -> Vec2 {
    [s * a[0], s * a[1]]
}

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub fn normalize(a: Vec2) -> Vec2 {
    let n = norm(a);
    [a[0] / n, a[1] / n]
}

/// Unsigned angle between the lines spanned by `a` and `b`, in [0, π/2].
pub fn line_angle(a: Vec2, b: Vec2) -> f64 {
    let c = (dot(a, b) / (norm(a) * norm(b))).abs().min(1.0);
    let s = (a[0] * b[1] - a[1] * b[0]).abs() / (norm(a) * norm(b));
    s.atan2(c)
}

/// Reduce a real vector to its representative of minimal norm modulo Z².
pub fn wrap(d: Vec2) -> Vec2 {
    [d[0] - d[0].round(), d[1] - d[1].round()]
}

fn reduce(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of the torus R²/Z², stored with coordinates in [0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x1: f64,
    x2: f64,
}

impl TorusPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self {
            x1: reduce(x1),
            x2: reduce(x2),
        }
    }

    pub fn from_vec(v: Vec2) -> Self {
        Self::new(v[0], v[1])
    }

    pub fn origin() -> Self {
        Self { x1: 0.0, x2: 0.0 }
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn coords(&self) -> Vec2 {
        [self.x1, self.x2]
    }

    /// Shortest displacement `other - self` over all integer shifts.
    pub fn displacement_to(&self, other: &TorusPoint) -> Vec2 {
        wrap([other.x1 - self.x1, other.x2 - self.x2])
    }

    /// Flat quotient distance; never exceeds √2/2.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        norm(self.displacement_to(other))
    }

    pub fn translate(&self, v: Vec2) -> TorusPoint {
        TorusPoint::new(self.x1 + v[0], self.x2 + v[1])
    }
}

/// Real 2×2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn apply(&self, v: Vec2) -> Vec2 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Mat2([
            [m[1][1] / d, -m[0][1] / d],
            [-m[1][0] / d, m[0][0] / d],
        ]))
    }

    pub fn transpose(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Solve `self · x = b`.
    pub fn solve(&self, b: Vec2) -> Option<Vec2> {
        self.inverse().map(|inv| inv.apply(b))
    }

    /// Real eigenvalues ordered by decreasing modulus, if the spectrum is real.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let t = self.trace();
        let d = self.det();
        let disc = t * t - 4.0 * d;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        // stable root pairing
        let big = if t >= 0.0 {
            0.5 * (t + s)
        } else {
            0.5 * (t - s)
        };
        let small = if big != 0.0 { d / big } else { 0.0 };
        Some((big, small))
    }

    /// Unit eigenvector for the dominant eigenvalue of a matrix with real,
    /// distinct-modulus spectrum.
    pub fn dominant_eigenvector(&self) -> Option<Vec2> {
        let (lam, _) = self.real_eigenvalues()?;
        let m = &self.0;
        // rows of (M - lam I) are orthogonal to the eigenvector; pick the larger row
        let r0 = [m[0][0] - lam, m[0][1]];
        let r1 = [m[1][0], m[1][1] - lam];
        let r = if norm(r0) >= norm(r1) { r0 } else { r1 };
        if norm(r) == 0.0 {
            return Some([1.0, 0.0]);
        }
        Some(normalize([-r[1], r[0]]))
    }
}

/// A unimodular integer 2×2 matrix (an element of GL(2,Z)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 2]; 2]", into = "[[i64; 2]; 2]")]
pub struct IntMatrix2 {
    entries: [[i64; 2]; 2],
}

impl TryFrom<[[i64; 2]; 2]> for IntMatrix2 {
    type Error = Error;
    fn try_from(e: [[i64; 2]; 2]) -> Result<Self> {
        IntMatrix2::new(e)
    }
}

impl From<IntMatrix2> for [[i64; 2]; 2] {
    fn from(m: IntMatrix2) -> Self {
        m.entries
    }
}

pub fn raw_det(e: &[[i64; 2]; 2]) -> i128 {
    e[0][0] as i128 * e[1][1] as i128 - e[0][1] as i128 * e[1][0] as i128
}

pub fn raw_mul(a: &[[i64; 2]; 2], b: &[[i64; 2]; 2]) -> Result<[[i64; 2]; 2]> {
    let mut out = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let v = a[i][0] as i128 * b[0][j] as i128 + a[i][1] as i128 * b[1][j] as i128;
            out[i][j] = i64::try_from(v)
                .map_err(|_| Error::Overflow("integer matrix product exceeds i64".into()))?;
        }
    }
    Ok(out)
}

impl IntMatrix2 {
    pub const IDENTITY: IntMatrix2 = IntMatrix2 {
        entries: [[1, 0], [0, 1]],
    };

    pub fn new(entries: [[i64; 2]; 2]) -> Result<Self> {
        let det = raw_det(&entries);
        if det != 1 && det != -1 {
            return Err(Error::NotUnimodular {
                entries,
                det: det.clamp(i64::MIN as i128, i64::MAX as i128) as i64,
            });
        }
        Ok(Self { entries })
    }

    pub fn cat_map() -> Self {
        Self {
            entries: [[2, 1], [1, 1]],
        }
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.entries
    }

    pub fn det(&self) -> i64 {
        raw_det(&self.entries) as i64
    }

    pub fn trace(&self) -> i64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn is_hyperbolic(&self) -> bool {
        let t = self.trace().abs();
        if self.det() == 1 {
            t > 2
        } else {
            // det -1: eigenvalues (t ± sqrt(t²+4))/2 never on the unit circle
            // except when t = 0, where they are ±1.
            t > 0
        }
    }

    pub fn mul(&self, o: &IntMatrix2) -> Result<IntMatrix2> {
        Ok(IntMatrix2 {
            entries: raw_mul(&self.entries, &o.entries)?,
        })
    }

    pub fn neg(&self) -> IntMatrix2 {
        let e = self.entries;
        IntMatrix2 {
            entries: [[-e[0][0], -e[0][1]], [-e[1][0], -e[1][1]]],
        }
    }

    pub fn inverse(&self) -> IntMatrix2 {
        let e = self.entries;
        let d = self.det();
        IntMatrix2 {
            entries: [[d * e[1][1], -d * e[0][1]], [-d * e[1][0], d * e[0][0]]],
        }
    }

    /// Integer power; negative exponents use the exact inverse.
    pub fn pow(&self, k: i64) -> Result<IntMatrix2> {
        let base = if k < 0 { self.inverse() } else { *self };
        let mut result = IntMatrix2::IDENTITY;
        let mut b = base;
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&b)?;
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b)?;
            }
        }
        Ok(result)
    }

    pub fn commutes_with(&self, o: &IntMatrix2) -> bool {
        match (self.mul(o), o.mul(self)) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        }
    }

    pub fn to_real(&self) -> Mat2 {
        let e = self.entries;
        Mat2([
            [e[0][0] as f64, e[0][1] as f64],
            [e[1][0] as f64, e[1][1] as f64],
        ])
    }

    pub fn spectral_radius(&self) -> f64 {
        let t = self.trace() as f64;
        let d = self.det() as f64;
        let disc = t * t - 4.0 * d;
        if disc < 0.0 {
            d.abs().sqrt()
        } else {
            0.5 * (t.abs() + disc.sqrt())
        }
    }

    /// Apply to an integer vector.
    pub fn apply_int(&self, v: [i128; 2]) -> [i128; 2] {
        let e = self.entries;
        [
            e[0][0] as i128 * v[0] + e[0][1] as i128 * v[1],
            e[1][0] as i128 * v[0] + e[1][1] as i128 * v[1],
        ]
    }

    /// Eigen-frame of a hyperbolic matrix.
    pub fn eigen_frame(&self) -> Result<EigenFrame> {
        if !self.is_hyperbolic() {
            return Err(Error::NotHyperbolic(self.entries));
        }
        EigenFrame::of(&self.to_real())
    }
}

/// Eigen-decomposition of a hyperbolic matrix: unit right eigenvectors and
/// the dual (left) covectors, so that v = (ℓ_u·v) e_u + (ℓ_s·v) e_s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenFrame {
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub e_u: Vec2,
    pub e_s: Vec2,
    pub left_u: Vec2,
    pub left_s: Vec2,
}

impl EigenFrame {
    pub fn of(m: &Mat2) -> Result<Self> {
        let (lu, ls) = m
            .real_eigenvalues()
            .ok_or_else(|| Error::InvalidInput("complex spectrum".into()))?;
        let e_u = m.dominant_eigenvector().unwrap();
        let inv = m
            .inverse()
            .ok_or_else(|| Error::InvalidInput("singular matrix".into()))?;
        let e_s = inv.dominant_eigenvector().unwrap();
        // canonical orientation: first nonzero component positive
        let orient = |v: Vec2| {
            if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
                scale(-1.0, v)
            } else {
                v
            }
        };
        let e_u = orient(e_u);
        let e_s = orient(e_s);
        let det = e_u[0] * e_s[1] - e_u[1] * e_s[0];
        let left_u = [e_s[1] / det, -e_s[0] / det];
        let left_s = [-e_u[1] / det, e_u[0] / det];
        Ok(Self {
            lambda_u: lu,
            lambda_s: ls,
            e_u,
            e_s,
            left_u,
            left_s,
        })
    }

    /// Coordinates (unstable, stable) of a vector in the eigenbasis.
    pub fn coords(&self, v: Vec2) -> Vec2 {
        [dot(self.left_u, v), dot(self.left_s, v)]
    }

    pub fn compose(&self, u: f64, s: f64) -> Vec2 {
        add(scale(u, self.e_u), scale(s, self.e_s))
    }

    /// Angle between the eigenlines.
    pub fn separation(&self) -> f64 {
        line_angle(self.e_u, self.e_s)
    }
}
