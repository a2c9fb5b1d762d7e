//! Smith normal form of integer 2×2 matrices and enumeration of the finite
//! group M⁻¹Z²/Z².

use crate::error::{Error, Result};

pub type RawMat = [[i128; 2]; 2];

fn mul(a: &RawMat, b: &RawMat) -> RawMat {
    let mut o = [[0i128; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    o
}

/// Smith normal form `P·M·Q = diag(d1, d2)` with `d1 | d2`, `d1, d2 ≥ 0`,
/// and P, Q unimodular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithForm {
    pub p: RawMat,
    pub q: RawMat,
    pub d: [i128; 2],
}

const ID: RawMat = [[1, 0], [0, 1]];

pub fn smith_normal_form(m: &RawMat) -> SmithForm {
    let mut a = *m;
    let mut p = ID;
    let mut q = ID;
    loop {
        // move the smallest nonzero entry to (0,0)
        let mut best: Option<(usize, usize)> = None;
        for i in 0..2 {
            for j in 0..2 {
                if a[i][j] != 0 && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else {
            return SmithForm { p, q, d: [0, 0] };
        };
        if bi == 1 {
            a.swap(0, 1);
            p.swap(0, 1);
        }
        if bj == 1 {
            for row in a.iter_mut() {
                row.swap(0, 1);
            }
            for row in q.iter_mut() {
                row.swap(0, 1);
            }
        }
        let piv = a[0][0];
        // clear column 0 below and row 0 to the right
        let f = a[1][0].div_euclid(piv);
        if a[1][0] != 0 {
            for j in 0..2 {
                a[1][j] -= f * a[0][j];
                p[1][j] -= f * p[0][j];
            }
        }
        let g = a[0][1].div_euclid(piv);
        if a[0][1] != 0 {
            for row in a.iter_mut() {
                row[1] -= g * row[0];
            }
            for row in q.iter_mut() {
                row[1] -= g * row[0];
            }
        }
        if a[1][0] != 0 || a[0][1] != 0 {
            continue;
        }
        // diagonal now; enforce divisibility
        if a[1][1] % piv != 0 {
            // add row 1 to row 0 and repeat
            for j in 0..2 {
                a[0][j] += a[1][j];
                p[0][j] += p[1][j];
            }
            continue;
        }
        if a[0][0] < 0 {
            a[0][0] = -a[0][0];
            p[0] = [-p[0][0], -p[0][1]];
        }
        if a[1][1] < 0 {
            a[1][1] = -a[1][1];
            p[1] = [-p[1][0], -p[1][1]];
        }
        debug_assert_eq!(mul(&mul(&p, m), &q), [[a[0][0], 0], [0, a[1][1]]]);
        return SmithForm {
            p,
            q,
            d: [a[0][0], a[1][1]],
        };
    }
}

/// Representatives of `M⁻¹Z² / Z²` as integer numerators over a common
/// denominator, enumerated in lexicographic order of Smith coordinates.
#[derive(Debug, Clone)]
pub struct CosetEnumeration {
    pub denominator: i128,
    pub numerators: Vec<[i128; 2]>,
}

pub fn enumerate_inverse_lattice(m: &RawMat, cap: usize) -> Result<CosetEnumeration> {
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).unsigned_abs();
    if det == 0 {
        return Err(Error::InvalidInput(
            "singular matrix has infinitely many cosets".into(),
        ));
    }
    if det > cap as u128 {
        return Err(Error::Overflow(format!(
            "|det| = {det} exceeds the enumeration cap {cap}"
        )));
    }
    let sf = smith_normal_form(m);
    let [d1, d2] = sf.d;
    let den = d2;
    let ratio = d2 / d1;
    let q = sf.q;
    let mut numerators = Vec::with_capacity(det as usize);
    for y1 in 0..d1 {
        for y2 in 0..d2 {
            // x = Q · (y1/d1, y2/d2) = (Q·(y1·ratio, y2)) / d2
            let a = y1 * ratio;
            let n1 = (q[0][0] * a + q[0][1] * y2).rem_euclid(den);
            let n2 = (q[1][0] * a + q[1][1] * y2).rem_euclid(den);
            numerators.push([n1, n2]);
        }
    }
    Ok(CosetEnumeration {
        denominator: den,
        numerators,
    })
}
