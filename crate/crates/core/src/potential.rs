//! Potentials on the torus.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::conjugacy::Conjugacy;
use crate::error::{Error, Result};
use crate::map::AnosovMap;
use crate::splitting::{log_stable_expansion, log_unstable_jacobian};
use crate::torus::TorusPoint;

/// `cos·cos(2π k·x) + sin·sin(2π k·x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: [i64; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    Constant {
        value: f64,
    },
    /// −log J, the forward SRB potential.
    PhiU,
    /// −log ‖D(a⁻¹)|E^s‖, the backward SRB potential.
    PhiS,
    Fourier {
        terms: Vec<FourierTerm>,
    },
    /// `inner` composed with the conjugacy (h or h⁻¹, by its direction);
    /// `inner` refers to the conjugacy's own map.
    Pullback {
        inner: Box<Potential>,
    },
}

impl Potential {
    pub fn fourier(terms: Vec<FourierTerm>) -> Self {
        Potential::Fourier { terms }
    }

    pub fn needs_conjugacy(&self) -> bool {
        match self {
            Potential::Pullback { .. } => true,
            _ => false,
        }
    }

    /// Pointwise value. `conj` is required only for pullbacks.
    pub fn evaluate(
        &self,
        map: &AnosovMap,
        conj: Option<&Conjugacy>,
        p: &TorusPoint,
    ) -> Result<f64> {
        match self {
            Potential::Zero => Ok(0.0),
            Potential::Constant { value } => Ok(*value),
            Potential::PhiU => Ok(-log_unstable_jacobian(map, p)?),
            Potential::PhiS => Ok(-log_stable_expansion(map, p)?),
            Potential::Fourier { terms } => Ok(fourier_value(terms, p)),
            Potential::Pullback { inner } => {
                let c = conj.ok_or_else(|| {
                    Error::InvalidInput("pullback potential requires a conjugacy".into())
                })?;
                let q = c.transport(p)?;
                inner.evaluate(&c.map, Some(c), &q)
            }
        }
    }

    /// Sup of |φ| over an m×m grid.
    pub fn grid_sup(&self, map: &AnosovMap, conj: Option<&Conjugacy>, m: usize) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let p = TorusPoint::new(i as f64 / m as f64, j as f64 / m as f64);
                sup = sup.max(self.evaluate(map, conj, &p)?.abs());
            }
        }
        Ok(sup)
    }
}

fn fourier_value(terms: &[FourierTerm], p: &TorusPoint) -> f64 {
    terms
        .iter()
        .map(|t| {
            let arg = TAU * (t.k[0] as f64 * p.x1() + t.k[1] as f64 * p.x2());
            t.cos * arg.cos() + t.sin * arg.sin()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_srb_potentials_are_constant() {
        let a = AnosovMap::linear_cat();
        let p = TorusPoint::new(0.17, 0.83);
        let l = ((3.0 + 5f64.sqrt()) / 2.0f64).ln();
        assert!((Potential::PhiU.evaluate(&a, None, &p).unwrap() + l).abs() < 1e-12);
        assert!((Potential::PhiS.evaluate(&a, None, &p).unwrap() + l).abs() < 1e-12);
    }

    #[test]
    fn fourier_and_serde() {
        let phi = Potential::fourier(vec![
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
        ]);
        let v = phi
            .evaluate(&AnosovMap::linear_cat(), None, &TorusPoint::new(0.0, 0.25))
            .unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let s = serde_json::to_string(&phi).unwrap();
        assert_eq!(serde_json::from_str::<Potential>(&s).unwrap(), phi);
        let bad = r#"{"kind":"constant","value":1.0,"extra":2}"#;
        assert!(serde_json::from_str::<Potential>(bad).is_err());
        assert!(Potential::Pullback {
            inner: Box::new(Potential::Zero)
        }
        .evaluate(&AnosovMap::linear_cat(), None, &TorusPoint::origin())
        .is_err());
    }
}
