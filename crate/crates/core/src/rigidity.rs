//! Entropy functional, centralizers and the affine commutant of a toral
//! automorphism, translation-invariance statistics and affine straightening.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::TAU;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugacy::Conjugacy;
use crate::equilibrium::{ExponentReport, OrbitEnsemble};
use crate::error::{Error, Result};
use crate::lattice::enumerate_inverse_lattice;
use crate::sum::compensated_sum;
use crate::torus::{dot, wrap, IntMatrix2, Mat2, TorusPoint, Vec2};

pub type Rational = Ratio<i64>;
/// A rational point of the torus, coordinates in [0, 1).
pub type RationalPoint = [Rational; 2];

pub const DEFAULT_ENTRY_BOUND: i64 = 10;
pub const DEFAULT_M_RANGE: (i64, i64) = (-5, 5);
pub const DEFAULT_MAX_DENOMINATOR: i64 = 12;
pub const DEFAULT_MODES: i64 = 4;
/// H candidates must stay below this multiple of the noise floor.
pub const NOISE_MULTIPLE: f64 = 5.0;
pub const DEFAULT_CLOSURE_CAP: usize = 100_000;

pub fn rational_point(x: (i64, i64), y: (i64, i64)) -> RationalPoint {
    normalize_point([Ratio::new(x.0, x.1), Ratio::new(y.0, y.1)])
}

fn frac(r: Rational) -> Rational {
    r - r.floor()
}

pub fn normalize_point(v: RationalPoint) -> RationalPoint {
    [frac(v[0]), frac(v[1])]
}

pub fn to_f64(v: &RationalPoint) -> Vec2 {
    [
        *v[0].numer() as f64 / *v[0].denom() as f64,
        *v[1].numer() as f64 / *v[1].denom() as f64,
    ]
}

fn apply_rational(b: &IntMatrix2, v: &RationalPoint) -> RationalPoint {
    let e = b.entries();
    normalize_point([
        v[0] * e[0][0] + v[1] * e[0][1],
        v[0] * e[1][0] + v[1] * e[1][1],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralizerData {
    pub m: IntMatrix2,
    pub k: u32,
    /// A = sign·M^k.
    pub sign: i8,
}

fn signed(m: &IntMatrix2, s: i8) -> IntMatrix2 {
    if s < 0 {
        m.neg()
    } else {
        *m
    }
}

/// Smallest-spectral-radius hyperbolic unit commuting with A, found by brute
/// force over entries in [−bound, bound] and verified by integer powers.
pub fn centralizer_generator(a: &IntMatrix2, bound: i64) -> Result<CentralizerData> {
    if !a.is_hyperbolic() {
        return Err(Error::NotHyperbolic(a.entries()));
    }
    let max_a = a
        .entries()
        .iter()
        .flatten()
        .map(|x| x.abs())
        .max()
        .unwrap_or(0);
    if bound < max_a {
        return Err(Error::InvalidInput(format!(
            "entry bound {bound} is below the largest entry {max_a} of A"
        )));
    }
    let side = (2 * bound + 1) as usize;
    let total = side.pow(4);
    let at = |k: usize, p: u32| (k / side.pow(p)) % side;
    let mut found: Vec<IntMatrix2> = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let e = [
                [at(idx, 3) as i64 - bound, at(idx, 2) as i64 - bound],
                [at(idx, 1) as i64 - bound, at(idx, 0) as i64 - bound],
            ];
            let m = IntMatrix2::new(e).ok()?;
            (m.is_hyperbolic() && m.commutes_with(a)).then_some(m)
        })
        .collect();
    if found.is_empty() {
        return Err(Error::NotFound { bound });
    }
    // minimal spectral radius; among equals prefer positive trace, then
    // lexicographically largest entries
    found.sort_by(|x, y| {
        x.spectral_radius()
            .total_cmp(&y.spectral_radius())
            .then((y.trace() > 0).cmp(&(x.trace() > 0)))
            .then(y.entries().cmp(&x.entries()))
    });
    let rho_a = a.spectral_radius();
    for m in &found {
        let k = (rho_a.ln() / m.spectral_radius().ln()).round();
        if k < 1.0 {
            continue;
        }
        let k = k as u32;
        let p = m.pow(k as i64)?;
        for s in [1i8, -1] {
            if signed(&p, s) == *a {
                return Ok(CentralizerData { m: *m, k, sign: s });
            }
        }
    }
    Err(Error::NotFound { bound })
}

/// Affine tag T(v)∘L_B of a linear-model element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AffineElement {
    pub b: IntMatrix2OrdKey,
    pub v: RationalPoint,
}

/// IntMatrix2 with a total order, for use as a map key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntMatrix2OrdKey(pub [[i64; 2]; 2]);

impl AffineElement {
    pub fn new(b: &IntMatrix2, v: RationalPoint) -> Self {
        AffineElement {
            b: IntMatrix2OrdKey(b.entries()),
            v: normalize_point(v),
        }
    }

    pub fn identity() -> Self {
        Self::new(&IntMatrix2::IDENTITY, [Ratio::from_integer(0); 2])
    }

    pub fn matrix(&self) -> IntMatrix2 {
        IntMatrix2::new(self.b.0).expect("stored matrices are unimodular")
    }

    /// (B, v)·(B′, v′) = (BB′, Bv′ + v).
    pub fn mul(&self, o: &AffineElement) -> Result<AffineElement> {
        let b = self.matrix();
        let bv = apply_rational(&b, &o.v);
        Ok(AffineElement::new(
            &b.mul(&o.matrix())?,
            [bv[0] + self.v[0], bv[1] + self.v[1]],
        ))
    }

    pub fn inverse(&self) -> AffineElement {
        let bi = self.matrix().inverse();
        let w = apply_rational(&bi, &self.v);
        AffineElement::new(&bi, [-w[0], -w[1]])
    }

    /// Image of a torus point under T(v)∘L_B.
    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        let x = self.matrix().to_real().apply(p.coords());
        let v = to_f64(&self.v);
        TorusPoint::new(x[0] + v[0], x[1] + v[1])
    }
}

/// A constructible group element: a power aᵐ, optionally with the affine
/// tag of its linear model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupElementSymbol {
    pub power: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineElement>,
}

impl GroupElementSymbol {
    pub fn power(m: i64) -> Self {
        GroupElementSymbol {
            power: m,
            affine: None,
        }
    }

    pub fn compose(&self, o: &GroupElementSymbol) -> Result<GroupElementSymbol> {
        let affine = match (&self.affine, &o.affine) {
            (Some(x), Some(y)) => Some(x.mul(y)?),
            (None, None) => None,
            _ => {
                return Err(Error::InvalidInput(
                    "cannot compose a tagged and an untagged symbol".into(),
                ))
            }
        };
        Ok(GroupElementSymbol {
            power: self.power + o.power,
            affine,
        })
    }
}

/// χ̄(aᵐ) = m·λ^u.
pub fn chi_bar(report: &ExponentReport, symbol: &GroupElementSymbol) -> f64 {
    symbol.power as f64 * report.lambda_u
}

/// h_μ(aᵐ) = |χ̄(aᵐ)|·δ^u.
pub fn entropy_of_element(report: &ExponentReport, symbol: &GroupElementSymbol) -> f64 {
    chi_bar(report, symbol).abs() * report.delta_u
}

/// Signed additivity: h(g∘g′) from h(g), h(g′) and the signs of χ̄.
pub fn signed_sum(h1: f64, chi1: f64, h2: f64, chi2: f64) -> f64 {
    if chi1 * chi2 >= 0.0 {
        h1 + h2
    } else {
        (h1 - h2).abs()
    }
}

/// Log of |eigenvalue| of B along the unstable eigenline of A (χ̄ of the
/// linear element T(v)∘L_B for Haar measure).
pub fn chi_bar_linear(b: &IntMatrix2, a: &IntMatrix2) -> Result<f64> {
    Ok(eigenvalue_on(b, a, true)?.abs().ln())
}

fn eigenvalue_on(b: &IntMatrix2, a: &IntMatrix2, unstable: bool) -> Result<f64> {
    if !b.commutes_with(a) {
        return Err(Error::NonCommuting);
    }
    let f = a.eigen_frame()?;
    let e = if unstable { f.e_u } else { f.e_s };
    Ok(dot(b.to_real().apply(e), e) / dot(e, e))
}

/// Eigenvalue of B on the stable eigenline of A: the factor by which B acts
/// on the quotient by the unstable foliation.
pub fn quotient_contraction(b: &IntMatrix2, a: &IntMatrix2) -> Result<f64> {
    eigenvalue_on(b, a, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySpectrum {
    pub base_entropy: f64,
    pub entries: Vec<(i64, f64)>,
    pub gap: f64,
}

/// h(aᵐ) for m in `range` (inclusive); the gap is the smallest positive value.
pub fn entropy_spectrum(report: &ExponentReport, range: (i64, i64)) -> Result<EntropySpectrum> {
    if range.0 > range.1 {
        return Err(Error::InvalidInput("empty power range".into()));
    }
    let base = entropy_of_element(report, &GroupElementSymbol::power(1));
    let entries: Vec<(i64, f64)> = (range.0..=range.1)
        .map(|m| (m, entropy_of_element(report, &GroupElementSymbol::power(m))))
        .collect();
    let gap = entries
        .iter()
        .map(|e| e.1)
        .filter(|&h| h > 0.0)
        .fold(f64::INFINITY, f64::min);
    Ok(EntropySpectrum {
        base_entropy: base,
        entries,
        gap: if gap.is_finite() { gap } else { 0.0 },
    })
}

/// Weighted Fourier coefficients of h_*μ for 0 < |k|∞ ≤ modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficients {
    pub modes: i64,
    /// (k, Re ĉ, Im ĉ)
    pub coefficients: Vec<([i64; 2], f64, f64)>,
}

/// ĉ(k) = Σ w_p e^{−2πi k·h(p)} / Σ w_p; `conj = None` uses the identity.
pub fn fourier_coefficients(
    e: &OrbitEnsemble,
    conj: Option<&Conjugacy>,
    modes: i64,
) -> FourierCoefficients {
    let pts: Vec<Vec2> = e
        .points
        .par_iter()
        .map(|p| conj.map_or(*p, |c| c.apply_h(p)).coords())
        .collect();
    let total = compensated_sum(&e.weights);
    let ks: Vec<[i64; 2]> = (-modes..=modes)
        .flat_map(|i| (-modes..=modes).map(move |j| [i, j]))
        .filter(|k| *k != [0, 0])
        .collect();
    let coefficients = ks
        .par_iter()
        .map(|k| {
            let (re, im): (Vec<f64>, Vec<f64>) = pts
                .iter()
                .zip(&e.weights)
                .map(|(p, w)| {
                    let arg = TAU * (k[0] as f64 * p[0] + k[1] as f64 * p[1]);
                    (w * arg.cos(), -w * arg.sin())
                })
                .unzip();
            (
                *k,
                compensated_sum(&re) / total,
                compensated_sum(&im) / total,
            )
        })
        .collect();
    FourierCoefficients {
        modes,
        coefficients,
    }
}

impl FourierCoefficients {
    /// max_k |ĉ(k)|·|1 − e^{−2πi k·v}|.
    pub fn statistic(&self, v: &RationalPoint) -> f64 {
        let vf = to_f64(v);
        self.coefficients
            .iter()
            .map(|(k, re, im)| {
                // the phase is exactly zero when k·v is an integer
                let kv = v[0] * k[0] + v[1] * k[1];
                if kv.is_integer() {
                    return 0.0;
                }
                let arg = TAU * (k[0] as f64 * vf[0] + k[1] as f64 * vf[1]);
                let factor = (2.0 - 2.0 * arg.cos()).max(0.0).sqrt();
                re.hypot(*im) * factor
            })
            .fold(0.0, f64::max)
    }

    /// 2·max_k |ĉ(k) − ĉ′(k)|: the largest statistic change attributable to
    /// replacing one ensemble by the other.
    pub fn refinement_floor(&self, coarse: &FourierCoefficients) -> f64 {
        self.coefficients
            .iter()
            .zip(&coarse.coefficients)
            .map(|(a, b)| 2.0 * (a.1 - b.1).hypot(a.2 - b.2))
            .fold(0.0, f64::max)
    }
}

/// Discrepancy of T(v)-invariance of h_*μ over modes |k|∞ ≤ n_modes.
pub fn translation_invariance_statistic(
    e: &OrbitEnsemble,
    conj: Option<&Conjugacy>,
    v: &RationalPoint,
    n_modes: i64,
) -> f64 {
    fourier_coefficients(e, conj, n_modes).statistic(v)
}

/// Rational points with denominators ≤ `max_den`, in [0, 1)², sorted.
pub fn rational_grid(max_den: i64) -> Vec<RationalPoint> {
    let mut set = BTreeSet::new();
    for q in 1..=max_den {
        for p in 0..q {
            set.insert(Ratio::new(p, q));
        }
    }
    let coords: Vec<Rational> = set.into_iter().collect();
    coords
        .iter()
        .flat_map(|x| coords.iter().map(move |y| [*x, *y]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HEstimate {
    pub members: Vec<RationalPoint>,
    pub noise_floor: f64,
    pub threshold: f64,
    pub max_denominator: i64,
}

/// Rational translations whose statistic stays within NOISE_MULTIPLE × the
/// noise floor.
pub fn estimate_h(coeffs: &FourierCoefficients, noise_floor: f64, max_den: i64) -> HEstimate {
    let threshold = NOISE_MULTIPLE * noise_floor;
    let members = rational_grid(max_den)
        .into_par_iter()
        .filter(|v| coeffs.statistic(v) <= threshold)
        .collect();
    HEstimate {
        members,
        noise_floor,
        threshold,
        max_denominator: max_den,
    }
}

/// (I − M^k)⁻¹H: every w with (I − M^k)w ∈ H modulo Z².
pub fn translation_lift(
    cd: &CentralizerData,
    h: &[RationalPoint],
    cap: usize,
) -> Result<Vec<RationalPoint>> {
    let mk = cd.m.pow(cd.k as i64)?.entries();
    let n = [[1 - mk[0][0], -mk[0][1]], [-mk[1][0], 1 - mk[1][1]]];
    let det = n[0][0] as i128 * n[1][1] as i128 - n[0][1] as i128 * n[1][0] as i128;
    if det == 0 {
        return Err(Error::InvalidInput("I − M^k is singular".into()));
    }
    let raw = [
        [n[0][0] as i128, n[0][1] as i128],
        [n[1][0] as i128, n[1][1] as i128],
    ];
    let kernel = enumerate_inverse_lattice(&raw, cap)?;
    let den = i64::try_from(kernel.denominator)
        .map_err(|_| Error::Overflow("kernel denominator".into()))?;
    let d = det as i64;
    let mut out = BTreeSet::new();
    for v in h {
        // adj(N)·v / det
        let w0 = [
            (v[0] * n[1][1] - v[1] * n[0][1]) / d,
            (v[1] * n[0][0] - v[0] * n[1][0]) / d,
        ];
        for x in &kernel.numerators {
            let x0 = Ratio::new(x[0] as i64, den);
            let x1 = Ratio::new(x[1] as i64, den);
            out.insert(normalize_point([w0[0] + x0, w0[1] + x1]));
            if out.len() > cap {
                return Err(Error::Overflow(format!(
                    "translation set exceeds cap {cap}"
                )));
            }
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commutant {
    pub centralizer: CentralizerData,
    pub translations: Vec<RationalPoint>,
    /// Coset representatives of ⟨M^k⟩: sign, exponent l in [0, k), translation.
    pub cosets: Vec<(i8, u32, RationalPoint)>,
    pub index: usize,
    /// 2·k·|translations|.
    pub expected_index: usize,
    pub axioms_verified: bool,
}

impl Commutant {
    pub fn element(&self, rep: &(i8, u32, RationalPoint)) -> Result<AffineElement> {
        let b = signed(&self.centralizer.m.pow(rep.1 as i64)?, rep.0);
        Ok(AffineElement::new(&b, rep.2))
    }

    pub fn symbols(&self) -> Result<Vec<GroupElementSymbol>> {
        self.cosets
            .iter()
            .map(|rep| {
                let el = self.element(rep)?;
                Ok(GroupElementSymbol {
                    power: 0,
                    affine: Some(el),
                })
            })
            .collect()
    }
}

/// Enumerate G = C(A) ⋉ (I − M^k)⁻¹H modulo ⟨M^k⟩ by breadth-first closure
/// under left multiplication by (M, 0), (−I, 0) and (I, w), then verify the
/// group axioms on the representatives by direct multiplication.
pub fn commutant_candidates(
    a: &IntMatrix2,
    cd: &CentralizerData,
    h: &[RationalPoint],
    cap: usize,
) -> Result<Commutant> {
    if !cd.m.commutes_with(a) {
        return Err(Error::NonCommuting);
    }
    let mut h_all: Vec<RationalPoint> = h.iter().map(|v| normalize_point(*v)).collect();
    let zero = [Ratio::from_integer(0); 2];
    if !h_all.contains(&zero) {
        h_all.push(zero);
    }
    let translations = translation_lift(cd, &h_all, cap)?;
    let k = cd.k;
    type Rep = (i8, u32, RationalPoint);
    let gens: Vec<(i8, u32, RationalPoint)> = std::iter::once((1i8, 1u32, zero))
        .chain(std::iter::once((-1, 0, zero)))
        .chain(translations.iter().map(|w| (1, 0, *w)))
        .collect();
    let m_pows: Vec<IntMatrix2> = (0..=k).map(|l| cd.m.pow(l as i64)).collect::<Result<_>>()?;
    let act = |s: i8, l: u32, v: &RationalPoint| apply_rational(&signed(&m_pows[l as usize], s), v);
    let start: Rep = (1, 0, zero);
    let mut seen: BTreeMap<Rep, usize> = BTreeMap::new();
    let mut order = vec![start];
    seen.insert(start, 0);
    let mut queue = VecDeque::from([start]);
    while let Some((s, l, v)) = queue.pop_front() {
        for (gs, gl, gw) in &gens {
            let bw = act(*gs, *gl, &v);
            let next: Rep = (
                s * gs,
                (l + gl) % k,
                normalize_point([bw[0] + gw[0], bw[1] + gw[1]]),
            );
            if !seen.contains_key(&next) {
                if seen.len() >= cap {
                    return Err(Error::Overflow(format!(
                        "commutant closure exceeds cap {cap}"
                    )));
                }
                seen.insert(next, order.len());
                order.push(next);
                queue.push_back(next);
            }
        }
    }
    let mut c = Commutant {
        centralizer: *cd,
        translations,
        cosets: order,
        index: seen.len(),
        expected_index: 0,
        axioms_verified: false,
    };
    c.expected_index = 2 * k as usize * c.translations.len();
    c.axioms_verified = verify_axioms(&c)?;
    Ok(c)
}

/// Identity, inverses and associativity on the representatives, and
/// closure of the translation parts under products.
fn verify_axioms(c: &Commutant) -> Result<bool> {
    let els: Vec<AffineElement> = c
        .cosets
        .iter()
        .map(|r| c.element(r))
        .collect::<Result<_>>()?;
    let id = AffineElement::identity();
    let tset: BTreeSet<RationalPoint> = c.translations.iter().copied().collect();
    let sample: Vec<&AffineElement> = els.iter().take(24).collect();
    for x in &els {
        if x.mul(&id)? != *x || id.mul(x)? != *x {
            return Ok(false);
        }
        if x.mul(&x.inverse())? != id || x.inverse().mul(x)? != id {
            return Ok(false);
        }
    }
    for x in &sample {
        for y in &sample {
            let xy = x.mul(y)?;
            if !tset.contains(&xy.v) {
                return Ok(false);
            }
            for z in &sample {
                if xy.mul(z)? != x.mul(&y.mul(z)?)? {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    /// Least-squares linear part.
    pub b: [[f64; 2]; 2],
    /// Nearest integer matrix, when unimodular.
    pub b_int: Option<IntMatrix2>,
    /// Translation, in [0, 1)².
    pub v: Vec2,
    /// Max deviation of the lifted samples from the fit.
    pub residual: f64,
    pub samples: usize,
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for i in 0..3 {
            mc[i][c] = r[i];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// Fit q ≈ B p + v (mod Z²) to sampled pairs. The integer lift of each
/// image is fixed with a linear part estimated from nearest-neighbour
/// differences; the fit is then an ordinary least-squares problem.
pub fn affine_straightening_residual(samples: &[(TorusPoint, TorusPoint)]) -> Result<AffineFit> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::DegenerateSamples(format!("{n} samples")));
    }
    // linear part from nearest-neighbour difference pairs
    let pairs: Vec<(Vec2, Vec2)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (p, q) = &samples[i];
            let j = (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    p.distance(&samples[a].0)
                        .total_cmp(&p.distance(&samples[b].0))
                })
                .unwrap();
            (
                p.displacement_to(&samples[j].0),
                q.displacement_to(&samples[j].1),
            )
        })
        .collect();
    let mut dd = [[0.0; 2]; 2];
    let mut ed = [[0.0; 2]; 2];
    for (d, e) in &pairs {
        for r in 0..2 {
            for c in 0..2 {
                dd[r][c] += d[r] * d[c];
                ed[r][c] += e[r] * d[c];
            }
        }
    }
    let ddi = Mat2(dd).inverse().ok_or_else(|| {
        Error::DegenerateSamples("sample differences do not span the plane".into())
    })?;
    let b0 = Mat2(ed).mul(&ddi);
    let rounded = b0.0.map(|row| row.map(|x| x.round() as i64));
    let b_lift = Mat2(rounded.map(|row| row.map(|x| x as f64)));
    // lift: q̃ = B₀p + v₀ + wrap(q − B₀p − v₀)
    let offset = |i: usize| {
        let (p, q) = &samples[i];
        let bp = b_lift.apply(p.coords());
        [q.x1() - bp[0], q.x2() - bp[1]]
    };
    let v0 = offset(0);
    let lifted: Vec<(Vec2, Vec2)> = (0..n)
        .map(|i| {
            let p = samples[i].0.coords();
            let o = offset(i);
            let d = wrap([o[0] - v0[0], o[1] - v0[1]]);
            let bp = b_lift.apply(p);
            (p, [bp[0] + v0[0] + d[0], bp[1] + v0[1] + d[1]])
        })
        .collect();
    // normal equations for rows of [B | v]
    let mut g = [[0.0; 3]; 3];
    let mut rhs = [[0.0; 3]; 2];
    for (p, q) in &lifted {
        let x = [p[0], p[1], 1.0];
        for r in 0..3 {
            for c in 0..3 {
                g[r][c] += x[r] * x[c];
            }
            rhs[0][r] += q[0] * x[r];
            rhs[1][r] += q[1] * x[r];
        }
    }
    let row0 = solve3(g, rhs[0]).ok_or_else(|| Error::DegenerateSamples("singular fit".into()))?;
    let row1 = solve3(g, rhs[1]).ok_or_else(|| Error::DegenerateSamples("singular fit".into()))?;
    let b = [[row0[0], row0[1]], [row1[0], row1[1]]];
    let v = [row0[2], row1[2]];
    let residual = lifted
        .iter()
        .map(|(p, q)| {
            let r0 = q[0] - (b[0][0] * p[0] + b[0][1] * p[1] + v[0]);
            let r1 = q[1] - (b[1][0] * p[0] + b[1][1] * p[1] + v[1]);
            r0.hypot(r1)
        })
        .fold(0.0, f64::max);
    let near_int = b
        .iter()
        .flatten()
        .zip(rounded.iter().flatten())
        .all(|(x, r)| (x - *r as f64).abs() < 1e-6);
    let b_int = if near_int {
        IntMatrix2::new(rounded).ok()
    } else {
        None
    };
    Ok(AffineFit {
        b,
        b_int,
        v: [v[0].rem_euclid(1.0), v[1].rem_euclid(1.0)],
        residual,
        samples: n,
    })
}

/// Samples of a map on a uniform `m × m` grid.
pub fn grid_samples<F>(m: usize, f: F) -> Result<Vec<(TorusPoint, TorusPoint)>>
where
    F: Fn(&TorusPoint) -> Result<TorusPoint> + Sync,
{
    (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let p = TorusPoint::new((idx % m) as f64 / m as f64, (idx / m) as f64 / m as f64);
            Ok((p, f(&p)?))
        })
        .collect()
}
