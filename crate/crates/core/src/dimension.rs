//! Pointwise and box-counting dimension of ensemble measures.
//!
//! Ensembles are atomic, so every slope is fitted inside a scale window whose
//! lower end sits at ten nearest-neighbour spacings.

use std::f64::consts::TAU;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::OrbitEnsemble;
use crate::error::{Error, Result};
use crate::sum::compensated_sum;
use crate::torus::{IntMatrix2, TorusPoint};

pub const MIN_ATOMS: usize = 10;
pub const DEFAULT_RADII: usize = 8;
/// Upper radius bound (chart size).
pub const DEFAULT_R_MAX: f64 = 0.2;
/// r_max / r_min of the default window.
pub const WINDOW_RATIO: f64 = 5.0;
pub const DEFAULT_CENTERS: usize = 20;
/// Estimates with a larger slope standard error are flagged.
pub const UNRELIABLE_STDERR: f64 = 0.1;
const NN_SAMPLE: usize = 4096;

/// Uniform-grid bucketing of weighted atoms on the torus.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    m: usize,
    /// CSR layout: atoms of cell c are `order[start[c]..start[c + 1]]`.
    start: Vec<usize>,
    order: Vec<usize>,
    points: Vec<TorusPoint>,
    weights: Vec<f64>,
}

impl SpatialIndex {
    pub fn new(points: &[TorusPoint], weights: &[f64]) -> Self {
        let m = ((points.len() as f64 / 4.0).sqrt().floor() as usize).clamp(1, 1024);
        let cell = |p: &TorusPoint| {
            let i = ((p.x1() * m as f64) as usize).min(m - 1);
            let j = ((p.x2() * m as f64) as usize).min(m - 1);
            i * m + j
        };
        let mut counts = vec![0usize; m * m + 1];
        for p in points {
            counts[cell(p) + 1] += 1;
        }
        for c in 0..m * m {
            counts[c + 1] += counts[c];
        }
        let start = counts.clone();
        let mut fill = counts;
        let mut order = vec![0; points.len()];
        for (k, p) in points.iter().enumerate() {
            let c = cell(p);
            order[fill[c]] = k;
            fill[c] += 1;
        }
        SpatialIndex {
            m,
            start,
            order,
            points: points.to_vec(),
            weights: weights.to_vec(),
        }
    }

    pub fn from_ensemble(e: &OrbitEnsemble) -> Self {
        Self::new(&e.points, &e.weights)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(&self.weights)
    }

    /// (distance, weight) of every atom within `r` of `x`, sorted by distance
    /// (ties broken by atom index).
    pub fn neighbours(&self, x: &TorusPoint, r: f64) -> Vec<(f64, f64)> {
        let m = self.m as i64;
        let reach = ((r * self.m as f64).ceil() as i64).min(m / 2 + 1);
        let ci = ((x.x1() * self.m as f64) as i64).min(m - 1);
        let cj = ((x.x2() * self.m as f64) as i64).min(m - 1);
        let span = (2 * reach + 1).min(m);
        let mut found = Vec::new();
        for di in 0..span {
            for dj in 0..span {
                let i = (ci - reach + di).rem_euclid(m) as usize;
                let j = (cj - reach + dj).rem_euclid(m) as usize;
                let c = i * self.m + j;
                for &k in &self.order[self.start[c]..self.start[c + 1]] {
                    let d = x.distance(&self.points[k]);
                    if d <= r {
                        found.push((d, k));
                    }
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found
            .into_iter()
            .map(|(d, k)| (d, self.weights[k]))
            .collect()
    }

    /// Distance from atom `k` to its nearest other atom.
    fn nearest_other(&self, k: usize) -> f64 {
        let p = &self.points[k];
        let mut r = 1.0 / self.m as f64;
        loop {
            let hits = self.neighbours(p, r);
            if hits.len() > 1 || r >= 0.75 {
                return hits.get(1).map(|h| h.0).unwrap_or(f64::INFINITY);
            }
            r *= 2.0;
        }
    }

    /// Median nearest-neighbour distance over an evenly strided sample.
    pub fn nearest_neighbour_spacing(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let stride = n.div_ceil(NN_SAMPLE).max(1);
        let mut d: Vec<f64> = (0..n)
            .step_by(stride)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&k| self.nearest_other(k))
            .collect();
        d.sort_by(f64::total_cmp);
        d[d.len() / 2]
    }
}

/// Radius window for slope fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub r_min: f64,
    pub r_max: f64,
    pub radii: usize,
}

impl ScaleWindow {
    /// r_min = 10 × nearest-neighbour spacing and r_max = WINDOW_RATIO × r_min,
    /// both clipped to the chart size.
    pub fn for_index(index: &SpatialIndex) -> Self {
        let r_min = (10.0 * index.nearest_neighbour_spacing()).min(DEFAULT_R_MAX / 2.0);
        ScaleWindow {
            r_min,
            r_max: (WINDOW_RATIO * r_min).min(DEFAULT_R_MAX),
            radii: DEFAULT_RADII,
        }
    }

    /// Geometric radii from r_max down to r_min.
    pub fn radii(&self) -> Vec<f64> {
        let n = self.radii.max(2);
        let q = (self.r_min / self.r_max).ln() / (n - 1) as f64;
        (0..n).map(|k| self.r_max * (q * k as f64).exp()).collect()
    }

    /// Upper half of the window on a log scale.
    pub fn halved(&self) -> Self {
        ScaleWindow {
            r_min: (self.r_min * self.r_max).sqrt(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub center: TorusPoint,
    /// Strictly decreasing.
    pub radii: Vec<f64>,
    /// Ball masses (normalized by the total ensemble weight).
    pub masses: Vec<f64>,
    pub atoms: Vec<usize>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub unreliable: bool,
    pub window: ScaleWindow,
}

/// Least-squares slope of y on x with its standard error.
pub fn fit_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = compensated_sum(x) / n;
    let my = compensated_sum(y) / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, 0.0);
    }
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    (slope, (ssr / (n - 2.0) / sxx).sqrt())
}

/// Ball-counting estimate at `x`. Shrinks the window from below (doubling
/// r_min, at most three times) if the smallest ball holds fewer than
/// `MIN_ATOMS` atoms.
pub fn pointwise_dimension_indexed(
    index: &SpatialIndex,
    x: &TorusPoint,
    window: &ScaleWindow,
) -> Result<DimensionEstimate> {
    let total = index.total_weight();
    let mut w = *window;
    for _ in 0..4 {
        let radii = w.radii();
        let hits = index.neighbours(x, radii[0]);
        let mut masses = Vec::with_capacity(radii.len());
        let mut atoms = Vec::with_capacity(radii.len());
        for &r in &radii {
            let inside = hits.partition_point(|h| h.0 <= r);
            let ws: Vec<f64> = hits[..inside].iter().map(|h| h.1).collect();
            masses.push(compensated_sum(&ws) / total);
            atoms.push(inside);
        }
        if *atoms.last().unwrap() >= MIN_ATOMS {
            let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
            let ly: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
            let (slope, stderr) = fit_slope(&lx, &ly);
            return Ok(DimensionEstimate {
                center: *x,
                radii,
                masses,
                atoms,
                slope,
                slope_stderr: stderr,
                unreliable: stderr > UNRELIABLE_STDERR || !slope.is_finite(),
                window: w,
            });
        }
        w.r_min = (2.0 * w.r_min).min(w.r_max / 2.0);
    }
    Err(Error::EmptyBall {
        center: x.coords(),
        min_atoms: MIN_ATOMS,
    })
}

pub fn pointwise_dimension(
    e: &OrbitEnsemble,
    x: &TorusPoint,
    window: Option<ScaleWindow>,
) -> Result<DimensionEstimate> {
    let index = SpatialIndex::from_ensemble(e);
    let w = window.unwrap_or_else(|| ScaleWindow::for_index(&index));
    pointwise_dimension_indexed(&index, x, &w)
}

/// `count` ensemble atoms drawn by weight with a seeded generator.
pub fn sample_centers(e: &OrbitEnsemble, count: usize, seed: u64) -> Result<Vec<TorusPoint>> {
    let dist = WeightedIndex::new(&e.weights)
        .map_err(|err| Error::DegenerateSamples(format!("ensemble weights: {err}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| e.points[dist.sample(&mut rng)])
        .collect())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSurvey {
    pub estimates: Vec<DimensionEstimate>,
    pub median_slope: f64,
    pub min_slope: f64,
    pub max_slope: f64,
    pub window: ScaleWindow,
    pub seed: u64,
}

/// Pointwise estimates at `centers` weighted samples; the median slope is the
/// headline number.
pub fn dimension_survey(e: &OrbitEnsemble, centers: usize, seed: u64) -> Result<DimensionSurvey> {
    let index = SpatialIndex::from_ensemble(e);
    let window = ScaleWindow::for_index(&index);
    let xs = sample_centers(e, centers, seed)?;
    let estimates: Vec<DimensionEstimate> = xs
        .par_iter()
        .map(|x| pointwise_dimension_indexed(&index, x, &window))
        .collect::<Result<_>>()?;
    let slopes: Vec<f64> = estimates.iter().map(|d| d.slope).collect();
    Ok(DimensionSurvey {
        median_slope: median(&slopes),
        min_slope: slopes.iter().cloned().fold(f64::INFINITY, f64::min),
        max_slope: slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        estimates,
        window,
        seed,
    })
}

/// Closed-form bi-Lipschitz homeomorphisms of the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestMap {
    Identity,
    /// Linear automorphism L_M.
    Automorphism {
        matrix: [[i64; 2]; 2],
    },
    /// (x₁, x₂) ↦ (x₁ + a sin 2πx₂, x₂ + b sin 2πx₁′) with x₁′ the new first
    /// coordinate; a homeomorphism for any a, b.
    Shear {
        a: f64,
        b: f64,
    },
}

impl TestMap {
    pub fn validate(&self) -> Result<()> {
        if let TestMap::Automorphism { matrix } = self {
            IntMatrix2::new(*matrix)?;
        }
        Ok(())
    }

    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        match self {
            TestMap::Identity => *p,
            TestMap::Automorphism { matrix: m } => {
                let x = p.coords();
                TorusPoint::new(
                    m[0][0] as f64 * x[0] + m[0][1] as f64 * x[1],
                    m[1][0] as f64 * x[0] + m[1][1] as f64 * x[1],
                )
            }
            TestMap::Shear { a, b } => {
                let y1 = p.x1() + a * (TAU * p.x2()).sin();
                let y2 = p.x2() + b * (TAU * y1).sin();
                TorusPoint::new(y1, y2)
            }
        }
    }

    /// The standard battery: identity, one automorphism and two shears.
    pub fn battery() -> Vec<TestMap> {
        vec![
            TestMap::Identity,
            TestMap::Automorphism {
                matrix: [[1, 1], [0, 1]],
            },
            TestMap::Shear { a: 0.1, b: 0.0 },
            TestMap::Shear { a: 0.1, b: 0.1 },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilipschitzReport {
    pub map: TestMap,
    pub before: Vec<DimensionEstimate>,
    pub after: Vec<DimensionEstimate>,
    /// |median over centers of (after − before)|.
    pub median_difference: f64,
}

/// Compare estimates for μ at each center with those for g_*μ at g(center).
/// Both measures share the window of μ.
pub fn bilipschitz_invariance(
    e: &OrbitEnsemble,
    g: &TestMap,
    centers: &[TorusPoint],
) -> Result<BilipschitzReport> {
    g.validate()?;
    let index = SpatialIndex::from_ensemble(e);
    let window = ScaleWindow::for_index(&index);
    let before: Vec<DimensionEstimate> = centers
        .par_iter()
        .map(|x| pointwise_dimension_indexed(&index, x, &window))
        .collect::<Result<_>>()?;
    let after = if *g == TestMap::Identity {
        before.clone()
    } else {
        let pushed: Vec<TorusPoint> = e.points.par_iter().map(|p| g.apply(p)).collect();
        let gi = SpatialIndex::new(&pushed, &e.weights);
        centers
            .par_iter()
            .map(|x| pointwise_dimension_indexed(&gi, &g.apply(x), &window))
            .collect::<Result<_>>()?
    };
    let diffs: Vec<f64> = before
        .iter()
        .zip(&after)
        .map(|(b, a)| a.slope - b.slope)
        .collect();
    Ok(BilipschitzReport {
        map: g.clone(),
        before,
        after,
        median_difference: median(&diffs).abs(),
    })
}

/// Square region of the torus, in flat coordinates around a center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: TorusPoint,
    pub half_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    pub sizes: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub slope_stderr: f64,
}

/// Fraction of the region's mass the box skeleton must cover.
pub const SKELETON_MASS: f64 = 0.99;
const MIN_BOX_LEVELS: usize = 3;

/// Box-counting slope of the high-mass skeleton inside `region`: at each
/// dyadic level, the fewest boxes covering `SKELETON_MASS` of the mass.
pub fn hausdorff_consistency(e: &OrbitEnsemble, region: &Region) -> Result<BoxDimension> {
    if !(region.half_size > 0.0 && region.half_size <= 0.5) {
        return Err(Error::InvalidInput(
            "region half-size must lie in (0, 0.5]".into(),
        ));
    }
    let index = SpatialIndex::from_ensemble(e);
    let side = 2.0 * region.half_size;
    let r_min = 10.0 * index.nearest_neighbour_spacing();
    let levels = ((side / r_min).log2().floor() as usize).max(MIN_BOX_LEVELS);
    let inside: Vec<([f64; 2], f64)> = e
        .points
        .iter()
        .zip(&e.weights)
        .filter_map(|(p, &w)| {
            let d = region.center.displacement_to(p);
            let u = (d[0] + region.half_size) / side;
            let v = (d[1] + region.half_size) / side;
            ((0.0..1.0).contains(&u) && (0.0..1.0).contains(&v)).then_some(([u, v], w))
        })
        .collect();
    if inside.is_empty() {
        return Err(Error::DegenerateSamples(
            "no atoms in the box-counting region".into(),
        ));
    }
    let region_mass = compensated_sum(&inside.iter().map(|a| a.1).collect::<Vec<_>>());
    let mut sizes = Vec::new();
    let mut counts = Vec::new();
    for level in 1..=levels {
        let k = 1usize << level;
        let mut boxes = std::collections::BTreeMap::<usize, f64>::new();
        for (uv, w) in &inside {
            let i = ((uv[0] * k as f64) as usize).min(k - 1);
            let j = ((uv[1] * k as f64) as usize).min(k - 1);
            *boxes.entry(i * k + j).or_insert(0.0) += w;
        }
        let mut masses: Vec<f64> = boxes.into_values().collect();
        masses.sort_by(|a, b| b.total_cmp(a));
        let mut covered = 0.0;
        let mut n = 0;
        for m in masses {
            if covered >= SKELETON_MASS * region_mass {
                break;
            }
            covered += m;
            n += 1;
        }
        sizes.push(side / k as f64);
        counts.push(n);
    }
    let lx: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, stderr) = fit_slope(&lx, &ly);
    Ok(BoxDimension {
        sizes,
        counts,
        slope: -slope,
        slope_stderr: stderr,
    })
}
